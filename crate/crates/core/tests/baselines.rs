use jointscl::eval::synthetic::{generate, SyntheticSpec};
use jointscl::eval::{prepare_pair, BenchmarkConfig};
use jointscl::featurize::SparseVector;
use jointscl::models::{train_aescl, train_classic_scl, AeSclConfig, ClassicSclConfig, LogRegConfig};
use jointscl::pivot::PivotStrategy;

fn small_pair() -> (jointscl::eval::PairData, BenchmarkConfig) {
    let spec = SyntheticSpec {
        labeled_per_domain: 300,
        unlabeled_per_domain: 300,
        ..SyntheticSpec::default()
    };
    let (a, b) = generate(&spec, ("alpha", "beta"), 7);
    let mut cfg = BenchmarkConfig {
        train_size: 200,
        validation_size: 60,
        ..BenchmarkConfig::default()
    };
    cfg.joint.pivots = 20;
    (prepare_pair(&a, &b, &cfg, 7).unwrap(), cfg)
}

#[test]
fn aescl_hides_pivots_and_widens_the_classifier() {
    let (data, cfg) = small_pair();
    let pivots = data.pivots(PivotStrategy::MiSource, &cfg, 7).unwrap();
    let acfg = AeSclConfig { hidden: 12, epochs: 3, ..AeSclConfig::default() };
    let m = train_aescl(&data.train, &data.validation, &data.unlabeled, &pivots, &acfg, 7).unwrap();
    let n = data.vocab.len();
    assert_eq!(m.classifier.dim(), n + 12);
    for x in data.unlabeled.rows.iter().take(50) {
        let kept: Vec<usize> = x.indices.iter().copied().filter(|i| !pivots.indices.contains(i)).collect();
        let stripped = SparseVector::from_indices(kept, n);
        let (hx, hs) = (m.features(x), m.features(&stripped));
        assert_eq!(hx.values[hx.values.len() - 12..], hs.values[hs.values.len() - 12..]);
    }
}

#[test]
fn classic_scl_projects_to_k_dimensions() {
    let (data, cfg) = small_pair();
    let pivots = data.pivots(PivotStrategy::MiSource, &cfg, 7).unwrap();
    let ccfg = ClassicSclConfig {
        k: 8,
        predictor: LogRegConfig { epochs: 2, ..LogRegConfig::default() },
        classifier: LogRegConfig { epochs: 5, ..LogRegConfig::default() },
    };
    let m = train_classic_scl(&data.train, &data.validation, &data.unlabeled, &pivots, &ccfg, 7).unwrap();
    let n = data.vocab.len();
    assert_eq!(m.classifier.dim(), n + 8);
    assert_eq!(m.theta.cols, 8);
    assert_eq!(m.nonpivot.len() + pivots.len(), n);
    assert!(m.nonpivot.iter().all(|i| !pivots.indices.contains(i)));
}
