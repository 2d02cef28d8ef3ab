//! Quick property suites run by `jointscl selfcheck`.

use jointscl::eval::{student_t_cdf, welch_one_tailed};
use jointscl::featurize::SparseVector;
use jointscl::neural::{
    init_weights, joint_gradients, joint_loss, truncated_svd, DenseMatrix, Example, NetDims,
};
use jointscl::pivot::{mi_from_counts, mutual_information, PivotSet, PivotStrategy};
use jointscl::rng::rng_for;
use rand::Rng;

use crate::args::SelfcheckArgs;
use crate::CliError;

struct Outcome {
    name: &'static str,
    cases: usize,
    worst: f64,
    tolerance: f64,
}

impl Outcome {
    fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn gradient_check(trials: usize, seed: u64) -> Outcome {
    let mut rng = rng_for(seed, "selfcheck-gradient");
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < trials {
        let dims = NetDims {
            n: rng.gen_range(2..=10),
            d: rng.gen_range(1..=6),
            p: rng.gen_range(1..=3),
        };
        let p = dims.p.min(dims.n);
        let dims = NetDims { p, ..dims };
        let mut params = init_weights(dims, rng.gen(), rng.gen_bool(0.3));
        let pivots = PivotSet {
            indices: rand::seq::index::sample(&mut rng, dims.n, p).into_vec(),
            scores: None,
            strategy: PivotStrategy::Random,
            candidate_min_df: 0,
            seed: 0,
            truncated: false,
        };
        let rows: Vec<SparseVector> = (0..rng.gen_range(1..=4))
            .map(|_| {
                let idx = (0..dims.n).filter(|_| rng.gen_bool(0.5)).collect();
                SparseVector::from_indices(idx, dims.n)
            })
            .collect();
        let batch: Vec<Example> = rows
            .iter()
            .map(|x| Example {
                x,
                label: rng.gen_bool(0.6).then(|| u8::from(rng.gen_bool(0.5))),
            })
            .collect();
        let lambda = [0.0, 1.0, 100.0][rng.gen_range(0..3)];
        let rho = [0.0, 0.1][rng.gen_range(0..2)];
        // keep pre-activations away from the ReLU kink
        let near_kink = rows.iter().any(|x| {
            jointscl::neural::forward(&params, x)
                .map(|f| f.z.iter().any(|z| z.abs() < 1e-3))
                .unwrap_or(true)
        });
        if near_kink {
            continue;
        }
        let analytic = joint_gradients(&params, &batch, &pivots, lambda, rho)
            .expect("valid instance")
            .to_dense(&params)
            .to_flat();
        let theta = params.to_flat();
        let h = 1e-6;
        for (i, g) in analytic.iter().enumerate() {
            let mut at = |delta: f64| {
                let mut t = theta.clone();
                t[i] += delta;
                params.set_flat(&t).unwrap();
                joint_loss(&params, &batch, &pivots, lambda, rho).unwrap()
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            let err = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(err);
        }
        params.set_flat(&theta).unwrap();
        done += 1;
    }
    Outcome { name: "gradient", cases: trials, worst, tolerance: 1e-4 }
}

fn mi_check() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n00 in 0..=6u64 {
        for n01 in 0..=6u64 {
            for n10 in 0..=6u64 {
                for n11 in 0..=6u64 {
                    let total = n00 + n01 + n10 + n11;
                    if total == 0 {
                        continue;
                    }
                    let mut f = Vec::new();
                    let mut y = Vec::new();
                    for (fv, yv, c) in [(0, 0, n00), (0, 1, n01), (1, 0, n10), (1, 1, n11)] {
                        for _ in 0..c {
                            f.push(fv);
                            y.push(yv);
                        }
                    }
                    let got = mutual_information(&f, &y).unwrap();
                    let swapped = mutual_information(&y, &f).unwrap();
                    let direct = direct_mi([[n00, n01], [n10, n11]]);
                    let from_counts = mi_from_counts(n00, n01, n10, n11);
                    let err = (got - direct)
                        .abs()
                        .max((got - swapped).abs())
                        .max((got - from_counts).abs())
                        .max(if got < 0.0 { f64::INFINITY } else { 0.0 });
                    worst = worst.max(err);
                    cases += 1;
                }
            }
        }
    }
    Outcome { name: "mutual_information", cases, worst, tolerance: 1e-12 }
}

fn direct_mi(t: [[u64; 2]; 2]) -> f64 {
    let n: u64 = t.iter().flatten().sum();
    let n = n as f64;
    let mut mi = 0.0;
    for f in 0..2 {
        for y in 0..2 {
            let c = t[f][y] as f64;
            if c == 0.0 {
                continue;
            }
            let pf = (t[f][0] + t[f][1]) as f64 / n;
            let py = (t[0][y] + t[1][y]) as f64 / n;
            mi += c / n * (c / n / (pf * py)).ln();
        }
    }
    mi
}

fn svd_check(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, "selfcheck-svd");
    let mut worst = 0.0f64;
    let cases = 20;
    for _ in 0..cases {
        let n = rng.gen_range(2..=60);
        let p = rng.gen_range(1..=20);
        let w = DenseMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
        let k = rng.gen_range(1..=n.min(p).min(8));
        let svd = truncated_svd(&w, k).unwrap();
        let theta = &svd.theta;
        let gram = theta.transpose().matmul(theta).unwrap();
        let ident = DenseMatrix::identity(theta.cols);
        worst = worst.max(gram.max_abs_diff(&ident));
        // W Wᵀ θ = θ Σ²
        let lhs = w.matmul(&w.transpose().matmul(theta).unwrap()).unwrap();
        let rhs = DenseMatrix::from_fn(n, theta.cols, |r, c| theta.get(r, c) * svd.singular_values[c].powi(2));
        let scale = svd.singular_values[0].powi(2).max(1.0);
        worst = worst.max(lhs.max_abs_diff(&rhs) / scale);
    }
    Outcome { name: "truncated_svd", cases, worst, tolerance: 1e-8 }
}

fn welch_check(seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for i in -40..=40 {
        let t = f64::from(i) * 0.25;
        let cauchy = 0.5 + t.atan() / std::f64::consts::PI;
        let two = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
        worst = worst
            .max((student_t_cdf(t, 1.0) - cauchy).abs())
            .max((student_t_cdf(t, 2.0) - two).abs());
        cases += 2;
    }
    let mut rng = rng_for(seed, "selfcheck-welch");
    for _ in 0..50 {
        let (na, nb) = (rng.gen_range(2..=10), rng.gen_range(2..=10));
        let a: Vec<f64> = (0..na).map(|_| rng.gen_range(0.6..0.9)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(0.6..0.9)).collect();
        let ab = welch_one_tailed(&a, &b).unwrap();
        let ba = welch_one_tailed(&b, &a).unwrap();
        worst = worst
            .max((ab.t_statistic + ba.t_statistic).abs())
            .max((ab.p_value_one_tailed + ba.p_value_one_tailed - 1.0).abs());
        cases += 1;
    }
    let same = welch_one_tailed(&[0.7, 0.8, 0.75], &[0.7, 0.8, 0.75]).unwrap();
    worst = worst.max((same.p_value_one_tailed - 0.5).abs());
    Outcome { name: "welch", cases: cases + 1, worst, tolerance: 1e-10 }
}

pub(crate) fn run(a: &SelfcheckArgs) -> Result<(), CliError> {
    let outcomes = [gradient_check(a.trials, a.seed), mi_check(), svd_check(a.seed), welch_check(a.seed)];
    let mut failed = Vec::new();
    for o in &outcomes {
        let status = if o.passed() { "ok" } else { "FAILED" };
        println!(
            "{:<20} {:<6} cases={:<6} worst={:.3e} tolerance={:.0e}",
            o.name, status, o.cases, o.worst, o.tolerance
        );
        if !o.passed() {
            failed.push(o.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::new("selfcheck", format!("failed suites: {}", failed.join(", "))))
    }
}
