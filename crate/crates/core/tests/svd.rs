use jointscl::neural::{truncated_svd, DenseMatrix};
use jointscl::rng::rng_for;
use nalgebra::DMatrix;
use rand::Rng;

/// Sine of the largest principal angle between the column spans of two
/// orthonormal matrices.
fn max_sin_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let residual = a - b * (b.transpose() * a);
    residual.singular_values().max()
}

#[test]
fn subspace_matches_dense_eigensolver() {
    let mut rng = rng_for(31, "svd");
    for case in 0..50 {
        let (rows, cols) = if case == 0 { (200, 100) } else { (rng.gen_range(5..=200), rng.gen_range(5..=100)) };
        let k = rng.gen_range(1..=10usize.min(cols).min(rows));
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ours = truncated_svd(&DenseMatrix::from_vec(rows, cols, data.clone()).unwrap(), k).unwrap();
        let theta = DMatrix::from_row_slice(rows, ours.theta.cols, &ours.theta.data);

        // eigenvectors of W Wᵀ for the k largest eigenvalues
        let w = DMatrix::from_row_slice(rows, cols, &data);
        let eig = (&w * w.transpose()).symmetric_eigen();
        let mut order: Vec<usize> = (0..rows).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let top = DMatrix::from_fn(rows, k, |r, c| eig.eigenvectors[(r, order[c])]);

        assert_eq!(theta.ncols(), k);
        assert!(max_sin_angle(&theta, &top).asin() < 1e-6, "case {case}");
        let gram = theta.transpose() * &theta;
        assert!((gram - DMatrix::identity(k, k)).abs().max() < 1e-8);
        for (c, s) in ours.singular_values.iter().enumerate() {
            assert!((s * s - eig.eigenvalues[order[c]]).abs() < 1e-8 * eig.eigenvalues[order[0]]);
        }
    }
}

#[test]
fn orthogonal_predictors_keep_their_span() {
    let mut rng = rng_for(32, "orth");
    let data: Vec<f64> = (0..40 * 6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let q = DMatrix::from_row_slice(40, 6, &data).qr().q();
    let w = DenseMatrix::from_fn(40, 6, |r, c| q[(r, c)] * (c + 1) as f64);
    let svd = truncated_svd(&w, 6).unwrap();
    let theta = DMatrix::from_row_slice(40, 6, &svd.theta.data);
    assert!(max_sin_angle(&theta, &q) < 1e-8);
}
