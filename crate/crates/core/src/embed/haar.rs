use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::Matrix;

/// Samples a Haar-distributed `d × d` orthogonal matrix.
///
/// QR-factors a standard Gaussian matrix and multiplies column `j` of `Q` by
/// `sign(R[j][j])`; without that correction the distribution of `Q` depends
/// on the QR implementation's sign convention and is not Haar.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Matrix {
    assert!(d >= 1, "dimension must be positive");
    let gaussian: Vec<f64> = (0..d * d).map(|_| rng.sample(StandardNormal)).collect();
    let g = faer::Mat::<f64>::from_fn(d, d, |i, j| gaussian[i * d + j]);
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    let signs: Vec<f64> = (0..d)
        .map(|j| if r[(j, j)] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let mut out = Matrix::zeros(d, d);
    for i in 0..d {
        let row = out.row_mut(i);
        for (j, value) in row.iter_mut().enumerate() {
            *value = q[(i, j)] * signs[j];
        }
    }
    out
}
