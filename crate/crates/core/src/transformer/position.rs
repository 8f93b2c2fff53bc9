use rand::Rng;

use crate::embed::haar_orthogonal;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::unit_vector;

/// Position vectors `p_i = Z^{i-1} p_1` for `n` slots.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionCodes {
    /// `n × k`, row `i` is `p_{i+1}`.
    pub p: Matrix,
    /// `k × k` orthogonal step matrix.
    pub z: Matrix,
}

impl PositionCodes {
    pub fn len(&self) -> usize {
        self.p.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.z.rows()
    }

    /// Largest `|⟨p_i, p_j⟩|` over `i ≠ j`; zero for a single code.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max(dot(self.p.row(i), self.p.row(j)).abs());
            }
        }
        worst
    }
}

/// Draws a unit `p_1` and a Haar `Z`, redrawing both until every pair of
/// distinct codes has `|⟨p_i, p_j⟩| < bound`.
pub fn build_position_codes<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    bound: f64,
    retries: usize,
    rng: &mut R,
) -> Result<PositionCodes> {
    if k < 2 || n == 0 {
        return Err(Error::InvalidInput(format!(
            "position codes need k >= 2 and n >= 1 (got k={k}, n={n})"
        )));
    }
    for _ in 0..retries.max(1) {
        let p1 = unit_vector(k, rng);
        let z = haar_orthogonal(k, rng);
        let mut p = Matrix::zeros(n, k);
        p.row_mut(0).copy_from_slice(&p1);
        for i in 1..n {
            let next = z.mul_vec(p.row(i - 1));
            p.row_mut(i).copy_from_slice(&next);
        }
        let codes = PositionCodes { p, z };
        if codes.max_off_diagonal() < bound {
            return Ok(codes);
        }
    }
    Err(Error::SeparationUnachievable {
        n,
        k,
        bound,
        retries,
    })
}
