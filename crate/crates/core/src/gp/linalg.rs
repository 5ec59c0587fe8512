//! Sequential dense Cholesky helpers. Everything runs with `Par::Seq` so the
//! results are bit-for-bit reproducible.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt;
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::{Mat, MatMut, Par};

use crate::error::{Error, Result};

pub const BASE_JITTER: f64 = 1e-6;
pub const MAX_JITTER: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Mat<f64>,
}

impl Cholesky {
    /// Lower factor of `a`, or `None` if `a` is not numerically positive definite.
    pub fn factor(a: &Mat<f64>) -> Option<Self> {
        let n = a.nrows();
        let mut l = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                l[(i, j)] = a[(i, j)];
            }
        }
        let mut mem = MemBuffer::new(llt::factor::cholesky_in_place_scratch::<f64>(
            n,
            Par::Seq,
            Default::default(),
        ));
        let stack = MemStack::new(&mut mem);
        llt::factor::cholesky_in_place(
            l.as_mut(),
            Default::default(),
            Par::Seq,
            stack,
            Default::default(),
        )
        .ok()?;
        for j in 0..n {
            if !(l[(j, j)] > 0.0) || !l[(j, j)].is_finite() {
                return None;
            }
            for i in 0..j {
                l[(i, j)] = 0.0;
            }
        }
        Some(Cholesky { l })
    }

    /// Factors `k + jitter * I` (only the lower triangle of `k` is read), multiplying the jitter by 10 after each
    /// failure until it exceeds [`MAX_JITTER`]. Returns the jitter that worked.
    pub fn factor_with_jitter(k: &Mat<f64>, start: f64) -> Result<(Self, f64)> {
        let mut jitter = start;
        let mut a = k.clone();
        let mut applied = 0.0;
        loop {
            for i in 0..a.nrows() {
                a[(i, i)] += jitter - applied;
            }
            applied = jitter;
            if let Some(c) = Cholesky::factor(&a) {
                return Ok((c, jitter));
            }
            if jitter * 10.0 > MAX_JITTER * (1.0 + 1e-12) {
                return Err(Error::Factorization { jitter });
            }
            jitter *= 10.0;
        }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &Mat<f64> {
        &self.l
    }

    /// `log |A|` of the factored matrix.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Solves `L X = B` in place.
    pub fn solve_lower_in_place(&self, b: MatMut<'_, f64>) {
        solve_lower_triangular_in_place(self.l.as_ref(), b, Par::Seq);
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        solve_lower_triangular_in_place(self.l.as_ref(), x.as_mut(), Par::Seq);
        solve_upper_triangular_in_place(self.l.transpose(), x.as_mut(), Par::Seq);
        x.col_as_slice(0).to_vec()
    }

    /// Inverse of the factored matrix with only the lower triangle filled in.
    pub fn inverse_lower(&self) -> Mat<f64> {
        let n = self.dim();
        let mut out = Mat::<f64>::zeros(n, n);
        let mut mem = MemBuffer::new(llt::inverse::inverse_scratch::<f64>(n, Par::Seq));
        let stack = MemStack::new(&mut mem);
        llt::inverse::inverse(out.as_mut(), self.l.as_ref(), Par::Seq, stack);
        for j in 0..n {
            for i in 0..j {
                out[(i, j)] = 0.0;
            }
        }
        out
    }

    pub fn inverse(&self) -> Mat<f64> {
        let n = self.dim();
        let mut out = self.inverse_lower();
        for j in 0..n {
            for i in 0..j {
                out[(i, j)] = out[(j, i)];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd() -> Mat<f64> {
        Mat::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => 4.0,
            (1, 1) => 3.0,
            (2, 2) => 2.0,
            (0, 1) | (1, 0) => 1.0,
            (1, 2) | (2, 1) => 0.5,
            _ => 0.0,
        })
    }

    #[test]
    fn factor_reproduces_matrix() {
        let a = spd();
        let c = Cholesky::factor(&a).unwrap();
        let l = c.lower();
        let r = l * l.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[(i, j)] - a[(i, j)]).abs() < 1e-14);
            }
        }
        let inv = c.inverse();
        let id = &a * &inv;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - want).abs() < 1e-14);
            }
        }
        let x = c.solve(&[1.0, 2.0, 3.0]);
        let back = [
            4.0 * x[0] + x[1],
            x[0] + 3.0 * x[1] + 0.5 * x[2],
            0.5 * x[1] + 2.0 * x[2],
        ];
        for (b, want) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - want).abs() < 1e-14);
        }
        let det: f64 = 4.0 * (3.0 * 2.0 - 0.25) - 1.0 * (2.0);
        assert!((c.log_det() - det.ln()).abs() < 1e-13);
    }

    #[test]
    fn singular_matrix_needs_jitter() {
        let a = Mat::from_fn(2, 2, |_, _| 1.0);
        assert!(Cholesky::factor(&a).is_none());
        let (_, jitter) = Cholesky::factor_with_jitter(&a, BASE_JITTER).unwrap();
        assert!(jitter >= BASE_JITTER && jitter <= MAX_JITTER);
        let neg = Mat::from_fn(2, 2, |i, j| if i == j { -1.0 } else { 0.0 });
        assert!(matches!(
            Cholesky::factor_with_jitter(&neg, BASE_JITTER),
            Err(Error::Factorization { .. })
        ));
    }
}
