//! Constant symmetric tridiagonal systems: factor once, solve many.

/// LU factors of the tridiagonal matrix with `diag[i]` on the diagonal and
/// `off` on both off-diagonals.
#[derive(Debug, Clone)]
pub(crate) struct Tridiag {
    off: f64,
    // modified diagonal of the forward sweep
    denom: Vec<f64>,
}

impl Tridiag {
    pub fn new(diag: &[f64], off: f64) -> Option<Self> {
        let mut denom = Vec::with_capacity(diag.len());
        let mut prev = 0.0;
        for (i, d) in diag.iter().enumerate() {
            let m = if i == 0 { *d } else { d - off * off / prev };
            if m == 0.0 || !m.is_finite() {
                return None;
            }
            denom.push(m);
            prev = m;
        }
        Some(Self { off, denom })
    }

    /// Solves in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 1..n {
            b[i] -= self.off / self.denom[i - 1] * b[i - 1];
        }
        b[n - 1] /= self.denom[n - 1];
        for i in (0..n - 1).rev() {
            b[i] = (b[i] - self.off * b[i + 1]) / self.denom[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_against_dense() {
        let diag = [4.0, 5.0, 3.5, 6.0, 4.2];
        let off = -1.3;
        let t = Tridiag::new(&diag, off).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b: Vec<f64> = (0..5)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += off * x[i - 1];
                }
                if i < 4 {
                    s += off * x[i + 1];
                }
                s
            })
            .collect();
        t.solve(&mut b);
        for i in 0..5 {
            assert!((b[i] - x[i]).abs() < 1e-13);
        }
    }
}
