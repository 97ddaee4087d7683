//! Banded solves for the semi-implicit flow step.

use crate::vec2::Sample;

/// LU factors of a tridiagonal matrix with sub-diagonal `lower`, diagonal
/// `diag` and super-diagonal `upper` (`lower[0]` and `upper[n-1]` unused).
/// No pivoting: intended for diagonally dominant systems.
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    upper_mod: Vec<f64>,
    denom: Vec<f64>,
}

impl Tridiagonal {
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        let mut upper_mod = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = diag[0];
        if n > 1 {
            upper_mod[0] = upper[0] / denom[0];
        }
        for k in 1..n {
            denom[k] = diag[k] - lower[k] * upper_mod[k - 1];
            if k + 1 < n {
                upper_mod[k] = upper[k] / denom[k];
            }
        }
        Self {
            lower: lower.to_vec(),
            upper_mod,
            denom,
        }
    }

    pub fn solve<T: Sample>(&self, rhs: &[T]) -> Vec<T> {
        let n = self.denom.len();
        let mut y = vec![T::default(); n];
        y[0] = rhs[0] * (1.0 / self.denom[0]);
        for k in 1..n {
            y[k] = (rhs[k] - y[k - 1] * self.lower[k]) * (1.0 / self.denom[k]);
        }
        for k in (0..n - 1).rev() {
            y[k] = y[k] - y[k + 1] * self.upper_mod[k];
        }
        y
    }
}

/// Solves the periodic tridiagonal system
/// `lower[k]·u[k−1] + diag[k]·u[k] + upper[k]·u[k+1] = rhs[k]` (indices mod n)
/// by Sherman–Morrison on top of [`Tridiagonal`]. Requires `n ≥ 3`.
pub fn solve_cyclic<T: Sample>(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    assert!(n >= 3, "cyclic system needs at least three unknowns");
    let corner_top = lower[0];
    let corner_bottom = upper[n - 1];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= corner_bottom * corner_top / gamma;
    let fac = Tridiagonal::factor(lower, &d, upper);
    let x = fac.solve(rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = corner_bottom;
    let z = fac.solve(&u);
    let v_last = corner_top / gamma;
    let num = x[0] + x[n - 1] * v_last;
    let den = 1.0 + z[0] + z[n - 1] * v_last;
    x.iter()
        .zip(&z)
        .map(|(&xi, &zi)| xi - num * (zi / den))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64], cyclic: bool) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|k| {
                let mut s = diag[k] * x[k];
                if k > 0 {
                    s += lower[k] * x[k - 1];
                } else if cyclic {
                    s += lower[0] * x[n - 1];
                }
                if k + 1 < n {
                    s += upper[k] * x[k + 1];
                } else if cyclic {
                    s += upper[n - 1] * x[0];
                }
                s
            })
            .collect()
    }

    #[test]
    fn tridiagonal_solve_matches_product() {
        let n = 9;
        let lower: Vec<f64> = (0..n).map(|k| -0.3 - 0.01 * k as f64).collect();
        let upper: Vec<f64> = (0..n).map(|k| -0.2 + 0.02 * k as f64).collect();
        let diag: Vec<f64> = (0..n).map(|k| 2.0 + 0.1 * k as f64).collect();
        let x: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
        let b = dense_apply(&lower, &diag, &upper, &x, false);
        let sol = Tridiagonal::factor(&lower, &diag, &upper).solve(&b);
        for (a, e) in sol.iter().zip(&x) {
            assert!((a - e).abs() < 1e-13);
        }
    }

    #[test]
    fn cyclic_solve_matches_product() {
        let n = 12;
        let lower: Vec<f64> = (0..n).map(|k| -1.0 - 0.05 * k as f64).collect();
        let upper: Vec<f64> = (0..n).map(|k| -1.0 + 0.03 * k as f64).collect();
        let diag: Vec<f64> = (0..n).map(|k| 3.0 + 0.1 * (k as f64).cos()).collect();
        let x: Vec<f64> = (0..n).map(|k| (0.7 * k as f64).cos()).collect();
        let b = dense_apply(&lower, &diag, &upper, &x, true);
        let sol = solve_cyclic(&lower, &diag, &upper, &b);
        for (a, e) in sol.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12);
        }
    }
}
