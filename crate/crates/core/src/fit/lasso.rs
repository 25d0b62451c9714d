//! Cyclic coordinate descent with soft-thresholding for
//! `min_b (1/2N)‖y − Zb‖² + α‖b‖₁`, no intercept.

#[derive(Debug, Clone, Copy)]
pub struct LassoOptions {
    /// Stop when the largest scaled coefficient change in a sweep falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_sweeps: 100_000,
        }
    }
}

#[inline]
pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

/// Design matrix stored by column.
#[derive(Debug, Clone)]
pub struct Design {
    columns: Vec<Vec<f64>>,
    n_rows: usize,
    /// `‖Z_j‖² / N`.
    col_scale: Vec<f64>,
}

impl Design {
    pub fn from_rows(rows: &[Vec<f64>], n_cols: usize) -> Self {
        let n_rows = rows.len();
        let columns: Vec<Vec<f64>> = (0..n_cols)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let n = n_rows.max(1) as f64;
        let col_scale = columns
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>() / n)
            .collect();
        Self {
            columns,
            n_rows,
            col_scale,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn predict(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (col, &bj) in self.columns.iter().zip(b) {
            if bj != 0.0 {
                for (o, v) in out.iter_mut().zip(col) {
                    *o += v * bj;
                }
            }
        }
        out
    }

    /// `(1/2N)‖y − Zb‖² + α‖b‖₁`
    pub fn objective(&self, y: &[f64], b: &[f64], alpha: f64) -> f64 {
        let fit = self.predict(b);
        let rss: f64 = y.iter().zip(&fit).map(|(y, f)| (y - f).powi(2)).sum();
        rss / (2.0 * self.n_rows.max(1) as f64) + alpha * b.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// The smallest `α` at which the solution is identically zero.
    pub fn alpha_max(&self, y: &[f64]) -> f64 {
        let n = self.n_rows.max(1) as f64;
        self.columns
            .iter()
            .map(|c| c.iter().zip(y).map(|(z, y)| z * y).sum::<f64>().abs() / n)
            .fold(0.0, f64::max)
    }

    /// Solves the LASSO problem from the warm start `b0`.
    pub fn lasso(&self, y: &[f64], alpha: f64, b0: &[f64], opts: LassoOptions) -> Vec<f64> {
        assert_eq!(y.len(), self.n_rows);
        assert_eq!(b0.len(), self.n_cols());
        let n = self.n_rows.max(1) as f64;
        let mut b = b0.to_vec();
        let fit = self.predict(&b);
        let mut resid: Vec<f64> = y.iter().zip(&fit).map(|(y, f)| y - f).collect();

        for _ in 0..opts.max_sweeps {
            let mut max_change = 0.0_f64;
            for (j, col) in self.columns.iter().enumerate() {
                let scale = self.col_scale[j];
                if scale == 0.0 {
                    b[j] = 0.0;
                    continue;
                }
                let rho = col.iter().zip(&resid).map(|(z, r)| z * r).sum::<f64>() / n + scale * b[j];
                let updated = soft_threshold(rho, alpha) / scale;
                let delta = updated - b[j];
                if delta != 0.0 {
                    for (r, z) in resid.iter_mut().zip(col) {
                        *r -= z * delta;
                    }
                    b[j] = updated;
                }
                max_change = max_change.max(delta.abs() * scale.sqrt());
            }
            if max_change <= opts.tol {
                break;
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn instance() -> (Vec<Vec<f64>>, Vec<f64>) {
        let rows = vec![
            vec![1.0, 0.3, 2.0],
            vec![0.5, 1.2, 0.1],
            vec![2.0, 0.7, 1.1],
            vec![0.1, 2.2, 0.4],
            vec![1.5, 1.5, 1.9],
            vec![0.8, 0.2, 0.6],
        ];
        let y = vec![1.0, -0.3, 2.2, 0.4, 1.7, 0.1];
        (rows, y)
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn zero_alpha_matches_least_squares() {
        let (rows, y) = instance();
        let design = Design::from_rows(&rows, 3);
        let b = design.lasso(&y, 0.0, &[0.0; 3], LassoOptions::default());

        let z = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j]);
        let yv = DVector::from_vec(y.clone());
        let ols = (z.transpose() * &z).lu().solve(&(z.transpose() * yv)).unwrap();
        for j in 0..3 {
            assert!((b[j] - ols[j]).abs() < 1e-6, "{b:?} vs {ols}");
        }
    }

    #[test]
    fn large_alpha_gives_zero() {
        let (rows, y) = instance();
        let design = Design::from_rows(&rows, 3);
        let amax = design.alpha_max(&y);
        let b = design.lasso(&y, amax * 1.0001, &[0.5, -0.5, 0.5], LassoOptions::default());
        assert!(b.iter().all(|v| *v == 0.0), "{b:?}");
        let b = design.lasso(&y, amax * 0.9, &[0.0; 3], LassoOptions::default());
        assert!(b.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn coordinate_descent_never_increases_objective() {
        let (rows, y) = instance();
        let design = Design::from_rows(&rows, 3);
        let start = [3.0, -2.0, 1.0];
        let before = design.objective(&y, &start, 0.05);
        let b = design.lasso(&y, 0.05, &start, LassoOptions::default());
        assert!(design.objective(&y, &b, 0.05) <= before);
    }

    #[test]
    fn zero_column_stays_zero() {
        let rows = vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]];
        let design = Design::from_rows(&rows, 2);
        let b = design.lasso(&[2.0, 4.0, 6.0], 0.0, &[0.0, 1.0], LassoOptions::default());
        assert!((b[0] - 2.0).abs() < 1e-10);
        assert_eq!(b[1], 0.0);
    }
}
