//! Ordinary least squares with Gaussian log likelihoods, used to compare
//! reading-time predictors by deviance.

use crate::error::{Error, Result};

/// Named predictor columns, without the intercept (it is added internally).
#[derive(Debug, Clone, Default)]
pub struct RegressionMatrix {
    pub names: Vec<String>,
    pub cols: Vec<Vec<f64>>,
}

impl RegressionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, col: Vec<f64>) {
        self.names.push(name.to_string());
        self.cols.push(col);
    }

    pub fn with(mut self, name: &str, col: Vec<f64>) -> Self {
        self.push(name, col);
        self
    }

    pub fn n_rows(&self) -> usize {
        self.cols.first().map_or(0, |c| c.len())
    }

    fn validate(&self, n: usize) -> Result<()> {
        for (name, col) in self.names.iter().zip(&self.cols) {
            if col.len() != n {
                return Err(Error::Config(format!(
                    "predictor `{name}` has {} rows, expected {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("predictor `{name}`")));
            }
        }
        Ok(())
    }
}

/// A fitted linear model. Coefficient order matches `names`, with the
/// intercept first.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub std_err: Vec<f64>,
    pub t_value: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Gaussian log likelihood at the maximum-likelihood variance rss/n.
    pub log_likelihood: f64,
    pub n: usize,
}

/// Gaussian log likelihood of residuals with variance at its MLE rss/n:
/// -n/2 (ln(2 pi rss / n) + 1).
pub fn gaussian_log_likelihood(rss: f64, n: usize) -> f64 {
    let nf = n as f64;
    -0.5 * nf * ((2.0 * std::f64::consts::PI * rss / nf).ln() + 1.0)
}

/// Deviance of `baseline` against a richer `model`; positive when the model
/// fits better.
pub fn deviance(model_ll: f64, baseline_ll: f64) -> f64 {
    -2.0 * (baseline_ll - model_ll)
}

/// Cholesky factorization of a symmetric positive definite matrix stored
/// row-major. On failure returns the offending column index.
fn cholesky(a: &[f64], k: usize) -> std::result::Result<Vec<f64>, usize> {
    let mut l = vec![0.0; k * k];
    // Relative tolerance against the largest diagonal entry.
    let max_diag = (0..k).map(|i| a[i * k + i].abs()).fold(0.0f64, f64::max);
    let tol = 1e-10 * max_diag.max(1e-300);
    for j in 0..k {
        let mut d = a[j * k + j];
        for m in 0..j {
            d -= l[j * k + m] * l[j * k + m];
        }
        if d <= tol {
            return Err(j);
        }
        l[j * k + j] = d.sqrt();
        for i in j + 1..k {
            let mut v = a[i * k + j];
            for m in 0..j {
                v -= l[i * k + m] * l[j * k + m];
            }
            l[i * k + j] = v / l[j * k + j];
        }
    }
    Ok(l)
}

/// Solves L L^T x = b given the Cholesky factor L.
fn cholesky_solve(l: &[f64], k: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; k];
    for i in 0..k {
        let mut v = b[i];
        for m in 0..i {
            v -= l[i * k + m] * y[m];
        }
        y[i] = v / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut v = y[i];
        for m in i + 1..k {
            v -= l[m * k + i] * x[m];
        }
        x[i] = v / l[i * k + i];
    }
    x
}

/// Fits y on an intercept plus the given predictors by normal equations.
///
/// Degrees-of-freedom requirements: strictly more rows than coefficients.
/// Exactly collinear predictors are reported by name.
pub fn ols_regression(y: &[f64], x: &RegressionMatrix) -> Result<OlsFit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Empty("regression response"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression response".into()));
    }
    x.validate(n)?;
    let k = x.cols.len() + 1;
    if n <= k {
        return Err(Error::Config(format!(
            "regression needs more than {k} rows for {k} coefficients, got {n}"
        )));
    }

    let mut names = vec!["(intercept)".to_string()];
    names.extend(x.names.iter().cloned());

    // Design matrix access: column 0 is the intercept.
    let col = |j: usize, i: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            x.cols[j - 1][i]
        }
    };

    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    for i in 0..n {
        for a in 0..k {
            let va = col(a, i);
            xty[a] += va * y[i];
            for b in a..k {
                xtx[a * k + b] += va * col(b, i);
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            xtx[a * k + b] = xtx[b * k + a];
        }
    }

    let l = cholesky(&xtx, k).map_err(|j| {
        Error::Data(format!(
            "design matrix is rank deficient at column `{}`; \
             remove collinear predictors",
            names[j]
        ))
    })?;
    let coef = cholesky_solve(&l, k, &xty);

    let mut residuals = vec![0.0; n];
    let mut rss = 0.0;
    for i in 0..n {
        let mut pred = 0.0;
        for j in 0..k {
            pred += coef[j] * col(j, i);
        }
        let r = y[i] - pred;
        residuals[i] = r;
        rss += r * r;
    }
    if rss <= 0.0 {
        return Err(Error::Data(
            "regression fits exactly; Gaussian likelihood is unbounded".into(),
        ));
    }

    // (X^T X)^{-1} diagonal via solves against unit vectors.
    let sigma2 = rss / (n - k) as f64;
    let mut std_err = vec![0.0; k];
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        let inv_col = cholesky_solve(&l, k, &e);
        std_err[j] = (sigma2 * inv_col[j]).sqrt();
    }
    let t_value = coef
        .iter()
        .zip(&std_err)
        .map(|(c, s)| c / s)
        .collect();

    Ok(OlsFit {
        names,
        log_likelihood: gaussian_log_likelihood(rss, n),
        coef,
        std_err,
        t_value,
        residuals,
        rss,
        n,
    })
}

/// Removes from `x` everything a baseline predictor set explains: the
/// residuals of regressing `x` on the baseline (with intercept).
pub fn residualize(x: &[f64], baseline: &RegressionMatrix) -> Result<Vec<f64>> {
    Ok(ols_regression(x, baseline)?.residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Textbook simple regression, coefficients by the closed form.
    #[test]
    fn simple_regression_matches_closed_form() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let y = vec![2.1, 3.9, 6.2, 7.8, 10.1];
        let mx = 3.0;
        let my: f64 = y.iter().sum::<f64>() / 5.0;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;

        let m = RegressionMatrix::new().with("x", x);
        let fit = ols_regression(&y, &m).unwrap();
        assert_abs_diff_eq!(fit.coef[0], intercept, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coef[1], slope, epsilon = 1e-12);
        assert_abs_diff_eq!(
            fit.log_likelihood,
            gaussian_log_likelihood(fit.rss, 5),
            epsilon = 1e-12
        );
    }

    /// Independent oracle: solve the normal equations by Gauss-Jordan
    /// elimination with full matrix inversion, on random instances.
    fn gauss_jordan_inverse(a: &[f64], k: usize) -> Vec<f64> {
        let mut m = vec![0.0; k * 2 * k];
        for i in 0..k {
            for j in 0..k {
                m[i * 2 * k + j] = a[i * k + j];
            }
            m[i * 2 * k + k + i] = 1.0;
        }
        for p in 0..k {
            // Partial pivot.
            let mut best = p;
            for r in p + 1..k {
                if m[r * 2 * k + p].abs() > m[best * 2 * k + p].abs() {
                    best = r;
                }
            }
            if best != p {
                for c in 0..2 * k {
                    m.swap(p * 2 * k + c, best * 2 * k + c);
                }
            }
            let piv = m[p * 2 * k + p];
            for c in 0..2 * k {
                m[p * 2 * k + c] /= piv;
            }
            for r in 0..k {
                if r != p {
                    let f = m[r * 2 * k + p];
                    for c in 0..2 * k {
                        m[r * 2 * k + c] -= f * m[p * 2 * k + c];
                    }
                }
            }
        }
        let mut inv = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                inv[i * k + j] = m[i * 2 * k + k + j];
            }
        }
        inv
    }

    fn oracle_fit(y: &[f64], x: &RegressionMatrix) -> (Vec<f64>, Vec<f64>, f64) {
        let n = y.len();
        let k = x.cols.len() + 1;
        let col = |j: usize, i: usize| -> f64 {
            if j == 0 {
                1.0
            } else {
                x.cols[j - 1][i]
            }
        };
        let mut xtx = vec![0.0; k * k];
        let mut xty = vec![0.0; k];
        for i in 0..n {
            for a in 0..k {
                xty[a] += col(a, i) * y[i];
                for b in 0..k {
                    xtx[a * k + b] += col(a, i) * col(b, i);
                }
            }
        }
        let inv = gauss_jordan_inverse(&xtx, k);
        let mut coef = vec![0.0; k];
        for a in 0..k {
            for b in 0..k {
                coef[a] += inv[a * k + b] * xty[b];
            }
        }
        let mut rss = 0.0;
        for i in 0..n {
            let mut pred = 0.0;
            for j in 0..k {
                pred += coef[j] * col(j, i);
            }
            rss += (y[i] - pred) * (y[i] - pred);
        }
        let sigma2 = rss / (n - k) as f64;
        let se = (0..k).map(|j| (sigma2 * inv[j * k + j]).sqrt()).collect();
        (coef, se, rss)
    }

    #[test]
    fn random_instances_match_gauss_jordan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for case in 0..25 {
            let n = rng.gen_range(12..60);
            let p = rng.gen_range(1..5usize);
            let mut m = RegressionMatrix::new();
            for j in 0..p {
                let col: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                m.push(&format!("x{j}"), col);
            }
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    let mut v = 1.5 + rng.gen_range(-0.5..0.5);
                    for j in 0..p {
                        v += (j as f64 + 1.0) * m.cols[j][i];
                    }
                    v
                })
                .collect();
            let fit = ols_regression(&y, &m).unwrap();
            let (coef, se, rss) = oracle_fit(&y, &m);
            for j in 0..=p {
                assert_abs_diff_eq!(fit.coef[j], coef[j], epsilon = 1e-8);
                assert_abs_diff_eq!(fit.std_err[j], se[j], epsilon = 1e-8);
            }
            assert_abs_diff_eq!(fit.rss, rss, epsilon = 1e-8);
            assert!(fit.rss > 0.0, "case {case} degenerate");
        }
    }

    #[test]
    fn collinear_columns_are_named() {
        let x1 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let y = vec![1.0, 2.0, 1.5, 3.0, 2.5, 4.0];
        let m = RegressionMatrix::new()
            .with("word_len", x1)
            .with("double_len", x2);
        let err = ols_regression(&y, &m).unwrap_err().to_string();
        assert!(err.contains("rank deficient"), "{err}");
        assert!(err.contains("double_len"), "{err}");
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let m = RegressionMatrix::new().with("x", vec![1.0, 2.0]);
        assert!(ols_regression(&[1.0, 2.0], &m).is_err());
    }

    #[test]
    fn deviance_of_nested_models_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 2.0 * a[i] - b[i] + rng.gen_range(-0.3..0.3))
            .collect();
        let base = RegressionMatrix::new().with("a", a.clone());
        let full = RegressionMatrix::new().with("a", a).with("b", b);
        let fit_base = ols_regression(&y, &base).unwrap();
        let fit_full = ols_regression(&y, &full).unwrap();
        let d = deviance(fit_full.log_likelihood, fit_base.log_likelihood);
        assert!(d >= 0.0, "deviance {d}");
        assert!(fit_full.log_likelihood >= fit_base.log_likelihood);
    }

    /// Residualizing makes the residual orthogonal to the baseline columns
    /// and to the constant.
    #[test]
    fn residualize_removes_baseline_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 30;
        let base_col: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..n)
            .map(|i| 3.0 * base_col[i] + rng.gen_range(-1.0..1.0))
            .collect();
        let baseline = RegressionMatrix::new().with("b", base_col.clone());
        let resid = residualize(&x, &baseline).unwrap();
        let dot: f64 = resid.iter().zip(&base_col).map(|(r, b)| r * b).sum();
        let sum: f64 = resid.iter().sum();
        assert_abs_diff_eq!(dot, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sum, 0.0, epsilon = 1e-9);
    }
}
