//! Small dense-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::prob::{expit, log1p_exp};

/// Cholesky factor of `m`, adding escalating diagonal jitter (relative to the
/// mean diagonal) until the factorization succeeds. Returns the jitter used.
pub fn robust_cholesky(m: &DMatrix<f64>, max_tries: usize) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, 0.0));
    }
    let n = m.nrows();
    let mean_diag = (0..n).map(|i| m[(i, i)].abs()).sum::<f64>() / n.max(1) as f64;
    let mut jitter = mean_diag.max(1e-300) * 1e-12;
    for _ in 0..max_tries {
        let mut mj = m.clone();
        for i in 0..n {
            mj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(mj) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    let min_diag = (0..n).map(|i| m[(i, i)]).fold(f64::INFINITY, f64::min);
    Err(Error::Cholesky(format!(
        "{n}x{n} matrix not positive definite after jitter {jitter:e} (min diagonal {min_diag:e}, mean diagonal {mean_diag:e})"
    )))
}

#[derive(Clone, Debug)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub sigma2: f64,
}

impl OlsFit {
    pub fn se(&self, j: usize) -> f64 {
        self.cov[(j, j)].sqrt()
    }
}

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::SingularModel(format!("{n} rows cannot identify {p} coefficients")));
    }
    let xtx = x.transpose() * x;
    let chol = Cholesky::new(xtx).ok_or_else(|| Error::SingularModel("design matrix is rank deficient".into()))?;
    let coef = chol.solve(&(x.transpose() * y));
    let resid = y - x * &coef;
    let sigma2 = resid.norm_squared() / (n - p) as f64;
    let cov = chol.inverse() * sigma2;
    Ok(OlsFit { coef, cov, sigma2 })
}

/// Logistic-regression maximum likelihood by Newton iterations. Returns the
/// coefficients and the inverse observed information.
pub fn logistic_mle(x: &DMatrix<f64>, y: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, p) = x.shape();
    let mut beta = DVector::zeros(p);
    let mut last_ll = f64::NEG_INFINITY;
    for _ in 0..100 {
        let eta = x * &beta;
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        let mut ll = 0.0;
        for i in 0..n {
            let mu = expit(eta[i]);
            ll += y[i] * eta[i] - log1p_exp(eta[i]);
            let w = mu * (1.0 - mu);
            let xi = x.row(i);
            for a in 0..p {
                grad[a] += (y[i] - mu) * xi[a];
                for b in 0..=a {
                    info[(a, b)] += w * xi[a] * xi[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        let chol = Cholesky::new(info.clone())
            .ok_or_else(|| Error::SingularModel("logistic information matrix is singular (separation?)".into()))?;
        let step = chol.solve(&grad);
        beta += &step;
        if (ll - last_ll).abs() < 1e-10 && step.amax() < 1e-8 {
            return Ok((beta, chol.inverse()));
        }
        last_ll = ll;
    }
    Err(Error::SingularModel("logistic regression did not converge (separation?)".into()))
}
