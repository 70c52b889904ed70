//! Small numerical helpers: ordinary least-squares lines and a dense Levenberg-Marquardt.

use nalgebra::{DMatrix, DVector};

/// Result of an ordinary least-squares line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits a straight line. Returns `None` for fewer than two points or constant `x`.
///
/// When `y` is constant the fit is exact and `r_squared` is reported as 1.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = x[..n].iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y[..n].iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x[..n]
        .iter()
        .zip(&y[..n])
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative cost decrease falls below this.
    pub ftol: f64,
    /// Relative step for forward-difference Jacobians.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            ftol: 1e-14,
            fd_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
    /// Numerical rank of the Jacobian at the solution.
    pub rank: usize,
}

/// Minimizes `sum r_i(p)^2` by Levenberg-Marquardt with a forward-difference Jacobian.
pub fn levenberg_marquardt<F>(residuals: F, p0: &[f64], opts: LmOptions) -> LmResult
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let np = p0.len();
    let mut p = p0.to_vec();
    let mut r = DVector::from_vec(residuals(&p));
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;

    let jacobian = |p: &[f64], r0: &DVector<f64>| {
        let mut jac = DMatrix::zeros(r0.len(), np);
        for c in 0..np {
            let h = opts.fd_step * p[c].abs().max(1.0);
            let mut q = p.to_vec();
            q[c] += h;
            let rq = DVector::from_vec(residuals(&q));
            jac.set_column(c, &((rq - r0) / h));
        }
        jac
    };

    let mut jac = jacobian(&p, &r);
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..np {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = DVector::from_vec(residuals(&trial));
            let ct = rt.norm_squared();
            if ct.is_finite() && ct < cost {
                let rel = (cost - ct) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda * 0.3).max(1e-15);
                improved = true;
                if rel < opts.ftol {
                    let rank = jacobian(&p, &r).rank(1e-10 * jtj.norm().sqrt().max(1.0));
                    return LmResult {
                        params: p,
                        cost,
                        iterations,
                        rank,
                    };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
        jac = jacobian(&p, &r);
    }
    let jf = jacobian(&p, &r);
    let scale = jf.norm().max(1.0);
    let rank = jf.rank(1e-10 * scale);
    LmResult {
        params: p,
        cost,
        iterations,
        rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 0.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12 && (f.intercept - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lm_recovers_exponential() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (-1.7 * x).exp()).collect();
        let res = levenberg_marquardt(
            |p| xs.iter().zip(&ys).map(|(x, y)| p[0] * (p[1] * x).exp() - y).collect(),
            &[1.0, -0.5],
            LmOptions::default(),
        );
        assert!((res.params[0] - 3.0).abs() < 1e-6, "{:?}", res.params);
        assert!((res.params[1] + 1.7).abs() < 1e-6);
        assert_eq!(res.rank, 2);
    }
}
