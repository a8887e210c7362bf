//! Data reductions for measured power sweeps: a linear+quadratic singles
//! decomposition and a pair-flux curve fit with a floating effective length,
//! bandwidth and multiplicative correction.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Wavelength, SPEED_OF_LIGHT};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// σ² = observed value (floored at 1 for counts).
    #[default]
    Poisson,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub model: &'static str,
    pub names: Vec<&'static str>,
    pub values: Vec<f64>,
    /// One standard error; `inf` for a direction the data cannot constrain.
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Square root of the weighted sum of squared residuals.
    pub residual_norm: f64,
    pub dof: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| *n == name)?;
        Some((self.values[i], self.std_errors[i]))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["parameter", "value", "std_error"])?;
        for ((n, v), e) in self.names.iter().zip(&self.values).zip(&self.std_errors) {
            w.serialize((n, v, e))?;
        }
        w.flush().map_err(|e| Error::io("fit report csv", e))?;
        Ok(())
    }
}

fn weights(ys: &[f64], weighting: Weighting) -> Vec<f64> {
    match weighting {
        Weighting::Poisson => ys.iter().map(|&y| 1.0 / y.max(1.0)).collect(),
        Weighting::Uniform => vec![1.0; ys.len()],
    }
}

/// Rank of `m` after scaling each column to unit norm.
fn scaled_rank(m: &DMatrix<f64>) -> usize {
    let mut s = m.clone();
    for mut c in s.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    let sv = s.svd(false, false).singular_values;
    let max = sv.max();
    sv.iter().filter(|&&x| x > 1e-10 * max).count()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadraticFit {
    pub fit: FitResult,
    /// `(P, a·P/(a·P + b·P²))` per input point.
    pub linear_fraction: Vec<(f64, f64)>,
}

/// Weighted least squares for `y = [c +] a·P + b·P²`.
///
/// With Poisson weighting the covariance is absolute (counts carry their own
/// variance); with uniform weighting it is scaled by the reduced χ².
pub fn fit_quadratic(
    points: &[(f64, f64)],
    with_offset: bool,
    weighting: Weighting,
) -> Result<QuadraticFit> {
    let k = if with_offset { 3 } else { 2 };
    if points.len() < 3 || points.len() < k + 1 {
        return Err(Error::invalid(
            "fit.points",
            format!("need at least {} points", 3.max(k + 1)),
        ));
    }
    if points.iter().any(|(p, y)| !p.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("fit.points", "values must be finite"));
    }
    let n = points.len();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let w = weights(&ys, weighting);
    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for (i, &(p, v)) in points.iter().enumerate() {
        let sw = w[i].sqrt();
        let mut col = 0;
        if with_offset {
            x[(i, 0)] = sw;
            col = 1;
        }
        x[(i, col)] = sw * p;
        x[(i, col + 1)] = sw * p * p;
        y[i] = sw * v;
    }
    if scaled_rank(&x) < k {
        return Err(Error::Degenerate(
            "rank-deficient design: need distinct powers".into(),
        ));
    }
    let xtx = x.transpose() * &x;
    let inv = xtx
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular normal matrix".into()))?;
    let beta = &inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let rss = resid.norm_squared();
    let dof = n - k;
    let scale = match weighting {
        Weighting::Poisson => 1.0,
        Weighting::Uniform => rss / dof.max(1) as f64,
    };
    let cov = inv * scale;
    let names: Vec<&'static str> = if with_offset {
        vec!["offset", "a", "b"]
    } else {
        vec!["a", "b"]
    };
    let values: Vec<f64> = beta.iter().copied().collect();
    let std_errors = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let (a, b) = (values[k - 2], values[k - 1]);
    let linear_fraction = points
        .iter()
        .map(|&(p, _)| {
            let lin = a * p;
            let total = lin + b * p * p;
            (p, if total != 0.0 { lin / total } else { f64::NAN })
        })
        .collect();
    Ok(QuadraticFit {
        fit: FitResult {
            model: "linear+quadratic",
            names,
            values,
            std_errors,
            covariance: matrix_rows(&cov),
            residual_norm: rss.sqrt(),
            dof,
        },
        linear_fraction,
    })
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Parameters of the pair-flux curve
/// `R(P) = correction·(γ·P·L_eff)²·c·Δλ/λ_p²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxCurveParams {
    /// m
    pub effective_length: f64,
    /// Flat-equivalent pair bandwidth, m.
    pub bandwidth: f64,
    pub correction: f64,
}

impl FluxCurveParams {
    fn to_log(self) -> [f64; 3] {
        [
            self.effective_length.ln(),
            self.bandwidth.ln(),
            self.correction.ln(),
        ]
    }

    fn from_log(v: &[f64]) -> Self {
        Self {
            effective_length: v[0].exp(),
            bandwidth: v[1].exp(),
            correction: v[2].exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxCurveModel {
    /// W⁻¹m⁻¹
    pub nonlinearity: f64,
    pub pump: Wavelength,
}

impl FluxCurveModel {
    /// pairs/s at `power_w`.
    pub fn rate(&self, p: &FluxCurveParams, power_w: f64) -> f64 {
        let lam = self.pump.meters();
        p.correction
            * (self.nonlinearity * power_w * p.effective_length).powi(2)
            * SPEED_OF_LIGHT
            * p.bandwidth
            / (lam * lam)
    }
}

/// Which of `(effective_length, bandwidth, correction)` float.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeMask(pub [bool; 3]);

impl FreeMask {
    pub const ALL: Self = Self([true; 3]);
    pub const CORRECTION_ONLY: Self = Self([false, false, true]);
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairFluxFit {
    pub params: FluxCurveParams,
    /// Table over all three parameters; fixed ones have zero error.
    pub fit: FitResult,
    /// Number of independent directions the data constrain among the free parameters.
    pub rank: usize,
    pub identifiable: bool,
    /// `correction·L_eff²·Δλ` (m³), always constrained by the data.
    pub scale: f64,
    pub scale_std_error: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative change in χ² falls below this.
    pub tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-12,
        }
    }
}

struct LmOutcome {
    x: DVector<f64>,
    jacobian: DMatrix<f64>,
    chi2: f64,
    iterations: usize,
}

/// Levenberg–Marquardt over the full parameter vector; `eval` returns the
/// weighted residual vector and its Jacobian.
fn levenberg_marquardt<F>(eval: F, x0: DVector<f64>, opts: LmOptions) -> Result<LmOutcome>
where
    F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut x = x0;
    let (mut r, mut j) = eval(&x);
    let mut chi2 = r.norm_squared();
    let mut lambda = 1e-3;
    for it in 0..opts.max_iterations {
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut damped = jtj.clone();
        for i in 0..damped.nrows() {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-30);
        }
        let step = damped
            .svd(true, true)
            .solve(&(-g), 1e-14)
            .map_err(|e| Error::Numerical(format!("LM step: {e}")))?;
        let trial = &x + &step;
        let (rt, jt) = eval(&trial);
        let chi2_t = rt.norm_squared();
        if chi2_t.is_finite() && chi2_t <= chi2 {
            let rel = (chi2 - chi2_t) / chi2.max(1e-300);
            x = trial;
            r = rt;
            j = jt;
            chi2 = chi2_t;
            lambda = (lambda / 10.0).max(1e-12);
            if rel < opts.tolerance || chi2 == 0.0 {
                return Ok(LmOutcome {
                    x,
                    jacobian: j,
                    chi2,
                    iterations: it + 1,
                });
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                return Ok(LmOutcome {
                    x,
                    jacobian: j,
                    chi2,
                    iterations: it + 1,
                });
            }
        }
    }
    Err(Error::Numerical(format!(
        "pair-flux fit did not converge in {} iterations (residual norm {:.4e})",
        opts.max_iterations,
        chi2.sqrt()
    )))
}

/// Nonlinear least squares for the pair-flux curve in log-parameter space.
///
/// The model depends on the three parameters only through their product, so
/// at most one combination is constrained by (P, flux) data. Fix all but one
/// parameter to recover it; with several free the fit reports `identifiable =
/// false` and infinite errors along the unconstrained directions, while
/// `scale` and its error stay meaningful.
pub fn fit_pair_flux_curve(
    points: &[(f64, f64)],
    model: &FluxCurveModel,
    start: FluxCurveParams,
    free: FreeMask,
    weighting: Weighting,
) -> Result<PairFluxFit> {
    if points.len() < 4 {
        return Err(Error::invalid("fit.points", "need at least 4 points"));
    }
    if points
        .iter()
        .any(|(p, y)| !(p.is_finite() && *p > 0.0) || !y.is_finite())
    {
        return Err(Error::invalid(
            "fit.points",
            "powers must be positive and values finite",
        ));
    }
    if points.iter().all(|p| p.1 <= 0.0) {
        return Err(Error::Degenerate("all pair-flux values are zero".into()));
    }
    if !(start.effective_length > 0.0 && start.bandwidth > 0.0 && start.correction > 0.0) {
        return Err(Error::invalid(
            "fit.start",
            "starting parameters must be positive",
        ));
    }
    let free_idx: Vec<usize> = (0..3).filter(|&i| free.0[i]).collect();
    if free_idx.is_empty() {
        return Err(Error::invalid(
            "fit.free",
            "at least one parameter must float",
        ));
    }
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let sw: Vec<f64> = match weighting {
        // relative weights: σ² ∝ value
        Weighting::Poisson => ys
            .iter()
            .map(|&y| 1.0 / y.abs().max(f64::MIN_POSITIVE).sqrt())
            .collect(),
        Weighting::Uniform => vec![1.0; ys.len()],
    };
    let base = start.to_log();
    let full = |v: &DVector<f64>| {
        let mut t = base;
        for (k, &i) in free_idx.iter().enumerate() {
            t[i] = v[k];
        }
        t
    };
    let eval = |v: &DVector<f64>| {
        let p = FluxCurveParams::from_log(&full(v));
        let n = points.len();
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, free_idx.len());
        for (row, &(pw, y)) in points.iter().enumerate() {
            let m = model.rate(&p, pw);
            r[row] = sw[row] * (m - y);
            for (k, &i) in free_idx.iter().enumerate() {
                // d ln R / d ln L = 2, others 1
                let d = if i == 0 { 2.0 } else { 1.0 };
                j[(row, k)] = sw[row] * d * m;
            }
        }
        (r, j)
    };
    let x0 = DVector::from_iterator(free_idx.len(), free_idx.iter().map(|&i| base[i]));
    let out = levenberg_marquardt(eval, x0, LmOptions::default())?;
    let logs = full(&out.x);
    let mut params = FluxCurveParams::from_log(&logs);
    // fixed parameters keep their exact input values
    if !free.0[0] {
        params.effective_length = start.effective_length;
    }
    if !free.0[1] {
        params.bandwidth = start.bandwidth;
    }
    if !free.0[2] {
        params.correction = start.correction;
    }
    let dof = points.len().saturating_sub(1);
    let s2 = if dof > 0 { out.chi2 / dof as f64 } else { 0.0 };

    let rank = scaled_rank(&out.jacobian);
    let identifiable = rank == free_idx.len();
    let jtj = out.jacobian.transpose() * &out.jacobian;
    let values = [params.effective_length, params.bandwidth, params.correction];
    let mut cov = vec![vec![0.0; 3]; 3];
    let mut std_errors = vec![0.0; 3];
    if identifiable {
        let inv = jtj
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular information matrix".into()))?;
        for (a, &i) in free_idx.iter().enumerate() {
            for (b, &k) in free_idx.iter().enumerate() {
                cov[i][k] = inv[(a, b)] * s2 * values[i] * values[k];
            }
            std_errors[i] = cov[i][i].max(0.0).sqrt();
        }
    } else {
        for &i in &free_idx {
            std_errors[i] = f64::INFINITY;
            cov[i][i] = f64::INFINITY;
        }
    }
    // the product is a one-parameter fit in ln(scale) with all points
    let info: f64 = points
        .iter()
        .enumerate()
        .map(|(row, &(pw, _))| (sw[row] * model.rate(&params, pw)).powi(2))
        .sum();
    let scale = params.correction * params.effective_length.powi(2) * params.bandwidth;
    let scale_std_error = if info > 0.0 {
        scale * (s2 / info).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(PairFluxFit {
        params,
        fit: FitResult {
            model: "pair-flux-curve",
            names: vec!["effective_length_m", "bandwidth_m", "correction"],
            values: values.to_vec(),
            std_errors,
            covariance: cov,
            residual_norm: out.chi2.sqrt(),
            dof,
        },
        rank,
        identifiable,
        scale,
        scale_std_error,
        iterations: out.iterations,
    })
}
