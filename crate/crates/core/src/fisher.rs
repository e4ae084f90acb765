//! Score functions and Fisher information.
//!
//! Both the fixed-detector (source conditional) readout and the detector-plane
//! benchmark reduce to one computation: the variance, under a weighted and
//! normalized response, of the logarithmic derivative `dR / R`. The
//! normalization of the conditional forces the score to have zero mean, so
//! any common-mode change of the response drops out.

use crate::error::{Error, Result};
use crate::kernels::TwoPathBeta;
use crate::probcore::{Acceptance, Dist1D, Grid1D};

/// Central-difference step used when none is configured: `1e-5 * max(1, |theta|)`.
pub fn default_fd_delta(theta: f64) -> f64 {
    1e-5 * theta.abs().max(1.0)
}

/// A nonnegative response that depends on a scalar parameter.
pub trait ParamModel {
    fn evaluate(&self, theta: f64) -> Result<Vec<f64>>;

    /// Exact `dR / dtheta`, when the model knows it.
    fn analytic_derivative(&self, _theta: f64) -> Option<Result<Vec<f64>>> {
        None
    }

    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Closure-backed model, mostly for tests and ad-hoc perturbation families.
pub struct FnModel<F, G = fn(f64) -> Vec<f64>> {
    response: F,
    derivative: Option<G>,
    domain: (f64, f64),
}

impl<F: Fn(f64) -> Vec<f64>> FnModel<F> {
    pub fn new(response: F) -> Self {
        Self { response, derivative: None, domain: (f64::NEG_INFINITY, f64::INFINITY) }
    }
}

impl<F: Fn(f64) -> Vec<f64>, G: Fn(f64) -> Vec<f64>> FnModel<F, G> {
    pub fn with_derivative(response: F, derivative: G) -> Self {
        Self { response, derivative: Some(derivative), domain: (f64::NEG_INFINITY, f64::INFINITY) }
    }

    pub fn on_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }
}

impl<F: Fn(f64) -> Vec<f64>, G: Fn(f64) -> Vec<f64>> ParamModel for FnModel<F, G> {
    fn evaluate(&self, theta: f64) -> Result<Vec<f64>> {
        Ok((self.response)(theta))
    }

    fn analytic_derivative(&self, theta: f64) -> Option<Result<Vec<f64>>> {
        self.derivative.as_ref().map(|g| Ok(g(theta)))
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// Central difference `(R(theta + delta) - R(theta - delta)) / (2 delta)`.
pub fn fd_derivative(model: &dyn ParamModel, theta: f64, delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {delta}")));
    }
    let (lo, hi) = model.domain();
    for t in [theta - delta, theta + delta] {
        if !(lo..=hi).contains(&t) {
            return Err(Error::Domain { theta: t, lo, hi });
        }
    }
    let up = model.evaluate(theta + delta)?;
    let dn = model.evaluate(theta - delta)?;
    if up.len() != dn.len() {
        return Err(Error::InvalidParameter("model changed its output length".into()));
    }
    Ok(up.iter().zip(&dn).map(|(a, b)| (a - b) / (2.0 * delta)).collect())
}

/// Normwise relative gap `max |analytic - fd| / max |analytic|` between the
/// analytic derivative and a central difference, or `None` if the model has
/// no analytic derivative.
pub fn derivative_gap(model: &dyn ParamModel, theta: f64, delta: f64) -> Result<Option<f64>> {
    let Some(analytic) = model.analytic_derivative(theta) else {
        return Ok(None);
    };
    let analytic = analytic?;
    let fd = fd_derivative(model, theta, delta)?;
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = analytic.iter().zip(&fd).fold(0.0f64, |m, (a, f)| m.max((a - f).abs()));
    Ok(Some(if scale > 0.0 { gap / scale } else { gap }))
}

/// Zero-mean score over a weighted response.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    /// `dR/R - <dR/R>`; zero where the point is outside the support.
    pub values: Vec<f64>,
    /// Normalized weights `w R / sum(w R)`.
    pub conditional: Vec<f64>,
    /// `<dR/R>`, the derivative of the log normalization.
    pub log_norm_derivative: f64,
}

impl Score {
    /// Conditional mean of the score; zero up to rounding.
    pub fn mean(&self) -> f64 {
        self.conditional.iter().zip(&self.values).map(|(p, s)| p * s).sum()
    }

    /// Conditional mean of the squared score.
    pub fn fisher(&self) -> f64 {
        self.conditional.iter().zip(&self.values).map(|(p, s)| p * s * s).sum()
    }
}

fn weighted_score(weights: &[f64], response: &[f64], derivative: &[f64]) -> Result<Score> {
    if weights.len() != response.len() || response.len() != derivative.len() {
        return Err(Error::GridMismatch(format!(
            "weights/response/derivative lengths {}/{}/{} differ",
            weights.len(),
            response.len(),
            derivative.len()
        )));
    }
    let mut mass = vec![0.0; response.len()];
    let mut total = 0.0;
    for (j, ((&w, &r), &dr)) in weights.iter().zip(response).zip(derivative).enumerate() {
        if !r.is_finite() || r < 0.0 || !dr.is_finite() {
            return Err(Error::InvalidParameter(format!("response {r} / derivative {dr} at index {j}")));
        }
        if w <= 0.0 {
            continue;
        }
        if r == 0.0 {
            if dr != 0.0 {
                return Err(Error::SingularScore { index: j, derivative: dr });
            }
            continue;
        }
        mass[j] = w * r;
        total += w * r;
    }
    if total <= 0.0 {
        return Err(Error::DetectorSeesNothing);
    }
    let conditional: Vec<f64> = mass.iter().map(|m| m / total).collect();
    let logd: Vec<f64> = response
        .iter()
        .zip(derivative)
        .zip(&conditional)
        .map(|((&r, &dr), &p)| if p > 0.0 { dr / r } else { 0.0 })
        .collect();
    let mean: f64 = conditional.iter().zip(&logd).map(|(p, g)| p * g).sum();
    let values = logd.iter().zip(&conditional).map(|(&g, &p)| if p > 0.0 { g - mean } else { 0.0 }).collect();
    Ok(Score { values, conditional, log_norm_derivative: mean })
}

/// Score of the fixed-detector source conditional.
///
/// Points with `R = 0` and `dR = 0` are dropped from the support; `R = 0`
/// with `dR != 0` on a supported label is a singular score.
pub fn try_score(response: &[f64], derivative: &[f64], prior: &Dist1D) -> Result<Score> {
    weighted_score(prior.probs(), response, derivative)
}

/// Variance of `dR / R` under the fixed-detector source conditional.
pub fn try_fisher(response: &[f64], derivative: &[f64], prior: &Dist1D) -> Result<f64> {
    try_score(response, derivative, prior).map(|s| s.fisher())
}

/// Variance of `dI / I` under the acceptance-weighted detector marginal.
pub fn std_fisher(intensity: &[f64], derivative: &[f64], acceptance: &Acceptance) -> Result<f64> {
    let eta = match acceptance {
        Acceptance::Point { index, .. } => {
            let mut w = vec![0.0; intensity.len()];
            if *index >= w.len() {
                return Err(Error::GridMismatch("point detector outside intensity grid".into()));
            }
            w[*index] = 1.0;
            w
        }
        Acceptance::Window { weights } => weights.clone(),
    };
    weighted_score(&eta, intensity, derivative).map(|s| s.fisher())
}

/// Fisher information of the full launched-photon record: detected labels
/// weighted by `P_det` plus the count-rate term.
pub fn launched_fisher(p_det: f64, dp_det: f64, f_cond: f64) -> Result<f64> {
    if !(p_det > 0.0 && p_det < 1.0) {
        return Err(Error::DegenerateChannel(p_det));
    }
    if !(f_cond >= 0.0) || !dp_det.is_finite() {
        return Err(Error::InvalidParameter(format!("F_cond={f_cond}, dP_det={dp_det}")));
    }
    Ok(p_det * f_cond + dp_det * dp_det / (p_det * (1.0 - p_det)))
}

/// `2 D_KL(p_theta || p_theta+delta) / delta^2`.
pub fn fisher_from_kl(p: &[f64], p_shifted: &[f64], delta: f64) -> Result<f64> {
    if p.len() != p_shifted.len() {
        return Err(Error::Support(format!("outcome counts differ: {} vs {}", p.len(), p_shifted.len())));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let mut d = 0.0;
    for (i, (&a, &b)) in p.iter().zip(p_shifted).enumerate() {
        if (a > 0.0) != (b > 0.0) {
            return Err(Error::Support(format!("outcome {i} is supported by only one distribution")));
        }
        if a > 0.0 {
            d += a * (a / b).ln();
        }
    }
    Ok(2.0 * d.max(0.0) / (delta * delta))
}

/// Fisher information summary for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherReport {
    pub f_try: f64,
    /// Detector-plane benchmark, when a detector-plane model is attached.
    pub f_std: Option<f64>,
    pub f_cond: f64,
    pub p_det: f64,
    pub dp_det: f64,
    pub f_launch: f64,
    pub score_mean_residual: f64,
    /// Finite-difference step that produced `dp_det`.
    pub fd_delta: f64,
}

/// Fixed-detector response `|K_beta(x0, y)|^2` of the two-path kernel, with
/// `beta` as the estimated parameter.
#[derive(Debug, Clone)]
pub struct BetaResponseModel {
    pub base: TwoPathBeta,
    pub x0: f64,
    pub ygrid: Grid1D,
}

impl ParamModel for BetaResponseModel {
    fn evaluate(&self, beta: f64) -> Result<Vec<f64>> {
        let k = TwoPathBeta { beta, ..self.base };
        Ok(self.ygrid.points().iter().map(|y| k.amplitude(self.x0 - y).norm_sqr()).collect())
    }

    fn analytic_derivative(&self, beta: f64) -> Option<Result<Vec<f64>>> {
        let k = TwoPathBeta { beta, ..self.base };
        Some(Ok(self
            .ygrid
            .points()
            .iter()
            .map(|y| {
                let s = self.x0 - y;
                2.0 * (k.amplitude(s).conj() * k.amplitude_dbeta(s)).re
            })
            .collect()))
    }
}

/// Detector-plane intensity `sum_y prior(y) |K_beta(x, y)|^2` of the two-path
/// kernel, with `beta` as the estimated parameter.
#[derive(Debug, Clone)]
pub struct BetaDetectorModel {
    pub base: TwoPathBeta,
    pub xgrid: Grid1D,
    pub prior: Dist1D,
}

impl BetaDetectorModel {
    fn fold(&self, beta: f64, f: impl Fn(&TwoPathBeta, f64) -> f64) -> Vec<f64> {
        let k = TwoPathBeta { beta, ..self.base };
        let ys = self.prior.grid().points();
        self.xgrid
            .points()
            .iter()
            .map(|&x| ys.iter().zip(self.prior.probs()).map(|(&y, &p)| p * f(&k, x - y)).sum())
            .collect()
    }
}

impl ParamModel for BetaDetectorModel {
    fn evaluate(&self, beta: f64) -> Result<Vec<f64>> {
        Ok(self.fold(beta, |k, s| k.amplitude(s).norm_sqr()))
    }

    fn analytic_derivative(&self, beta: f64) -> Option<Result<Vec<f64>>> {
        Some(Ok(self.fold(beta, |k, s| 2.0 * (k.amplitude(s).conj() * k.amplitude_dbeta(s)).re)))
    }
}
