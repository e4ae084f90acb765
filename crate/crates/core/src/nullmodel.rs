//! Regularized null-response model
//! `R_theta(y) = [eps_bar + c y^2 + theta q(y)]^2 + b` and the residual-depth
//! sweeps built on it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fisher::{launched_fisher, try_score, FisherReport, ParamModel};
use crate::infomeasures::entropy_of;
use crate::probcore::{Dist1D, Grid1D};
use crate::table::{fmt_f64, SweepTable};

/// First-order perturbation response `q(y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// `sin * sin(pi y) + lin * y`.
    SinLinear { sin: f64, lin: f64 },
    /// `c * eps(y)`: a perturbation locally proportional to the nominal response.
    Proportional(f64),
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation::SinLinear { sin: 1.0, lin: 0.35 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullModelSpec {
    /// Residual null depth.
    pub eps_bar: f64,
    /// Background floor, strictly positive.
    pub b: f64,
    /// Coefficient of `y^2` in the nominal response.
    pub curvature: f64,
    pub perturbation: Perturbation,
    pub ygrid: Grid1D,
    pub theta: f64,
}

impl Default for NullModelSpec {
    fn default() -> Self {
        Self {
            eps_bar: 0.05,
            b: 1e-3,
            curvature: 0.12,
            perturbation: Perturbation::default(),
            ygrid: Grid1D::new(-1.0, 1.0, 201).expect("static grid"),
            theta: 0.0,
        }
    }
}

impl NullModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(Error::InvalidParameter(format!("background floor b must be positive, got {}", self.b)));
        }
        if self.ygrid.lo() < -1.0 || self.ygrid.hi() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "source grid [{}, {}] must lie within [-1, 1]",
                self.ygrid.lo(),
                self.ygrid.hi()
            )));
        }
        for (name, v) in [("eps_bar", self.eps_bar), ("curvature", self.curvature), ("theta", self.theta)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn with_eps(&self, eps_bar: f64) -> Self {
        Self { eps_bar, ..self.clone() }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..self.clone() }
    }

    /// Nominal residual response `eps(y) = eps_bar + curvature * y^2`.
    pub fn epsilon(&self, y: f64) -> f64 {
        self.eps_bar + self.curvature * y * y
    }

    pub fn q(&self, y: f64) -> f64 {
        match self.perturbation {
            Perturbation::SinLinear { sin, lin } => sin * (std::f64::consts::PI * y).sin() + lin * y,
            Perturbation::Proportional(c) => c * self.epsilon(y),
        }
    }
}

/// `R(y) = [eps(y) + theta q(y)]^2 + b` over the source grid.
pub fn null_response(spec: &NullModelSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(spec.ygrid.points().iter().map(|&y| (spec.epsilon(y) + spec.theta * spec.q(y)).powi(2) + spec.b).collect())
}

/// Analytic `dR/dtheta = 2 [eps(y) + theta q(y)] q(y)`.
pub fn null_response_derivative(spec: &NullModelSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(spec
        .ygrid
        .points()
        .iter()
        .map(|&y| {
            let q = spec.q(y);
            2.0 * (spec.epsilon(y) + spec.theta * q) * q
        })
        .collect())
}

/// `d ln R / dtheta` at `theta = 0`: `2 eps(y) q(y) / (eps(y)^2 + b)`.
/// `spec.theta` is ignored.
pub fn null_log_derivative(spec: &NullModelSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(spec
        .ygrid
        .points()
        .iter()
        .map(|&y| {
            let e = spec.epsilon(y);
            2.0 * e * spec.q(y) / (e * e + spec.b)
        })
        .collect())
}

/// Complex form `2 Re[conj(eps) q] / (|eps|^2 + b)`.
pub fn complex_null_log_derivative(eps: &[Complex64], q: &[Complex64], b: f64) -> Result<Vec<f64>> {
    if eps.len() != q.len() {
        return Err(Error::GridMismatch("eps and q have different lengths".into()));
    }
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!("background floor b must be positive, got {b}")));
    }
    Ok(eps.iter().zip(q).map(|(e, q)| 2.0 * (e.conj() * q).re / (e.norm_sqr() + b)).collect())
}

/// The null model as a function of `theta`.
#[derive(Debug, Clone)]
pub struct NullModel {
    pub spec: NullModelSpec,
}

impl ParamModel for NullModel {
    fn evaluate(&self, theta: f64) -> Result<Vec<f64>> {
        null_response(&self.spec.with_theta(theta))
    }

    fn analytic_derivative(&self, theta: f64) -> Option<Result<Vec<f64>>> {
        Some(null_response_derivative(&self.spec.with_theta(theta)))
    }
}

/// Detection probability: `efficiency` times the grid average of `R`.
pub fn detection_probability(spec: &NullModelSpec, efficiency: f64) -> Result<f64> {
    let r = null_response(spec)?;
    Ok(efficiency * r.iter().sum::<f64>() / r.len() as f64)
}

/// Probabilities of the launched-photon record: `[no detection, detect and
/// y_0, detect and y_1, ...]` under a uniform source prior.
pub fn composite_record(spec: &NullModelSpec, efficiency: f64) -> Result<Vec<f64>> {
    let r = null_response(spec)?;
    let n = r.len() as f64;
    let detected: Vec<f64> = r.iter().map(|v| efficiency * v / n).collect();
    let p_det: f64 = detected.iter().sum();
    let mut out = Vec::with_capacity(r.len() + 1);
    out.push(1.0 - p_det);
    out.extend(detected);
    Ok(out)
}

/// One operating point of the null model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullPoint {
    pub eps_bar: f64,
    /// Entropy of the detected source-label conditional.
    pub h_cond: f64,
    pub fisher: FisherReport,
}

/// Evaluates entropy and Fisher information at `spec.theta`, with `dP_det`
/// by central difference of step `delta`.
pub fn evaluate_null_point(spec: &NullModelSpec, efficiency: f64, delta: f64) -> Result<NullPoint> {
    if !(efficiency > 0.0) {
        return Err(Error::InvalidParameter(format!("efficiency must be positive, got {efficiency}")));
    }
    let r = null_response(spec)?;
    let dr = null_response_derivative(spec)?;
    let prior = Dist1D::uniform(spec.ygrid);
    let score = try_score(&r, &dr, &prior)?;
    let f_cond = score.fisher();
    let p_det = detection_probability(spec, efficiency)?;
    let up = detection_probability(&spec.with_theta(spec.theta + delta), efficiency)?;
    let dn = detection_probability(&spec.with_theta(spec.theta - delta), efficiency)?;
    let dp_det = (up - dn) / (2.0 * delta);
    let f_launch = launched_fisher(p_det, dp_det, f_cond)?;
    Ok(NullPoint {
        eps_bar: spec.eps_bar,
        h_cond: entropy_of(&score.conditional),
        fisher: FisherReport {
            f_try: f_cond,
            f_std: None,
            f_cond,
            p_det,
            dp_det,
            f_launch,
            score_mean_residual: score.mean().abs(),
            fd_delta: delta,
        },
    })
}

/// `n` logarithmically spaced values on `[lo, hi]`, endpoints exact.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::InvalidParameter(format!("need 0 < lo < hi and n >= 2, got [{lo}, {hi}], n={n}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

pub const NULL_SWEEP_COLUMNS: [&str; 8] =
    ["eps_bar", "H_cond", "F_cond", "F_cond_norm", "P_det", "P_det_norm", "F_launch", "PF_norm"];

/// Assembles evaluated points into a table sorted by `eps_bar`, adding the
/// max-normalized columns.
pub fn null_table(mut points: Vec<NullPoint>, base: &NullModelSpec, efficiency: f64, delta: f64) -> Result<SweepTable> {
    points.sort_by(|a, b| a.eps_bar.total_cmp(&b.eps_bar));
    let max_of = |f: &dyn Fn(&NullPoint) -> f64| points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let f_max = max_of(&|p| p.fisher.f_cond);
    let p_max = max_of(&|p| p.fisher.p_det);
    let pf_max = max_of(&|p| p.fisher.p_det * p.fisher.f_cond);
    let norm = |v: f64, m: f64| if m > 0.0 { v / m } else { 0.0 };

    let mut t = SweepTable::new("null-sweep", &NULL_SWEEP_COLUMNS);
    let perturbation = match base.perturbation {
        Perturbation::SinLinear { sin, lin } => format!("sin*{} + y*{}", fmt_f64(sin), fmt_f64(lin)),
        Perturbation::Proportional(c) => format!("epsilon*{}", fmt_f64(c)),
    };
    t.meta("b", fmt_f64(base.b))
        .meta("curvature", fmt_f64(base.curvature))
        .meta("perturbation", perturbation)
        .meta("theta", fmt_f64(base.theta))
        .meta("ygrid_lo", fmt_f64(base.ygrid.lo()))
        .meta("ygrid_hi", fmt_f64(base.ygrid.hi()))
        .meta("ygrid_n", base.ygrid.len())
        .meta("efficiency", fmt_f64(efficiency))
        .meta("fd_delta", fmt_f64(delta))
        .meta("eps_count", points.len());
    for p in &points {
        let f = &p.fisher;
        t.push_row(vec![
            p.eps_bar,
            p.h_cond,
            f.f_cond,
            norm(f.f_cond, f_max),
            f.p_det,
            norm(f.p_det, p_max),
            f.f_launch,
            norm(f.p_det * f.f_cond, pf_max),
        ])?;
    }
    Ok(t)
}

/// Serial residual-depth sweep at fixed floor `b`.
pub fn null_sweep(eps_grid: &[f64], b: f64, base: &NullModelSpec, efficiency: f64, delta: f64) -> Result<SweepTable> {
    if let Some(e) = eps_grid.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidParameter(format!("eps_bar values must be positive, got {e}")));
    }
    let base = NullModelSpec { b, ..base.clone() };
    let points = eps_grid
        .iter()
        .map(|&e| evaluate_null_point(&base.with_eps(e), efficiency, delta))
        .collect::<Result<Vec<_>>>()?;
    null_table(points, &base, efficiency, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{derivative_gap, fisher_from_kl};
    use crate::probcore::make_grid;

    #[test]
    fn pure_floor() {
        let spec = NullModelSpec { eps_bar: 0.0, curvature: 0.0, b: 2e-3, ..Default::default() };
        assert!(null_response(&spec).unwrap().iter().all(|&r| r == 2e-3));
    }

    #[test]
    fn plug_in_values() {
        let spec = NullModelSpec { eps_bar: 0.1, ..Default::default() };
        let r = null_response(&spec).unwrap();
        assert!((r[100] - (0.01 + 1e-3)).abs() < 1e-17);
        // y = 0.5 sits at index 150 of the default 201-point grid.
        assert!((r[150] - 0.0179).abs() < 1e-15);
    }

    #[test]
    fn log_derivative_examples() {
        let flat = NullModelSpec { perturbation: Perturbation::SinLinear { sin: 0.0, lin: 0.0 }, ..Default::default() };
        assert!(null_log_derivative(&flat).unwrap().iter().all(|&v| v == 0.0));
        let dark = NullModelSpec { eps_bar: 0.0, curvature: 0.0, ..Default::default() };
        assert!(null_log_derivative(&dark).unwrap().iter().all(|&v| v == 0.0));
        let spec = NullModelSpec { eps_bar: 0.05, ..Default::default() };
        let g = null_log_derivative(&spec).unwrap();
        let oracle = 2.0 * (0.05 + 0.03) * (1.0 + 0.35 * 0.5) / (0.08f64.powi(2) + 1e-3);
        assert!((g[150] - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn complex_log_derivative_reduces_to_real_form() {
        let spec = NullModelSpec::default();
        let ys = spec.ygrid.points();
        let eps: Vec<Complex64> = ys.iter().map(|&y| spec.epsilon(y).into()).collect();
        let q: Vec<Complex64> = ys.iter().map(|&y| spec.q(y).into()).collect();
        let c = complex_null_log_derivative(&eps, &q, spec.b).unwrap();
        assert_eq!(c, null_log_derivative(&spec).unwrap());
        // A quadrature perturbation (i q against real eps) leaves |A|^2 stationary.
        let iq: Vec<Complex64> = q.iter().map(|v| v * Complex64::i()).collect();
        assert!(complex_null_log_derivative(&eps, &iq, spec.b).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert!(complex_null_log_derivative(&eps, &q, 0.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(null_response(&NullModelSpec { b: 0.0, ..Default::default() }).is_err());
        let wide = NullModelSpec { ygrid: make_grid(-2.0, 1.0, 11).unwrap(), ..Default::default() };
        assert!(null_response(&wide).is_err());
    }

    #[test]
    fn analytic_derivative_matches_central_difference() {
        for theta in [0.0, 0.07, -0.2] {
            let m = NullModel { spec: NullModelSpec { eps_bar: 0.05, theta, ..Default::default() } };
            let gap = derivative_gap(&m, theta, 1e-5).unwrap().unwrap();
            assert!(gap < 1e-6, "theta={theta}: {gap}");
        }
    }

    #[test]
    fn score_mean_vanishes() {
        let spec = NullModelSpec { eps_bar: 0.1, b: 1e-3, ..Default::default() };
        let p = evaluate_null_point(&spec, 1.0, 1e-5).unwrap();
        assert!(p.fisher.score_mean_residual < 1e-12);
        assert!(p.fisher.f_launch >= p.fisher.p_det * p.fisher.f_cond);
    }

    #[test]
    fn fisher_matches_kl_curvature() {
        let spec = NullModelSpec { eps_bar: 0.05, b: 1e-3, ..Default::default() };
        let f = evaluate_null_point(&spec, 1.0, 1e-5).unwrap().fisher.f_cond;
        let d = 1e-4;
        let p0 = Dist1D::from_weights(spec.ygrid, &null_response(&spec).unwrap()).unwrap();
        let p1 = Dist1D::from_weights(spec.ygrid, &null_response(&spec.with_theta(d)).unwrap()).unwrap();
        let fk = fisher_from_kl(p0.probs(), p1.probs(), d).unwrap();
        assert!((f - fk).abs() / f < 0.01, "{f} vs {fk}");
    }

    #[test]
    fn launched_fisher_matches_composite_record() {
        let spec = NullModelSpec { eps_bar: 0.1, b: 1e-3, ..Default::default() };
        let p = evaluate_null_point(&spec, 1.0, 1e-5).unwrap();
        let d = 1e-4;
        let fk = fisher_from_kl(
            &composite_record(&spec, 1.0).unwrap(),
            &composite_record(&spec.with_theta(d), 1.0).unwrap(),
            d,
        )
        .unwrap();
        assert!((p.fisher.f_launch - fk).abs() / fk < 0.01, "{} vs {fk}", p.fisher.f_launch);
    }

    #[test]
    fn constant_nominal_makes_proportional_perturbation_common_mode() {
        // With zero curvature both eps and q are flat, so d ln R is constant.
        let spec =
            NullModelSpec { curvature: 0.0, perturbation: Perturbation::Proportional(1.7), ..Default::default() };
        let p = evaluate_null_point(&spec, 1.0, 1e-5).unwrap();
        assert!(p.fisher.f_cond < 1e-12);
    }

    #[test]
    fn proportional_perturbation_is_suppressed_by_vanishing_floor() {
        // With curvature the floor breaks exact proportionality; F_cond shrinks with b.
        let f = |b: f64| {
            let spec = NullModelSpec { b, perturbation: Perturbation::Proportional(1.0), ..Default::default() };
            evaluate_null_point(&spec, 1.0, 1e-5).unwrap().fisher.f_cond
        };
        let (f1, f2, f3) = (f(1e-3), f(1e-6), f(1e-9));
        assert!(f1 > f2 && f2 > f3);
        assert!(f3 < 1e-9);
    }

    #[test]
    fn log_spacing() {
        let v = log_spaced(0.005, 0.35, 60).unwrap();
        assert_eq!(v.len(), 60);
        assert_eq!(v[0], 0.005);
        assert_eq!(v[59], 0.35);
        let r = v[1] / v[0];
        assert!(v.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
        assert!(log_spaced(0.0, 1.0, 5).is_err());
    }

    #[test]
    fn sweep_table_shape_and_normalization() {
        let eps = log_spaced(0.005, 0.35, 12).unwrap();
        let t = null_sweep(&eps, 1e-3, &NullModelSpec::default(), 1.0, 1e-5).unwrap();
        assert_eq!(t.rows().len(), 12);
        assert_eq!(t.columns(), &NULL_SWEEP_COLUMNS.map(String::from));
        for name in ["F_cond_norm", "P_det_norm", "PF_norm"] {
            let c = t.column(name).unwrap();
            assert_eq!(c.iter().cloned().fold(0.0, f64::max), 1.0);
        }
        // P_det is largest at the largest residual depth.
        let p = t.column("P_det").unwrap();
        assert_eq!(p.last(), Some(&p.iter().cloned().fold(0.0, f64::max)));
        assert!(null_sweep(&[0.1, 0.0], 1e-3, &NullModelSpec::default(), 1.0, 1e-5).is_err());
    }
}
