//! Run configuration: a TOML file with one table per concern. Every field has
//! a default, so an empty file (or no file) reproduces the reference figures.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tryinfo::kernels::{DiscreteSlits, GeneralAperture, KernelSpec, Slit, TwoPathBeta};
use tryinfo::nullmodel::{NullModelSpec, Perturbation};
use tryinfo::{Acceptance, Complex64, Dist1D, Grid1D};

use crate::error::CliError;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub kernel: KernelConfig,
    pub detector: DetectorConfig,
    pub prior: PriorConfig,
    pub sweep_beta: BetaSweepConfig,
    pub null: NullConfig,
    pub coherence: CoherenceConfig,
    pub numerics: NumericsConfig,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { lo: -3.0, hi: 3.0, n: 512 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    TwoPathBeta,
    DiscreteSlits,
    Aperture,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub beta: f64,
    pub d: f64,
    pub sigma: f64,
    pub k: f64,
    pub ls: f64,
    pub ld: f64,
    pub slit_positions: Vec<f64>,
    pub slit_amplitudes: Vec<f64>,
    pub slit_phases: Vec<f64>,
    pub slit_width: f64,
    pub cells_per_width: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kind: KernelKind::TwoPathBeta,
            beta: 0.0,
            d: 1.3,
            sigma: 0.65,
            k: 10.0,
            ls: 10.0,
            ld: 10.0,
            slit_positions: vec![-0.65, 0.65],
            slit_amplitudes: vec![1.0, 1.0],
            slit_phases: vec![0.0, 0.0],
            slit_width: 0.01,
            cells_per_width: 16,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub x0: f64,
    /// Half-width in grid cells of a boxcar window; 0 is a point detector.
    pub half_width: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { x0: 0.0, half_width: 0 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    Uniform,
    Weights,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub kind: PriorKind,
    /// Whitespace- or newline-separated nonnegative weights, one per source point.
    pub file: Option<PathBuf>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { kind: PriorKind::Uniform, file: None }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BetaSweepConfig {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Default for BetaSweepConfig {
    fn default() -> Self {
        Self { start: 0.0, stop: 2.5, count: 51 }
    }
}

impl BetaSweepConfig {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i == self.count - 1 { self.stop } else { self.start + i as f64 * step }).collect()
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NullConfig {
    pub eps_min: f64,
    pub eps_max: f64,
    pub count: usize,
    pub b: Vec<f64>,
    pub ny: usize,
    pub curvature: f64,
    pub q_sin: f64,
    pub q_lin: f64,
    pub theta: f64,
    /// Overall detection efficiency multiplying the response.
    pub efficiency: f64,
}

impl Default for NullConfig {
    fn default() -> Self {
        Self {
            eps_min: 0.005,
            eps_max: 0.35,
            count: 60,
            b: vec![1e-4, 1e-3, 1e-2],
            ny: 201,
            curvature: 0.12,
            q_sin: 1.0,
            q_lin: 0.35,
            theta: 0.0,
            efficiency: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceConfig {
    pub modes: usize,
    pub seed: u64,
    pub unitaries: usize,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self { modes: 12, seed: 42, unitaries: 20 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// Central-difference step for parameter derivatives.
    pub fd_delta: f64,
    /// Parameter shift for the KL-curvature Fisher estimate.
    pub kl_delta: f64,
    /// Absolute tolerance for identity residuals.
    pub tolerance: f64,
    /// Relative tolerance for Fisher estimates that should agree.
    pub fisher_rtol: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self { fd_delta: 1e-5, kl_delta: 1e-4, tolerance: 1e-10, fisher_rtol: 0.01 }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field before any computation runs.
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid()?;
        let k = &self.kernel;
        match k.kind {
            KernelKind::TwoPathBeta => {
                if !(k.sigma > 0.0) {
                    return Err(invalid("kernel.sigma", "must be positive"));
                }
                if !(k.d >= 0.0) {
                    return Err(invalid("kernel.d", "must be nonnegative"));
                }
            }
            KernelKind::DiscreteSlits | KernelKind::Aperture => {
                for (name, v) in [("kernel.k", k.k), ("kernel.ls", k.ls), ("kernel.ld", k.ld)] {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(invalid(name, "must be positive"));
                    }
                }
                if k.slit_positions.is_empty() {
                    return Err(invalid("kernel.slit_positions", "need at least one slit"));
                }
                if k.slit_amplitudes.len() != k.slit_positions.len() {
                    return Err(invalid("kernel.slit_amplitudes", "need one amplitude per slit"));
                }
                if k.slit_phases.len() != k.slit_positions.len() {
                    return Err(invalid("kernel.slit_phases", "need one phase per slit"));
                }
                if k.kind == KernelKind::Aperture {
                    if !(k.slit_width > 0.0) {
                        return Err(invalid("kernel.slit_width", "must be positive"));
                    }
                    if k.cells_per_width == 0 {
                        return Err(invalid("kernel.cells_per_width", "must be positive"));
                    }
                }
            }
        }
        if !self.detector.x0.is_finite() {
            return Err(invalid("detector.x0", "must be finite"));
        }
        if self.prior.kind == PriorKind::Weights && self.prior.file.is_none() {
            return Err(invalid("prior.file", "required when prior.kind = \"weights\""));
        }
        let s = &self.sweep_beta;
        if s.count == 0 {
            return Err(invalid("sweep_beta.count", "must be at least 1"));
        }
        if !s.start.is_finite() || !s.stop.is_finite() || s.stop < s.start {
            return Err(invalid("sweep_beta", "need finite start <= stop"));
        }
        let n = &self.null;
        if !(n.eps_min > 0.0) || !(n.eps_max > n.eps_min) {
            return Err(invalid("null.eps_min/eps_max", "need 0 < eps_min < eps_max"));
        }
        if n.count < 2 {
            return Err(invalid("null.count", "need at least 2 points"));
        }
        if n.b.is_empty() || n.b.iter().any(|b| !(*b > 0.0)) {
            return Err(invalid("null.b", "need at least one strictly positive floor"));
        }
        if n.ny < 2 {
            return Err(invalid("null.ny", "need at least 2 points"));
        }
        if !(n.efficiency > 0.0) {
            return Err(invalid("null.efficiency", "must be positive"));
        }
        if self.coherence.modes == 0 {
            return Err(invalid("coherence.modes", "must be at least 1"));
        }
        let num = &self.numerics;
        for (name, v) in [
            ("numerics.fd_delta", num.fd_delta),
            ("numerics.kl_delta", num.kl_delta),
            ("numerics.tolerance", num.tolerance),
            ("numerics.fisher_rtol", num.fisher_rtol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Grid1D::new(self.grid.lo, self.grid.hi, self.grid.n).map_err(|e| invalid("grid", e))
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, CliError> {
        let k = &self.kernel;
        Ok(match k.kind {
            KernelKind::TwoPathBeta => {
                KernelSpec::TwoPathBeta(TwoPathBeta::new(k.beta, k.d, k.sigma).map_err(|e| invalid("kernel", e))?)
            }
            KernelKind::DiscreteSlits => KernelSpec::DiscreteSlits(DiscreteSlits {
                slits: k
                    .slit_positions
                    .iter()
                    .zip(&k.slit_amplitudes)
                    .zip(&k.slit_phases)
                    .map(|((&u, &a), &phi)| Slit { position: u, amplitude: c(a), phase: phi })
                    .collect(),
                k: k.k,
                ls: k.ls,
                ld: k.ld,
                c: c(1.0),
            }),
            KernelKind::Aperture => {
                let mut ap = GeneralAperture::rectangular_slits(
                    &k.slit_positions,
                    k.slit_width,
                    k.cells_per_width,
                    k.k,
                    k.ls,
                    k.ld,
                )
                .map_err(|e| invalid("kernel", e))?;
                // Per-opening amplitude and phase applied to the sampled transmission.
                for (i, t) in ap.transmission.iter_mut().enumerate() {
                    let u = ap.slit_grid.point(i);
                    if let Some(m) = nearest(&k.slit_positions, u) {
                        *t *= Complex64::from_polar(k.slit_amplitudes[m], k.slit_phases[m]);
                    }
                }
                KernelSpec::GeneralAperture(ap)
            }
        })
    }

    pub fn prior(&self, grid: Grid1D) -> Result<Dist1D, CliError> {
        match self.prior.kind {
            PriorKind::Uniform => Ok(Dist1D::uniform(grid)),
            PriorKind::Weights => {
                let path = self.prior.file.as_ref().expect("validated");
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let w: Vec<f64> = text
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| invalid("prior.file", format!("{}: {e}", path.display())))?;
                Dist1D::from_weights(grid, &w).map_err(|e| invalid("prior.file", e))
            }
        }
    }

    pub fn acceptance(&self, grid: &Grid1D) -> Acceptance {
        match self.detector.half_width {
            0 => Acceptance::point(grid, self.detector.x0),
            h => Acceptance::boxcar(grid, self.detector.x0, h),
        }
    }

    pub fn null_base(&self) -> Result<NullModelSpec, CliError> {
        let n = &self.null;
        let ygrid = Grid1D::new(-1.0, 1.0, n.ny).map_err(|e| invalid("null.ny", e))?;
        Ok(NullModelSpec {
            eps_bar: n.eps_min,
            b: n.b[0],
            curvature: n.curvature,
            perturbation: Perturbation::SinLinear { sin: n.q_sin, lin: n.q_lin },
            ygrid,
            theta: n.theta,
        })
    }
}

fn nearest(centres: &[f64], u: f64) -> Option<usize> {
    centres.iter().enumerate().min_by(|a, b| (a.1 - u).abs().total_cmp(&(b.1 - u).abs())).map(|(i, _)| i)
}
