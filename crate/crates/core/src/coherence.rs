//! Coherence-matrix entropy: unit-trace Hermitian PSD matrices, their modal
//! spectra, unitary propagation and mode truncation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::infomeasures::entropy_of;
use crate::linalg::{hermitian_eigen, CMatrix};

/// Eigenvalues above `-PSD_TOL` are clamped to zero; anything lower is a
/// violated PSD precondition.
pub const PSD_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-12;

/// Unit-trace Hermitian positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceMatrix {
    rho: CMatrix,
}

impl CoherenceMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    /// Eigenvalue spectrum, sorted descending.
    pub fn spectrum(&self) -> Result<ModeSpectrum> {
        let eig = hermitian_eigen(&self.rho)?;
        let min = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(Error::NotPsd(min));
        }
        ModeSpectrum::new(eig.values.iter().map(|&v| v.max(0.0)).collect())
    }

    /// `U diag(spectrum) U^H`.
    pub fn from_spectrum(spectrum: &ModeSpectrum, u: &CMatrix) -> Result<Self> {
        if u.dim() != spectrum.len() {
            return Err(Error::InvalidParameter(format!(
                "{}-mode spectrum with a {}x{} unitary",
                spectrum.len(),
                u.dim(),
                u.dim()
            )));
        }
        apply_unitary(&CoherenceMatrix { rho: CMatrix::from_diag(spectrum.values()) }, u)
    }
}

/// `rho = Gamma / Tr Gamma`, rejecting non-Hermitian, non-PSD or zero-trace input.
pub fn normalize_coherence(gamma: &CMatrix) -> Result<CoherenceMatrix> {
    let scale = gamma.max_abs().max(1.0);
    let dev = gamma.hermitian_deviation();
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(dev));
    }
    let tr = gamma.trace().re;
    if !(tr > 0.0) {
        return Err(Error::NonPositiveTrace(tr));
    }
    let rho = CoherenceMatrix { rho: gamma.scale(1.0 / tr) };
    // Trace-normalized, so the PSD tolerance is scale-free here.
    rho.spectrum()?;
    Ok(rho)
}

/// `-sum lambda ln lambda` over the eigenvalues of `rho`.
pub fn coherence_entropy(rho: &CoherenceMatrix) -> Result<f64> {
    Ok(rho.spectrum()?.entropy())
}

/// Nonnegative unit-sum modal weights, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    lambda: Vec<f64>,
}

impl ModeSpectrum {
    pub fn new(mut lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidParameter("empty spectrum".into()));
        }
        if let Some(v) = lambda.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidDistribution(format!("modal weight {v} is not a nonnegative number")));
        }
        let total: f64 = lambda.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("modal weights sum to {total:.17}")));
        }
        lambda.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { lambda })
    }

    pub fn values(&self) -> &[f64] {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.lambda)
    }
}

/// `lambda_n = exp(-n/2) / sum_m exp(-m/2)`, `n = 0..N-1`.
pub fn geometric_spectrum(n: usize) -> Result<ModeSpectrum> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one mode".into()));
    }
    let w: Vec<f64> = (0..n).map(|k| (-0.5 * k as f64).exp()).collect();
    let z: f64 = w.iter().sum();
    ModeSpectrum::new(w.iter().map(|v| v / z).collect())
}

/// `U rho U^H`; `U` must be unitary within `1e-12`.
pub fn apply_unitary(rho: &CoherenceMatrix, u: &CMatrix) -> Result<CoherenceMatrix> {
    if u.dim() != rho.dim() {
        return Err(Error::InvalidParameter("unitary and coherence matrix dimensions differ".into()));
    }
    let dev = u.unitary_deviation();
    if dev > UNITARY_TOL {
        return Err(Error::NotUnitary(dev));
    }
    let out = &(u * &rho.rho) * &u.adjoint();
    Ok(CoherenceMatrix { rho: out })
}

/// Generic nonunitary filter `M rho M^H / Tr(M rho M^H)`.
pub fn apply_filter(rho: &CoherenceMatrix, m: &CMatrix) -> Result<CoherenceMatrix> {
    if m.dim() != rho.dim() {
        return Err(Error::InvalidParameter("filter and coherence matrix dimensions differ".into()));
    }
    normalize_coherence(&(&(m * &rho.rho) * &m.adjoint()))
}

/// Keeps the first `m` modes and renormalizes.
pub fn truncate_modes(spectrum: &ModeSpectrum, m: usize) -> Result<ModeSpectrum> {
    if m == 0 || m > spectrum.len() {
        return Err(Error::InvalidParameter(format!("keep count {m} outside 1..={}", spectrum.len())));
    }
    if m == spectrum.len() {
        return Ok(spectrum.clone());
    }
    let kept = &spectrum.lambda[..m];
    let z: f64 = kept.iter().sum();
    if !(z > 0.0) {
        return Err(Error::InvalidDistribution("retained modes carry no weight".into()));
    }
    ModeSpectrum::new(kept.iter().map(|v| v / z).collect())
}

/// Deterministic-per-seed unitary: random diagonal phases followed by two
/// passes of Givens rotations with random angles and phases over every pair.
pub fn random_unitary(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = CMatrix::zeros(n);
    for i in 0..n {
        u[(i, i)] = Complex64::from_polar(1.0, rng.gen_range(-PI..PI));
    }
    for _ in 0..2 {
        for p in 0..n {
            for q in p + 1..n {
                let theta: f64 = rng.gen_range(0.0..PI);
                let phi: f64 = rng.gen_range(-PI..PI);
                let (c, s) = (theta.cos(), theta.sin());
                let e = Complex64::from_polar(1.0, phi);
                // Columns p, q times [[c, -e s], [conj(e) s, c]].
                for k in 0..n {
                    let (a, b) = (u[(k, p)], u[(k, q)]);
                    u[(k, p)] = a * c + b * e.conj() * s;
                    u[(k, q)] = -a * e * s + b * c;
                }
            }
        }
    }
    u
}
