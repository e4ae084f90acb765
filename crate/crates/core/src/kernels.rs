//! Reciprocal source-detector amplitudes `K(x, y)`.
//!
//! Three constructors are provided: the paraxial Fresnel aperture integral
//! (trapezoid quadrature over the slit plane), its narrow-slit limit, and the
//! dimensionless two-path kernel with a quadratic phase coefficient `beta`.
//! Overall constants are fixed to one; every downstream quantity is computed
//! from normalized distributions and does not see them.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::probcore::{normalize_joint, Acceptance, Dist1D, Grid1D, JointDist};
use crate::table::fmt_f64;

/// A single narrow slit: position in the slit plane, complex transmission and
/// an extra phase (the perturbation hook).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slit {
    pub position: f64,
    pub amplitude: Complex64,
    pub phase: f64,
}

impl Slit {
    pub fn new(position: f64, amplitude: Complex64) -> Self {
        Self { position, amplitude, phase: 0.0 }
    }
}

/// Sampled aperture transmission with propagation geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralAperture {
    pub slit_grid: Grid1D,
    pub transmission: Vec<Complex64>,
    /// Wavenumber.
    pub k: f64,
    /// Source to slit distance.
    pub ls: f64,
    /// Slit to detector distance.
    pub ld: f64,
}

impl GeneralAperture {
    /// Rectangular openings of width `width` centred on `centres`, each with
    /// unit integrated transmission (height `1 / width`). The slit grid spans
    /// the openings plus one width of margin, with `cells_per_width` samples
    /// per opening. Cells straddling an edge get the covered fraction, so the
    /// trapezoid rule integrates each opening to exactly one.
    pub fn rectangular_slits(
        centres: &[f64],
        width: f64,
        cells_per_width: usize,
        k: f64,
        ls: f64,
        ld: f64,
    ) -> Result<Self> {
        if centres.is_empty() {
            return Err(Error::InvalidKernel("need at least one opening".into()));
        }
        if !(width > 0.0) || cells_per_width == 0 {
            return Err(Error::InvalidKernel("opening width and sampling must be positive".into()));
        }
        let cmin = centres.iter().cloned().fold(f64::INFINITY, f64::min);
        let cmax = centres.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let h = width / cells_per_width as f64;
        let lo = cmin - width;
        let n = ((cmax + width - lo) / h).ceil() as usize + 1;
        let slit_grid = Grid1D::new(lo, lo + (n - 1) as f64 * h, n)?;
        let height = 1.0 / width;
        let mut transmission = vec![Complex64::new(0.0, 0.0); n];
        for (i, t) in transmission.iter_mut().enumerate() {
            let u = slit_grid.point(i);
            // Dual cell of the trapezoid rule, halved at the grid ends.
            let a = if i == 0 { u } else { u - 0.5 * h };
            let b = if i == n - 1 { u } else { u + 0.5 * h };
            let cell = b - a;
            let covered: f64 =
                centres.iter().map(|c| ((c + 0.5 * width).min(b) - (c - 0.5 * width).max(a)).max(0.0)).sum();
            if covered > 0.0 {
                *t = Complex64::new(height * (covered / cell).min(1.0), 0.0);
            }
        }
        Ok(Self { slit_grid, transmission, k, ls, ld })
    }

    fn validate(&self) -> Result<()> {
        validate_geometry(self.k, self.ls, self.ld)?;
        if self.transmission.len() != self.slit_grid.len() {
            return Err(Error::InvalidKernel(format!(
                "{} transmission samples for a slit grid of {} points",
                self.transmission.len(),
                self.slit_grid.len()
            )));
        }
        if self.transmission.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::InvalidKernel("transmission must be finite".into()));
        }
        Ok(())
    }
}

/// Ideal narrow-slit aperture.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSlits {
    pub slits: Vec<Slit>,
    pub k: f64,
    pub ls: f64,
    pub ld: f64,
    /// Common normalization constant.
    pub c: Complex64,
}

impl DiscreteSlits {
    /// Two slits at `+-d/2` with the given amplitudes.
    pub fn double(d: f64, a_minus: Complex64, a_plus: Complex64, k: f64, ls: f64, ld: f64) -> Self {
        Self {
            slits: vec![Slit::new(-0.5 * d, a_minus), Slit::new(0.5 * d, a_plus)],
            k,
            ls,
            ld,
            c: Complex64::new(1.0, 0.0),
        }
    }

    /// Copy with each slit phase replaced by `profile(position, theta)`.
    ///
    /// A uniform phase, a tilt (`theta * u`) or any tabulated per-slit
    /// perturbation goes through here.
    pub fn with_phase_profile(&self, theta: f64, profile: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.slits {
            s.phase = profile(s.position, theta);
        }
        out
    }

    fn validate(&self) -> Result<()> {
        validate_geometry(self.k, self.ls, self.ld)?;
        if self.slits.is_empty() {
            return Err(Error::InvalidKernel("need at least one slit".into()));
        }
        Ok(())
    }
}

/// Dimensionless two-path amplitude: two Gaussian paths offset by `+-d/2`
/// in `x - y`, each carrying a quadratic phase `beta * (x - y -+ d/2)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPathBeta {
    pub beta: f64,
    pub d: f64,
    pub sigma: f64,
}

impl Default for TwoPathBeta {
    fn default() -> Self {
        Self { beta: 0.0, d: 1.3, sigma: 0.65 }
    }
}

impl TwoPathBeta {
    pub fn new(beta: f64, d: f64, sigma: f64) -> Result<Self> {
        let s = Self { beta, d, sigma };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidKernel(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.d >= 0.0) || !self.d.is_finite() || !self.beta.is_finite() {
            return Err(Error::InvalidKernel(format!("need finite beta and d >= 0, got d={}", self.d)));
        }
        Ok(())
    }

    /// Amplitude as a function of the offset `s = x - y`.
    pub fn amplitude(&self, s: f64) -> Complex64 {
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        let path = |a: f64| {
            let a2 = a * a;
            Complex64::from_polar((-a2 * inv).exp(), self.beta * a2)
        };
        path(s - 0.5 * self.d) + path(s + 0.5 * self.d)
    }

    /// Derivative of [`Self::amplitude`] with respect to `beta`.
    pub fn amplitude_dbeta(&self, s: f64) -> Complex64 {
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        let path = |a: f64| {
            let a2 = a * a;
            Complex64::new(0.0, a2) * Complex64::from_polar((-a2 * inv).exp(), self.beta * a2)
        };
        path(s - 0.5 * self.d) + path(s + 0.5 * self.d)
    }

    /// Largest phase change of the quadratic terms between neighbouring
    /// offsets on `x - y` when both axes are sampled by `grid`.
    pub fn max_phase_step(&self, xgrid: &Grid1D, ygrid: &Grid1D) -> f64 {
        let smax = (xgrid.hi() - ygrid.lo()).abs().max((xgrid.lo() - ygrid.hi()).abs()) + 0.5 * self.d;
        2.0 * self.beta.abs() * smax * xgrid.spacing().max(ygrid.spacing())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    GeneralAperture(GeneralAperture),
    DiscreteSlits(DiscreteSlits),
    TwoPathBeta(TwoPathBeta),
}

impl KernelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::GeneralAperture(_) => "general-aperture",
            KernelSpec::DiscreteSlits(_) => "discrete-slits",
            KernelSpec::TwoPathBeta(_) => "two-path-beta",
        }
    }

    pub fn build(&self, xgrid: Grid1D, ygrid: Grid1D) -> Result<ComplexKernel> {
        match self {
            KernelSpec::GeneralAperture(s) => fresnel_aperture_kernel(s, xgrid, ygrid),
            KernelSpec::DiscreteSlits(s) => discrete_slit_kernel(s, xgrid, ygrid),
            KernelSpec::TwoPathBeta(s) => two_path_beta_kernel(s, xgrid, ygrid),
        }
    }
}

fn validate_geometry(k: f64, ls: f64, ld: f64) -> Result<()> {
    for (name, v) in [("k", k), ("Ls", ls), ("Ld", ld)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidKernel(format!("{name} must be positive and finite, got {v}")));
        }
    }
    Ok(())
}

/// Complex amplitude sampled on a detector x source grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexKernel {
    xgrid: Grid1D,
    ygrid: Grid1D,
    k: Vec<Complex64>,
    spec: KernelSpec,
}

impl ComplexKernel {
    fn from_fn(xgrid: Grid1D, ygrid: Grid1D, spec: KernelSpec, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let xs = xgrid.points();
        let ys = ygrid.points();
        let mut k = Vec::with_capacity(xs.len() * ys.len());
        for &x in &xs {
            for &y in &ys {
                k.push(f(x, y));
            }
        }
        let out = Self { xgrid, ygrid, k, spec };
        out.check_finite()?;
        Ok(out)
    }

    fn check_finite(&self) -> Result<()> {
        if self.k.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidKernel("kernel contains non-finite entries".into()));
        }
        Ok(())
    }

    pub fn xgrid(&self) -> &Grid1D {
        &self.xgrid
    }

    pub fn ygrid(&self) -> &Grid1D {
        &self.ygrid
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Complex64] {
        &self.k
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.k[i * self.ygrid.len() + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let ny = self.ygrid.len();
        &self.k[i * ny..(i + 1) * ny]
    }

    /// `|K(x_i, y_j)|^2` in row-major order.
    pub fn abs2(&self) -> Vec<f64> {
        self.k.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Fixed-detector response `|K(x_i, y)|^2` over the source grid.
    pub fn response_at(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|z| z.norm_sqr()).collect()
    }

    /// Same kernel multiplied by a complex constant.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self { k: self.k.iter().map(|z| z * c).collect(), ..self.clone() }
    }

    /// Writes the kernel as CSV with header `x,y,re,im,abs2`, row-major over
    /// `(x_i, y_j)`, 17 significant digits per float.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,re,im,abs2")?;
        let xs = self.xgrid.points();
        let ys = self.ygrid.points();
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                let z = self.get(i, j);
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt_f64(x),
                    fmt_f64(y),
                    fmt_f64(z.re),
                    fmt_f64(z.im),
                    fmt_f64(z.norm_sqr())
                )?;
            }
        }
        Ok(())
    }
}

/// One row of a kernel dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRecord {
    pub x: f64,
    pub y: f64,
    pub re: f64,
    pub im: f64,
    pub abs2: f64,
}

/// Reads a kernel dump written by [`ComplexKernel::write_csv`]. Lines starting
/// with `#` are skipped.
pub fn read_kernel_csv<R: BufRead>(r: R) -> Result<Vec<KernelRecord>> {
    let mut out = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "x,y,re,im,abs2" {
                return Err(Error::Parse(format!("unexpected header {line:?}")));
            }
            saw_header = true;
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if v.len() != 5 {
            return Err(Error::Parse(format!("line {}: expected 5 fields, got {}", lineno + 1, v.len())));
        }
        out.push(KernelRecord { x: v[0], y: v[1], re: v[2], im: v[3], abs2: v[4] });
    }
    if !saw_header {
        return Err(Error::Parse("missing header".into()));
    }
    Ok(out)
}

/// Trapezoid quadrature of the paraxial aperture integral
/// `K(x, y) = int du T(u) exp[i k (u - y)^2 / (2 Ls) + i k (x - u)^2 / (2 Ld)]`.
///
/// Fails when the slit grid steps the Fresnel phase by `pi` or more anywhere
/// on the transmitting support for the given detector and source ranges.
pub fn fresnel_aperture_kernel(spec: &GeneralAperture, xgrid: Grid1D, ygrid: Grid1D) -> Result<ComplexKernel> {
    spec.validate()?;
    let ug = spec.slit_grid;
    let h = ug.spacing();
    let nu = ug.len();
    let active: Vec<(f64, Complex64)> = (0..nu)
        .filter(|&m| spec.transmission[m] != Complex64::new(0.0, 0.0))
        .map(|m| {
            let w = if m == 0 || m == nu - 1 { 0.5 * h } else { h };
            (ug.point(m), spec.transmission[m] * w)
        })
        .collect();

    if let (Some(first), Some(last)) = (active.first(), active.last()) {
        // The phase gradient is affine in (u, x, y): its extremes sit on corners.
        let (a, b) = (spec.k / spec.ls, spec.k / spec.ld);
        let mut gmax: f64 = 0.0;
        for u in [first.0, last.0] {
            for x in [xgrid.lo(), xgrid.hi()] {
                for y in [ygrid.lo(), ygrid.hi()] {
                    gmax = gmax.max((a * (u - y) - b * (x - u)).abs());
                }
            }
        }
        let step = gmax * h;
        if step >= PI {
            let required = ((ug.hi() - ug.lo()) * gmax / PI).floor() as usize + 2;
            return Err(Error::PhaseUnderResolved { step, required });
        }
    }

    let (cs, cd) = (0.5 * spec.k / spec.ls, 0.5 * spec.k / spec.ld);
    ComplexKernel::from_fn(xgrid, ygrid, KernelSpec::GeneralAperture(spec.clone()), |x, y| {
        active.iter().map(|&(u, tw)| tw * Complex64::from_polar(1.0, cs * (u - y).powi(2) + cd * (x - u).powi(2))).sum()
    })
}

/// Narrow-slit limit:
/// `K(x, y) = C sum_m a_m exp[i k (u_m - y)^2 / (2 Ls) + i k (x - u_m)^2 / (2 Ld) + i phi_m]`.
pub fn discrete_slit_kernel(spec: &DiscreteSlits, xgrid: Grid1D, ygrid: Grid1D) -> Result<ComplexKernel> {
    spec.validate()?;
    let (cs, cd) = (0.5 * spec.k / spec.ls, 0.5 * spec.k / spec.ld);
    ComplexKernel::from_fn(xgrid, ygrid, KernelSpec::DiscreteSlits(spec.clone()), |x, y| {
        spec.c
            * spec
                .slits
                .iter()
                .map(|s| {
                    let u = s.position;
                    s.amplitude * Complex64::from_polar(1.0, cs * (u - y).powi(2) + cd * (x - u).powi(2) + s.phase)
                })
                .sum::<Complex64>()
    })
}

pub fn two_path_beta_kernel(spec: &TwoPathBeta, xgrid: Grid1D, ygrid: Grid1D) -> Result<ComplexKernel> {
    spec.validate()?;
    ComplexKernel::from_fn(xgrid, ygrid, KernelSpec::TwoPathBeta(*spec), |x, y| spec.amplitude(x - y))
}

/// Joint weights `pi(y) eta(x) |K(x, y)|^2`, normalized. A point detector
/// yields a joint supported on a single detector row.
pub fn kernel_to_joint(kernel: &ComplexKernel, prior: &Dist1D, acc: &Acceptance) -> Result<JointDist> {
    if prior.grid() != kernel.ygrid() {
        return Err(Error::GridMismatch("prior grid differs from kernel source grid".into()));
    }
    let eta = acc.weights(kernel.xgrid());
    if eta.len() != kernel.xgrid().len() {
        return Err(Error::GridMismatch("acceptance does not match detector grid".into()));
    }
    let pi = prior.probs();
    let ny = kernel.ygrid().len();
    let mut w = vec![0.0; kernel.values().len()];
    for (i, &e) in eta.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        for j in 0..ny {
            w[i * ny + j] = pi[j] * e * kernel.get(i, j).norm_sqr();
        }
    }
    normalize_joint(&w, *kernel.xgrid(), *kernel.ygrid()).map(|(j, _)| j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probcore::{make_grid, marginal_x, marginal_y};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn opaque_aperture_gives_zero_kernel() {
        let ug = make_grid(-1.0, 1.0, 101).unwrap();
        let spec = GeneralAperture { slit_grid: ug, transmission: vec![c(0.0); 101], k: 10.0, ls: 5.0, ld: 5.0 };
        let g = make_grid(-1.0, 1.0, 9).unwrap();
        let k = fresnel_aperture_kernel(&spec, g, g).unwrap();
        assert!(k.values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn single_cell_aperture_has_constant_modulus() {
        let ug = make_grid(-1.0, 1.0, 201).unwrap();
        let mut t = vec![c(0.0); 201];
        t[100] = c(1.0);
        let spec = GeneralAperture { slit_grid: ug, transmission: t, k: 10.0, ls: 5.0, ld: 5.0 };
        let g = make_grid(-1.0, 1.0, 9).unwrap();
        let k = fresnel_aperture_kernel(&spec, g, g).unwrap();
        let h = ug.spacing();
        for z in k.values() {
            assert!((z.norm() - h).abs() < 1e-15);
        }
    }

    #[test]
    fn under_resolved_slit_grid_is_rejected() {
        let ug = make_grid(-1.0, 1.0, 11).unwrap();
        let spec = GeneralAperture { slit_grid: ug, transmission: vec![c(1.0); 11], k: 100.0, ls: 1.0, ld: 1.0 };
        let g = make_grid(-3.0, 3.0, 5).unwrap();
        match fresnel_aperture_kernel(&spec, g, g).unwrap_err() {
            Error::PhaseUnderResolved { step, required } => {
                assert!(step >= PI);
                // Max gradient is k*(1+3) + k*(3+1) = 800 over a span of 2.
                assert_eq!(required, (2.0 * 800.0 / PI).floor() as usize + 2);
            }
            e => panic!("unexpected {e:?}"),
        }
        let msg = fresnel_aperture_kernel(&spec, g, g).unwrap_err().to_string();
        assert!(msg.contains("slit samples"), "{msg}");
    }

    #[test]
    fn narrow_aperture_matches_discrete_slits() {
        let (k, ls, ld, d) = (10.0, 10.0, 10.0, 1.3);
        let g = make_grid(-1.0, 1.0, 11).unwrap();
        let ap = GeneralAperture::rectangular_slits(&[-0.5 * d, 0.5 * d], 0.002, 8, k, ls, ld).unwrap();
        let kap = fresnel_aperture_kernel(&ap, g, g).unwrap();
        let kd = discrete_slit_kernel(&DiscreteSlits::double(d, c(1.0), c(1.0), k, ls, ld), g, g).unwrap();
        let scale = kd.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = kap.values().iter().zip(kd.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err / scale < 1e-6, "relative error {err}");
    }

    #[test]
    fn rectangular_slits_integrate_to_unit_mass() {
        let ap = GeneralAperture::rectangular_slits(&[-0.3, 0.41], 0.07, 9, 1.0, 1.0, 1.0).unwrap();
        let h = ap.slit_grid.spacing();
        let n = ap.transmission.len();
        let mass: f64 = ap
            .transmission
            .iter()
            .enumerate()
            .map(|(i, t)| t.re * if i == 0 || i == n - 1 { 0.5 * h } else { h })
            .sum();
        assert!((mass - 2.0).abs() < 1e-12, "{mass}");
    }

    #[test]
    fn single_discrete_slit_has_modulus_c() {
        let spec = DiscreteSlits {
            slits: vec![Slit::new(0.2, c(1.0))],
            k: 7.0,
            ls: 2.0,
            ld: 3.0,
            c: Complex64::new(0.0, 2.5),
        };
        let g = make_grid(-2.0, 2.0, 13).unwrap();
        let k = discrete_slit_kernel(&spec, g, g).unwrap();
        assert!(k.values().iter().all(|z| (z.norm() - 2.5).abs() < 1e-14));
    }

    #[test]
    fn opposite_sign_slits_cancel_on_axis() {
        let spec = DiscreteSlits::double(1.3, c(1.0), c(-1.0), 10.0, 4.0, 4.0);
        let g = make_grid(-1.0, 1.0, 3).unwrap();
        let k = discrete_slit_kernel(&spec, g, g).unwrap();
        assert!(k.get(1, 1).norm() < 1e-15);
    }

    #[test]
    fn first_fringe_zero_matches_two_beam_formula() {
        // At y = 0 the two paths differ by k d x / Ld, so |K|^2 = 4 cos^2(k d x / (2 Ld)).
        let (k, ld, d) = (20.0, 5.0, 1.3);
        let x_zero = PI * ld / (k * d);
        let spec = DiscreteSlits::double(d, c(1.0), c(1.0), k, 3.0, ld);
        let xg = make_grid(0.0, 2.0 * x_zero, 201).unwrap();
        let yg = make_grid(-1.0, 1.0, 3).unwrap();
        let kern = discrete_slit_kernel(&spec, xg, yg).unwrap();
        let i0 = xg.nearest_index(x_zero);
        assert_eq!(i0, 100);
        assert!(kern.get(i0, 1).norm_sqr() < 1e-24);
        for i in 0..xg.len() {
            let x = xg.point(i);
            let oracle = 4.0 * (k * d * x / (2.0 * ld)).cos().powi(2);
            assert!((kern.get(i, 1).norm_sqr() - oracle).abs() < 1e-12);
        }
        // Intensity along the detector axis is minimal at the predicted zero.
        let col: Vec<f64> = (0..xg.len()).map(|i| kern.get(i, 1).norm_sqr()).collect();
        let imin = col.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(imin, i0);
    }

    #[test]
    fn symmetric_double_slit_is_point_symmetric() {
        let spec = DiscreteSlits::double(1.3, c(1.0), c(1.0), 9.0, 4.0, 4.0);
        let g = make_grid(-2.0, 2.0, 17).unwrap();
        let k = discrete_slit_kernel(&spec, g, g).unwrap();
        let n = g.len();
        for i in 0..n {
            for j in 0..n {
                let a = k.get(i, j).norm_sqr();
                let b = k.get(n - 1 - i, n - 1 - j).norm_sqr();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_profile_sets_per_slit_phases() {
        let base = DiscreteSlits::double(1.0, c(1.0), c(1.0), 1.0, 1.0, 1.0);
        let tilted = base.with_phase_profile(0.3, |u, t| t * u);
        assert_eq!(tilted.slits[0].phase, -0.15);
        assert_eq!(tilted.slits[1].phase, 0.15);
    }

    #[test]
    fn beta_kernel_plug_in_value() {
        let spec = TwoPathBeta::default();
        let z = spec.amplitude(0.0);
        assert!((z.re - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(z.im, 0.0);
    }

    #[test]
    fn beta_zero_kernel_is_real_and_even() {
        let spec = TwoPathBeta::default();
        let g = make_grid(-3.0, 3.0, 41).unwrap();
        let k = two_path_beta_kernel(&spec, g, g).unwrap();
        assert!(k.values().iter().all(|z| z.im == 0.0));
        for s in [0.1, 0.7, 1.9, 4.0] {
            assert_eq!(spec.amplitude(s), spec.amplitude(-s));
        }
    }

    #[test]
    fn beta_kernel_rejects_bad_sigma() {
        assert!(TwoPathBeta::new(0.0, 1.3, 0.0).is_err());
        assert!(TwoPathBeta::new(0.0, -1.0, 0.5).is_err());
    }

    #[test]
    fn default_grid_resolves_largest_beta() {
        let g = make_grid(-3.0, 3.0, 512).unwrap();
        let spec = TwoPathBeta { beta: 2.5, ..Default::default() };
        assert!(spec.max_phase_step(&g, &g) < PI);
    }

    #[test]
    fn analytic_beta_derivative_matches_difference() {
        let spec = TwoPathBeta { beta: 1.1, ..Default::default() };
        let h = 1e-6;
        for s in [-2.0, -0.3, 0.0, 0.65, 1.7] {
            let up = TwoPathBeta { beta: spec.beta + h, ..spec }.amplitude(s);
            let dn = TwoPathBeta { beta: spec.beta - h, ..spec }.amplitude(s);
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - spec.amplitude_dbeta(s)).norm() < 1e-8);
        }
    }

    #[test]
    fn kernel_to_joint_examples() {
        let g = make_grid(0.0, 1.0, 3).unwrap();
        let ones = DiscreteSlits { slits: vec![Slit::new(0.0, c(1.0))], k: 1.0, ls: 1.0, ld: 1.0, c: c(1.0) };
        let k = discrete_slit_kernel(&ones, g, g).unwrap();
        let j = kernel_to_joint(&k, &Dist1D::uniform(g), &Acceptance::full(&g)).unwrap();
        assert!(j.probs().iter().all(|p| (p - 1.0 / 9.0).abs() < 1e-16));

        let beta = TwoPathBeta { beta: 0.4, ..Default::default() };
        let g = make_grid(-3.0, 3.0, 21).unwrap();
        let k = two_path_beta_kernel(&beta, g, g).unwrap();
        let prior = Dist1D::new(g, (0..21).map(|j| if j == 5 { 1.0 } else { 0.0 }).collect()).unwrap();
        let j = kernel_to_joint(&k, &prior, &Acceptance::full(&g)).unwrap();
        let col: Vec<f64> = (0..21).map(|i| k.get(i, 5).norm_sqr()).collect();
        let total: f64 = col.iter().sum();
        for (i, c) in col.iter().enumerate() {
            assert!((j.get(i, 5) - c / total).abs() < 1e-16);
        }

        let j = kernel_to_joint(&k, &Dist1D::uniform(g), &Acceptance::point(&g, 0.0)).unwrap();
        for i in 0..21 {
            let row_mass: f64 = j.row(i).iter().sum();
            if i == 10 {
                assert!((row_mass - 1.0).abs() < 1e-15);
            } else {
                assert_eq!(row_mass, 0.0);
            }
        }
        let sx: f64 = marginal_x(&j).probs().iter().sum();
        let sy: f64 = marginal_y(&j).probs().iter().sum();
        assert!((sx - 1.0).abs() < 1e-12 && (sy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_roundtrip_preserves_abs2() {
        let g = make_grid(-3.0, 3.0, 7).unwrap();
        let k = two_path_beta_kernel(&TwoPathBeta { beta: 0.9, ..Default::default() }, g, g).unwrap();
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let recs = read_kernel_csv(&buf[..]).unwrap();
        assert_eq!(recs.len(), 49);
        for (r, z) in recs.iter().zip(k.values()) {
            assert!((r.abs2 - z.norm_sqr()).abs() < 1e-15);
            assert_eq!(r.re, z.re);
            assert_eq!(r.im, z.im);
        }
        assert!(read_kernel_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_kernel_csv("x,y,re,im,abs2\n1,2,3\n".as_bytes()).is_err());
    }
}
