//! Grids, normalized probability tables and the two statistical reductions of
//! a joint source-detector distribution: the detector marginal and the
//! fixed-detector source conditional.
//!
//! Tables are indexed `(x_i, y_j)` with `x` the detector coordinate and `y` the
//! source label, stored row-major (`i * ny + j`).

use crate::error::{Error, Result};
use crate::kernels::ComplexKernel;

/// Normalization tolerance enforced on every constructed table.
pub const NORM_TOL: f64 = 1e-12;

/// Uniform sampling of a closed interval `[lo, hi]` with `n >= 2` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidGrid(format!("bounds must be finite, got [{lo}, {hi}]")));
        }
        if lo >= hi {
            return Err(Error::InvalidGrid(format!("need lo < hi, got lo={lo}, hi={hi}")));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got n={n}")));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    /// `lo + i * spacing`.
    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Index of the grid point nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let t = ((x - self.lo) / self.spacing()).round();
        if t <= 0.0 {
            0
        } else {
            (t as usize).min(self.n - 1)
        }
    }
}

/// Convenience wrapper over [`Grid1D::new`].
pub fn make_grid(lo: f64, hi: f64, n: usize) -> Result<Grid1D> {
    Grid1D::new(lo, hi, n)
}

fn check_weights(w: &[f64], what: &str) -> Result<f64> {
    let mut total = 0.0;
    for (i, &v) in w.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "{what} entry {i} is {v}; weights must be finite and nonnegative"
            )));
        }
        total += v;
    }
    Ok(total)
}

/// Normalized one-dimensional distribution over grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist1D {
    grid: Grid1D,
    p: Vec<f64>,
}

impl Dist1D {
    /// Wraps an already normalized table, rejecting anything that does not sum
    /// to one within [`NORM_TOL`].
    pub fn new(grid: Grid1D, p: Vec<f64>) -> Result<Self> {
        if p.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} probabilities for a grid of {} points", p.len(), grid.len())));
        }
        let total = check_weights(&p, "probability")?;
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total:.17}, not 1")));
        }
        Ok(Self { grid, p })
    }

    pub fn from_weights(grid: Grid1D, w: &[f64]) -> Result<Self> {
        if w.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} weights for a grid of {} points", w.len(), grid.len())));
        }
        let total = check_weights(w, "weight")?;
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        Ok(Self { grid, p: w.iter().map(|v| v / total).collect() })
    }

    pub fn uniform(grid: Grid1D) -> Self {
        let n = grid.len();
        Self { grid, p: vec![1.0 / n as f64; n] }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Number of strictly positive entries.
    pub fn support_size(&self) -> usize {
        self.p.iter().filter(|&&v| v > 0.0).count()
    }

    /// Expectation of `f(i)` under this distribution.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.p.iter().enumerate().filter(|(_, &pi)| pi > 0.0).map(|(i, &pi)| pi * f(i)).sum()
    }
}

/// Normalized joint distribution over `(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    xgrid: Grid1D,
    ygrid: Grid1D,
    p: Vec<f64>,
}

impl JointDist {
    /// Validates an already normalized table.
    pub fn new(xgrid: Grid1D, ygrid: Grid1D, p: Vec<f64>) -> Result<Self> {
        if p.len() != xgrid.len() * ygrid.len() {
            return Err(Error::GridMismatch(format!("{} entries for a {}x{} grid", p.len(), xgrid.len(), ygrid.len())));
        }
        let total = check_weights(&p, "joint probability")?;
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDistribution(format!("joint probabilities sum to {total:.17}, not 1")));
        }
        Ok(Self { xgrid, ygrid, p })
    }

    pub fn xgrid(&self) -> &Grid1D {
        &self.xgrid
    }

    pub fn ygrid(&self) -> &Grid1D {
        &self.ygrid
    }

    pub fn nx(&self) -> usize {
        self.xgrid.len()
    }

    pub fn ny(&self) -> usize {
        self.ygrid.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.ny() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let ny = self.ny();
        &self.p[i * ny..(i + 1) * ny]
    }

    /// Exchanges the roles of the two coordinates.
    pub fn transpose(&self) -> JointDist {
        let (nx, ny) = (self.nx(), self.ny());
        let mut p = vec![0.0; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                p[j * nx + i] = self.p[i * ny + j];
            }
        }
        JointDist { xgrid: self.ygrid, ygrid: self.xgrid, p }
    }

    /// `p(y | x_i)`: the normalized row at detector index `i`.
    pub fn conditional_y_given_x(&self, i: usize) -> Result<Dist1D> {
        let row = self.row(i);
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Err(Error::DetectorSeesNothing);
        }
        Ok(Dist1D { grid: self.ygrid, p: row.iter().map(|v| v / total).collect() })
    }

    /// `p(x | y_j)`: the normalized column at source index `j`.
    pub fn conditional_x_given_y(&self, j: usize) -> Result<Dist1D> {
        let ny = self.ny();
        let col: Vec<f64> = (0..self.nx()).map(|i| self.p[i * ny + j]).collect();
        let total: f64 = col.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution(format!("source column {j} carries no mass")));
        }
        Ok(Dist1D { grid: self.xgrid, p: col.iter().map(|v| v / total).collect() })
    }
}

/// Normalizes nonnegative weights into a joint distribution, returning the
/// normalization constant (the discrete total accepted detection weight).
pub fn normalize_joint(weights: &[f64], xgrid: Grid1D, ygrid: Grid1D) -> Result<(JointDist, f64)> {
    if weights.len() != xgrid.len() * ygrid.len() {
        return Err(Error::GridMismatch(format!(
            "{} weights for a {}x{} grid",
            weights.len(),
            xgrid.len(),
            ygrid.len()
        )));
    }
    let z = check_weights(weights, "joint weight")?;
    if z <= 0.0 {
        return Err(Error::DegenerateJoint);
    }
    let p = weights.iter().map(|w| w / z).collect();
    Ok((JointDist { xgrid, ygrid, p }, z))
}

/// Detector marginal `p(x_i) = sum_j p(x_i, y_j)`.
pub fn marginal_x(j: &JointDist) -> Dist1D {
    let p = (0..j.nx()).map(|i| j.row(i).iter().sum()).collect();
    Dist1D { grid: j.xgrid, p }
}

/// Source marginal `p(y_j) = sum_i p(x_i, y_j)`.
pub fn marginal_y(j: &JointDist) -> Dist1D {
    let ny = j.ny();
    let mut p = vec![0.0; ny];
    for i in 0..j.nx() {
        for (acc, v) in p.iter_mut().zip(j.row(i)) {
            *acc += v;
        }
    }
    Dist1D { grid: j.ygrid, p }
}

/// Bayes update of `prior` by a fixed-detector likelihood `response(y)`.
pub fn conditional_y_given_x0(response: &[f64], prior: &Dist1D) -> Result<Dist1D> {
    if response.len() != prior.len() {
        return Err(Error::GridMismatch(format!("response has {} entries, prior has {}", response.len(), prior.len())));
    }
    check_weights(response, "response")?;
    let w: Vec<f64> = prior.p.iter().zip(response).map(|(pi, r)| pi * r).collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::DetectorSeesNothing);
    }
    Ok(Dist1D { grid: prior.grid, p: w.iter().map(|v| v / total).collect() })
}

/// Detector acceptance: a point detector snapped to the grid or a window of
/// nonnegative weights over the detector grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Acceptance {
    Point { requested: f64, x0: f64, index: usize },
    Window { weights: Vec<f64> },
}

impl Acceptance {
    /// Point detector at the grid point nearest `x0`.
    pub fn point(grid: &Grid1D, x0: f64) -> Self {
        let index = grid.nearest_index(x0);
        Acceptance::Point { requested: x0, x0: grid.point(index), index }
    }

    pub fn window(grid: &Grid1D, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::InvalidAcceptance(format!(
                "{} window weights for a grid of {} points",
                weights.len(),
                grid.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidAcceptance("window weights must be finite and nonnegative".into()));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidAcceptance("window weights are all zero".into()));
        }
        Ok(Acceptance::Window { weights })
    }

    /// Unit acceptance over the whole detector grid.
    pub fn full(grid: &Grid1D) -> Self {
        Acceptance::Window { weights: vec![1.0; grid.len()] }
    }

    /// Unit weights on the `2 * half_width + 1` cells centred on the snapped `x0`.
    pub fn boxcar(grid: &Grid1D, x0: f64, half_width: usize) -> Self {
        let c = grid.nearest_index(x0);
        let lo = c.saturating_sub(half_width);
        let hi = (c + half_width).min(grid.len() - 1);
        let weights = (0..grid.len()).map(|i| if (lo..=hi).contains(&i) { 1.0 } else { 0.0 }).collect();
        Acceptance::Window { weights }
    }

    /// Dense weights over `grid`; a point detector becomes an indicator.
    pub fn weights(&self, grid: &Grid1D) -> Vec<f64> {
        match self {
            Acceptance::Point { index, .. } => {
                let mut w = vec![0.0; grid.len()];
                w[*index] = 1.0;
                w
            }
            Acceptance::Window { weights } => weights.clone(),
        }
    }
}

/// Source conditional for a finite detector: the likelihood is the
/// acceptance-weighted response `sum_x eta(x) |K(x, y)|^2`.
pub fn window_conditional(kernel: &ComplexKernel, acc: &Acceptance, prior: &Dist1D) -> Result<Dist1D> {
    if kernel.ygrid() != prior.grid() {
        return Err(Error::GridMismatch("prior grid differs from kernel source grid".into()));
    }
    match acc {
        Acceptance::Point { index, .. } => conditional_y_given_x0(&kernel.response_at(*index), prior),
        Acceptance::Window { weights } => {
            if weights.len() != kernel.xgrid().len() {
                return Err(Error::GridMismatch("window weights do not match detector grid".into()));
            }
            let mut response = vec![0.0; kernel.ygrid().len()];
            for (i, &eta) in weights.iter().enumerate() {
                if eta == 0.0 {
                    continue;
                }
                for (r, k) in response.iter_mut().zip(kernel.row(i)) {
                    *r += eta * k.norm_sqr();
                }
            }
            conditional_y_given_x0(&response, prior)
        }
    }
}
