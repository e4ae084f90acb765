//! Shannon entropies, mutual information and Kullback-Leibler divergences on
//! normalized grid-cell probabilities, in nats, with `0 ln 0 = 0`.

use crate::error::{Error, Result};
use crate::probcore::{marginal_x, marginal_y, Dist1D, JointDist};

fn plogp_sum(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum()
}

/// `-sum p ln p` over a raw probability slice.
pub fn entropy_of(p: &[f64]) -> f64 {
    0.0 - plogp_sum(p)
}

pub fn shannon_entropy(p: &Dist1D) -> f64 {
    entropy_of(p.probs())
}

/// Discrete entropy shifted by `ln(spacing)`: the Riemann-sum estimate of the
/// differential entropy of the underlying coordinate density.
pub fn differential_entropy(p: &Dist1D) -> f64 {
    shannon_entropy(p) + p.grid().spacing().ln()
}

/// `sum p(x, y) ln[p(x, y) / (p(x) p(y))]`.
pub fn mutual_information(j: &JointDist) -> f64 {
    let px = marginal_x(j);
    let py = marginal_y(j);
    let (px, py) = (px.probs(), py.probs());
    let mut total = 0.0;
    for (i, &pxi) in px.iter().enumerate() {
        for (&pij, &pyj) in j.row(i).iter().zip(py) {
            if pij > 0.0 {
                total += pij * (pij / (pxi * pyj)).ln();
            }
        }
    }
    total
}

/// KL divergence, with absolute-continuity violations kept distinct from
/// every finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn finite(self) -> Option<f64> {
        match self {
            Divergence::Finite(v) => Some(v),
            Divergence::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Divergence::Infinite)
    }
}

fn kl_slices(p: &[f64], q: &[f64]) -> Divergence {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Divergence::Infinite;
            }
            total += pi * (pi / qi).ln();
        }
    }
    Divergence::Finite(total)
}

/// `D_KL(p || q) = sum p ln(p / q)`.
pub fn kl_divergence(p: &Dist1D, q: &Dist1D) -> Result<Divergence> {
    if p.grid() != q.grid() {
        return Err(Error::GridMismatch("KL divergence needs both distributions on one grid".into()));
    }
    Ok(kl_slices(p.probs(), q.probs()))
}

/// `sum_x p(x) D_KL[p(y | x) || p(y)]`, computed row by row without forming
/// the mutual-information log ratio.
pub fn mi_as_average_kl(j: &JointDist) -> f64 {
    let px = marginal_x(j);
    let py = marginal_y(j);
    let mut total = 0.0;
    for (i, &pxi) in px.probs().iter().enumerate() {
        if pxi <= 0.0 {
            continue;
        }
        let cond: Vec<f64> = j.row(i).iter().map(|v| v / pxi).collect();
        // Every p(y|x) > 0 implies p(y) > 0, so the divergence is finite.
        if let Divergence::Finite(d) = kl_slices(&cond, py.probs()) {
            total += pxi * d;
        }
    }
    total
}

/// `H(Y | X) = sum_x p(x) H(Y | X = x)`.
pub fn conditional_entropy_y_given_x(j: &JointDist) -> f64 {
    let px = marginal_x(j);
    px.probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| {
            let cond: Vec<f64> = j.row(i).iter().map(|v| v / p).collect();
            p * entropy_of(&cond)
        })
        .sum()
}

/// `H(X | Y) = sum_y p(y) H(X | Y = y)`.
pub fn conditional_entropy_x_given_y(j: &JointDist) -> f64 {
    conditional_entropy_y_given_x(&j.transpose())
}

/// Both sides of the fixed-detector entropy-reduction identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReduction {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `true` when the prior is uniform on its support and `lhs = ln M - H`.
    pub uniform: bool,
}

/// Relative tolerance used to recognise a uniform prior.
const UNIFORM_RTOL: f64 = 1e-12;

/// Compares the entropy reduction of a conditional against its KL divergence
/// from the prior.
///
/// For a prior uniform over `M` support points, `lhs = ln M - H(cond)`;
/// otherwise `lhs = -H(cond) - <ln prior>_cond`. In both cases
/// `rhs = D_KL(cond || prior)`.
pub fn entropy_reduction_identity(cond: &Dist1D, prior: &Dist1D) -> Result<EntropyReduction> {
    if cond.grid() != prior.grid() {
        return Err(Error::GridMismatch("conditional and prior live on different grids".into()));
    }
    let rhs = match kl_slices(cond.probs(), prior.probs()) {
        Divergence::Finite(v) => v,
        Divergence::Infinite => return Err(Error::Support("conditional has mass outside the prior support".into())),
    };
    let h = shannon_entropy(cond);
    let support: Vec<f64> = prior.probs().iter().cloned().filter(|&v| v > 0.0).collect();
    let first = support[0];
    let uniform = support.iter().all(|&v| (v - first).abs() <= UNIFORM_RTOL * first);
    let lhs = if uniform { (support.len() as f64).ln() - h } else { -h - cond.expect(|i| prior.probs()[i].ln()) };
    Ok(EntropyReduction { lhs, rhs, residual: (lhs - rhs).abs(), uniform })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    /// `|I(X;Y) - I(Y;X)|` with the joint transposed.
    pub mi_symmetry: f64,
    /// `|I - (H(X) - H(X|Y))|`.
    pub chain_rule_x: f64,
    /// `|I - (H(Y) - H(Y|X))|`.
    pub chain_rule_y: f64,
    /// `|I - sum_x p(x) D_KL[p(y|x) || p(y)]|`.
    pub avg_kl: f64,
    pub entropy_reduction: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [self.mi_symmetry, self.chain_rule_x, self.chain_rule_y, self.avg_kl, self.entropy_reduction]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoReport {
    pub h_x: f64,
    pub h_y: f64,
    pub h_y_given_x0: f64,
    pub i_xy: f64,
    pub entropy_reduction: EntropyReduction,
    pub residuals: IdentityResiduals,
}

/// Entropies, mutual information and every identity residual for a joint
/// distribution read out at detector index `x0`.
pub fn full_report(j: &JointDist, x0: usize, prior: &Dist1D) -> Result<InfoReport> {
    if x0 >= j.nx() {
        return Err(Error::InvalidParameter(format!("detector index {x0} outside grid of {}", j.nx())));
    }
    let h_x = shannon_entropy(&marginal_x(j));
    let h_y = shannon_entropy(&marginal_y(j));
    let i_xy = mutual_information(j);
    let cond = j.conditional_y_given_x(x0)?;
    let h_y_given_x0 = shannon_entropy(&cond);
    let er = entropy_reduction_identity(&cond, prior)?;
    let residuals = IdentityResiduals {
        mi_symmetry: (i_xy - mutual_information(&j.transpose())).abs(),
        chain_rule_x: (i_xy - (h_x - conditional_entropy_x_given_y(j))).abs(),
        chain_rule_y: (i_xy - (h_y - conditional_entropy_y_given_x(j))).abs(),
        avg_kl: (i_xy - mi_as_average_kl(j)).abs(),
        entropy_reduction: er.residual,
    };
    Ok(InfoReport { h_x, h_y, h_y_given_x0, i_xy, entropy_reduction: er, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probcore::{make_grid, normalize_joint, Grid1D};

    fn grid(n: usize) -> Grid1D {
        make_grid(0.0, 1.0, n).unwrap()
    }

    fn dist(p: &[f64]) -> Dist1D {
        Dist1D::new(grid(p.len()), p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!((shannon_entropy(&Dist1D::uniform(grid(4))) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(shannon_entropy(&dist(&[0.0, 1.0, 0.0])), 0.0);
        let oracle = -0.75 * 0.75f64.ln() - 0.25 * 0.25f64.ln();
        assert!((shannon_entropy(&dist(&[0.75, 0.25])) - oracle).abs() < 1e-15);
    }

    #[test]
    fn differential_entropy_adds_log_spacing() {
        let d = Dist1D::uniform(make_grid(0.0, 2.0, 5).unwrap());
        assert!((differential_entropy(&d) - (5f64.ln() + 0.5f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn mi_examples() {
        let (px, py) = ([0.2, 0.8], [0.1, 0.6, 0.3]);
        let w: Vec<f64> = px.iter().flat_map(|a| py.iter().map(move |b| a * b)).collect();
        let (j, _) = normalize_joint(&w, grid(2), grid(3)).unwrap();
        assert!(mutual_information(&j).abs() < 1e-12);
        assert!(mi_as_average_kl(&j).abs() < 1e-12);

        let j = JointDist::new(grid(2), grid(2), vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((mutual_information(&j) - 2f64.ln()).abs() < 1e-15);
        assert!((mi_as_average_kl(&j) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        let p = dist(&[0.3, 0.7]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), Divergence::Finite(0.0));
        let d = kl_divergence(&dist(&[1.0, 0.0]), &dist(&[0.5, 0.5])).unwrap().finite().unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-15);
        let d = kl_divergence(&dist(&[0.9, 0.1]), &dist(&[0.5, 0.5])).unwrap().finite().unwrap();
        assert!((d - (0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln())).abs() < 1e-15);
        assert!(kl_divergence(&dist(&[0.5, 0.5]), &dist(&[1.0, 0.0])).unwrap().is_infinite());
        assert!(kl_divergence(&dist(&[0.5, 0.5]), &dist(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn entropy_reduction_examples() {
        let prior = Dist1D::uniform(grid(8));
        let r = entropy_reduction_identity(&prior, &prior).unwrap();
        assert!(r.uniform);
        assert!(r.lhs.abs() < 1e-15 && r.rhs.abs() < 1e-15);

        let mut point = vec![0.0; 8];
        point[3] = 1.0;
        let r = entropy_reduction_identity(&dist(&point), &prior).unwrap();
        assert!((r.lhs - 8f64.ln()).abs() < 1e-15);
        assert!((r.rhs - 8f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_reduction_with_partial_support_and_nonuniform_prior() {
        // Uniform over 4 of 6 labels: A_y counts only allowed labels.
        let prior = dist(&[0.25, 0.25, 0.0, 0.25, 0.25, 0.0]);
        let cond = dist(&[0.1, 0.4, 0.0, 0.3, 0.2, 0.0]);
        let r = entropy_reduction_identity(&cond, &prior).unwrap();
        assert!(r.uniform);
        assert!(r.residual < 1e-15);

        let prior = dist(&[0.1, 0.2, 0.3, 0.4]);
        let cond = dist(&[0.4, 0.3, 0.2, 0.1]);
        let r = entropy_reduction_identity(&cond, &prior).unwrap();
        assert!(!r.uniform);
        assert!(r.residual < 1e-15);

        let prior = dist(&[0.5, 0.5, 0.0]);
        let cond = dist(&[0.5, 0.25, 0.25]);
        assert!(matches!(entropy_reduction_identity(&cond, &prior), Err(Error::Support(_))));
    }

    #[test]
    fn report_on_small_joints() {
        let j = JointDist::new(grid(2), grid(2), vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let r = full_report(&j, 0, &Dist1D::uniform(grid(2))).unwrap();
        let ln2 = 2f64.ln();
        assert!((r.h_x - ln2).abs() < 1e-15 && (r.h_y - ln2).abs() < 1e-15 && (r.i_xy - ln2).abs() < 1e-15);
        assert_eq!(r.h_y_given_x0, 0.0);
        assert!(r.residuals.max() < 1e-12);

        let (j, _) = normalize_joint(&[1.0; 6], grid(2), grid(3)).unwrap();
        let r = full_report(&j, 1, &Dist1D::uniform(grid(3))).unwrap();
        assert!(r.i_xy.abs() < 1e-12);
        assert!(r.residuals.max() < 1e-12);
        assert!(full_report(&j, 2, &Dist1D::uniform(grid(3))).is_err());
    }
}
