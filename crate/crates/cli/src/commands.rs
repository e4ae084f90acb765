//! Command implementations. Each returns its output in memory; writing and
//! exit-code mapping happen in the binary.

use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use tryinfo::coherence::{coherence_entropy, geometric_spectrum, random_unitary, truncate_modes, CoherenceMatrix};
use tryinfo::fisher::{derivative_gap, fd_derivative, fisher_from_kl, try_fisher, BetaResponseModel};
use tryinfo::infomeasures::{entropy_reduction_identity, full_report, mutual_information, shannon_entropy};
use tryinfo::kernels::{kernel_to_joint, ComplexKernel, KernelSpec, TwoPathBeta};
use tryinfo::nullmodel::{
    composite_record, evaluate_null_point, log_spaced, null_response, null_table, NullModel, NullModelSpec,
};
use tryinfo::probcore::{marginal_x, marginal_y, window_conditional};
use tryinfo::table::{fmt_f64, SweepTable};
use tryinfo::{Acceptance, Dist1D, Grid1D, JointDist};

use crate::config::{KernelKind, PriorKind, RunConfig};
use crate::error::CliError;

pub const BETA_SWEEP_COLUMNS: [&str; 8] =
    ["beta", "H_X", "H_Y", "H_Y_given_x0", "I_XY", "lnAy_minus_H", "D_KL_prior", "residual_identity"];
pub const COHERENCE_COLUMNS: [&str; 3] = ["M", "S_truncated", "S_unitary_reference"];

/// Runs `f` on a dedicated pool of `workers` threads (0 picks the rayon default).
pub fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Validation(format!("workers: {e}")))?;
    Ok(pool.install(f))
}

fn describe_prior(cfg: &RunConfig) -> String {
    match (cfg.prior.kind, &cfg.prior.file) {
        (PriorKind::Weights, Some(p)) => format!("weights:{}", p.display()),
        _ => "uniform".into(),
    }
}

fn describe_acceptance(acc: &Acceptance, grid: &Grid1D) -> Vec<(&'static str, String)> {
    match acc {
        Acceptance::Point { requested, x0, index } => vec![
            ("detector", "point".into()),
            ("x0_requested", fmt_f64(*requested)),
            ("x0", fmt_f64(*x0)),
            ("x0_index", index.to_string()),
        ],
        Acceptance::Window { weights } => {
            let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
            let (a, b) = (support[0], support[support.len() - 1]);
            vec![
                ("detector", "window".into()),
                ("window_lo", fmt_f64(grid.point(a))),
                ("window_hi", fmt_f64(grid.point(b))),
                ("window_points", support.len().to_string()),
            ]
        }
    }
}

fn two_path_base(cfg: &RunConfig) -> Result<TwoPathBeta, CliError> {
    if cfg.kernel.kind != KernelKind::TwoPathBeta {
        return Err(CliError::Validation("this command needs kernel.kind = \"two-path-beta\"".into()));
    }
    Ok(TwoPathBeta::new(cfg.kernel.beta, cfg.kernel.d, cfg.kernel.sigma)?)
}

fn beta_row(
    base: &TwoPathBeta,
    beta: f64,
    grid: Grid1D,
    prior: &Dist1D,
    acc: &Acceptance,
) -> Result<Vec<f64>, CliError> {
    let kernel = KernelSpec::TwoPathBeta(TwoPathBeta::new(beta, base.d, base.sigma)?).build(grid, grid)?;
    let joint = kernel_to_joint(&kernel, prior, &Acceptance::full(&grid))?;
    let cond = window_conditional(&kernel, acc, prior)?;
    let er = entropy_reduction_identity(&cond, prior)?;
    Ok(vec![
        beta,
        shannon_entropy(&marginal_x(&joint)),
        shannon_entropy(&marginal_y(&joint)),
        shannon_entropy(&cond),
        mutual_information(&joint),
        er.lhs,
        er.rhs,
        er.residual,
    ])
}

/// Information measures of the two-path kernel across the configured `beta` grid.
pub fn sweep_beta(cfg: &RunConfig, workers: usize) -> Result<SweepTable, CliError> {
    let base = two_path_base(cfg)?;
    let grid = cfg.grid()?;
    let prior = cfg.prior(grid)?;
    let acc = cfg.acceptance(&grid);
    let betas = cfg.sweep_beta.values();

    let rows = with_pool(workers, || {
        betas.par_iter().map(|&b| beta_row(&base, b, grid, &prior, &acc)).collect::<Result<Vec<_>, _>>()
    })??;

    let mut t = SweepTable::new("sweep-beta", &BETA_SWEEP_COLUMNS);
    t.meta("kernel", "two-path-beta")
        .meta("d", fmt_f64(base.d))
        .meta("sigma", fmt_f64(base.sigma))
        .meta("grid_lo", fmt_f64(grid.lo()))
        .meta("grid_hi", fmt_f64(grid.hi()))
        .meta("grid_n", grid.len())
        .meta("prior", describe_prior(cfg))
        .meta("beta_start", fmt_f64(cfg.sweep_beta.start))
        .meta("beta_stop", fmt_f64(cfg.sweep_beta.stop))
        .meta("beta_count", betas.len())
        .meta("units", "nats (discrete)");
    for (k, v) in describe_acceptance(&acc, &grid) {
        t.meta(k, v);
    }
    for r in rows {
        t.push_row(r)?;
    }
    Ok(t)
}

/// One table per background floor, rows ordered by residual depth.
pub fn null_sweep(cfg: &RunConfig, workers: usize) -> Result<Vec<(f64, SweepTable)>, CliError> {
    let base = cfg.null_base()?;
    let n = &cfg.null;
    let eps = log_spaced(n.eps_min, n.eps_max, n.count)?;
    let delta = cfg.numerics.fd_delta;
    let mut out = Vec::with_capacity(n.b.len());
    for &b in &n.b {
        let spec = NullModelSpec { b, ..base.clone() };
        spec.validate()?;
        let points = with_pool(workers, || {
            eps.par_iter()
                .map(|&e| evaluate_null_point(&spec.with_eps(e), n.efficiency, delta))
                .collect::<Result<Vec<_>, _>>()
        })??;
        let mut t = null_table(points, &spec, n.efficiency, delta)?;
        t.meta("eps_min", fmt_f64(n.eps_min)).meta("eps_max", fmt_f64(n.eps_max)).meta("eps_spacing", "log");
        out.push((b, t));
    }
    Ok(out)
}

fn rotated_entropy(spectrum: &tryinfo::coherence::ModeSpectrum, seed: u64) -> Result<f64, CliError> {
    let u = random_unitary(spectrum.len(), seed);
    Ok(coherence_entropy(&CoherenceMatrix::from_spectrum(spectrum, &u)?)?)
}

fn unitary_seed(cfg: &RunConfig, k: usize) -> u64 {
    cfg.coherence.seed.wrapping_add((k % cfg.coherence.unitaries.max(1)) as u64)
}

/// Entropy of the leading-`M` truncation of the geometric mode spectrum, with
/// the entropy of a seeded unitary rotation of the full state alongside.
pub fn coherence(cfg: &RunConfig) -> Result<SweepTable, CliError> {
    let n = cfg.coherence.modes;
    let spectrum = geometric_spectrum(n)?;
    let s_full = spectrum.entropy();
    let mut t = SweepTable::new("coherence", &COHERENCE_COLUMNS);
    let mut max_dev: f64 = 0.0;
    for k in 0..cfg.coherence.unitaries {
        max_dev = max_dev.max((rotated_entropy(&spectrum, unitary_seed(cfg, k))? - s_full).abs());
    }
    t.meta("modes", n)
        .meta("spectrum", "geometric exp(-n/2)")
        .meta("seed", cfg.coherence.seed)
        .meta("unitaries", cfg.coherence.unitaries)
        .meta("rng", "chacha8")
        .meta("S_full", fmt_f64(s_full))
        .meta("unitary_max_deviation", fmt_f64(max_dev));
    for m in 1..=n {
        let s_trunc = truncate_modes(&spectrum, m)?.entropy();
        let s_ref = rotated_entropy(&spectrum, unitary_seed(cfg, m - 1))?;
        t.push_row(vec![m as f64, s_trunc, s_ref])?;
    }
    Ok(t)
}

/// One line of the identity report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub metadata: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl IdentityReport {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("# command=check-identities\n");
        for (k, v) in &self.metadata {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s.push_str("check,value,tolerance,status\n");
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            s.push_str(&format!("{},{},{},{status}\n", c.name, fmt_f64(c.value), fmt_f64(c.tolerance)));
        }
        s
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn joint_checks(j: &JointDist, tol: f64, checks: &mut Vec<Check>, prefix: &str) {
    use tryinfo::infomeasures::{conditional_entropy_x_given_y, conditional_entropy_y_given_x, mi_as_average_kl};
    let i = mutual_information(j);
    let hx = shannon_entropy(&marginal_x(j));
    let hy = shannon_entropy(&marginal_y(j));
    let mut push = |name: &str, value: f64| {
        checks.push(Check { name: format!("{prefix}{name}"), value, tolerance: tol });
    };
    push("mi_nonnegative", (-i).max(0.0));
    push("mi_symmetry", (i - mutual_information(&j.transpose())).abs());
    push("chain_rule_x", (i - (hx - conditional_entropy_x_given_y(j))).abs());
    push("chain_rule_y", (i - (hy - conditional_entropy_y_given_x(j))).abs());
    push("mi_average_kl", (i - mi_as_average_kl(j)).abs());
}

/// Reads a joint distribution written as `x,y,p` rows in row-major order.
/// The table must already be normalized.
pub fn read_joint_csv(path: &Path) -> Result<JointDist, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let bad = |msg: String| CliError::Validation(format!("{}: {msg}", path.display()));
    let mut rows: Vec<[f64; 3]> = Vec::new();
    let mut header = false;
    for (ln, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            if line.replace(' ', "") != "x,y,p" {
                return Err(bad(format!("expected header x,y,p, found {line:?}")));
            }
            header = true;
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", ln + 1)))?;
        if f.len() != 3 {
            return Err(bad(format!("line {}: expected 3 fields, found {}", ln + 1, f.len())));
        }
        rows.push([f[0], f[1], f[2]]);
    }
    if rows.is_empty() {
        return Err(bad("no data rows".into()));
    }
    let ny = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
    if !rows.len().is_multiple_of(ny) {
        return Err(bad(format!("{} rows do not form a grid with {ny} y values", rows.len())));
    }
    let nx = rows.len() / ny;
    let axis = |vals: Vec<f64>, name: &str| -> Result<Grid1D, CliError> {
        let n = vals.len();
        let g = Grid1D::new(vals[0], vals[n - 1], n).map_err(|e| bad(format!("{name} axis: {e}")))?;
        let tol = 1e-9 * (g.hi() - g.lo()).abs().max(1.0);
        if vals.iter().enumerate().any(|(i, v)| (v - g.point(i)).abs() > tol) {
            return Err(bad(format!("{name} axis is not uniformly spaced")));
        }
        Ok(g)
    };
    let xg = axis((0..nx).map(|i| rows[i * ny][0]).collect(), "x")?;
    let yg = axis((0..ny).map(|j| rows[j][1]).collect(), "y")?;
    for (k, r) in rows.iter().enumerate() {
        if r[0] != rows[(k / ny) * ny][0] || r[1] != rows[k % ny][1] {
            return Err(bad(format!("row {} breaks row-major x,y ordering", k + 1)));
        }
    }
    Ok(JointDist::new(xg, yg, rows.iter().map(|r| r[2]).collect())?)
}

/// Runs the identity suite. With `joint` set, only the joint-distribution
/// identities are checked on that file.
pub fn check_identities(cfg: &RunConfig, joint: Option<&Path>, workers: usize) -> Result<IdentityReport, CliError> {
    let tol = cfg.numerics.tolerance;
    let rtol = cfg.numerics.fisher_rtol;
    let mut checks = Vec::new();
    let mut metadata = vec![("tolerance".to_string(), fmt_f64(tol)), ("fisher_rtol".to_string(), fmt_f64(rtol))];

    if let Some(path) = joint {
        let j = read_joint_csv(path)?;
        metadata.push(("joint".into(), path.display().to_string()));
        metadata.push(("joint_shape".into(), format!("{}x{}", j.nx(), j.ny())));
        joint_checks(&j, tol, &mut checks, "");
        return Ok(IdentityReport { metadata, checks });
    }

    // Joint and fixed-detector identities across the beta sweep.
    let base = two_path_base(cfg)?;
    let grid = cfg.grid()?;
    let prior = cfg.prior(grid)?;
    let acc = cfg.acceptance(&grid);
    let x0 = match &acc {
        Acceptance::Point { index, .. } => *index,
        Acceptance::Window { .. } => grid.nearest_index(cfg.detector.x0),
    };
    let betas = cfg.sweep_beta.values();
    let reports = with_pool(workers, || {
        betas
            .par_iter()
            .map(|&beta| -> Result<_, CliError> {
                let k = KernelSpec::TwoPathBeta(TwoPathBeta::new(beta, base.d, base.sigma)?).build(grid, grid)?;
                let j = kernel_to_joint(&k, &prior, &Acceptance::full(&grid))?;
                let window = entropy_reduction_identity(&window_conditional(&k, &acc, &prior)?, &prior)?;
                Ok((full_report(&j, x0, &prior)?, window.residual, -mutual_information(&j)))
            })
            .collect::<Result<Vec<_>, _>>()
    })??;
    let worst =
        |f: &dyn Fn(&(tryinfo::infomeasures::InfoReport, f64, f64)) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    for (name, value) in [
        ("mi_nonnegative", worst(&|r| r.2.max(0.0))),
        ("mi_symmetry", worst(&|r| r.0.residuals.mi_symmetry)),
        ("chain_rule_x", worst(&|r| r.0.residuals.chain_rule_x)),
        ("chain_rule_y", worst(&|r| r.0.residuals.chain_rule_y)),
        ("mi_average_kl", worst(&|r| r.0.residuals.avg_kl)),
        ("entropy_reduction_point", worst(&|r| r.0.residuals.entropy_reduction)),
        ("entropy_reduction_detector", worst(&|r| r.1)),
    ] {
        checks.push(Check { name: name.into(), value, tolerance: tol });
    }

    // Analytic beta derivative of the fixed-detector response against finite differences.
    let model = BetaResponseModel { base, x0: grid.point(x0), ygrid: grid };
    let mut gap: f64 = 0.0;
    for &beta in &betas {
        gap = gap.max(derivative_gap(&model, beta, cfg.numerics.fd_delta)?.unwrap_or(0.0));
    }
    checks.push(Check { name: "beta_derivative_fd".into(), value: gap, tolerance: rtol });

    // Null model: score centring and three Fisher estimates that must agree.
    let null = cfg.null_base()?;
    let eps = log_spaced(cfg.null.eps_min, cfg.null.eps_max, cfg.null.count)?;
    let eff = cfg.null.efficiency;
    let (fd, kl) = (cfg.numerics.fd_delta, cfg.numerics.kl_delta);
    let mut score_mean: f64 = 0.0;
    let mut fisher_fd: f64 = 0.0;
    let mut fisher_kl: f64 = 0.0;
    let mut launched: f64 = 0.0;
    for &b in &cfg.null.b {
        for &e in &eps {
            let spec = NullModelSpec { b, ..null.with_eps(e) };
            let pt = evaluate_null_point(&spec, eff, fd)?;
            score_mean = score_mean.max(pt.fisher.score_mean_residual);
            let uniform = Dist1D::uniform(spec.ygrid);
            let r = null_response(&spec)?;
            let dr_fd = fd_derivative(&NullModel { spec: spec.clone() }, spec.theta, fd)?;
            fisher_fd = fisher_fd.max(rel_gap(pt.fisher.f_cond, try_fisher(&r, &dr_fd, &uniform)?));
            let shifted = spec.with_theta(spec.theta + kl);
            let cond = |s: &NullModelSpec| -> Result<Vec<f64>, CliError> {
                let r = null_response(s)?;
                let z: f64 = r.iter().sum();
                Ok(r.iter().map(|v| v / z).collect())
            };
            let f_kl = fisher_from_kl(&cond(&spec)?, &cond(&shifted)?, kl)?;
            fisher_kl = fisher_kl.max(rel_gap(pt.fisher.f_cond, f_kl));
            let l_kl = fisher_from_kl(&composite_record(&spec, eff)?, &composite_record(&shifted, eff)?, kl)?;
            launched = launched.max(rel_gap(pt.fisher.f_launch, l_kl));
        }
    }
    checks.push(Check { name: "score_mean_zero".into(), value: score_mean, tolerance: tol });
    checks.push(Check { name: "fisher_analytic_vs_fd".into(), value: fisher_fd, tolerance: rtol });
    checks.push(Check { name: "fisher_analytic_vs_kl".into(), value: fisher_kl, tolerance: rtol });
    checks.push(Check { name: "launched_vs_composite_kl".into(), value: launched, tolerance: rtol });

    // Coherence entropy under seeded unitaries.
    let spectrum = geometric_spectrum(cfg.coherence.modes)?;
    let mut dev: f64 = 0.0;
    for k in 0..cfg.coherence.unitaries {
        dev = dev.max((rotated_entropy(&spectrum, unitary_seed(cfg, k))? - spectrum.entropy()).abs());
    }
    checks.push(Check { name: "unitary_invariance".into(), value: dev, tolerance: tol });

    metadata.push(("grid_n".into(), grid.len().to_string()));
    metadata.push(("beta_count".into(), betas.len().to_string()));
    metadata.push(("null_b".into(), cfg.null.b.iter().map(|b| fmt_f64(*b)).collect::<Vec<_>>().join(";")));
    metadata.push(("eps_count".into(), eps.len().to_string()));
    metadata.push(("fd_delta".into(), fmt_f64(fd)));
    metadata.push(("kl_delta".into(), fmt_f64(kl)));
    Ok(IdentityReport { metadata, checks })
}

/// Builds the configured kernel on the configured grid, with sidecar metadata.
pub fn kernel_dump(cfg: &RunConfig) -> Result<(ComplexKernel, Vec<(String, String)>), CliError> {
    let grid = cfg.grid()?;
    let spec = cfg.kernel_spec()?;
    let kernel = spec.build(grid, grid)?;
    let k = &cfg.kernel;
    let mut meta: Vec<(String, String)> = vec![
        ("command".into(), "kernel-dump".into()),
        ("kernel".into(), spec.name().into()),
        ("grid_lo".into(), fmt_f64(grid.lo())),
        ("grid_hi".into(), fmt_f64(grid.hi())),
        ("grid_n".into(), grid.len().to_string()),
        ("normalization_constant".into(), "1".into()),
    ];
    match k.kind {
        KernelKind::TwoPathBeta => {
            meta.push(("beta".into(), fmt_f64(k.beta)));
            meta.push(("d".into(), fmt_f64(k.d)));
            meta.push(("sigma".into(), fmt_f64(k.sigma)));
        }
        KernelKind::DiscreteSlits | KernelKind::Aperture => {
            meta.push(("k".into(), fmt_f64(k.k)));
            meta.push(("ls".into(), fmt_f64(k.ls)));
            meta.push(("ld".into(), fmt_f64(k.ld)));
            let join = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";");
            meta.push(("slit_positions".into(), join(&k.slit_positions)));
            meta.push(("slit_amplitudes".into(), join(&k.slit_amplitudes)));
            meta.push(("slit_phases".into(), join(&k.slit_phases)));
            if k.kind == KernelKind::Aperture {
                meta.push(("slit_width".into(), fmt_f64(k.slit_width)));
                meta.push(("cells_per_width".into(), k.cells_per_width.to_string()));
            }
        }
    }
    Ok((kernel, meta))
}
