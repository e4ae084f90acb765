//! Browser bindings. Each operation returns a flat row-major `Float64Array`;
//! the column layout is given by the matching `*_COLUMNS` constant.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use tryinfo::coherence::{coherence_entropy, geometric_spectrum, random_unitary, truncate_modes, CoherenceMatrix};
use tryinfo::infomeasures::{entropy_reduction_identity, mutual_information, shannon_entropy};
use tryinfo::kernels::{kernel_to_joint, KernelSpec, TwoPathBeta};
use tryinfo::nullmodel::{evaluate_null_point, log_spaced, NullModelSpec};
use tryinfo::probcore::{marginal_x, marginal_y, window_conditional};
use tryinfo::{Acceptance, Dist1D, Grid1D};
use wasm_bindgen::prelude::*;

pub const BETA_COLUMNS: [&str; 7] = ["beta", "H_X", "H_Y", "H_Y_given_x0", "I_XY", "lnAy_minus_H", "D_KL_prior"];
pub const NULL_COLUMNS: [&str; 5] = ["eps_bar", "H_cond", "F_cond", "P_det", "F_launch"];
pub const COHERENCE_COLUMNS: [&str; 3] = ["M", "S_truncated", "S_unitary"];

const MAX_GRID: usize = 1024;
const MAX_POINTS: usize = 401;

fn check_count(name: &str, n: usize, lo: usize, hi: usize) -> Result<(), String> {
    if n < lo || n > hi {
        return Err(format!("{name} must be between {lo} and {hi}, got {n}"));
    }
    Ok(())
}

/// Information measures of the two-path kernel on `[-3, 3]` for `count`
/// values of `beta` in `[start, stop]`.
pub fn beta_rows(start: f64, stop: f64, count: usize, grid_n: usize, x0: f64) -> Result<Vec<f64>, String> {
    check_count("grid_n", grid_n, 2, MAX_GRID)?;
    check_count("count", count, 1, MAX_POINTS)?;
    if !(start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(format!("need finite start <= stop, got [{start}, {stop}]"));
    }
    let g = Grid1D::new(-3.0, 3.0, grid_n).map_err(|e| e.to_string())?;
    let prior = Dist1D::uniform(g);
    let acc = Acceptance::point(&g, x0);
    let mut out = Vec::with_capacity(count * BETA_COLUMNS.len());
    for i in 0..count {
        let beta = if count == 1 { start } else { start + (stop - start) * i as f64 / (count - 1) as f64 };
        let k = TwoPathBeta::new(beta, 1.3, 0.65).map_err(|e| e.to_string())?;
        let kernel = KernelSpec::TwoPathBeta(k).build(g, g).map_err(|e| e.to_string())?;
        let joint = kernel_to_joint(&kernel, &prior, &Acceptance::full(&g)).map_err(|e| e.to_string())?;
        let cond = window_conditional(&kernel, &acc, &prior).map_err(|e| e.to_string())?;
        let er = entropy_reduction_identity(&cond, &prior).map_err(|e| e.to_string())?;
        out.extend([
            beta,
            shannon_entropy(&marginal_x(&joint)),
            shannon_entropy(&marginal_y(&joint)),
            shannon_entropy(&cond),
            mutual_information(&joint),
            er.lhs,
            er.rhs,
        ]);
    }
    Ok(out)
}

/// Null-model sweep over log-spaced residual depths at floor `b`.
pub fn null_rows(b: f64, eps_min: f64, eps_max: f64, count: usize) -> Result<Vec<f64>, String> {
    check_count("count", count, 2, MAX_POINTS)?;
    let base = NullModelSpec { b, ..Default::default() };
    base.validate().map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(count * NULL_COLUMNS.len());
    for e in log_spaced(eps_min, eps_max, count).map_err(|e| e.to_string())? {
        let p = evaluate_null_point(&base.with_eps(e), 1.0, 1e-5).map_err(|e| e.to_string())?;
        out.extend([e, p.h_cond, p.fisher.f_cond, p.fisher.p_det, p.fisher.f_launch]);
    }
    Ok(out)
}

/// Truncated-spectrum entropy and the entropy after a seeded unitary, for
/// `M = 1..=modes`.
pub fn coherence_rows(modes: usize, seed: u64) -> Result<Vec<f64>, String> {
    check_count("modes", modes, 1, 64)?;
    let spectrum = geometric_spectrum(modes).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(modes * COHERENCE_COLUMNS.len());
    for m in 1..=modes {
        let s_trunc = truncate_modes(&spectrum, m).map_err(|e| e.to_string())?.entropy();
        let u = random_unitary(modes, seed.wrapping_add(m as u64 - 1));
        let rho = CoherenceMatrix::from_spectrum(&spectrum, &u).map_err(|e| e.to_string())?;
        out.extend([m as f64, s_trunc, coherence_entropy(&rho).map_err(|e| e.to_string())?]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn beta_sweep(start: f64, stop: f64, count: usize, grid_n: usize, x0: f64) -> Result<Vec<f64>, JsValue> {
    beta_rows(start, stop, count, grid_n, x0).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn null_sweep(b: f64, eps_min: f64, eps_max: f64, count: usize) -> Result<Vec<f64>, JsValue> {
    null_rows(b, eps_min, eps_max, count).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn coherence_curve(modes: usize, seed: u64) -> Result<Vec<f64>, JsValue> {
    coherence_rows(modes, seed).map_err(|e| JsValue::from_str(&e))
}
