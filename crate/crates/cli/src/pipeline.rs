//! Steps shared by the subcommands and the reproduction targets.

use fieldprep::angles::{alphas_from_thetas, thetas_from_state, AlphaSchedule, Decomposition, Schedule};
use fieldprep::digitize::{ground_state_with_budget, FieldGrid, StateVector};
use fieldprep::truncation::{fit, max_abs_alpha_by_distance, FitModel, FitResult};
use fieldprep::{build_kernel, Boundary, LatticeSpec};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::args::DecompositionArg;
use crate::{CliError, CliResult};

pub fn free_state(spec: &LatticeSpec, budget: u64) -> CliResult<StateVector> {
    let k = build_kernel(spec)?;
    Ok(ground_state_with_budget(&k, &FieldGrid::for_spec(spec)?, budget)?)
}

pub fn decomposition(d: DecompositionArg, qubits: u32) -> Option<Decomposition> {
    match d {
        DecompositionArg::Theta => None,
        DecompositionArg::Full => Some(Decomposition::Full),
        DecompositionArg::Sitewise => Some(Decomposition::SiteWise(qubits)),
    }
}

pub fn schedule(state: &StateVector, d: DecompositionArg) -> CliResult<Schedule> {
    let thetas = thetas_from_state(state)?;
    Ok(match decomposition(d, state.spec.qubits_per_site) {
        None => Schedule::Theta(thetas),
        Some(dec) => Schedule::Alpha(alphas_from_thetas(&thetas, &dec)?),
    })
}

pub fn alphas(state: &StateVector, d: DecompositionArg) -> CliResult<AlphaSchedule> {
    match schedule(state, d)? {
        Schedule::Alpha(a) => Ok(a),
        Schedule::Theta(_) => Err(CliError::usage("this command needs an α decomposition (full or sitewise)")),
    }
}

/// Largest separation with distinct correlations from site 0.
pub fn max_separation(spec: &LatticeSpec) -> usize {
    match spec.boundary {
        Boundary::Periodic => spec.n_sites / 2,
        Boundary::Open => spec.n_sites - 1,
    }
}

pub fn in_window(points: &[(usize, f64)], rmin: usize, rmax: usize) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter(|(r, _)| *r >= rmin && *r <= rmax)
        .map(|&(r, y)| (r as f64, y))
        .collect()
}

pub fn envelope(a: &AlphaSchedule, qubits: u32) -> Vec<(usize, f64)> {
    max_abs_alpha_by_distance(a, qubits)
}

/// `|X_{0r}|` for `r = 1..=rmax`.
pub fn row_magnitudes(x: &DMatrix<f64>, rmax: usize) -> Vec<(usize, f64)> {
    (1..=rmax).map(|r| (r, x[(0, r)].abs())).collect()
}

pub fn fit_json(model: FitModel, points: &[(f64, f64)]) -> (Option<FitResult>, Value) {
    match fit(model, points) {
        Ok(f) => {
            let v = serde_json::to_value(&f).expect("fit serializes");
            (Some(f), v)
        }
        Err(e) => (None, json!({"model": model, "error": e.to_string()})),
    }
}

pub fn fit_value(r: &Result<FitResult, String>) -> Value {
    match r {
        Ok(f) => serde_json::to_value(f).expect("fit serializes"),
        Err(e) => json!({ "error": e }),
    }
}

/// Flips the global sign so the amplitudes sum positive; any remaining
/// negative amplitude above roundoff is an error.
pub fn nonnegative(state: &StateVector) -> CliResult<StateVector> {
    let sign = if state.amplitudes.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let mut out = state.clone();
    for a in &mut out.amplitudes {
        *a *= sign;
        if *a < -1e-12 {
            return Err(fieldprep::Error::numerical(
                "state has a sign structure; rotation angles need nonnegative amplitudes",
            )
            .into());
        }
        *a = a.abs();
    }
    Ok(out)
}

pub fn envelope_csv(env: &[(usize, f64)]) -> String {
    let mut s = String::from("r_hat,max_abs_alpha\n");
    for (r, a) in env {
        s.push_str(&format!("{r},{a:e}\n"));
    }
    s
}

pub fn schedule_csv(s: &Schedule) -> String {
    let mut out = String::from("level,h,k,angle\n");
    match s {
        Schedule::Theta(t) => {
            for (l, lv) in t.levels.iter().enumerate() {
                for (k, a) in lv.iter().enumerate().filter(|(_, a)| **a != 0.0) {
                    out.push_str(&format!("{l},{l},{k},{a:e}\n"));
                }
            }
        }
        Schedule::Alpha(a) => {
            for (l, terms) in a.levels.iter().enumerate() {
                for (h, al) in terms {
                    for (k, x) in al.iter().enumerate().filter(|(_, x)| **x != 0.0) {
                        out.push_str(&format!("{l},{h},{k},{x:e}\n"));
                    }
                }
            }
        }
    }
    out
}
