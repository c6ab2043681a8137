//! One-shot datasets at fixed reference parameters.

use fieldprep::angles::{alphas_from_thetas, thetas_from_state, Decomposition};
use fieldprep::digitize::{field_correlations, DEFAULT_AMPLITUDE_BUDGET};
use fieldprep::interacting::{LanczosOptions, PiMode};
use fieldprep::truncation::{control_distance, FitModel};
use fieldprep::{build_kernel, Boundary, GradientStencil, LatticeSpec};
use nalgebra::DMatrix;
use serde_json::json;

use crate::args::{DecompositionArg, Target};
use crate::commands;
use crate::pipeline::{self, fit_json};
use crate::{CliResult, Output};

/// N = 3, n_Q = 2, m̂ = 0.3, φ_max = 3.5 with open boundaries.
pub fn table1_spec() -> LatticeSpec {
    LatticeSpec::new(3, 0.3)
        .with_qubits(2)
        .with_phi_max(3.5)
        .with_boundary(Boundary::Open)
}

pub fn fig1_spec(stencil: GradientStencil) -> LatticeSpec {
    LatticeSpec::new(80, 0.3).with_stencil(stencil)
}

/// Ten sites of two qubits at m̂ = 0.3, open boundaries.
pub fn ten_site_spec() -> LatticeSpec {
    LatticeSpec::new(10, 0.3)
        .with_qubits(2)
        .with_phi_max(3.5)
        .with_boundary(Boundary::Open)
}

pub fn fig4_spec() -> LatticeSpec {
    LatticeSpec::new(4, 0.3)
        .with_qubits(2)
        .with_phi_max(3.5)
        .with_boundary(Boundary::Open)
}

pub fn fig6_free_spec() -> LatticeSpec {
    LatticeSpec::new(8, 1.6)
        .with_qubits(2)
        .with_phi_max(1.7)
        .with_boundary(Boundary::Open)
}

pub fn fig6_interacting_spec() -> LatticeSpec {
    LatticeSpec::new(8, 1.6)
        .with_qubits(2)
        .with_phi_max(1.3)
        .with_coupling(32.0)
        .with_boundary(Boundary::Open)
}

/// Residual small enough that the far-distance α angles are resolved.
pub fn interacting_lanczos() -> LanczosOptions {
    LanczosOptions {
        tolerance: 1e-12,
        max_iterations: 2000,
        ..LanczosOptions::default()
    }
}

pub const FIG4_HMAX: [usize; 5] = [1, 2, 3, 4, 5];
pub const FIG4_TAU: [f64; 4] = [0.1, 0.03, 0.01, 0.001];
pub const FIG5_H: [usize; 6] = [4, 6, 8, 10, 12, 14];

pub fn run(target: Target) -> CliResult<Output> {
    match target {
        Target::AppendixFK => commands::kmatrix(table1_spec(), None),
        Target::Table1 => table1(),
        Target::Fig1 => fig1(),
        Target::Fig2 => fig2(),
        Target::Fig4 => {
            let spec = fig4_spec();
            let psi = pipeline::free_state(&spec, DEFAULT_AMPLITUDE_BUDGET)?;
            commands::budget_grid(spec, &psi, DecompositionArg::Full, &FIG4_HMAX, &FIG4_TAU)
        }
        Target::Fig5 => {
            let spec = ten_site_spec();
            let psi = pipeline::free_state(&spec, DEFAULT_AMPLITUDE_BUDGET)?;
            commands::hscan(spec, &psi, DecompositionArg::Full, &FIG5_H)
        }
        Target::Fig6 => fig6(),
    }
}

fn table1() -> CliResult<Output> {
    let spec = table1_spec();
    let psi = pipeline::free_state(&spec, DEFAULT_AMPLITUDE_BUDGET)?;
    let thetas = thetas_from_state(&psi)?;
    let alphas = alphas_from_thetas(&thetas, &Decomposition::SiteWise(2))?;
    let levels: Vec<_> = (0..thetas.n_qubits)
        .map(|l| {
            let terms: Vec<_> = alphas.levels[l]
                .iter()
                .map(|(h, a)| json!({"h": h, "r_hat": control_distance(l, *h, 2), "alpha": a}))
                .collect();
            json!({"level": l, "theta": thetas.levels[l], "alpha_sitewise": terms})
        })
        .collect();
    let mut csv = String::from("level,kind,h,k,angle\n");
    for (l, lv) in thetas.levels.iter().enumerate() {
        for (k, t) in lv.iter().enumerate() {
            csv.push_str(&format!("{l},theta,{l},{k},{t:.17e}\n"));
        }
        for (h, a) in &alphas.levels[l] {
            for (k, x) in a.iter().enumerate() {
                csv.push_str(&format!("{l},alpha,{h},{k},{x:.17e}\n"));
            }
        }
    }
    Ok(Output::json("table1", Some(spec.clone()), json!({"spec": spec, "levels": levels})).with_csv(csv))
}

fn fig1() -> CliResult<Output> {
    let mut v = json!({});
    let mut csv = String::from("stencil,r,k_entry,two_point,mutual_information,negativity\n");
    for (name, st) in [("s1", GradientStencil::s1()), ("s3", GradientStencil::s3())] {
        let spec = fig1_spec(st);
        let sweep = fieldprep::truncation::decay_sweep(&build_kernel(&spec)?, (15, 30))?;
        for r in &sweep.rows {
            csv.push_str(&format!(
                "{name},{},{:e},{:e},{:e},{:e}\n",
                r.r, r.k_entry, r.two_point, r.mutual_information, r.negativity
            ));
        }
        let mut s = commands::sweep_json(&sweep);
        if let (Ok(mi), Ok(tp)) = (&sweep.fit_mutual_information, &sweep.fit_two_point) {
            s["mi_to_two_point_exponent_ratio"] = json!(mi.decay() / tp.decay());
        }
        s["spec"] = json!(spec);
        v[name] = s;
    }
    Ok(Output::json("fig1", Some(fig1_spec(GradientStencil::s1())), v).with_csv(csv))
}

fn fig2() -> CliResult<Output> {
    let spec = ten_site_spec();
    let psi = pipeline::free_state(&spec, DEFAULT_AMPLITUDE_BUDGET)?;
    let a = pipeline::alphas(&psi, DecompositionArg::Sitewise)?;
    let env = pipeline::envelope(&a, 2);
    let (_, fit) = fit_json(FitModel::BesselEnvelope, &pipeline::in_window(&env, 2, usize::MAX));
    let (_, fit_all) = fit_json(FitModel::BesselEnvelope, &pipeline::in_window(&env, 1, usize::MAX));
    let v = json!({
        "spec": spec,
        "envelope": env,
        "fit": fit,
        "fit_including_nearest": fit_all,
    });
    Ok(Output::json("fig2", Some(spec), v).with_csv(pipeline::envelope_csv(&env)))
}

fn fig6() -> CliResult<Output> {
    let spec = fig6_free_spec();
    let rmax = pipeline::max_separation(&spec);
    let k = build_kernel(&spec)?;
    let psi = pipeline::free_state(&spec, DEFAULT_AMPLITUDE_BUDGET)?;
    let a = pipeline::alphas(&psi, DecompositionArg::Full)?;
    let env = pipeline::envelope(&a, 2);
    let n = spec.n_sites;
    let raw = field_correlations(&psi)?;
    let c = DMatrix::from_fn(n, n, |i, j| raw[i * n + j]);
    let g = c
        .clone()
        .try_inverse()
        .ok_or_else(|| fieldprep::Error::numerical("digitized two-point matrix is singular"))?;
    let window = |pts: &[(usize, f64)]| pipeline::in_window(pts, 1, rmax);
    let k_row = pipeline::row_magnitudes(&k.k_matrix, rmax);
    let free = json!({
        "spec": spec,
        "alpha_envelope": env,
        "fit_alpha": fit_json(FitModel::PowerExp { power: 1.5 }, &window(&env)).1,
        "k_row": k_row,
        "fit_k": fit_json(FitModel::PowerExp { power: 1.5 }, &window(&k_row)).1,
        "fit_k_pure_exp": fit_json(FitModel::PureExp, &window(&k_row)).1,
        "fit_two_point": fit_json(FitModel::PowerExp { power: 0.5 }, &window(&pipeline::row_magnitudes(&c, rmax))).1,
        "fit_inverse_two_point": fit_json(FitModel::PowerExp { power: 1.5 }, &window(&pipeline::row_magnitudes(&g, rmax))).1,
    });
    let ispec = fig6_interacting_spec();
    let (mut inter, _) = commands::interacting(
        &ispec,
        PiMode::SpectralPeriodic,
        DecompositionArg::Full,
        &interacting_lanczos(),
        DEFAULT_AMPLITUDE_BUDGET,
    )?;
    inter["spec"] = json!(ispec);
    Ok(Output::json("fig6", Some(spec), json!({"free": free, "interacting": inter})))
}
