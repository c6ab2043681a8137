use std::fs::File;
use std::io::{BufReader, BufWriter};

use fieldprep::angles::{thetas_from_state, Schedule, CONVENTION};
use fieldprep::circuit::{emit, render_qasm, render_text};
use fieldprep::digitize::StateVector;
use fieldprep::interacting::{interacting_observables, solve_spectrum, LanczosOptions, SparseHamiltonian};
use fieldprep::truncation::{
    compare_budget, decay_sweep, h_truncation_scan, schedule_fidelity, truncate, FitModel, TruncationPolicy,
    Weighting,
};
use fieldprep::{build_kernel, lattice, Boundary, LatticeSpec, TwoPointMode};
use serde_json::{json, Value};

use crate::args::{Command, DecompositionArg, ModelArg, Render, ScanMode};
use crate::pipeline::{self, fit_json, fit_value};
use crate::{ensure_parent, reproduce, CliError, CliResult, Output};

pub fn run(cmd: &Command) -> CliResult<Output> {
    match cmd {
        Command::Kmatrix { lattice, two_point } => {
            let spec = lattice.spec(Boundary::Periodic)?;
            kmatrix(spec, two_point.as_deref())
        }
        Command::Correlations { lattice, rmin, rmax } => {
            let spec = lattice.spec(Boundary::Periodic)?;
            correlations(spec, *rmin, *rmax)
        }
        Command::Groundstate { lattice, state } => {
            let spec = lattice.spec(Boundary::Periodic)?;
            let psi = pipeline::free_state(&spec, lattice.budget)?;
            ensure_parent(state)?;
            psi.write_binary(BufWriter::new(File::create(state)?))?;
            let mut v = serde_json::to_value(psi.metadata()).expect("metadata serializes");
            v["state_file"] = json!(state.display().to_string());
            Ok(Output::json("groundstate", Some(spec), v))
        }
        Command::Angles {
            lattice,
            decomposition,
            state,
        } => {
            let spec = lattice.spec(Boundary::Periodic)?;
            let psi = match state {
                Some(p) => StateVector::read_binary(BufReader::new(File::open(p)?), spec.clone())?,
                None => pipeline::free_state(&spec, lattice.budget)?,
            };
            let s = pipeline::schedule(&pipeline::nonnegative(&psi)?, *decomposition)?;
            let mut v = s.to_json();
            v["spec"] = json!(spec);
            v["rotation_count"] = json!(s.rotation_count());
            if let Schedule::Theta(t) = &s {
                v["dead_count"] = json!(t.dead_count());
            }
            let csv = pipeline::schedule_csv(&s);
            Ok(Output::json("angles", Some(spec), v).with_csv(csv))
        }
        Command::Truncate {
            lattice,
            decomposition,
            hmax,
            tau,
            max_rotations,
        } => {
            let spec = lattice.spec(Boundary::Periodic)?;
            let policy = TruncationPolicy {
                max_rotations: *max_rotations,
                ..TruncationPolicy::new(*hmax, *tau)
            };
            policy.validate()?;
            let psi = pipeline::free_state(&spec, lattice.budget)?;
            let s = pipeline::schedule(&psi, *decomposition)?;
            let (t, counts) = truncate(&s, &policy)?;
            let f = schedule_fidelity(&psi.amplitudes, &t)?;
            let v = json!({
                "policy": policy,
                "rotations_before": s.rotation_count(),
                "retained": counts.retained,
                "zeroed": counts.zeroed,
                "fidelity": f,
                "infidelity": 1.0 - f,
                "schedule": t.to_json(),
            });
            let csv = format!(
                "rotations_before,retained,zeroed,fidelity\n{},{},{},{:.17e}\n",
                s.rotation_count(),
                counts.retained,
                counts.zeroed,
                f
            );
            Ok(Output::json("truncate", Some(spec), v).with_csv(csv))
        }
        Command::FidelityScan {
            lattice,
            mode,
            decomposition,
            h,
            hmax,
            tau,
        } => {
            let spec = lattice.spec(Boundary::Periodic)?;
            let psi = pipeline::free_state(&spec, lattice.budget)?;
            match mode {
                ScanMode::Hscan => hscan(spec, &psi, *decomposition, h),
                ScanMode::Budget => budget_grid(spec, &psi, *decomposition, hmax, tau),
            }
        }
        Command::Envelope {
            lattice,
            decomposition,
            model,
            power,
            rmin,
            rmax,
        } => {
            let spec = lattice.spec(Boundary::Periodic)?;
            let psi = pipeline::free_state(&spec, lattice.budget)?;
            let a = pipeline::alphas(&psi, *decomposition)?;
            let env = pipeline::envelope(&a, spec.qubits_per_site);
            let model = match model {
                ModelArg::Bessel => FitModel::BesselEnvelope,
                ModelArg::PowerExp => FitModel::PowerExp { power: *power },
                ModelArg::PureExp => FitModel::PureExp,
            };
            let pts = pipeline::in_window(&env, *rmin, rmax.unwrap_or(usize::MAX));
            let (_, fv) = fit_json(model, &pts);
            let v = json!({"envelope": env, "window": [rmin, rmax], "fit": fv});
            Ok(Output::json("envelope", Some(spec), v).with_csv(pipeline::envelope_csv(&env)))
        }
        Command::Interacting {
            lattice,
            pi_mode,
            decomposition,
            tolerance,
            max_iterations,
            save_states,
        } => {
            let spec = lattice.spec(Boundary::Open)?;
            let opts = LanczosOptions {
                tolerance: *tolerance,
                max_iterations: *max_iterations,
                ..LanczosOptions::default()
            };
            let (v, states) = interacting(&spec, (*pi_mode).into(), *decomposition, &opts, lattice.budget)?;
            let mut out = Output::json("interacting", Some(spec), v);
            if *save_states {
                for (name, s) in [("ground_state.bin", &states.0), ("excited_state.bin", &states.1)] {
                    let mut buf = Vec::new();
                    s.write_binary(&mut buf)?;
                    out.files.push((name.to_string(), buf));
                }
            }
            Ok(out)
        }
        Command::Emit {
            lattice,
            schedule,
            decomposition,
            render,
        } => {
            let (s, spec, mut meta) = match schedule {
                Some(p) => {
                    let v: Value = serde_json::from_reader(BufReader::new(File::open(p)?))
                        .map_err(|e| fieldprep::Error::Format(e.to_string()))?;
                    let spec: Option<LatticeSpec> = v.get("spec").and_then(|s| serde_json::from_value(s.clone()).ok());
                    let mut meta = Vec::new();
                    if let Some(h) = v.get("spec_hash").and_then(Value::as_str) {
                        meta.push(("spec_hash".to_string(), h.to_string()));
                    }
                    (Schedule::from_json(&v)?, spec, meta)
                }
                None => {
                    let spec = lattice.spec(Boundary::Periodic)?;
                    let psi = pipeline::free_state(&spec, lattice.budget)?;
                    let meta = vec![("spec_hash".to_string(), spec.hash())];
                    (pipeline::schedule(&psi, *decomposition)?, Some(spec), meta)
                }
            };
            meta.push(("convention".into(), CONVENTION.into()));
            meta.push((
                "schedule".into(),
                match &s {
                    Schedule::Theta(_) => "theta".into(),
                    Schedule::Alpha(a) => a.decomposition.tag(),
                },
            ));
            let ir = emit(&s, meta);
            let text = match render {
                Render::Text => ("txt", render_text(&ir)),
                Render::Qasm => ("qasm", render_qasm(&ir)),
            };
            let mut out = Output::json("circuit", spec, json!({"counts": ir.counts()}));
            out.text = Some(text);
            Ok(out)
        }
        Command::Reproduce { target } => reproduce::run(*target),
    }
}

pub fn kmatrix(spec: LatticeSpec, two_point: Option<&str>) -> CliResult<Output> {
    let k = build_kernel(&spec)?;
    let mut v = k.to_json();
    if let Some(mode) = two_point {
        let mode: TwoPointMode = serde_json::from_value(json!(mode)).map_err(|e| CliError::usage(e.to_string()))?;
        let t = lattice::two_point(&k, mode)?;
        v["two_point"] = serde_json::to_value(&t).expect("table serializes");
    }
    let n = k.n_sites();
    let mut csv = String::from("i,j,k\n");
    for i in 0..n {
        for j in 0..n {
            csv.push_str(&format!("{i},{j},{:.17e}\n", k.k_matrix[(i, j)]));
        }
    }
    Ok(Output::json("kmatrix", Some(spec), v).with_csv(csv))
}

pub fn correlations(spec: LatticeSpec, rmin: usize, rmax: usize) -> CliResult<Output> {
    let k = build_kernel(&spec)?;
    let sweep = decay_sweep(&k, (rmin, rmax))?;
    let mut csv = String::from("r,k_entry,two_point,mutual_information,negativity\n");
    for r in &sweep.rows {
        csv.push_str(&format!(
            "{},{:e},{:e},{:e},{:e}\n",
            r.r, r.k_entry, r.two_point, r.mutual_information, r.negativity
        ));
    }
    Ok(Output::json("correlations", Some(spec), sweep_json(&sweep)).with_csv(csv))
}

pub fn sweep_json(s: &fieldprep::truncation::DecaySweep) -> Value {
    json!({
        "rows": s.rows,
        "window": s.window,
        "fit_k": fit_value(&s.fit_k),
        "fit_two_point": fit_value(&s.fit_two_point),
        "fit_mutual_information": fit_value(&s.fit_mutual_information),
    })
}

pub fn hscan(spec: LatticeSpec, psi: &StateVector, d: DecompositionArg, hs: &[usize]) -> CliResult<Output> {
    let a = pipeline::alphas(psi, d)?;
    let rows = h_truncation_scan(&psi.amplitudes, &a, hs)?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(h, inf, _)| (h as f64, inf)).collect();
    let (_, fit) = fit_json(
        FitModel::ExpLinear {
            weighting: Weighting::Amplitude,
        },
        &pts,
    );
    let (_, fit_uniform) = fit_json(
        FitModel::ExpLinear {
            weighting: Weighting::Uniform,
        },
        &pts,
    );
    let mut csv = String::from("h_trunc,infidelity,retained\n");
    for (h, inf, n) in &rows {
        csv.push_str(&format!("{h},{inf:e},{n}\n"));
    }
    let v = json!({
        "decomposition": a.decomposition.tag(),
        "rows": rows.iter().map(|(h, inf, n)| json!({"h_trunc": h, "infidelity": inf, "retained": n})).collect::<Vec<_>>(),
        "fit": fit,
        "fit_unweighted": fit_uniform,
    });
    Ok(Output::json("fidelity_scan", Some(spec), v).with_csv(csv))
}

pub fn budget_grid(
    spec: LatticeSpec,
    psi: &StateVector,
    d: DecompositionArg,
    hmax: &[usize],
    tau: &[f64],
) -> CliResult<Output> {
    let thetas = thetas_from_state(psi)?;
    let a = pipeline::alphas(psi, d)?;
    let mut rows = Vec::new();
    for &h in hmax {
        for &t in tau {
            rows.push(compare_budget(&psi.amplitudes, &thetas, &a, h, t)?);
        }
    }
    let wins = rows.iter().filter(|r| r.fidelity_alpha >= r.fidelity_theta).count();
    let best = rows
        .iter()
        .map(|r| (1.0 - r.fidelity_theta) / (1.0 - r.fidelity_alpha).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let mut csv = String::from("h_max,tau,retained,fidelity_alpha,fidelity_theta\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{:.17e},{:.17e}\n",
            r.h_max, r.tau, r.retained_rotations, r.fidelity_alpha, r.fidelity_theta
        ));
    }
    let v = json!({
        "decomposition": a.decomposition.tag(),
        "rows": rows,
        "alpha_at_least_theta": wins,
        "budgets": rows.len(),
        "best_infidelity_ratio": best,
    });
    Ok(Output::json("fidelity_scan", Some(spec), v).with_csv(csv))
}

/// Lanczos run plus envelope and two-point fits from the ground state.
pub fn interacting(
    spec: &LatticeSpec,
    mode: fieldprep::interacting::PiMode,
    d: DecompositionArg,
    opts: &LanczosOptions,
    budget: u64,
) -> CliResult<(Value, (StateVector, StateVector))> {
    let h = SparseHamiltonian::with_budget(spec, mode, budget)?;
    let s = solve_spectrum(&h, opts)?;
    let ground = pipeline::nonnegative(&s.ground_state)?;
    let obs = interacting_observables(&ground)?;
    let rmax = pipeline::max_separation(spec);
    let a = pipeline::alphas(&ground, d)?;
    let env = pipeline::envelope(&a, spec.qubits_per_site);
    let (_, fit_alpha) = fit_json(FitModel::PowerExp { power: 1.5 }, &pipeline::in_window(&env, 1, rmax));
    let c_row = pipeline::row_magnitudes(&obs.connected, rmax);
    let g_row = pipeline::row_magnitudes(&obs.inverse, rmax);
    let (_, fit_c) = fit_json(FitModel::PowerExp { power: 0.5 }, &pipeline::in_window(&c_row, 1, rmax));
    let (_, fit_g) = fit_json(FitModel::PowerExp { power: 1.5 }, &pipeline::in_window(&g_row, 1, rmax));
    let n = spec.n_sites;
    let flat = |m: &nalgebra::DMatrix<f64>| -> Vec<f64> { (0..n * n).map(|i| m[(i / n, i % n)]).collect() };
    let mut v = s.to_json(&h);
    v["decomposition"] = json!(a.decomposition.tag());
    v["connected_two_point"] = json!(flat(&obs.connected));
    v["inverse_two_point"] = json!(flat(&obs.inverse));
    v["alpha_envelope"] = json!(env);
    v["fit_alpha"] = fit_alpha;
    v["fit_two_point"] = fit_c;
    v["fit_inverse_two_point"] = fit_g;
    Ok((v, (ground, s.excited_state)))
}
