//! Acceptance criteria, one line each.
//!
//! Runs as a plain binary so the per-criterion lines always reach the test
//! log; exits nonzero when any criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};
use std::process::Command;
use std::time::Instant;

use fieldprep::angles::{
    alphas_from_thetas, ghz_alphas, ghz_schedule, state_from_thetas, thetas_from_alphas, thetas_from_amplitudes,
    thetas_from_state, w_negativity, w_schedule, Decomposition, Schedule,
};
use fieldprep::circuit::{emit, parse_text, render_text, simulate};
use fieldprep::digitize::{ground_state, FieldGrid, StateVector};
use fieldprep::gaussian::negativity_full_two_site;
use fieldprep::interacting::{
    interacting_observables, solve_spectrum, LanczosOptions, PiMode, SparseHamiltonian,
};
use fieldprep::truncation::{
    compare_budget, decay_sweep, fit, h_truncation_scan, max_abs_alpha_by_distance, truncate_alphas, FitModel,
    TruncationPolicy, Weighting,
};
use fieldprep::{build_kernel, build_mass_matrix, Boundary, GradientStencil, LatticeSpec, TwoPointMode};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde_json::Value;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn open(n: usize, m: f64) -> LatticeSpec {
    LatticeSpec::new(n, m).with_qubits(2).with_boundary(Boundary::Open)
}

fn free_state(spec: &LatticeSpec) -> StateVector {
    let k = build_kernel(spec).unwrap();
    ground_state(&k, &FieldGrid::for_spec(spec).unwrap()).unwrap()
}

fn cli_json(args: &[&str]) -> Result<Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fieldprep"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let v: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    Ok(v["result"].clone())
}

fn four_figures(got: f64, want: f64) -> bool {
    let scale = 10f64.powf(want.abs().log10().floor() - 3.0);
    (got - want).abs() <= 0.5 * scale * (1.0 + 1e-9)
}

fn decay(model: FitModel, pts: &[(f64, f64)]) -> f64 {
    fit(model, pts).map(|f| f.decay()).unwrap_or(f64::NAN)
}

fn row_points(x: &DMatrix<f64>, rmax: usize) -> Vec<(f64, f64)> {
    (1..=rmax).map(|r| (r as f64, x[(0, r)].abs())).collect()
}

fn envelope_points(a: &fieldprep::angles::AlphaSchedule, rmax: usize) -> Vec<(f64, f64)> {
    max_abs_alpha_by_distance(a, 2)
        .into_iter()
        .filter(|(r, _)| *r >= 1 && *r <= rmax)
        .map(|(r, y)| (r as f64, y))
        .collect()
}

fn c1_kernel() -> Check {
    let v = cli_json(&[
        "kmatrix", "--sites", "3", "--qubits", "2", "--mass", "0.3", "--phimax", "3.5", "--boundary", "open",
    ])?;
    let want = [1.396, -0.371, -0.0493, -0.371, 1.347, -0.371, -0.0493, -0.371, 1.396];
    let got: Vec<f64> = v["k_matrix"]
        .as_array()
        .ok_or("no k_matrix")?
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let worst = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    ensure(got.len() == 9 && worst <= 5e-4, format!("max |ΔK| = {worst:.2e} (tol 5e-4)"))
}

/// Reference angles by level: θ values, then α blocks keyed by control count.
fn table_reference() -> Vec<(Vec<f64>, Vec<(usize, Vec<f64>)>)> {
    vec![
        (vec![0.7854], vec![(0, vec![0.7854])]),
        (vec![1.569, 0.001463], vec![(1, vec![1.569, 0.001463])]),
        (
            vec![0.03564, 0.3174, 1.253, 1.535],
            vec![(0, vec![0.7854]), (2, vec![-0.7498, -0.468, 0.468, 0.7498])],
        ),
        (
            vec![1.535, 0.00007622, 1.566, 0.0006039, 1.570, 0.004701, 1.571, 0.03614],
            vec![
                (1, vec![1.56, 0.01038]),
                (3, vec![-0.02576, -0.01030, 0.005679, -0.009776, 0.009776, -0.005679, 0.01030, 0.02576]),
            ],
        ),
        (
            vec![
                0.03223, 0.2387, 1.072, 1.499, 0.04216, 0.3082, 1.176, 1.516, 0.05512, 0.3945, 1.263, 1.529, 0.07206,
                0.4988, 1.332, 1.539,
            ],
            vec![
                (0, vec![0.7854]),
                (2, vec![-0.735, -0.4254, 0.4254, 0.735]),
                (
                    4,
                    vec![
                        -0.01816, -0.1214, -0.1387, -0.02167, -0.008237, -0.05188, -0.03451, -0.004731, 0.004731,
                        0.03451, 0.05188, 0.008237, 0.02167, 0.1387, 0.1214, 0.01816,
                    ],
                ),
            ],
        ),
        (
            vec![
                1.555, 0.00001610, 1.569, 0.0001215, 1.571, 0.0009167, 1.571, 0.006916, 1.559, 0.00002106, 1.569,
                0.0001589, 1.571, 0.001199, 1.571, 0.009048, 1.562, 0.00002755, 1.570, 0.0002079, 1.571, 0.001569,
                1.571, 0.01184, 1.564, 0.00003604, 1.570, 0.0002720, 1.571, 0.002052, 1.571, 0.01548,
            ],
            vec![
                (1, vec![1.568, 0.003117]),
                (3, vec![-0.007703, -0.003092, 0.001683, -0.002927, 0.002927, -0.001683, 0.003092, 0.007703]),
                (
                    5,
                    vec![
                        -4.662e-3, -9.089e-6, -6.179e-4, -6.858e-5, -8.189e-5, -5.174e-4, -1.085e-5, -3.904e-3,
                        -1.015e-3, -4.127e-6, -1.345e-4, -3.114e-5, -1.783e-5, -2.350e-4, -2.363e-6, -1.773e-3,
                        1.773e-3, 2.363e-6, 2.350e-4, 1.783e-5, 3.114e-5, 1.345e-4, 4.127e-6, 1.015e-3, 3.904e-3,
                        1.085e-5, 5.174e-4, 8.189e-5, 6.858e-5, 6.179e-4, 9.089e-6, 4.662e-3,
                    ],
                ),
            ],
        ),
    ]
}

fn c2_angle_table() -> Check {
    let v = cli_json(&["reproduce", "table1"])?;
    let levels = v["levels"].as_array().ok_or("no levels")?;
    let (mut checked, mut bad) = (0, Vec::new());
    let num = |x: &Value| x.as_f64().unwrap_or(f64::NAN);
    for (l, (theta, alphas)) in table_reference().into_iter().enumerate() {
        let lv = &levels[l];
        for (k, want) in theta.iter().enumerate() {
            checked += 1;
            let got = num(&lv["theta"][k]);
            if !four_figures(got, *want) {
                bad.push(format!("θ[{l}][{k}]={got:.5e}"));
            }
        }
        let terms = lv["alpha_sitewise"].as_array().ok_or("no alpha")?;
        let hs: Vec<u64> = terms.iter().map(|t| t["h"].as_u64().unwrap()).collect();
        let want_hs: Vec<u64> = alphas.iter().map(|(h, _)| *h as u64).collect();
        if hs != want_hs {
            bad.push(format!("level {l} control counts {hs:?}"));
            continue;
        }
        for ((h, want), t) in alphas.iter().zip(terms) {
            for (k, w) in want.iter().enumerate() {
                checked += 1;
                let got = num(&t["alpha"][k]);
                if !four_figures(got, *w) {
                    bad.push(format!("α[{l}][h={h}][{k}]={got:.5e}"));
                }
            }
        }
    }
    ensure(
        bad.is_empty() && checked == 144,
        format!("{checked} entries to 4 significant figures, {} off {:?}", bad.len(), bad),
    )
}

/// Kernel and bilinear closed forms, GHZ and W states, W negativity by brute force.
fn c3_closed_forms() -> Check {
    let mut worst = 0.0f64;
    for m in [0.1f64, 0.3, 1.0, 2.5] {
        let k2 = build_kernel(&LatticeSpec::new(2, m)).map_err(|e| e.to_string())?.k_matrix;
        let s = (m * m + 4.0).sqrt();
        worst = worst.max((k2[(0, 0)] - 0.5 * (m + s)).abs());
        worst = worst.max((k2[(0, 1)] - 0.5 * (m - s)).abs());
        let kern = build_kernel(&LatticeSpec::new(4, m)).map_err(|e| e.to_string())?;
        let k4 = &kern.k_matrix;
        let (s2, s4) = ((m * m + 2.0).sqrt(), (m * m + 4.0).sqrt());
        for (c, want) in [
            (0, 0.25 * (m + 2.0 * s2 + s4)),
            (1, 0.25 * (m - s4)),
            (2, 0.25 * (m - 2.0 * s2 + s4)),
            (3, 0.25 * (m - s4)),
        ] {
            worst = worst.max((k4[(0, c)] - want).abs());
        }
        let tp = fieldprep::lattice::two_point(&kern, TwoPointMode::FiniteLattice).map_err(|e| e.to_string())?;
        for (r, want) in [
            (0, (1.0 / m + 2.0 / s2 + 1.0 / s4) / 8.0),
            (1, (1.0 / m - 1.0 / s4) / 8.0),
            (2, (1.0 / m - 2.0 / s2 + 1.0 / s4) / 8.0),
        ] {
            worst = worst.max((tp.get(r).unwrap() - want).abs());
        }
    }
    let kernel_ok = worst < 1e-12;

    let mut ghz_err = 0.0f64;
    for n in 2..=8 {
        let psi = state_from_thetas(&ghz_schedule(n).unwrap());
        let h = FRAC_PI_4.cos() * (-1.0);
        ghz_err = ghz_err.max((psi[0] - h).abs()).max((psi[(1 << n) - 1] - h).abs());
        ghz_err = ghz_err.max(psi[1..(1 << n) - 1].iter().map(|x| x.abs()).fold(0.0, f64::max));
        let a = ghz_alphas(n).unwrap();
        for (l, terms) in a.levels.iter().enumerate() {
            for (h, al) in terms {
                for (k, &x) in al.iter().enumerate() {
                    let want = match (l, *h, k) {
                        (0, 0, 0) => -3.0 * FRAC_PI_4,
                        (l, 1, 1) if l >= 1 => FRAC_PI_2,
                        _ => 0.0,
                    };
                    ghz_err = ghz_err.max((x - want).abs());
                }
            }
        }
    }
    let mut w_err = 0.0f64;
    for n in 2..=8usize {
        let psi = state_from_thetas(&w_schedule(n).unwrap());
        let r = 1.0 / (n as f64).sqrt();
        for (i, &x) in psi.iter().enumerate() {
            let want = if i.count_ones() == 1 { r } else { 0.0 };
            w_err = w_err.max((x - want).abs());
        }
    }
    let mut pt_err = 0.0f64;
    for n in [3usize, 4] {
        let brute = partial_transpose_negativity(&state_from_thetas(&w_schedule(n).unwrap()), n);
        pt_err = pt_err.max((brute - w_negativity(n).unwrap()).abs());
    }
    ensure(
        kernel_ok && ghz_err < 1e-12 && w_err < 1e-12 && pt_err < 1e-12,
        format!("kernel/bilinear {worst:.1e}, GHZ {ghz_err:.1e}, W {w_err:.1e}, W negativity vs transpose {pt_err:.1e}"),
    )
}

/// Negativity of the first two qubits: trace out the rest, transpose the
/// second qubit, sum the magnitudes of the negative eigenvalues.
fn partial_transpose_negativity(psi: &[f64], n: usize) -> f64 {
    let rest = 1usize << (n - 2);
    let mut rho = DMatrix::<f64>::zeros(4, 4);
    for a in 0..4 {
        for b in 0..4 {
            rho[(a, b)] = (0..rest).map(|e| psi[a * rest + e] * psi[b * rest + e]).sum();
        }
    }
    let pt = DMatrix::from_fn(4, 4, |i, j| {
        let (a1, b1) = (i >> 1, i & 1);
        let (a2, b2) = (j >> 1, j & 1);
        rho[((a1 << 1) | b2, (a2 << 1) | b1)]
    });
    pt.symmetric_eigen().eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum()
}

fn c4_roundtrips() -> Check {
    let mut rng = rand::rngs::StdRng::seed_from_u64(20240611);
    let mut worst = 0.0f64;
    let mut exact = true;
    for case in 0..100 {
        let n = if case < 10 { 12 } else { rng.gen_range(1..=12) };
        let mut amps: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        let thetas = thetas_from_amplitudes(&amps).map_err(|e| e.to_string())?;
        let back = state_from_thetas(&thetas);
        worst = worst.max(amps.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let custom: Vec<Vec<usize>> = (0..n)
            .map(|l| {
                let mut s: Vec<usize> = (0..l).filter(|_| rng.gen_bool(0.5)).collect();
                s.push(l);
                s
            })
            .collect();
        let nq = rng.gen_range(1..=3u32);
        for d in [Decomposition::Full, Decomposition::SiteWise(nq), Decomposition::Custom(custom)] {
            let a = alphas_from_thetas(&thetas, &d).map_err(|e| e.to_string())?;
            let t2 = thetas_from_alphas(&a);
            for (x, y) in t2.levels.iter().flatten().zip(thetas.levels.iter().flatten()) {
                worst = worst.max((x - y).abs());
            }
            let s = Schedule::Alpha(a);
            exact &= Schedule::from_json(&s.to_json()).map_err(|e| e.to_string())? == s;
            if case % 4 == 0 {
                let ir = emit(&s, vec![("case".into(), case.to_string())]);
                exact &= parse_text(&render_text(&ir)).map_err(|e| e.to_string())? == ir;
                let sim = simulate(&ir).map_err(|e| e.to_string())?;
                worst = worst.max(amps.iter().zip(&sim).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            }
        }
        let s = Schedule::Theta(thetas);
        exact &= Schedule::from_json(&s.to_json()).map_err(|e| e.to_string())? == s;
    }
    ensure(
        worst < 1e-12 && exact,
        format!("100 states up to 2^12: max deviation {worst:.1e}, serialization exact: {exact}"),
    )
}

fn c5_depth_scan() -> Check {
    let spec = open(10, 0.3).with_phi_max(3.5);
    let psi = free_state(&spec);
    let thetas = thetas_from_state(&psi).map_err(|e| e.to_string())?;
    let alphas = alphas_from_thetas(&thetas, &Decomposition::Full).map_err(|e| e.to_string())?;
    let hs = [4, 6, 8, 10, 12, 14];
    let rows = h_truncation_scan(&psi.amplitudes, &alphas, &hs).map_err(|e| e.to_string())?;
    // the shallowest cut rebuilt gate by gate
    let (cut, _) = truncate_alphas(&alphas, &TruncationPolicy::new(Some(4), None)).map_err(|e| e.to_string())?;
    let sim = simulate(&emit(&Schedule::Alpha(cut), vec![])).map_err(|e| e.to_string())?;
    let overlap: f64 = sim.iter().zip(&psi.amplitudes).map(|(a, b)| a * b).sum();
    let sim_gap = ((1.0 - overlap * overlap) - rows[0].1).abs() / rows[0].1;
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(h, inf, _)| (h as f64, inf)).collect();
    let f = fit(
        FitModel::ExpLinear {
            weighting: Weighting::Amplitude,
        },
        &pts,
    )
    .map_err(|e| e.to_string())?;
    let (z, eta) = (f.amplitude(), f.decay());
    ensure(
        (0.94..=1.02).contains(&eta) && (0.87..=1.07).contains(&z) && sim_gap < 1e-9,
        format!("η = {eta:.4} [0.94, 1.02], Z = {z:.4} [0.87, 1.07]; circuit check rel. gap {sim_gap:.1e}"),
    )
}

fn c6_budgets() -> Check {
    let spec = open(4, 0.3).with_phi_max(3.5);
    let psi = free_state(&spec);
    let thetas = thetas_from_state(&psi).map_err(|e| e.to_string())?;
    let alphas = alphas_from_thetas(&thetas, &Decomposition::Full).map_err(|e| e.to_string())?;
    let (mut wins, mut total, mut best) = (0, 0, 0.0f64);
    for h in 1..=5 {
        for tau in [0.1, 0.03, 0.01, 0.001] {
            let c = compare_budget(&psi.amplitudes, &thetas, &alphas, h, tau).map_err(|e| e.to_string())?;
            total += 1;
            if c.fidelity_alpha >= c.fidelity_theta {
                wins += 1;
            }
            best = best.max((1.0 - c.fidelity_theta) / (1.0 - c.fidelity_alpha).max(f64::MIN_POSITIVE));
        }
    }
    ensure(
        wins * 10 >= total * 9 && best >= 10.0,
        format!("α ≥ θ in {wins}/{total} budgets (need ≥ 90%), best infidelity ratio {best:.3e} (need ≥ 10)"),
    )
}

fn c7_free_envelope() -> Check {
    let spec = open(8, 1.6).with_phi_max(1.7);
    let psi = free_state(&spec);
    let thetas = thetas_from_state(&psi).map_err(|e| e.to_string())?;
    let alphas = alphas_from_thetas(&thetas, &Decomposition::Full).map_err(|e| e.to_string())?;
    let m_alpha = decay(FitModel::PowerExp { power: 1.5 }, &envelope_points(&alphas, 7));
    let k = build_kernel(&spec).map_err(|e| e.to_string())?;
    let k_pts = row_points(&k.k_matrix, 7);
    let m_k = decay(FitModel::PowerExp { power: 1.5 }, &k_pts);
    let m_k_pure = decay(FitModel::PureExp, &k_pts);
    ensure(
        (1.43..=1.63).contains(&m_alpha) && (1.45..=1.65).contains(&m_k),
        format!(
            "M_α = {m_alpha:.4} [1.43, 1.63], M_K = {m_k:.4} [1.45, 1.65] (c·e^(-Mr)/r^1.5; pure exponential gives {m_k_pure:.3})"
        ),
    )
}

/// `Π²` assembled from its eigenvectors: constant, cosine/sine pairs and the
/// alternating vector, each weighted by the squared conjugate momentum.
fn pi_squared_from_modes(ns: usize, spacing: f64) -> DMatrix<f64> {
    let mut p2 = DMatrix::zeros(ns, ns);
    let momentum = |k: usize| TAU * k as f64 / (ns as f64 * spacing);
    let mut add = |v: DVector<f64>, w: f64| {
        let v = v.normalize();
        p2 += &v * v.transpose() * w;
    };
    for k in 1..ns / 2 {
        let c = DVector::from_fn(ns, |j, _| (TAU * (k * j) as f64 / ns as f64).cos());
        let s = DVector::from_fn(ns, |j, _| (TAU * (k * j) as f64 / ns as f64).sin());
        add(c, momentum(k).powi(2));
        add(s, momentum(k).powi(2));
    }
    add(DVector::from_fn(ns, |j, _| if j % 2 == 0 { 1.0 } else { -1.0 }), momentum(ns / 2).powi(2));
    p2
}

fn dense_hamiltonian(spec: &LatticeSpec) -> DMatrix<f64> {
    let grid = FieldGrid::for_spec(spec).unwrap();
    let ns = grid.len();
    let n = spec.n_sites;
    let id = DMatrix::<f64>::identity(ns, ns);
    let phi = DMatrix::from_diagonal(&DVector::from_vec(grid.values.clone()));
    let pi2 = pi_squared_from_modes(ns, grid.spacing);
    let on_site = |op: &DMatrix<f64>, s: usize| {
        (0..n).fold(DMatrix::<f64>::identity(1, 1), |m, t| m.kronecker(if t == s { op } else { &id }))
    };
    let phis: Vec<_> = (0..n).map(|s| on_site(&phi, s)).collect();
    let m2 = build_mass_matrix(spec).unwrap();
    let dim = ns.pow(n as u32);
    let mut h = DMatrix::zeros(dim, dim);
    for s in 0..n {
        h += on_site(&pi2, s) * 0.5;
        let sq = &phis[s] * &phis[s];
        h += &sq * &sq * (spec.coupling / 24.0);
        for t in 0..n {
            h += &phis[s] * &phis[t] * (0.5 * m2[(s, t)]);
        }
    }
    h
}

fn interacting_spec(n: usize) -> LatticeSpec {
    open(n, 1.6).with_phi_max(1.3).with_coupling(32.0)
}

fn c8_interacting() -> Check {
    let lanczos = LanczosOptions {
        tolerance: 1e-12,
        max_iterations: 2000,
        ..LanczosOptions::default()
    };
    let small = interacting_spec(3);
    let dense = dense_hamiltonian(&small).symmetric_eigen();
    let dim = dense.eigenvalues.len();
    let (mut even, mut odd) = (f64::INFINITY, f64::INFINITY);
    for (i, &e) in dense.eigenvalues.iter().enumerate() {
        let v = dense.eigenvectors.column(i);
        let p: f64 = (0..dim).map(|j| v[j] * v[dim - 1 - j]).sum();
        if p > 0.5 {
            even = even.min(e);
        } else if p < -0.5 {
            odd = odd.min(e);
        }
    }
    let h3 = SparseHamiltonian::new(&small, PiMode::SpectralPeriodic).map_err(|e| e.to_string())?;
    let s3 = solve_spectrum(&h3, &lanczos).map_err(|e| e.to_string())?;
    let oracle_gap = (s3.e0 - even).abs().max((s3.e1 - odd).abs());

    let spec = interacting_spec(8);
    let h = SparseHamiltonian::new(&spec, PiMode::SpectralPeriodic).map_err(|e| e.to_string())?;
    let s = solve_spectrum(&h, &lanczos).map_err(|e| e.to_string())?;
    let mut ground = s.ground_state.clone();
    if ground.amplitudes.iter().sum::<f64>() < 0.0 {
        ground.amplitudes.iter_mut().for_each(|a| *a = -*a);
    }
    ground.amplitudes.iter_mut().for_each(|a| *a = a.abs());
    let obs = interacting_observables(&ground).map_err(|e| e.to_string())?;
    let thetas = thetas_from_state(&ground).map_err(|e| e.to_string())?;
    let alphas = alphas_from_thetas(&thetas, &Decomposition::Full).map_err(|e| e.to_string())?;
    let m_alpha = decay(FitModel::PowerExp { power: 1.5 }, &envelope_points(&alphas, 7));
    let m_2pt = decay(FitModel::PowerExp { power: 0.5 }, &row_points(&obs.connected, 7));
    let m_g = decay(FitModel::PowerExp { power: 1.5 }, &row_points(&obs.inverse, 7));
    ensure(
        oracle_gap < 1e-10
            && (2.15..=2.29).contains(&s.mass_gap)
            && (1.76..=1.96).contains(&m_alpha)
            && (1.72..=1.92).contains(&m_2pt)
            && (1.76..=1.96).contains(&m_g),
        format!(
            "dense N=3 gap {oracle_gap:.1e}; M_φ = {:.4} [2.15, 2.29], M_α = {m_alpha:.4} [1.76, 1.96], M_2pt = {m_2pt:.4} [1.72, 1.92], M_G = {m_g:.4} [1.76, 1.96]; open boundary",
            s.mass_gap
        ),
    )
}

fn c9_long_chain() -> Check {
    let k1 = build_kernel(&LatticeSpec::new(80, 0.3)).map_err(|e| e.to_string())?;
    let s1 = decay_sweep(&k1, (15, 30)).map_err(|e| e.to_string())?;
    let mi = s1.fit_mutual_information.as_ref().map_err(|e| e.clone())?.decay();
    let tp = s1.fit_two_point.as_ref().map_err(|e| e.clone())?.decay();
    let ratio = mi / tp;
    let s1_tail = s1.rows.iter().filter(|r| r.r >= 2).map(|r| r.negativity).fold(0.0, f64::max);
    let k3 = build_kernel(&LatticeSpec::new(80, 0.3).with_stencil(GradientStencil::s3())).map_err(|e| e.to_string())?;
    let s3 = decay_sweep(&k3, (15, 30)).map_err(|e| e.to_string())?;
    let support: Vec<usize> = s3.rows.iter().filter(|r| r.negativity > 1e-8).map(|r| r.r).collect();
    ensure(
        (1.6..=2.4).contains(&ratio) && s1_tail < 1e-8 && support == vec![1, 2, 3],
        format!("MI/two-point exponent {ratio:.3} [1.6, 2.4]; s1 negativity beyond r=1 ≤ {s1_tail:.1e}; s3 negativity support {support:?}"),
    )
}

/// `−½ + √det K Σ_t (t+1) q^t / (K₁₁ + √det K)`, `q = |K₁₂|/(K₁₁ + √det K)`.
fn negativity_series(k11: f64, k12: f64) -> f64 {
    let alpha = (k11 * k11 - k12 * k12).sqrt();
    let q = k12.abs() / (k11 + alpha);
    let sum: f64 = (0..=2000).map(|t| (t + 1) as f64 * q.powi(t)).sum();
    -0.5 + alpha / (k11 + alpha) * sum
}

fn c10_two_site_negativity() -> Check {
    let mut worst = 0.0f64;
    for m in [0.1, 0.3, 1.0, 3.0] {
        let k = build_kernel(&LatticeSpec::new(2, m)).map_err(|e| e.to_string())?;
        let closed = negativity_full_two_site(&k).map_err(|e| e.to_string())?;
        worst = worst.max((closed - negativity_series(k.k_matrix[(0, 0)], k.k_matrix[(0, 1)])).abs());
    }
    ensure(worst < 1e-10, format!("max |closed form − series| = {worst:.1e} over m̂ ∈ {{0.1, 0.3, 1, 3}}"))
}

fn main() {
    let criteria: Vec<(&str, &str, f64, fn() -> Check)> = vec![
        ("1", "three-site open kernel", 1.0, c1_kernel),
        ("2", "three-site angle table", 1.0, c2_angle_table),
        ("3", "closed-form references", 10.0, c3_closed_forms),
        ("4", "roundtrip suite", 120.0, c4_roundtrips),
        ("5", "infidelity versus control depth", 600.0, c5_depth_scan),
        ("6", "α versus θ at equal budget", 10.0, c6_budgets),
        ("7", "free-field envelope", 30.0, c7_free_envelope),
        ("8", "interacting spectrum and envelopes", 300.0, c8_interacting),
        ("9", "80-site correlations", 10.0, c9_long_chain),
        ("10", "two-site negativity closed form", 1.0, c10_two_site_negativity),
    ];
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match result {
            Ok(d) if secs <= limit => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] {id:>2} {name}: {detail} ({secs:.2} s, limit {limit} s)",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!("[N/A] 11 desk-scale exclusions: no criterion to run");
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
