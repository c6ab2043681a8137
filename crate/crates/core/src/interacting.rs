//! Digitized `λφ⁴` Hamiltonian and its lowest states by Lanczos.
//!
//! `H = ½ Σ_j Π̂²_j + ½ φᵀ M² φ + (λ/4!) Σ_j φ_j⁴` on the `n_s^N` field basis.
//! The conjugate-momentum term acts on one site at a time, everything else is
//! diagonal, so `H` is applied without ever being stored.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digitize::{
    apply_field_sum, decode, dimension, dot, field_correlations, field_means, norm, normalize,
    uniform_state_with_budget, FieldGrid, StateVector, DEFAULT_AMPLITUDE_BUDGET,
};
use crate::error::{Error, Result};
use crate::lattice::{build_mass_matrix, LatticeSpec};

const CHUNK: usize = 1 << 12;

/// Discretization of `Π̂²` on one site's field grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiMode {
    /// `F† diag(p_k²) F` with periodic field space.
    #[default]
    SpectralPeriodic,
    /// Second difference with hard walls beyond `±φ_max`.
    CentralDifference,
}

impl PiMode {
    pub fn tag(self) -> &'static str {
        match self {
            PiMode::SpectralPeriodic => "spectral_periodic",
            PiMode::CentralDifference => "central_difference",
        }
    }
}

pub fn build_pi_squared(grid: &FieldGrid, mode: PiMode) -> Result<DMatrix<f64>> {
    let ns = grid.len();
    if ns < 2 {
        return Err(Error::invalid("Π² needs at least two field values"));
    }
    let d = grid.spacing;
    let mut p2 = DMatrix::zeros(ns, ns);
    match mode {
        PiMode::SpectralPeriodic => {
            let tau = std::f64::consts::TAU;
            let half = (ns / 2) as i64;
            // entries depend on |j − j'| only, which keeps the matrix exactly reflection symmetric
            let row: Vec<f64> = (0..ns)
                .map(|sep| {
                    let mut s = 0.0;
                    for k in (-half + 1)..=half {
                        let p = tau * k as f64 / (ns as f64 * d);
                        s += p * p * (tau * (k * sep as i64) as f64 / ns as f64).cos();
                    }
                    s / ns as f64
                })
                .collect();
            for j in 0..ns {
                for jp in 0..ns {
                    p2[(j, jp)] = row[j.abs_diff(jp)];
                }
            }
        }
        PiMode::CentralDifference => {
            let inv = 1.0 / (d * d);
            for j in 0..ns {
                p2[(j, j)] = 2.0 * inv;
                if j + 1 < ns {
                    p2[(j, j + 1)] = -inv;
                    p2[(j + 1, j)] = -inv;
                }
            }
        }
    }
    Ok(p2)
}

#[derive(Clone, Debug)]
pub struct SiteOperatorSet {
    pub pi_squared: DMatrix<f64>,
    pub phi_diag: Vec<f64>,
    pub phi4_diag: Vec<f64>,
    pub mode: PiMode,
}

impl SiteOperatorSet {
    pub fn new(grid: &FieldGrid, mode: PiMode) -> Result<Self> {
        Ok(Self {
            pi_squared: build_pi_squared(grid, mode)?,
            phi_diag: grid.values.clone(),
            phi4_diag: grid.values.iter().map(|v| v.powi(4)).collect(),
            mode,
        })
    }
}

/// Matrix-free `H` with its diagonal cached.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    pub spec: LatticeSpec,
    pub ops: SiteOperatorSet,
    diag: Vec<f64>,
    // ½ Π² with a zero diagonal, row-major
    half_pi_off: Vec<f64>,
    strides: Vec<usize>,
}

impl SparseHamiltonian {
    pub fn new(spec: &LatticeSpec, mode: PiMode) -> Result<Self> {
        Self::with_budget(spec, mode, DEFAULT_AMPLITUDE_BUDGET)
    }

    pub fn with_budget(spec: &LatticeSpec, mode: PiMode, budget: u64) -> Result<Self> {
        let dim = dimension(spec, budget)?;
        let grid = FieldGrid::for_spec(spec)?;
        let ops = SiteOperatorSet::new(&grid, mode)?;
        let m2 = build_mass_matrix(spec)?;
        let n = spec.n_sites;
        let ns = grid.len();
        let q = spec.qubits_per_site;
        let pairs: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|a| (a..n).map(move |b| (a, b)))
            .filter_map(|(a, b)| {
                let w = if a == b { 0.5 * m2[(a, a)] } else { m2[(a, b)] };
                (w != 0.0).then_some((a, b, w))
            })
            .collect();
        let quartic = spec.coupling / 24.0;
        let kinetic_diag = 0.5 * n as f64 * ops.pi_squared[(0, 0)];
        let mut diag = vec![0.0; dim];
        diag.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            let mut idx = [0usize; 64];
            let mut phi = [0.0f64; 64];
            for (j, d) in out.iter_mut().enumerate() {
                decode(c * CHUNK + j, n, q, &mut idx[..n]);
                let mut p4 = 0.0;
                for s in 0..n {
                    phi[s] = ops.phi_diag[idx[s]];
                    p4 += ops.phi4_diag[idx[s]];
                }
                let mut v = kinetic_diag + quartic * p4;
                for &(a, b, w) in &pairs {
                    v += w * phi[a] * phi[b];
                }
                *d = v;
            }
        });
        let mut half_pi_off = vec![0.0; ns * ns];
        for a in 0..ns {
            for b in 0..ns {
                if a != b {
                    half_pi_off[a * ns + b] = 0.5 * ops.pi_squared[(a, b)];
                }
            }
        }
        let strides = (0..n).map(|s| ns.pow((n - 1 - s) as u32)).collect();
        Ok(Self {
            spec: spec.clone(),
            ops,
            diag,
            half_pi_off,
            strides,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `out = H ψ`; each output entry is gathered independently.
    pub fn apply_into(&self, psi: &[f64], out: &mut [f64]) -> Result<()> {
        let dim = self.dim();
        if psi.len() != dim || out.len() != dim {
            return Err(Error::invalid(format!(
                "dimension mismatch: H is {dim}, got {} -> {}",
                psi.len(),
                out.len()
            )));
        }
        let ns = self.ops.phi_diag.len();
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            for (j, o) in chunk.iter_mut().enumerate() {
                let i = c * CHUNK + j;
                let mut acc = self.diag[i] * psi[i];
                for &stride in &self.strides {
                    let a = (i / stride) % ns;
                    let base = i - a * stride;
                    let row = &self.half_pi_off[a * ns..(a + 1) * ns];
                    for (b, &w) in row.iter().enumerate() {
                        acc += w * psi[base + b * stride];
                    }
                }
                *o = acc;
            }
        });
        Ok(())
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        let mut out = vec![0.0; psi.dim()];
        self.apply_into(&psi.amplitudes, &mut out)?;
        Ok(StateVector {
            amplitudes: out,
            spec: psi.spec.clone(),
        })
    }

    pub fn expectation(&self, psi: &[f64]) -> Result<f64> {
        let mut h = vec![0.0; psi.len()];
        self.apply_into(psi, &mut h)?;
        Ok(dot(psi, &h) / dot(psi, psi))
    }

    pub fn residual(&self, psi: &[f64], energy: f64) -> Result<f64> {
        let mut h = vec![0.0; psi.len()];
        self.apply_into(psi, &mut h)?;
        h.par_iter_mut().zip(psi).for_each(|(x, p)| *x -= energy * p);
        Ok(norm(&h))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

/// Parity of `ψ` under `φ → −φ`, or `None` when it has no definite parity.
pub fn parity_of(psi: &[f64]) -> Option<Parity> {
    let n = psi.len();
    let scale = norm(psi).max(f64::MIN_POSITIVE);
    let (mut even, mut odd) = (0.0f64, 0.0f64);
    for i in 0..n / 2 {
        let (a, b) = (psi[i], psi[n - 1 - i]);
        even = even.max((a - b).abs());
        odd = odd.max((a + b).abs());
    }
    if even <= 1e-12 * scale {
        Some(Parity::Even)
    } else if odd <= 1e-12 * scale {
        Some(Parity::Odd)
    } else {
        None
    }
}

fn project(v: &mut [f64], parity: Parity) {
    let n = v.len();
    for i in 0..n / 2 {
        let (a, b) = (v[i], v[n - 1 - i]);
        let (x, y) = match parity {
            Parity::Even => {
                let s = 0.5 * (a + b);
                (s, s)
            }
            Parity::Odd => {
                let s = 0.5 * (a - b);
                (s, -s)
            }
        };
        v[i] = x;
        v[n - 1 - i] = y;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Krylov vectors kept before restarting from the current Ritz vector.
    pub max_basis: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 500,
            max_basis: 60,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosResult {
    pub energy: f64,
    pub state: Vec<f64>,
    /// Applications of `H`, including residual checks.
    pub iterations: usize,
    pub residual: f64,
    /// Lowest Ritz value after every Krylov step.
    pub history: Vec<f64>,
    pub parity: Option<Parity>,
}

fn lowest_ritz(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    let i0 = (0..m)
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .unwrap();
    (eig.eigenvalues[i0], eig.eigenvectors.column(i0).iter().copied().collect())
}

/// Lowest eigenpair reachable from `seed`, restarted Lanczos with full
/// reorthogonalization. A seed of definite reflection parity stays in its sector.
pub fn lanczos_lowest(h: &SparseHamiltonian, seed: &[f64], opts: &LanczosOptions) -> Result<LanczosResult> {
    let dim = h.dim();
    if seed.len() != dim {
        return Err(Error::invalid("seed dimension does not match H"));
    }
    if opts.max_basis < 2 || opts.max_iterations == 0 || !(opts.tolerance > 0.0) {
        return Err(Error::invalid("lanczos options out of range"));
    }
    let parity = parity_of(seed);
    let mut v = seed.to_vec();
    if let Some(p) = parity {
        project(&mut v, p);
    }
    normalize(&mut v).map_err(|_| Error::invalid("seed must be nonzero"))?;
    let mut iterations = 0;
    let mut history = Vec::new();
    let mut w = vec![0.0; dim];
    loop {
        let mut basis: Vec<Vec<f64>> = vec![v];
        let (mut alphas, mut betas) = (Vec::new(), Vec::new());
        let mut y;
        loop {
            let j = basis.len() - 1;
            h.apply_into(&basis[j], &mut w)?;
            iterations += 1;
            if let Some(p) = parity {
                project(&mut w, p);
            }
            alphas.push(dot(&w, &basis[j]));
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    w.par_iter_mut().zip(b.par_iter()).for_each(|(x, y)| *x -= c * y);
                }
            }
            let beta = norm(&w);
            let (theta, ritz) = lowest_ritz(&alphas, &betas);
            history.push(theta);
            y = ritz;
            let estimate = beta * y[j].abs();
            if estimate < 0.1 * opts.tolerance
                || beta < 1e-14
                || basis.len() >= opts.max_basis
                || iterations + 1 >= opts.max_iterations
            {
                break;
            }
            betas.push(beta);
            let inv = 1.0 / beta;
            basis.push(w.par_iter().map(|x| x * inv).collect());
        }
        let mut x = vec![0.0; dim];
        for (c, b) in y.iter().zip(&basis) {
            x.par_iter_mut().zip(b.par_iter()).for_each(|(s, v)| *s += c * v);
        }
        if let Some(p) = parity {
            project(&mut x, p);
        }
        normalize(&mut x)?;
        h.apply_into(&x, &mut w)?;
        iterations += 1;
        let energy = dot(&x, &w);
        w.par_iter_mut().zip(x.par_iter()).for_each(|(r, s)| *r -= energy * s);
        let residual = norm(&w);
        if residual < opts.tolerance {
            return Ok(LanczosResult {
                energy,
                state: x,
                iterations,
                residual,
                history,
                parity,
            });
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NotConverged { iterations, residual });
        }
        v = x;
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub e0: f64,
    pub e1: f64,
    pub mass_gap: f64,
    pub ground_state: StateVector,
    pub excited_state: StateVector,
    pub iterations: [usize; 2],
    pub residuals: [f64; 2],
}

impl SpectrumResult {
    pub fn to_json(&self, h: &SparseHamiltonian) -> serde_json::Value {
        serde_json::json!({
            "spec": h.spec,
            "spec_hash": h.spec.hash(),
            "boundary": h.spec.boundary,
            "pi_mode": h.ops.mode.tag(),
            "seeds": ["uniform", "field_sum_uniform"],
            "e0": self.e0,
            "e1": self.e1,
            "mass_gap": self.mass_gap,
            "iterations": self.iterations,
            "residuals": self.residuals,
        })
    }
}

/// Ground state from the uniform seed, one-particle state from `Σφ` applied to it.
pub fn solve_spectrum(h: &SparseHamiltonian, opts: &LanczosOptions) -> Result<SpectrumResult> {
    let uniform = uniform_state_with_budget(&h.spec, u64::MAX)?;
    let odd = apply_field_sum(&uniform)?;
    let g = lanczos_lowest(h, &uniform.amplitudes, opts)?;
    let e = lanczos_lowest(h, &odd.amplitudes, opts)?;
    if e.energy <= g.energy {
        return Err(Error::numerical(format!(
            "odd-sector energy {} is not above the ground energy {}",
            e.energy, g.energy
        )));
    }
    Ok(SpectrumResult {
        e0: g.energy,
        e1: e.energy,
        mass_gap: e.energy - g.energy,
        ground_state: StateVector::new(h.spec.clone(), g.state)?,
        excited_state: StateVector::new(h.spec.clone(), e.state)?,
        iterations: [g.iterations, e.iterations],
        residuals: [g.residual, e.residual],
    })
}

#[derive(Clone, Debug)]
pub struct InteractingObservables {
    /// Connected `⟨φ_i φ_j⟩ − ⟨φ_i⟩⟨φ_j⟩`.
    pub connected: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
}

pub fn interacting_observables(ground: &StateVector) -> Result<InteractingObservables> {
    let n = ground.spec.n_sites;
    let means = field_means(ground)?;
    let raw = field_correlations(ground)?;
    let c = DMatrix::from_fn(n, n, |i, j| raw[i * n + j] - means[i] * means[j]);
    let inverse = c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numerical("connected two-point matrix is singular"))?
        .inverse();
    Ok(InteractingObservables {
        connected: c,
        inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_kernel, Boundary, GradientStencil};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a.kronecker(b)
    }

    /// Dense `H` assembled from Kronecker products of single-site operators.
    fn dense(spec: &LatticeSpec, mode: PiMode) -> DMatrix<f64> {
        let grid = FieldGrid::for_spec(spec).unwrap();
        let ns = grid.len();
        let n = spec.n_sites;
        let id = DMatrix::<f64>::identity(ns, ns);
        let phi = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(grid.values.clone()));
        let pi2 = build_pi_squared(&grid, mode).unwrap();
        let on_site = |op: &DMatrix<f64>, s: usize| {
            let mut m = DMatrix::<f64>::identity(1, 1);
            for t in 0..n {
                m = kron(&m, if t == s { op } else { &id });
            }
            m
        };
        let phis: Vec<DMatrix<f64>> = (0..n).map(|s| on_site(&phi, s)).collect();
        let m2 = build_mass_matrix(spec).unwrap();
        let dim = ns.pow(n as u32);
        let mut h = DMatrix::zeros(dim, dim);
        for s in 0..n {
            h += on_site(&pi2, s) * 0.5;
            let p2 = &phis[s] * &phis[s];
            h += &p2 * &p2 * (spec.coupling / 24.0);
            for t in 0..n {
                h += &phis[s] * &phis[t] * (0.5 * m2[(s, t)]);
            }
        }
        h
    }

    fn dense_lowest(h: &DMatrix<f64>) -> f64 {
        h.clone().symmetric_eigen().eigenvalues.min()
    }

    #[test]
    fn two_state_pi() {
        let g = FieldGrid::new(1, 1.0).unwrap();
        let p = build_pi_squared(&g, PiMode::SpectralPeriodic).unwrap();
        assert_eq!(p[(0, 0)], p[(1, 1)]);
        assert_eq!(p[(0, 1)], p[(1, 0)]);
        assert!(p[(0, 1)] < 0.0);
    }

    #[test]
    fn pi_reflection_and_psd() {
        for mode in [PiMode::SpectralPeriodic, PiMode::CentralDifference] {
            for q in 1..=5 {
                let g = FieldGrid::new(q, 2.3).unwrap();
                let p = build_pi_squared(&g, mode).unwrap();
                let ns = g.len();
                for i in 0..ns {
                    for j in 0..ns {
                        assert_eq!(p[(i, j)], p[(j, i)]);
                        assert!((p[(ns - 1 - i, ns - 1 - j)] - p[(i, j)]).abs() < 1e-12);
                    }
                }
                assert!(p.symmetric_eigen().eigenvalues.min() > -1e-9);
            }
        }
    }

    #[test]
    fn spectral_pi_eigenvalues_are_momenta() {
        let g = FieldGrid::new(3, 1.7).unwrap();
        let p = build_pi_squared(&g, PiMode::SpectralPeriodic).unwrap();
        let mut ev: Vec<f64> = p.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = (-3i32..=4)
            .map(|k| (std::f64::consts::TAU * k as f64 / (8.0 * g.spacing)).powi(2))
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10 * b.max(1.0));
        }
    }

    #[test]
    fn single_oscillator_zero_point() {
        let spec = LatticeSpec::new(1, 1.0)
            .with_qubits(3)
            .with_phi_max(3.5)
            .with_boundary(Boundary::Open)
            .with_stencil(GradientStencil::zero());
        let e0 = dense_lowest(&dense(&spec, PiMode::SpectralPeriodic));
        assert!((e0 - 0.5).abs() < 0.01, "{e0}");
        let h = SparseHamiltonian::new(&spec, PiMode::SpectralPeriodic).unwrap();
        let r = lanczos_lowest(&h, &uniform_state_with_budget(&spec, 1 << 20).unwrap().amplitudes, &Default::default())
            .unwrap();
        assert!((r.energy - e0).abs() < 1e-10);
    }

    #[test]
    fn apply_matches_dense_oracle() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for mode in [PiMode::SpectralPeriodic, PiMode::CentralDifference] {
            let spec = LatticeSpec::new(2, 0.7).with_qubits(2).with_phi_max(2.0).with_coupling(3.0);
            let hd = dense(&spec, mode);
            let h = SparseHamiltonian::new(&spec, mode).unwrap();
            for _ in 0..5 {
                let psi: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let out = h.apply(&StateVector::new(spec.clone(), psi.clone()).unwrap()).unwrap();
                let want = &hd * nalgebra::DVector::from_vec(psi.clone());
                for (a, b) in out.amplitudes.iter().zip(want.iter()) {
                    assert!((a - b).abs() < 1e-10);
                }
                let u: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut hu = vec![0.0; 16];
                h.apply_into(&u, &mut hu).unwrap();
                assert!((dot(&u, &out.amplitudes) - dot(&hu, &psi)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn reflection_commutes() {
        let spec = LatticeSpec::new(3, 0.5).with_qubits(3).with_coupling(2.0);
        let h = SparseHamiltonian::new(&spec, PiMode::SpectralPeriodic).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let psi: Vec<f64> = (0..h.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rpsi: Vec<f64> = psi.iter().rev().copied().collect();
        let (mut a, mut b) = (vec![0.0; h.dim()], vec![0.0; h.dim()]);
        h.apply_into(&rpsi, &mut a).unwrap();
        h.apply_into(&psi, &mut b).unwrap();
        b.reverse();
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!(norm(&diff) < 1e-10);
    }

    #[test]
    fn quartic_diagonal() {
        let spec = LatticeSpec::new(3, 0.5)
            .with_qubits(2)
            .with_phi_max(1.5)
            .with_coupling(5.0)
            .with_stencil(GradientStencil::zero());
        let free = SparseHamiltonian::new(&spec.clone().with_coupling(0.0), PiMode::SpectralPeriodic).unwrap();
        let h = SparseHamiltonian::new(&spec, PiMode::SpectralPeriodic).unwrap();
        let top = h.dim() - 1;
        let want = 3.0 * 5.0 * 1.5f64.powi(4) / 24.0;
        assert!((h.diagonal()[top] - free.diagonal()[top] - want).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let spec = LatticeSpec::new(2, 1.0).with_qubits(2);
        let h = SparseHamiltonian::new(&spec, PiMode::SpectralPeriodic).unwrap();
        let mut out = vec![0.0; 16];
        assert!(h.apply_into(&[0.0; 8], &mut out).is_err());
    }

    #[test]
    fn lanczos_matches_dense_n3() {
        let spec = LatticeSpec::new(3, 0.5).with_qubits(2).with_coupling(1.0).with_phi_max(2.5);
        let hd = dense(&spec, PiMode::SpectralPeriodic);
        let h = SparseHamiltonian::new(&spec, PiMode::SpectralPeriodic).unwrap();
        let s = solve_spectrum(&h, &Default::default()).unwrap();
        assert!((s.e0 - dense_lowest(&hd)).abs() < 1e-10);
        let mut ev: Vec<f64> = hd.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(s.e1 > s.e0 && s.residuals.iter().all(|r| *r < 1e-8));
        assert!(ev.iter().any(|e| (e - s.e1).abs() < 1e-10));
        let m = field_means(&s.ground_state).unwrap();
        assert!(m.iter().sum::<f64>().abs() < 1e-10);
        assert!(dot(&s.ground_state.amplitudes, &s.excited_state.amplitudes).abs() < 1e-10);
    }

    #[test]
    fn variational_history() {
        let spec = LatticeSpec::new(4, 0.8).with_qubits(3).with_coupling(4.0).with_phi_max(2.0);
        let h = SparseHamiltonian::new(&spec, PiMode::SpectralPeriodic).unwrap();
        let opts = LanczosOptions {
            max_basis: 8,
            ..Default::default()
        };
        let seed = uniform_state_with_budget(&spec, 1 << 20).unwrap();
        let r = lanczos_lowest(&h, &seed.amplitudes, &opts).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(h.residual(&r.state, r.energy).unwrap() < 1e-8);
    }

    #[test]
    fn extensive_without_gradient() {
        let base = LatticeSpec::new(1, 0.9)
            .with_qubits(2)
            .with_phi_max(2.2)
            .with_boundary(Boundary::Open)
            .with_stencil(GradientStencil::zero());
        let e = |n: usize| {
            let spec = LatticeSpec { n_sites: n, ..base.clone() };
            let h = SparseHamiltonian::new(&spec, PiMode::SpectralPeriodic).unwrap();
            lanczos_lowest(&h, &uniform_state_with_budget(&spec, 1 << 20).unwrap().amplitudes, &Default::default())
                .unwrap()
                .energy
        };
        let e1 = e(1);
        assert!((e(2) - 2.0 * e1).abs() < 1e-9);
        assert!((e(4) - 4.0 * e1).abs() < 1e-9);
        let spec = LatticeSpec { n_sites: 2, ..base.clone() };
        let h = SparseHamiltonian::new(&spec, PiMode::SpectralPeriodic).unwrap();
        let s = solve_spectrum(&h, &Default::default()).unwrap();
        let c = interacting_observables(&s.ground_state).unwrap().connected;
        assert!(c[(0, 1)].abs() < 1e-10);
    }

    #[test]
    fn free_limit_converges() {
        let spec = |q: u32| {
            let s = LatticeSpec::new(3, 1.0).with_qubits(q);
            let k = build_kernel(&s).unwrap();
            let sigma = (0.5 * k.k_inverse()[(0, 0)]).sqrt();
            let ns = (1u32 << q) as f64;
            s.with_phi_max(sigma * (ns - 1.0) * (std::f64::consts::PI / ns).sqrt())
        };
        let err = |q: u32| {
            let s = spec(q);
            let exact = build_kernel(&s).unwrap().zero_point_energy();
            let h = SparseHamiltonian::new(&s, PiMode::SpectralPeriodic).unwrap();
            let e0 = lanczos_lowest(&h, &uniform_state_with_budget(&s, 1 << 20).unwrap().amplitudes, &Default::default())
                .unwrap()
                .energy;
            ((e0 - exact) / exact).abs()
        };
        let (e2, e4) = (err(2), err(4));
        assert!(e4 < e2, "{e2} {e4}");
    }

    #[test]
    fn free_correlations_match_kernel() {
        let s = LatticeSpec::new(4, 0.3).with_qubits(3);
        let k = build_kernel(&s).unwrap();
        let half_kinv = k.k_inverse() * 0.5;
        let sigma = half_kinv[(0, 0)].sqrt();
        let s = s.with_phi_max(sigma * 7.0 * (std::f64::consts::PI / 8.0).sqrt());
        let h = SparseHamiltonian::new(&s, PiMode::SpectralPeriodic).unwrap();
        let g = solve_spectrum(&h, &Default::default()).unwrap().ground_state;
        let obs = interacting_observables(&g).unwrap();
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max(((obs.connected[(i, j)] - half_kinv[(i, j)]) / half_kinv[(i, j)]).abs());
                assert!((obs.connected[(i, j)] - obs.connected[(j, i)]).abs() < 1e-10);
                // translation invariance on the ring
                let (a, b) = ((i + 1) % 4, (j + 1) % 4);
                assert!((obs.connected[(i, j)] - obs.connected[(a, b)]).abs() < 1e-10);
            }
        }
        assert!(worst < 0.05, "{worst}");
        let id = &obs.connected * &obs.inverse;
        assert!((id - DMatrix::identity(4, 4)).abs().max() < 1e-9);
    }

    #[test]
    fn nonzero_seed_required() {
        let spec = LatticeSpec::new(2, 1.0).with_qubits(1);
        let h = SparseHamiltonian::new(&spec, PiMode::SpectralPeriodic).unwrap();
        assert!(matches!(
            lanczos_lowest(&h, &[0.0; 4], &Default::default()),
            Err(Error::Invalid(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn sectors_match_dense(m in 0.2f64..2.0, lam in 0.0f64..10.0, n in 2usize..4, q in 1u32..3, open in any::<bool>()) {
            let b = if open { Boundary::Open } else { Boundary::Periodic };
            let spec = LatticeSpec::new(n, m).with_qubits(q).with_coupling(lam).with_phi_max(1.8).with_boundary(b);
            let hd = dense(&spec, PiMode::SpectralPeriodic);
            let h = SparseHamiltonian::new(&spec, PiMode::SpectralPeriodic).unwrap();
            let s = solve_spectrum(&h, &Default::default()).unwrap();
            prop_assert!((s.e0 - dense_lowest(&hd)).abs() < 1e-9);
            prop_assert!(dot(&s.ground_state.amplitudes, &s.excited_state.amplitudes).abs() < 1e-10);
            prop_assert_eq!(parity_of(&s.ground_state.amplitudes), Some(Parity::Even));
            prop_assert_eq!(parity_of(&s.excited_state.amplitudes), Some(Parity::Odd));
        }
    }
}
