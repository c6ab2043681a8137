//! Digitized field values and states on the `n_s^N` field basis.
//!
//! Each site carries `n_s = 2^{n_Q}` field values spaced evenly on
//! `[−φ_max, φ_max]`. Basis index `i` is the mixed-radix number whose most
//! significant digit is the value index of site 0, so level `ℓ = 0` of an
//! angle schedule is the top qubit of the first site.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::lattice::{CorrelationKernel, LatticeSpec};

/// Default largest number of amplitudes a state may hold (512 MiB of f64).
pub const DEFAULT_AMPLITUDE_BUDGET: u64 = 1 << 26;

const MAGIC: &[u8; 8] = b"LSFSTATE";
const FORMAT_VERSION: u32 = 1;
/// Tag for site-major ordering with the first site most significant.
pub const BASIS_SITE_MAJOR: u32 = 1;

// amplitudes per parallel chunk; fixed so reductions do not depend on thread count
const CHUNK: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub values: Vec<f64>,
    pub spacing: f64,
}

impl FieldGrid {
    pub fn new(qubits_per_site: u32, phi_max: f64) -> Result<Self> {
        if qubits_per_site == 0 || qubits_per_site > 16 {
            return Err(Error::invalid("qubits_per_site must be in 1..=16"));
        }
        if !(phi_max.is_finite() && phi_max > 0.0) {
            return Err(Error::invalid("phi_max must be > 0"));
        }
        let ns = 1usize << qubits_per_site;
        let spacing = 2.0 * phi_max / (ns - 1) as f64;
        let mut values = vec![0.0; ns];
        for i in 0..ns / 2 {
            // fill from both ends so the grid is symmetric bit for bit
            let v = -phi_max + spacing * i as f64;
            values[i] = v;
            values[ns - 1 - i] = -v;
        }
        Ok(Self { values, spacing })
    }

    pub fn for_spec(spec: &LatticeSpec) -> Result<Self> {
        Self::new(spec.qubits_per_site, spec.phi_max)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<f64>,
    pub spec: LatticeSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMetadata {
    pub spec: LatticeSpec,
    pub spec_hash: String,
    pub dimension: u64,
    pub basis_order: String,
    pub norm: f64,
}

impl StateVector {
    /// Wraps amplitudes, checking the length against the spec.
    pub fn new(spec: LatticeSpec, amplitudes: Vec<f64>) -> Result<Self> {
        let dim = dimension(&spec, u64::MAX)?;
        if amplitudes.len() != dim {
            return Err(Error::invalid(format!(
                "expected {dim} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        Ok(Self { amplitudes, spec })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn normalize(&mut self) -> Result<()> {
        normalize(&mut self.amplitudes)
    }

    /// Index of the basis state with every field negated.
    pub fn mirror(&self, index: usize) -> usize {
        self.dim() - 1 - index
    }

    pub fn metadata(&self) -> StateMetadata {
        StateMetadata {
            spec: self.spec.clone(),
            spec_hash: self.spec.hash(),
            dimension: self.dim() as u64,
            basis_order: "site_major_first_site_msb".into(),
            norm: self.norm(),
        }
    }

    /// Binary form: magic, version, N, n_Q, φ_max, basis tag, count, then
    /// little-endian f64 amplitudes.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.spec.n_sites as u32).to_le_bytes())?;
        w.write_all(&self.spec.qubits_per_site.to_le_bytes())?;
        w.write_all(&self.spec.phi_max.to_le_bytes())?;
        w.write_all(&BASIS_SITE_MAJOR.to_le_bytes())?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.dim());
        for a in &self.amplitudes {
            buf.extend_from_slice(&a.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads the binary form. The header carries only the grid, so the rest of
    /// the spec comes from the caller (usually the JSON sidecar) and is checked
    /// against the header.
    pub fn read_binary<R: Read>(mut r: R, spec: LatticeSpec) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a state file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported state version {version}")));
        }
        let n = read_u32(&mut r)? as usize;
        let nq = read_u32(&mut r)?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let phi_max = f64::from_le_bytes(b8);
        let tag = read_u32(&mut r)?;
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        if tag != BASIS_SITE_MAJOR {
            return Err(Error::Format(format!("unknown basis tag {tag}")));
        }
        if n != spec.n_sites || nq != spec.qubits_per_site || phi_max != spec.phi_max {
            return Err(Error::Format("state header does not match the spec".into()));
        }
        let mut bytes = vec![0u8; 8 * count];
        r.read_exact(&mut bytes)?;
        let amplitudes = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::new(spec, amplitudes)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// `n_s^N`, rejected with a size report when above `budget`.
pub fn dimension(spec: &LatticeSpec, budget: u64) -> Result<usize> {
    spec.validate()?;
    let bits = spec.qubits_per_site as u128 * spec.n_sites as u128;
    if bits >= 100 || (1u128 << bits) > budget as u128 {
        let required = if bits >= 100 { u128::MAX } else { 1u128 << bits };
        return Err(Error::Budget {
            required,
            budget,
            bytes: required.saturating_mul(8),
        });
    }
    Ok(1usize << bits)
}

/// Euclidean norm with a fixed summation order.
pub fn norm(a: &[f64]) -> f64 {
    a.par_chunks(CHUNK)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum::<f64>()
        .sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

pub fn normalize(a: &mut [f64]) -> Result<()> {
    let n = norm(a);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::numerical("state has zero or non-finite norm"));
    }
    let inv = 1.0 / n;
    a.par_iter_mut().for_each(|x| *x *= inv);
    Ok(())
}

/// Value index of every site for basis index `i`, first site first.
pub fn decode(mut i: usize, n_sites: usize, qubits: u32, out: &mut [usize]) {
    let mask = (1usize << qubits) - 1;
    for s in (0..n_sites).rev() {
        out[s] = i & mask;
        i >>= qubits;
    }
}

/// Digitized free ground state `ψ(φ) ∝ exp(−½ φᵀ K φ)`, default budget.
pub fn ground_state(kernel: &CorrelationKernel, grid: &FieldGrid) -> Result<StateVector> {
    ground_state_with_budget(kernel, grid, DEFAULT_AMPLITUDE_BUDGET)
}

pub fn ground_state_with_budget(
    kernel: &CorrelationKernel,
    grid: &FieldGrid,
    budget: u64,
) -> Result<StateVector> {
    let spec = &kernel.spec;
    if grid.len() != spec.states_per_site() {
        return Err(Error::invalid("grid size does not match qubits_per_site"));
    }
    let dim = dimension(spec, budget)?;
    let n = spec.n_sites;
    let ns = grid.len();
    let q = spec.qubits_per_site;
    let k = &kernel.k_matrix;
    // diag[s][a] = K_ss g_a², pair[(s,t)][a·ns + b] = 2 K_st g_a g_b for s < t
    let diag: Vec<Vec<f64>> = (0..n)
        .map(|s| grid.values.iter().map(|g| k[(s, s)] * g * g).collect())
        .collect();
    let mut pairs = Vec::new();
    for s in 0..n {
        for t in s + 1..n {
            let kst = k[(s, t)];
            if kst == 0.0 {
                continue;
            }
            let table: Vec<f64> = (0..ns * ns)
                .map(|ab| 2.0 * kst * grid.values[ab / ns] * grid.values[ab % ns])
                .collect();
            pairs.push((s, t, table));
        }
    }
    let exponent = |i: usize| {
        // evaluate on the orbit representative so ψ(φ) = ψ(−φ) exactly
        let i = i.min(dim - 1 - i);
        let mut idx = [0usize; 64];
        decode(i, n, q, &mut idx[..n]);
        let mut quad = 0.0;
        for s in 0..n {
            quad += diag[s][idx[s]];
        }
        for (s, t, table) in &pairs {
            quad += table[idx[*s] * ns + idx[*t]];
        }
        -0.5 * quad
    };
    let mut amps = vec![0.0; dim];
    amps.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        for (j, a) in chunk.iter_mut().enumerate() {
            *a = exponent(c * CHUNK + j);
        }
    });
    let top = amps.par_iter().cloned().reduce(|| f64::NEG_INFINITY, f64::max);
    amps.par_iter_mut().for_each(|a| *a = (*a - top).exp());
    normalize(&mut amps)?;
    Ok(StateVector {
        amplitudes: amps,
        spec: spec.clone(),
    })
}

pub fn uniform_state(spec: &LatticeSpec) -> Result<StateVector> {
    uniform_state_with_budget(spec, DEFAULT_AMPLITUDE_BUDGET)
}

pub fn uniform_state_with_budget(spec: &LatticeSpec, budget: u64) -> Result<StateVector> {
    let dim = dimension(spec, budget)?;
    Ok(StateVector {
        amplitudes: vec![1.0 / (dim as f64).sqrt(); dim],
        spec: spec.clone(),
    })
}

/// `(Σ_j φ_j) ψ`, renormalized.
pub fn apply_field_sum(state: &StateVector) -> Result<StateVector> {
    let spec = &state.spec;
    let grid = FieldGrid::for_spec(spec)?;
    let n = spec.n_sites;
    let q = spec.qubits_per_site;
    let dim = state.dim();
    let mut out = vec![0.0; dim];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut idx = [0usize; 64];
        for (j, o) in chunk.iter_mut().enumerate() {
            let i = c * CHUNK + j;
            let m = i.min(dim - 1 - i);
            decode(m, n, q, &mut idx[..n]);
            let mut sum = 0.0;
            for &a in &idx[..n] {
                sum += grid.values[a];
            }
            // Σφ is odd under reflection; computing it on the representative keeps that exact
            if m != i {
                sum = -sum;
            }
            *o = sum * state.amplitudes[i];
        }
    });
    if out.iter().all(|&x| x == 0.0) {
        return Err(Error::numerical("Σφ ψ vanishes identically"));
    }
    normalize(&mut out)?;
    Ok(StateVector {
        amplitudes: out,
        spec: spec.clone(),
    })
}

/// `⟨φ_s⟩` for every site.
pub fn field_means(state: &StateVector) -> Result<Vec<f64>> {
    let spec = &state.spec;
    let grid = FieldGrid::for_spec(spec)?;
    let n = spec.n_sites;
    let (q, dim) = (spec.qubits_per_site, state.dim());
    let partial: Vec<Vec<f64>> = state
        .amplitudes
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut idx = [0usize; 64];
            let mut acc = vec![0.0; n];
            for (j, a) in chunk.iter().enumerate() {
                decode(c * CHUNK + j, n, q, &mut idx[..n]);
                let p = a * a;
                for s in 0..n {
                    acc[s] += p * grid.values[idx[s]];
                }
            }
            acc
        })
        .collect();
    debug_assert!(dim > 0);
    Ok(sum_rows(partial, n))
}

/// `⟨φ_s φ_t⟩` as a row-major `N × N` array.
pub fn field_correlations(state: &StateVector) -> Result<Vec<f64>> {
    let spec = &state.spec;
    let grid = FieldGrid::for_spec(spec)?;
    let n = spec.n_sites;
    let q = spec.qubits_per_site;
    let partial: Vec<Vec<f64>> = state
        .amplitudes
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut idx = [0usize; 64];
            let mut acc = vec![0.0; n * n];
            for (j, a) in chunk.iter().enumerate() {
                decode(c * CHUNK + j, n, q, &mut idx[..n]);
                let p = a * a;
                for s in 0..n {
                    let ps = p * grid.values[idx[s]];
                    for t in s..n {
                        acc[s * n + t] += ps * grid.values[idx[t]];
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = sum_rows(partial, n * n);
    for s in 0..n {
        for t in 0..s {
            out[s * n + t] = out[t * n + s];
        }
    }
    Ok(out)
}

fn sum_rows(parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for p in parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}
