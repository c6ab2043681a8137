//! Entanglement of the Gaussian ground state.
//!
//! Tracing sites out of `ψ(φ) ∝ exp(−½ φᵀ K φ)` leaves a Gaussian density
//! matrix
//!
//! ```text
//! ρ(φ, φ') ∝ exp(−½ φᵀ γ φ − ½ φ'ᵀ γ φ' + φᵀ β φ')
//! ```
//!
//! with `β = ½ Bᵀ A⁻¹ B` and `γ = C − β`, where `A`, `B`, `C` are the
//! traced/traced, traced/kept and kept/kept blocks of `K`. A linear change of
//! variables turns it into a product of single oscillators whose spectra are
//! geometric towers `(1 − ξ) ξⁿ`; entropies and negativities follow from the
//! tower ratios `ξ`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{sorted_eigen, symmetrize, CorrelationKernel};

/// Reduced Gaussian density matrix over `kept_sites`.
#[derive(Clone, Debug)]
pub struct GaussianReduction {
    pub kept_sites: Vec<usize>,
    pub gamma: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub beta_prime_eigs: Vec<f64>,
}

impl GaussianReduction {
    /// Tower ratios `ξ_i = β'_i / (1 + √(1 − β'_i²))`.
    pub fn xis(&self) -> Result<Vec<f64>> {
        self.beta_prime_eigs.iter().map(|&b| xi_from_beta_prime(b)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntanglementReport {
    pub sites: (usize, usize),
    pub entropy_single: f64,
    pub entropy_pair: f64,
    pub mutual_information: f64,
    pub negativity: f64,
}

pub fn xi_from_beta_prime(b: f64) -> Result<f64> {
    if !(b.abs() < 1.0) {
        return Err(Error::numerical(format!(
            "|β'| = {} is not below 1; the reduced state is not normalizable",
            b.abs()
        )));
    }
    Ok(b / (1.0 + (1.0 - b * b).sqrt()))
}

/// Partitions `K` and forms the reduced-state data for `kept_sites`
/// (zero-based, any order, distinct). At least one site must be traced.
pub fn reduce(kernel: &CorrelationKernel, kept_sites: &[usize]) -> Result<GaussianReduction> {
    if kept_sites.len() >= kernel.n_sites() {
        return Err(Error::invalid("reduction must trace out at least one site"));
    }
    reduce_allowing_pure(kernel, kept_sites)
}

fn reduce_allowing_pure(kernel: &CorrelationKernel, kept: &[usize]) -> Result<GaussianReduction> {
    let n = kernel.n_sites();
    if kept.is_empty() {
        return Err(Error::invalid("kept_sites must be nonempty"));
    }
    let mut seen = vec![false; n];
    for &s in kept {
        if s >= n {
            return Err(Error::invalid(format!("site {s} outside lattice of {n} sites")));
        }
        if seen[s] {
            return Err(Error::invalid(format!("site {s} listed twice")));
        }
        seen[s] = true;
    }
    let traced: Vec<usize> = (0..n).filter(|&s| !seen[s]).collect();
    let k = &kernel.k_matrix;
    let c = DMatrix::from_fn(kept.len(), kept.len(), |i, j| k[(kept[i], kept[j])]);
    let beta = if traced.is_empty() {
        DMatrix::zeros(kept.len(), kept.len())
    } else {
        let a = DMatrix::from_fn(traced.len(), traced.len(), |i, j| k[(traced[i], traced[j])]);
        let b = DMatrix::from_fn(traced.len(), kept.len(), |i, j| k[(traced[i], kept[j])]);
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::numerical("traced block of K is ill-conditioned"))?;
        let ainv_b = chol.solve(&b);
        symmetrize(b.transpose() * ainv_b * 0.5)
    };
    let gamma = symmetrize(c - &beta);
    let beta_prime_eigs = rescaled_eigs(&gamma, &beta)?;
    Ok(GaussianReduction {
        kept_sites: kept.to_vec(),
        gamma,
        beta,
        beta_prime_eigs,
    })
}

/// Eigenvalues of `β' = γ_D^{−1/2} V β Vᵀ γ_D^{−1/2}` where `γ = Vᵀ γ_D V`.
fn rescaled_eigs(gamma: &DMatrix<f64>, beta: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (gd, v) = sorted_eigen(gamma);
    if let Some(bad) = gd.iter().find(|&&g| g <= 0.0) {
        return Err(Error::numerical(format!("γ has non-positive eigenvalue {bad:e}")));
    }
    let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        gd.len(),
        gd.iter().map(|g| 1.0 / g.sqrt()),
    ));
    let bp = symmetrize(&scale * &v * beta * v.transpose() * &scale);
    Ok(sorted_eigen(&bp).0)
}

/// Von Neumann entropy (natural log) from tower ratios.
pub fn entropy_from_xis(xis: &[f64]) -> f64 {
    xis.iter()
        .map(|&xi| {
            if xi == 0.0 {
                0.0
            } else {
                let x = xi.abs();
                // a negative ξ only flips signs inside the tower; entropy uses |ξ|
                -((1.0 - x).ln() + x * x.ln() / (1.0 - x))
            }
        })
        .sum()
}

pub fn entropy(reduction: &GaussianReduction) -> Result<f64> {
    Ok(entropy_from_xis(&reduction.xis()?))
}

/// `I(a:b) = S(a) + S(b) − S(ab)`.
pub fn mutual_information(kernel: &CorrelationKernel, a: usize, b: usize) -> Result<f64> {
    if a == b {
        return Err(Error::invalid("mutual information needs two distinct sites"));
    }
    let sa = entropy(&reduce_allowing_pure(kernel, &[a])?)?;
    let sb = entropy(&reduce_allowing_pure(kernel, &[b])?)?;
    let sab = entropy(&reduce_allowing_pure(kernel, &[a, b])?)?;
    Ok((sa + sb - sab).max(0.0))
}

/// Closed-form negativity of the two-site lattice,
/// `|K₁₂| / (K₁₁ − |K₁₂| + √det K)`.
pub fn negativity_full_two_site(kernel: &CorrelationKernel) -> Result<f64> {
    if kernel.n_sites() != 2 {
        return Err(Error::invalid("two-site negativity requires N = 2"));
    }
    let k = &kernel.k_matrix;
    let (k11, k12) = (k[(0, 0)], k[(0, 1)].abs());
    let det = k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)];
    Ok(k12 / (k11 - k12 + det.sqrt()))
}

/// Negativity between sites `a` and `b` after tracing the rest.
///
/// The partial transpose on `b` swaps `γ₁₂ ↔ −β₁₂`; the transposed operator is
/// again a product of towers, now possibly with `ξ < 0`, and its trace norm
/// is `Π (1 − ξ)/(1 − |ξ|)`.
pub fn negativity_reduced(kernel: &CorrelationKernel, a: usize, b: usize) -> Result<f64> {
    if a == b {
        return Err(Error::invalid("negativity needs two distinct sites"));
    }
    let red = reduce_allowing_pure(kernel, &[a, b])?;
    let (g, bt) = (&red.gamma, &red.beta);
    let gamma_t = DMatrix::from_row_slice(2, 2, &[g[(0, 0)], -bt[(0, 1)], -bt[(0, 1)], g[(1, 1)]]);
    let beta_t = DMatrix::from_row_slice(2, 2, &[bt[(0, 0)], -g[(0, 1)], -g[(0, 1)], bt[(1, 1)]]);
    let trace_norm: f64 = rescaled_eigs(&gamma_t, &beta_t)?
        .into_iter()
        .map(|bp| xi_from_beta_prime(bp).map(|xi| (1.0 - xi) / (1.0 - xi.abs())))
        .product::<Result<f64>>()?;
    Ok((0.5 * (trace_norm - 1.0)).max(0.0))
}

/// Entropies, mutual information and negativity for one site pair.
pub fn report(kernel: &CorrelationKernel, a: usize, b: usize) -> Result<EntanglementReport> {
    if a == b {
        return Err(Error::invalid("report needs two distinct sites"));
    }
    let sa = entropy(&reduce_allowing_pure(kernel, &[a])?)?;
    let sb = entropy(&reduce_allowing_pure(kernel, &[b])?)?;
    let sab = entropy(&reduce_allowing_pure(kernel, &[a, b])?)?;
    Ok(EntanglementReport {
        sites: (a, b),
        entropy_single: sa,
        entropy_pair: sab,
        mutual_information: (sa + sb - sab).max(0.0),
        negativity: negativity_reduced(kernel, a, b)?,
    })
}
