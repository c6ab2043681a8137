//! Free lattice scalar field in one spatial dimension.
//!
//! The Gaussian ground state of `H = ½ Σ Π² + ½ φᵀ M² φ` is
//! `ψ(φ) ∝ exp(−½ φᵀ K φ)` with `K = sqrt(M²)`. This module assembles `M²`
//! from the mass and gradient stencil, diagonalizes it into the momentum
//! modes, and evaluates the ground-state two-point function in the finite
//! lattice and its infinite-volume and continuum limits.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::special;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Site indices wrap modulo `N`.
    Periodic,
    /// The field vanishes outside the lattice: a difference term that reaches
    /// past either end keeps only the in-range `φ²` piece.
    Open,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => write!(f, "periodic"),
            Boundary::Open => write!(f, "open"),
        }
    }
}

/// Weights `w_d` multiplying `(φ(i+d) − φ(i))²` for `d = 1..=s` in the
/// discretized `(∇φ)²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientStencil {
    weights: Vec<f64>,
}

impl GradientStencil {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("stencil weights must be finite"));
        }
        Ok(Self { weights })
    }

    /// Nearest-neighbour forward difference.
    pub fn s1() -> Self {
        Self { weights: vec![1.0] }
    }

    /// Three-site smeared difference with weights (1/3, 1/12, 1/27).
    pub fn s3() -> Self {
        Self {
            weights: vec![1.0 / 3.0, 1.0 / 12.0, 1.0 / 27.0],
        }
    }

    /// No gradient coupling: decoupled sites.
    pub fn zero() -> Self {
        Self { weights: vec![] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest distance with a nonzero weight.
    pub fn reach(&self) -> usize {
        self.weights
            .iter()
            .rposition(|&w| w != 0.0)
            .map_or(0, |i| i + 1)
    }

    pub fn is_zero(&self) -> bool {
        self.reach() == 0
    }

    /// Lattice momentum squared `p̂² = Σ_d 4 w_d sin²(p d / 2)`.
    pub fn dispersion(&self, p: f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let s = (0.5 * p * (i + 1) as f64).sin();
                4.0 * w * s * s
            })
            .sum()
    }
}

/// Full problem definition shared by every module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n_sites: usize,
    pub qubits_per_site: u32,
    pub mass: f64,
    pub phi_max: f64,
    pub coupling: f64,
    pub boundary: Boundary,
    pub stencil: GradientStencil,
}

impl LatticeSpec {
    /// Spec with the given size and mass; two qubits per site, `φ_max = 3.5`,
    /// no interaction, periodic boundaries and the `s1` stencil.
    pub fn new(n_sites: usize, mass: f64) -> Self {
        Self {
            n_sites,
            qubits_per_site: 2,
            mass,
            phi_max: 3.5,
            coupling: 0.0,
            boundary: Boundary::Periodic,
            stencil: GradientStencil::s1(),
        }
    }

    pub fn with_qubits(mut self, qubits_per_site: u32) -> Self {
        self.qubits_per_site = qubits_per_site;
        self
    }

    pub fn with_phi_max(mut self, phi_max: f64) -> Self {
        self.phi_max = phi_max;
        self
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_stencil(mut self, stencil: GradientStencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::invalid("n_sites must be positive"));
        }
        if self.n_sites == 1 && !self.stencil.is_zero() {
            return Err(Error::invalid("a single site requires the zero stencil"));
        }
        if self.qubits_per_site == 0 || self.qubits_per_site > 16 {
            return Err(Error::invalid("qubits_per_site must be in 1..=16"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::invalid(format!("mass must be > 0, got {}", self.mass)));
        }
        if !(self.phi_max.is_finite() && self.phi_max > 0.0) {
            return Err(Error::invalid(format!("phi_max must be > 0, got {}", self.phi_max)));
        }
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(Error::invalid(format!("coupling must be >= 0, got {}", self.coupling)));
        }
        if self.boundary == Boundary::Periodic && self.stencil.reach() >= self.n_sites {
            return Err(Error::invalid(format!(
                "stencil reach {} must be below N = {} under periodic boundaries",
                self.stencil.reach(),
                self.n_sites
            )));
        }
        Ok(())
    }

    /// Field values per site, `n_s = 2^{n_Q}`.
    pub fn states_per_site(&self) -> usize {
        1usize << self.qubits_per_site
    }

    pub fn n_qubits(&self) -> usize {
        self.n_sites * self.qubits_per_site as usize
    }

    /// Short content hash of the spec, carried by every output file.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `M² = m̂² I + Σ_d w_d (difference operator)ᵀ(difference operator)`.
pub fn build_mass_matrix(spec: &LatticeSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = spec.n_sites;
    let mut m2 = DMatrix::from_diagonal_element(n, n, spec.mass * spec.mass);
    for (i, &w) in spec.stencil.weights().iter().enumerate() {
        let d = i + 1;
        match spec.boundary {
            Boundary::Periodic => {
                for a in 0..n {
                    let b = (a + d) % n;
                    m2[(a, a)] += w;
                    m2[(b, b)] += w;
                    m2[(a, b)] -= w;
                    m2[(b, a)] -= w;
                }
            }
            Boundary::Open => {
                // every term (φ(a+d) − φ(a))² touching the lattice, with φ = 0 outside
                for a in -(d as isize)..n as isize {
                    let b = a + d as isize;
                    let a_in = a >= 0;
                    let b_in = b < n as isize;
                    if a_in {
                        m2[(a as usize, a as usize)] += w;
                    }
                    if b_in {
                        m2[(b as usize, b as usize)] += w;
                    }
                    if a_in && b_in {
                        m2[(a as usize, b as usize)] -= w;
                        m2[(b as usize, a as usize)] -= w;
                    }
                }
            }
        }
    }
    Ok(m2)
}

/// `K` together with its mode decomposition `K = Vᵀ diag(E) V`.
#[derive(Clone, Debug)]
pub struct CorrelationKernel {
    pub k_matrix: DMatrix<f64>,
    pub energies: Vec<f64>,
    /// Rows are the (real, orthonormal) mode vectors.
    pub modes: DMatrix<f64>,
    pub spec: LatticeSpec,
}

impl CorrelationKernel {
    pub fn n_sites(&self) -> usize {
        self.spec.n_sites
    }

    /// `K⁻¹ = Vᵀ diag(1/E) V`.
    pub fn k_inverse(&self) -> DMatrix<f64> {
        let inv: Vec<f64> = self.energies.iter().map(|e| 1.0 / e).collect();
        reconstruct(&self.modes, &inv)
    }

    /// Largest entry of `|Vᵀ diag(E) V − K|`.
    pub fn reconstruction_error(&self) -> f64 {
        (reconstruct(&self.modes, &self.energies) - &self.k_matrix).amax()
    }

    /// Ground-state energy of the continuous-field theory, `½ Σ E_i`.
    pub fn zero_point_energy(&self) -> f64 {
        0.5 * self.energies.iter().sum::<f64>()
    }

    /// Kernel with the off-diagonal couplings replaced, used to build
    /// reference product states. Mode data are recomputed from the new matrix.
    pub fn from_matrix(spec: LatticeSpec, k_matrix: DMatrix<f64>) -> Result<Self> {
        let n = k_matrix.nrows();
        if n != spec.n_sites || k_matrix.ncols() != n {
            return Err(Error::invalid("K must be N×N"));
        }
        let (energies, modes) = sorted_eigen(&k_matrix);
        if energies.iter().any(|&e| e <= 0.0) {
            return Err(Error::numerical("K is not positive definite"));
        }
        Ok(Self {
            k_matrix: symmetrize(k_matrix),
            energies,
            modes,
            spec,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let n = self.n_sites();
        let rows: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.k_matrix[(i, j)])
            .collect();
        serde_json::json!({
            "spec": self.spec,
            "spec_hash": self.spec.hash(),
            "n": n,
            "k_matrix": rows,
            "energies": self.energies,
        })
    }
}

fn reconstruct(modes: &DMatrix<f64>, diag: &[f64]) -> DMatrix<f64> {
    let n = modes.ncols();
    let mut out = DMatrix::zeros(n, n);
    for (mode, &d) in diag.iter().enumerate() {
        let v = modes.row(mode);
        for i in 0..n {
            let vi = d * v[i];
            for j in 0..n {
                out[(i, j)] += vi * v[j];
            }
        }
    }
    symmetrize(out)
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Eigenvalues ascending with eigenvectors as rows. Each vector's sign is
/// fixed so its largest-magnitude component (first on ties) is positive.
pub(crate) fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut rows = DMatrix::zeros(n, n);
    for (r, &i) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(i);
        let mut pivot = 0;
        for j in 1..n {
            if col[j].abs() > col[pivot].abs() + 1e-12 {
                pivot = j;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            rows[(r, j)] = sign * col[j];
        }
    }
    (values, rows)
}

/// Real momentum basis for periodic boundaries: the constant mode, then a
/// cosine/sine pair for each `0 < n < N/2`, then the alternating mode when
/// `N` is even. Returns the modes as rows and their lattice momenta.
fn periodic_modes(n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let nf = n as f64;
    let mut rows = DMatrix::zeros(n, n);
    let mut momenta = Vec::with_capacity(n);
    let mut r = 0;
    let norm0 = 1.0 / nf.sqrt();
    for j in 0..n {
        rows[(r, j)] = norm0;
    }
    momenta.push(0.0);
    r += 1;
    let norm = (2.0 / nf).sqrt();
    for k in 1..n.div_ceil(2) {
        let p = 2.0 * PI * k as f64 / nf;
        for j in 0..n {
            rows[(r, j)] = norm * (p * j as f64).cos();
            rows[(r + 1, j)] = norm * (p * j as f64).sin();
        }
        momenta.push(p);
        momenta.push(p);
        r += 2;
    }
    if n % 2 == 0 {
        for j in 0..n {
            rows[(r, j)] = if j % 2 == 0 { norm0 } else { -norm0 };
        }
        momenta.push(PI);
    }
    (rows, momenta)
}

/// Eigen-decomposes `M²` and forms `K = Vᵀ diag(E) V`.
pub fn build_kernel(spec: &LatticeSpec) -> Result<CorrelationKernel> {
    let m2 = build_mass_matrix(spec)?;
    let (energies_sq, modes) = match spec.boundary {
        // decoupled sites: every basis diagonalizes M², and the site basis keeps K exactly diagonal
        _ if spec.stencil.is_zero() => (
            vec![spec.mass * spec.mass; spec.n_sites],
            DMatrix::identity(spec.n_sites, spec.n_sites),
        ),
        Boundary::Periodic => {
            let (modes, momenta) = periodic_modes(spec.n_sites);
            let e2 = momenta
                .iter()
                .map(|&p| spec.mass * spec.mass + spec.stencil.dispersion(p))
                .collect::<Vec<_>>();
            (e2, modes)
        }
        Boundary::Open => sorted_eigen(&m2),
    };
    if let Some(bad) = energies_sq.iter().find(|&&e| e <= 0.0) {
        return Err(Error::numerical(format!(
            "massless/unstable mode: M² eigenvalue {bad:e}"
        )));
    }
    let energies: Vec<f64> = energies_sq.iter().map(|e| e.sqrt()).collect();
    let k_matrix = reconstruct(&modes, &energies);
    Ok(CorrelationKernel {
        k_matrix,
        energies,
        modes,
        spec: spec.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoPointMode {
    FiniteLattice,
    InfiniteVolumeLattice,
    Continuum,
    Asymptotic,
}

impl fmt::Display for TwoPointMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TwoPointMode::FiniteLattice => "finite_lattice",
            TwoPointMode::InfiniteVolumeLattice => "infinite_volume_lattice",
            TwoPointMode::Continuum => "continuum",
            TwoPointMode::Asymptotic => "asymptotic",
        };
        f.write_str(s)
    }
}

/// `⟨φ_origin φ_{origin+r}⟩` for a range of separations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoPointTable {
    pub mode: TwoPointMode,
    pub origin: usize,
    /// `(r, value)` in increasing `r`.
    pub values: Vec<(usize, f64)>,
}

impl TwoPointTable {
    pub fn get(&self, r: usize) -> Option<f64> {
        self.values.iter().find(|(s, _)| *s == r).map(|&(_, v)| v)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,value,mode\n");
        for (r, v) in &self.values {
            out.push_str(&format!("{r},{v:.17e},{}\n", self.mode));
        }
        out
    }
}

/// Two-point table measured from site 0.
pub fn two_point(kernel: &CorrelationKernel, mode: TwoPointMode) -> Result<TwoPointTable> {
    two_point_from(kernel, mode, 0)
}

/// Two-point table measured from `origin`. Separations run over the sites
/// reachable from the origin (wrapping under periodic boundaries); the
/// continuum and asymptotic forms skip `r = 0`.
pub fn two_point_from(
    kernel: &CorrelationKernel,
    mode: TwoPointMode,
    origin: usize,
) -> Result<TwoPointTable> {
    let n = kernel.n_sites();
    if origin >= n {
        return Err(Error::invalid(format!("origin {origin} outside lattice of {n} sites")));
    }
    let max_r = match kernel.spec.boundary {
        Boundary::Periodic => n - 1,
        Boundary::Open => n - 1 - origin,
    };
    let first = match mode {
        TwoPointMode::FiniteLattice | TwoPointMode::InfiniteVolumeLattice => 0,
        TwoPointMode::Continuum | TwoPointMode::Asymptotic => 1,
    };
    let values = match mode {
        TwoPointMode::FiniteLattice => {
            let inv = kernel.k_inverse();
            (first..=max_r)
                .map(|r| (r, 0.5 * inv[(origin, (origin + r) % n)]))
                .collect()
        }
        _ => (first..=max_r)
            .map(|r| two_point_limit(&kernel.spec, mode, r as f64).map(|v| (r, v)))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(TwoPointTable {
        mode,
        origin,
        values,
    })
}

/// Infinite-volume forms of the two-point function at separation `r`.
pub fn two_point_limit(spec: &LatticeSpec, mode: TwoPointMode, r: f64) -> Result<f64> {
    let m = spec.mass;
    match mode {
        TwoPointMode::FiniteLattice => Err(Error::invalid(
            "finite-lattice two-point values come from a kernel",
        )),
        TwoPointMode::InfiniteVolumeLattice => {
            // even integrand: integrate [0, π] and double
            let stencil = &spec.stencil;
            let f = |p: f64| (p * r).cos() / (2.0 * (m * m + stencil.dispersion(p)).sqrt());
            Ok(special::integrate(f, 0.0, PI, 1e-12 * PI)? / PI)
        }
        TwoPointMode::Continuum => {
            if r <= 0.0 {
                return Err(Error::invalid("continuum two-point function diverges at r = 0"));
            }
            Ok(special::bessel_k0(m * r)? / (2.0 * PI))
        }
        TwoPointMode::Asymptotic => {
            if r <= 0.0 {
                return Err(Error::invalid("asymptotic two-point form is singular at r = 0"));
            }
            Ok((-m * r).exp() / (8.0 * PI * m * r).sqrt())
        }
    }
}

/// Infinite-volume continuum envelope of `K_ij`, `−(m̂/(π r)) K₁(m̂ r)`.
pub fn kernel_asymptote(mass: f64, r: f64) -> Result<f64> {
    if r < 1.0 {
        return Err(Error::invalid(format!("kernel asymptote needs r >= 1, got {r}")));
    }
    Ok(-(mass / (PI * r)) * special::bessel_k1(mass * r)?)
}
