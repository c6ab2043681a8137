//! Truncating angle schedules and measuring what it costs.
//!
//! Rotations are dropped by control count (`h_max`), by magnitude (`tau`) or
//! by a rotation budget. The resulting states are compared with the exact one
//! through the squared overlap, and decay envelopes of angles and correlators
//! are fitted to exponential forms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angles::{state_from_thetas, thetas_from_alphas, AlphaSchedule, Schedule, ThetaSchedule};
use crate::digitize::dot;
use crate::error::{Error, Result};
use crate::gaussian;
use crate::lattice::{Boundary, CorrelationKernel, TwoPointMode};
use crate::special;

/// Spatial distance, in sites, between the site of qubit `level` and the
/// site of its farthest control when the `h` qubits directly above it control
/// the rotation: `⌈(h − ℓ mod n_Q)/n_Q⌉`, clamped at 0.
pub fn control_distance(level: usize, h: usize, qubits_per_site: u32) -> usize {
    let nq = qubits_per_site as usize;
    let within = level % nq;
    if h <= within {
        0
    } else {
        (h - within).div_ceil(nq)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// Fewest controls first, then largest magnitude; ties broken by
    /// (level, control value).
    #[default]
    ByDistanceThenMagnitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub h_max: Option<usize>,
    pub tau: Option<f64>,
    /// Keep at most this many rotations, taken in `ordering` order after the
    /// other two filters.
    pub max_rotations: Option<usize>,
    pub ordering: Ordering,
}

impl TruncationPolicy {
    pub fn new(h_max: Option<usize>, tau: Option<f64>) -> Self {
        Self {
            h_max,
            tau,
            max_rotations: None,
            ordering: Ordering::ByDistanceThenMagnitude,
        }
    }

    pub fn budget(max_rotations: usize) -> Self {
        Self {
            h_max: None,
            tau: None,
            max_rotations: Some(max_rotations),
            ordering: Ordering::ByDistanceThenMagnitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_max.is_none() && self.tau.is_none() && self.max_rotations.is_none() {
            return Err(Error::invalid("truncation policy needs h_max, tau or max_rotations"));
        }
        if let Some(t) = self.tau {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::invalid(format!("tau must be >= 0, got {t}")));
            }
        }
        Ok(())
    }

    fn keeps(&self, h: usize, angle: f64) -> bool {
        angle != 0.0
            && self.h_max.is_none_or(|m| h <= m)
            && self.tau.is_none_or(|t| angle.abs() >= t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TruncationCounts {
    pub retained: usize,
    pub zeroed: usize,
}

// (h, |angle|, level, k): the keep order for a rotation budget
type Key = (usize, f64, usize, usize);

fn budget_cut(mut keys: Vec<Key>, max: Option<usize>) -> Option<Vec<Key>> {
    let max = max?;
    keys.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(b.1.total_cmp(&a.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    keys.truncate(max);
    Some(keys)
}

pub fn truncate_alphas(s: &AlphaSchedule, policy: &TruncationPolicy) -> Result<(AlphaSchedule, TruncationCounts)> {
    policy.validate()?;
    let before = s.rotation_count();
    let mut out = s.clone();
    let mut keys = Vec::new();
    for (l, terms) in out.levels.iter_mut().enumerate() {
        for (h, alpha) in terms.iter_mut() {
            for (k, a) in alpha.iter_mut().enumerate() {
                if policy.keeps(*h, *a) {
                    keys.push((*h, a.abs(), l, k));
                } else {
                    *a = 0.0;
                }
            }
        }
    }
    if let Some(kept) = budget_cut(keys, policy.max_rotations) {
        let mut mask: Vec<Vec<Vec<bool>>> = out
            .levels
            .iter()
            .map(|t| t.iter().map(|(_, a)| vec![false; a.len()]).collect())
            .collect();
        for (h, _, l, k) in kept {
            let i = out.levels[l].iter().position(|(hh, _)| *hh == h).expect("h in level");
            mask[l][i][k] = true;
        }
        for (l, terms) in out.levels.iter_mut().enumerate() {
            for (i, (_, alpha)) in terms.iter_mut().enumerate() {
                for (k, a) in alpha.iter_mut().enumerate() {
                    if !mask[l][i][k] {
                        *a = 0.0;
                    }
                }
            }
        }
    }
    let retained = out.rotation_count();
    Ok((out, TruncationCounts { retained, zeroed: before - retained }))
}

/// θ rotations carry `h = ℓ` controls.
pub fn truncate_thetas(s: &ThetaSchedule, policy: &TruncationPolicy) -> Result<(ThetaSchedule, TruncationCounts)> {
    policy.validate()?;
    let before = s.rotation_count();
    let mut out = s.clone();
    let mut keys = Vec::new();
    for (l, lv) in out.levels.iter_mut().enumerate() {
        for (k, t) in lv.iter_mut().enumerate() {
            if policy.keeps(l, *t) {
                keys.push((l, t.abs(), l, k));
            } else {
                *t = 0.0;
            }
        }
    }
    if let Some(kept) = budget_cut(keys, policy.max_rotations) {
        let mut mask: Vec<Vec<bool>> = out.levels.iter().map(|lv| vec![false; lv.len()]).collect();
        for (_, _, l, k) in kept {
            mask[l][k] = true;
        }
        for (lv, m) in out.levels.iter_mut().zip(&mask) {
            for (t, keep) in lv.iter_mut().zip(m) {
                if !keep {
                    *t = 0.0;
                }
            }
        }
    }
    let retained = out.rotation_count();
    Ok((out, TruncationCounts { retained, zeroed: before - retained }))
}

pub fn truncate(s: &Schedule, policy: &TruncationPolicy) -> Result<(Schedule, TruncationCounts)> {
    Ok(match s {
        Schedule::Theta(t) => {
            let (t, c) = truncate_thetas(t, policy)?;
            (Schedule::Theta(t), c)
        }
        Schedule::Alpha(a) => {
            let (a, c) = truncate_alphas(a, policy)?;
            (Schedule::Alpha(a), c)
        }
    })
}

/// Squared overlap `|⟨a|b⟩|²` of two normalized real states.
pub fn fidelity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "fidelity of states with {} and {} amplitudes",
            a.len(),
            b.len()
        )));
    }
    let o = dot(a, b);
    Ok((o * o).clamp(0.0, 1.0))
}

/// Fidelity between `exact` and the state prepared by `schedule`.
pub fn schedule_fidelity(exact: &[f64], schedule: &Schedule) -> Result<f64> {
    fidelity(exact, &state_from_thetas(&schedule.to_thetas()))
}

/// Largest `|α|` over every `(ℓ, k)` at each control distance.
pub fn max_abs_alpha_by_distance(s: &AlphaSchedule, qubits_per_site: u32) -> Vec<(usize, f64)> {
    let mut best: Vec<f64> = Vec::new();
    for (l, terms) in s.levels.iter().enumerate() {
        for (h, alpha) in terms {
            let r = control_distance(l, *h, qubits_per_site);
            if best.len() <= r {
                best.resize(r + 1, 0.0);
            }
            let m = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            best[r] = best[r].max(m);
        }
    }
    best.into_iter().enumerate().collect()
}

/// Infidelity `1 − F` after zeroing every α with more than `h` controls,
/// for each `h` in `h_values`.
pub fn h_truncation_scan(exact: &[f64], s: &AlphaSchedule, h_values: &[usize]) -> Result<Vec<(usize, f64, usize)>> {
    h_values
        .par_iter()
        .map(|&h| {
            let (t, c) = truncate_alphas(s, &TruncationPolicy::new(Some(h), None))?;
            let f = fidelity(exact, &state_from_thetas(&thetas_from_alphas(&t)))?;
            Ok((h, 1.0 - f, c.retained))
        })
        .collect()
}

/// One budget of the α-versus-θ comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetComparison {
    pub h_max: usize,
    pub tau: f64,
    pub retained_rotations: usize,
    pub fidelity_alpha: f64,
    pub fidelity_theta: f64,
}

/// Truncates the α schedule by `(h_max, tau)` and the θ schedule to the same
/// number of rotations (fewest controls first, then magnitude).
pub fn compare_budget(
    exact: &[f64],
    thetas: &ThetaSchedule,
    alphas: &AlphaSchedule,
    h_max: usize,
    tau: f64,
) -> Result<BudgetComparison> {
    let (a, c) = truncate_alphas(alphas, &TruncationPolicy::new(Some(h_max), Some(tau)))?;
    let fa = fidelity(exact, &state_from_thetas(&thetas_from_alphas(&a)))?;
    let (t, _) = truncate_thetas(thetas, &TruncationPolicy::budget(c.retained))?;
    let ft = fidelity(exact, &state_from_thetas(&t))?;
    Ok(BudgetComparison {
        h_max,
        tau,
        retained_rotations: c.retained,
        fidelity_alpha: fa,
        fidelity_theta: ft,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    /// Weights `y²`: the log-space fit then approximates least squares on
    /// the original scale.
    Amplitude,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FitModel {
    /// `Z e^{−η (x + 1)}`.
    ExpLinear { weighting: Weighting },
    /// `A · M K₁(M r) / r`.
    BesselEnvelope,
    /// `c e^{−M r} / r^p`.
    PowerExp { power: f64 },
    /// `c e^{−M r}`.
    PureExp,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitParam {
    pub name: &'static str,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub model: FitModel,
    /// Amplitude first, then the decay parameter.
    pub params: Vec<FitParam>,
    pub residual_norm: f64,
    pub points_used: usize,
    /// Points dropped because the ordinate was not positive.
    pub rejected: Vec<(f64, f64)>,
}

impl FitResult {
    pub fn amplitude(&self) -> f64 {
        self.params[0].value
    }

    /// `η` or `M`.
    pub fn decay(&self) -> f64 {
        self.params[1].value
    }
}

/// Weighted straight-line fit `v ≈ a + b u`; returns (a, b, se_a, se_b, rss).
fn weighted_line(u: &[f64], v: &[f64], w: &[f64]) -> (f64, f64, f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let su: f64 = w.iter().zip(u).map(|(w, u)| w * u).sum();
    let sv: f64 = w.iter().zip(v).map(|(w, v)| w * v).sum();
    let suu: f64 = w.iter().zip(u).map(|(w, u)| w * u * u).sum();
    let suv: f64 = w.iter().zip(u.iter().zip(v)).map(|(w, (u, v))| w * u * v).sum();
    let det = sw * suu - su * su;
    let b = (sw * suv - su * sv) / det;
    let a = (sv - b * su) / sw;
    let rss: f64 = w
        .iter()
        .zip(u.iter().zip(v))
        .map(|(w, (u, v))| w * (v - a - b * u).powi(2))
        .sum();
    let dof = (u.len() as f64 - 2.0).max(1.0);
    let s2 = rss / dof;
    (a, b, (s2 * suu / det).sqrt(), (s2 * sw / det).sqrt(), rss)
}

/// Least-squares fit of `model` to `(x, y)` points. Points with `y ≤ 0` are
/// dropped and reported; at least three must remain.
pub fn fit(model: FitModel, points: &[(f64, f64)]) -> Result<FitResult> {
    let (good, rejected): (Vec<(f64, f64)>, Vec<(f64, f64)>) =
        points.iter().partition(|(x, y)| *y > 0.0 && y.is_finite() && x.is_finite());
    if good.len() < 3 {
        return Err(Error::invalid(format!(
            "fit needs at least 3 positive points, have {} ({} rejected)",
            good.len(),
            rejected.len()
        )));
    }
    let x: Vec<f64> = good.iter().map(|p| p.0).collect();
    let ly: Vec<f64> = good.iter().map(|p| p.1.ln()).collect();
    let (params, residual_norm) = match model {
        FitModel::ExpLinear { weighting } => {
            let u: Vec<f64> = x.iter().map(|x| x + 1.0).collect();
            let w: Vec<f64> = match weighting {
                Weighting::Uniform => vec![1.0; x.len()],
                Weighting::Amplitude => good.iter().map(|p| p.1 * p.1).collect(),
            };
            let (a, b, sa, sb, rss) = weighted_line(&u, &ly, &w);
            let z = a.exp();
            (
                vec![
                    FitParam { name: "Z", value: z, stderr: z * sa },
                    FitParam { name: "eta", value: -b, stderr: sb },
                ],
                rss.sqrt(),
            )
        }
        FitModel::PowerExp { .. } | FitModel::PureExp => {
            let p = match model {
                FitModel::PowerExp { power } => power,
                _ => 0.0,
            };
            if p != 0.0 && x.iter().any(|&r| r <= 0.0) {
                return Err(Error::invalid("power-law fits need r > 0"));
            }
            let v: Vec<f64> = x.iter().zip(&ly).map(|(r, l)| l + p * r.ln()).collect();
            let (a, b, sa, sb, rss) = weighted_line(&x, &v, &vec![1.0; x.len()]);
            let c = a.exp();
            (
                vec![
                    FitParam { name: "c", value: c, stderr: c * sa },
                    FitParam { name: "M", value: -b, stderr: sb },
                ],
                rss.sqrt(),
            )
        }
        FitModel::BesselEnvelope => {
            if x.iter().any(|&r| r <= 0.0) {
                return Err(Error::invalid("Bessel envelope fits need r > 0"));
            }
            bessel_fit(&x, &ly)?
        }
    };
    Ok(FitResult {
        model,
        params,
        residual_norm,
        points_used: good.len(),
        rejected,
    })
}

/// Log of `M K₁(M r) / r`, evaluated through the scaled Bessel function.
fn ln_bessel_shape(m: f64, r: f64) -> Result<f64> {
    let x = m * r;
    Ok(special::bessel_k1_scaled(x)?.ln() - x + m.ln() - r.ln())
}

/// Residual sum of squares in log space with the amplitude profiled out.
fn bessel_rss(m: f64, x: &[f64], ly: &[f64]) -> Result<(f64, f64)> {
    let d: Vec<f64> = x
        .iter()
        .zip(ly)
        .map(|(&r, &l)| ln_bessel_shape(m, r).map(|s| l - s))
        .collect::<Result<_>>()?;
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    Ok((d.iter().map(|v| (v - mean).powi(2)).sum(), mean))
}

fn bessel_fit(x: &[f64], ly: &[f64]) -> Result<(Vec<FitParam>, f64)> {
    // log-spaced scan over M, then golden-section refinement around the best
    let (lo, hi, n) = (1e-4f64, 50.0f64, 400);
    let grid: Vec<f64> = (0..=n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / n as f64).exp())
        .collect();
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, &m) in grid.iter().enumerate() {
        let v = bessel_rss(m, x, ly)?.0;
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (bessel_rss(c, x, ly)?.0, bessel_rss(d, x, ly)?.0);
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = bessel_rss(c, x, ly)?.0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = bessel_rss(d, x, ly)?.0;
        }
    }
    let m = 0.5 * (a + b);
    let (rss, ln_amp) = bessel_rss(m, x, ly)?;
    // curvature of the profiled residual gives the decay uncertainty
    let hstep = 1e-4 * m.max(1e-3);
    let curv = (bessel_rss(m + hstep, x, ly)?.0 - 2.0 * rss + bessel_rss(m - hstep, x, ly)?.0) / (hstep * hstep);
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let se_m = if curv > 0.0 { (2.0 * rss / dof / curv).sqrt() } else { f64::NAN };
    let amp = ln_amp.exp();
    Ok((
        vec![
            FitParam { name: "A", value: amp, stderr: f64::NAN },
            FitParam { name: "M", value: m, stderr: se_m },
        ],
        rss.sqrt(),
    ))
}

/// One separation of a correlation sweep from site 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub r: usize,
    pub k_entry: f64,
    pub two_point: f64,
    pub mutual_information: f64,
    pub negativity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecaySweep {
    pub rows: Vec<DecayRow>,
    /// `PureExp` fits over the window; `Err` text when a column cannot be fitted.
    pub fit_k: std::result::Result<FitResult, String>,
    pub fit_two_point: std::result::Result<FitResult, String>,
    pub fit_mutual_information: std::result::Result<FitResult, String>,
    pub window: (usize, usize),
}

/// `|K_{0r}|`, `⟨φ_0 φ_r⟩`, `I(0:r)` and `N(0:r)` for `r = 1..` up to the
/// farthest distinct separation, with exponential fits over `window`.
pub fn decay_sweep(kernel: &CorrelationKernel, window: (usize, usize)) -> Result<DecaySweep> {
    let n = kernel.n_sites();
    let r_max = match kernel.spec.boundary {
        Boundary::Periodic => n / 2,
        Boundary::Open => n - 1,
    };
    if r_max < 6 {
        return Err(Error::invalid("decay sweep needs at least 6 separations"));
    }
    let tp = crate::lattice::two_point(kernel, TwoPointMode::FiniteLattice)?;
    let rows: Vec<DecayRow> = (1..=r_max)
        .into_par_iter()
        .map(|r| {
            Ok(DecayRow {
                r,
                k_entry: kernel.k_matrix[(0, r)].abs(),
                two_point: tp.get(r).expect("separation in table"),
                mutual_information: gaussian::mutual_information(kernel, 0, r)?,
                negativity: gaussian::negativity_reduced(kernel, 0, r)?,
            })
        })
        .collect::<Result<_>>()?;
    let column = |f: fn(&DecayRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|row| row.r >= window.0 && row.r <= window.1)
            .map(|row| (row.r as f64, f(row)))
            .collect();
        fit(FitModel::PureExp, &pts).map_err(|e| e.to_string())
    };
    Ok(DecaySweep {
        fit_k: column(|r| r.k_entry),
        fit_two_point: column(|r| r.two_point),
        fit_mutual_information: column(|r| r.mutual_information),
        rows,
        window,
    })
}
