//! Rotation-angle schedules for preparing real, nonnegative states.
//!
//! A state on `n` qubits is built level by level: the rotation on qubit `ℓ`
//! is controlled on the `ℓ` qubits above it, one angle `θ_{ℓ,k}` per control
//! value `k`. The α form rewrites each level as a sum of rotations that are
//! controlled only on the nearest `h` qubits,
//!
//! ```text
//! θ_{ℓ,k} = Σ_{h ∈ H(ℓ)} α_{ℓh, k mod 2^h}
//! ```
//!
//! so that long-range control appears only where the state needs it.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::digitize::StateVector;
use crate::error::{Error, Result};

/// θ angles for every level. `levels[ℓ]` has `2^ℓ` entries indexed by the
/// binary value of the `ℓ` qubits above.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSchedule {
    pub n_qubits: usize,
    pub levels: Vec<Vec<f64>>,
    /// Set where both sub-branches carry zero weight; the angle is then 0 by
    /// convention and the rotation never acts.
    pub dead: Vec<Vec<bool>>,
}

impl ThetaSchedule {
    /// Schedule from raw angles with no dead branches.
    pub fn from_levels(levels: Vec<Vec<f64>>) -> Result<Self> {
        for (l, lv) in levels.iter().enumerate() {
            if lv.len() != 1 << l {
                return Err(Error::invalid(format!(
                    "level {l} has {} angles, expected {}",
                    lv.len(),
                    1usize << l
                )));
            }
        }
        let dead = levels.iter().map(|lv| vec![false; lv.len()]).collect();
        Ok(Self {
            n_qubits: levels.len(),
            levels,
            dead,
        })
    }

    pub fn rotation_count(&self) -> usize {
        self.levels.iter().flatten().filter(|&&t| t != 0.0).count()
    }

    pub fn dead_count(&self) -> usize {
        self.dead.iter().flatten().filter(|&&d| d).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decomposition {
    /// Every control count `h = 0..=ℓ`.
    Full,
    /// One operator per spatial distance: `h ∈ {ℓ mod n_Q, ℓ mod n_Q + n_Q, …, ℓ}`,
    /// so controls always span whole sites.
    SiteWise(u32),
    /// Explicit `H(ℓ)` for each level.
    Custom(Vec<Vec<usize>>),
}

impl Decomposition {
    /// `H(0) = {0}` and `H(ℓ) = {1, …, ℓ}` otherwise: no uncontrolled rotation
    /// beyond the first qubit.
    pub fn without_uncontrolled(n_qubits: usize) -> Self {
        Decomposition::Custom(
            (0..n_qubits)
                .map(|l| if l == 0 { vec![0] } else { (1..=l).collect() })
                .collect(),
        )
    }

    /// Sorted control counts used at level `level`.
    pub fn sets(&self, level: usize) -> Result<Vec<usize>> {
        match self {
            Decomposition::Full => Ok((0..=level).collect()),
            Decomposition::SiteWise(nq) => {
                if *nq == 0 {
                    return Err(Error::invalid("site-wise decomposition needs n_Q >= 1"));
                }
                let nq = *nq as usize;
                Ok((level % nq..=level).step_by(nq).collect())
            }
            Decomposition::Custom(sets) => {
                let set = sets
                    .get(level)
                    .ok_or_else(|| Error::invalid(format!("no control set for level {level}")))?;
                let mut s = set.clone();
                s.sort_unstable();
                s.dedup();
                if s.len() != set.len() || s.last() != Some(&level) {
                    return Err(Error::invalid(format!(
                        "control set for level {level} must be distinct and end at {level}"
                    )));
                }
                Ok(s)
            }
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Decomposition::Full => "full".into(),
            Decomposition::SiteWise(nq) => format!("sitewise({nq})"),
            Decomposition::Custom(_) => "custom".into(),
        }
    }
}

/// α angles: `levels[ℓ]` lists `(h, α_{ℓh,·})` pairs in increasing `h`, each
/// array of length `2^h`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSchedule {
    pub n_qubits: usize,
    pub decomposition: Decomposition,
    pub levels: Vec<Vec<(usize, Vec<f64>)>>,
}

impl AlphaSchedule {
    pub fn rotation_count(&self) -> usize {
        self.levels
            .iter()
            .flatten()
            .map(|(_, a)| a.iter().filter(|&&x| x != 0.0).count())
            .sum()
    }

    /// `α_{ℓh,k}`, zero when `h` is not in the level's set.
    pub fn get(&self, level: usize, h: usize, k: usize) -> f64 {
        self.levels[level]
            .iter()
            .find(|(hh, _)| *hh == h)
            .map_or(0.0, |(_, a)| a[k])
    }
}

/// Either kind of schedule, for code that handles both.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Theta(ThetaSchedule),
    Alpha(AlphaSchedule),
}

impl Schedule {
    pub fn n_qubits(&self) -> usize {
        match self {
            Schedule::Theta(t) => t.n_qubits,
            Schedule::Alpha(a) => a.n_qubits,
        }
    }

    pub fn rotation_count(&self) -> usize {
        match self {
            Schedule::Theta(t) => t.rotation_count(),
            Schedule::Alpha(a) => a.rotation_count(),
        }
    }

    /// Equivalent θ angles.
    pub fn to_thetas(&self) -> ThetaSchedule {
        match self {
            Schedule::Theta(t) => t.clone(),
            Schedule::Alpha(a) => thetas_from_alphas(a),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Schedule::Theta(t) => theta_to_json(t),
            Schedule::Alpha(a) => alpha_to_json(a),
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        match v.get("kind").and_then(|k| k.as_str()) {
            Some("theta") => Ok(Schedule::Theta(theta_from_json(v)?)),
            Some("alpha") => Ok(Schedule::Alpha(alpha_from_json(v)?)),
            _ => Err(Error::Format("schedule JSON needs kind theta or alpha".into())),
        }
    }
}

/// θ angles of a real, nonnegative state of `2^n` amplitudes.
pub fn thetas_from_amplitudes(amps: &[f64]) -> Result<ThetaSchedule> {
    let dim = amps.len();
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::invalid(format!("state length {dim} is not a power of two")));
    }
    if let Some(bad) = amps.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(Error::invalid(format!(
            "angle extraction needs nonnegative amplitudes, found {bad}"
        )));
    }
    let n = dim.trailing_zeros() as usize;
    // weights[ℓ][k]: squared norm of the subtree fixed by the first ℓ bits = k
    let mut weights: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    weights[n] = amps.iter().map(|a| a * a).collect();
    for l in (0..n).rev() {
        let below = &weights[l + 1];
        weights[l] = (0..1 << l).map(|k| below[2 * k] + below[2 * k + 1]).collect();
    }
    let mut levels = Vec::with_capacity(n);
    let mut dead = Vec::with_capacity(n);
    for l in 0..n {
        let below = &weights[l + 1];
        let mut lv = Vec::with_capacity(1 << l);
        let mut dv = Vec::with_capacity(1 << l);
        for k in 0..1 << l {
            let (lo, hi) = (below[2 * k], below[2 * k + 1]);
            if lo == 0.0 && hi == 0.0 {
                lv.push(0.0);
                dv.push(true);
            } else {
                lv.push(hi.sqrt().atan2(lo.sqrt()));
                dv.push(false);
            }
        }
        levels.push(lv);
        dead.push(dv);
    }
    Ok(ThetaSchedule {
        n_qubits: n,
        levels,
        dead,
    })
}

pub fn thetas_from_state(state: &StateVector) -> Result<ThetaSchedule> {
    thetas_from_amplitudes(&state.amplitudes)
}

/// Amplitudes produced by the schedule acting on `|0…0⟩`: bit 0 picks up
/// `cos θ`, bit 1 picks up `sin θ`.
pub fn state_from_thetas(schedule: &ThetaSchedule) -> Vec<f64> {
    let mut amps = vec![1.0];
    for lv in &schedule.levels {
        let mut next = vec![0.0; 2 * amps.len()];
        for (k, (&a, &t)) in amps.iter().zip(lv).enumerate() {
            let (s, c) = t.sin_cos();
            next[2 * k] = a * c;
            next[2 * k + 1] = a * s;
        }
        amps = next;
    }
    amps
}

/// `M_h(k)`: mean of `θ_{ℓ,k + m 2^h}` over `m`, for every `h ≤ ℓ`.
fn strided_means(theta: &[f64]) -> Vec<Vec<f64>> {
    let l = theta.len().trailing_zeros() as usize;
    let mut means = vec![Vec::new(); l + 1];
    means[l] = theta.to_vec();
    for h in (0..l).rev() {
        let up = &means[h + 1];
        let half = 1 << h;
        means[h] = (0..half).map(|k| 0.5 * (up[k] + up[k + half])).collect();
    }
    means
}

/// Converts θ angles to α angles over the decomposition's control sets.
///
/// For the sorted set `H(ℓ)`, `α_{ℓh,k} = M_h(k) − M_{h⁻}(k mod 2^{h⁻})` where
/// `h⁻` is the previous member of the set (the subtracted term is absent for
/// the first). This is the recursion "strided mean minus every shorter-range
/// α already assigned", with the partial sums collapsed.
pub fn alphas_from_thetas(schedule: &ThetaSchedule, decomposition: &Decomposition) -> Result<AlphaSchedule> {
    let mut levels = Vec::with_capacity(schedule.n_qubits);
    for (l, theta) in schedule.levels.iter().enumerate() {
        let set = decomposition.sets(l)?;
        let means = strided_means(theta);
        let mut terms = Vec::with_capacity(set.len());
        let mut prev: Option<usize> = None;
        for &h in &set {
            let m = &means[h];
            let alpha: Vec<f64> = match prev {
                None => m.clone(),
                Some(hp) => {
                    let mp = &means[hp];
                    let mask = (1 << hp) - 1;
                    (0..1 << h).map(|k| m[k] - mp[k & mask]).collect()
                }
            };
            terms.push((h, alpha));
            prev = Some(h);
        }
        levels.push(terms);
    }
    Ok(AlphaSchedule {
        n_qubits: schedule.n_qubits,
        decomposition: decomposition.clone(),
        levels,
    })
}

/// `θ_{ℓk} = Σ_h α_{ℓh, k mod 2^h}`; missing or zeroed terms contribute
/// nothing, so this also rebuilds truncated schedules.
pub fn thetas_from_alphas(schedule: &AlphaSchedule) -> ThetaSchedule {
    let levels: Vec<Vec<f64>> = schedule
        .levels
        .iter()
        .enumerate()
        .map(|(l, terms)| {
            let mut theta = vec![0.0; 1 << l];
            for (h, alpha) in terms {
                let mask = (1usize << h) - 1;
                for (k, t) in theta.iter_mut().enumerate() {
                    *t += alpha[k & mask];
                }
            }
            theta
        })
        .collect();
    ThetaSchedule::from_levels(levels).expect("levels have 2^ℓ entries")
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("reference schedules need n >= 2, got {n}")));
    }
    if n > 30 {
        return Err(Error::invalid("reference schedules are limited to 30 qubits"));
    }
    Ok(())
}

/// `(|0…0⟩ + |1…1⟩)/√2` up to a global sign: `θ₀ = −3π/4`, then
/// `θ_{ℓk} = 0` for even `k` and `π/2` for odd `k`.
pub fn ghz_schedule(n: usize) -> Result<ThetaSchedule> {
    check_n(n)?;
    let mut levels = vec![vec![-3.0 * FRAC_PI_4]];
    for l in 1..n {
        levels.push((0..1usize << l).map(|k| if k % 2 == 1 { FRAC_PI_2 } else { 0.0 }).collect());
    }
    ThetaSchedule::from_levels(levels)
}

/// GHZ α angles: `α₀ = −3π/4` and a single singly-controlled `α_{ℓ1,1} = π/2`
/// per later level.
pub fn ghz_alphas(n: usize) -> Result<AlphaSchedule> {
    alphas_from_thetas(&ghz_schedule(n)?, &Decomposition::without_uncontrolled(n))
}

/// W state: `θ_{ℓ0} = arccos √((n−ℓ−1)/(n−ℓ))`, every other angle 0.
pub fn w_schedule(n: usize) -> Result<ThetaSchedule> {
    check_n(n)?;
    let levels = (0..n)
        .map(|l| {
            let mut lv = vec![0.0; 1 << l];
            let r = (n - l - 1) as f64 / (n - l) as f64;
            lv[0] = r.sqrt().acos();
            lv
        })
        .collect();
    ThetaSchedule::from_levels(levels)
}

/// Two-qubit negativity of the `n`-qubit W state.
pub fn w_negativity(n: usize) -> Result<f64> {
    check_n(n)?;
    let m = (n - 2) as f64;
    Ok(((4.0 + m * m).sqrt() - m) / (2.0 * n as f64))
}

/// Schedules as JSON: `{n_qubits, convention, kind, decomposition, levels:
/// [{level, entries: [{h, k, angle}]}]}`. Zero angles are omitted; `f64`s are
/// written in shortest round-trip form, so parsing restores them exactly.
pub fn theta_to_json(s: &ThetaSchedule) -> serde_json::Value {
    let levels: Vec<serde_json::Value> = s
        .levels
        .iter()
        .enumerate()
        .map(|(l, lv)| {
            let entries: Vec<_> = lv
                .iter()
                .enumerate()
                .filter(|(_, &t)| t != 0.0)
                .map(|(k, &t)| serde_json::json!({"h": l, "k": k, "angle": t}))
                .collect();
            let dead: Vec<usize> = (0..lv.len()).filter(|&k| s.dead[l][k]).collect();
            serde_json::json!({"level": l, "entries": entries, "dead": dead})
        })
        .collect();
    serde_json::json!({
        "n_qubits": s.n_qubits,
        "convention": CONVENTION,
        "kind": "theta",
        "levels": levels,
    })
}

pub fn alpha_to_json(s: &AlphaSchedule) -> serde_json::Value {
    let levels: Vec<serde_json::Value> = s
        .levels
        .iter()
        .enumerate()
        .map(|(l, terms)| {
            let entries: Vec<_> = terms
                .iter()
                .flat_map(|(h, a)| {
                    a.iter()
                        .enumerate()
                        .filter(|(_, &x)| x != 0.0)
                        .map(move |(k, &x)| serde_json::json!({"h": h, "k": k, "angle": x}))
                })
                .collect();
            let hs: Vec<usize> = terms.iter().map(|(h, _)| *h).collect();
            serde_json::json!({"level": l, "h_set": hs, "entries": entries})
        })
        .collect();
    serde_json::json!({
        "n_qubits": s.n_qubits,
        "convention": CONVENTION,
        "kind": "alpha",
        "decomposition": s.decomposition,
        "decomposition_tag": s.decomposition.tag(),
        "levels": levels,
    })
}

/// Bit convention carried by every serialized schedule.
pub const CONVENTION: &str = "level0_msb_first_site";

#[derive(Deserialize)]
struct EntryJson {
    h: usize,
    k: usize,
    angle: f64,
}

#[derive(Deserialize)]
struct LevelJson {
    level: usize,
    entries: Vec<EntryJson>,
    #[serde(default)]
    h_set: Vec<usize>,
    #[serde(default)]
    dead: Vec<usize>,
}

#[derive(Deserialize)]
struct ScheduleJson {
    n_qubits: usize,
    kind: String,
    #[serde(default)]
    decomposition: Option<Decomposition>,
    levels: Vec<LevelJson>,
}

fn parse_json(v: &serde_json::Value) -> Result<ScheduleJson> {
    let s: ScheduleJson =
        serde_json::from_value(v.clone()).map_err(|e| Error::Format(e.to_string()))?;
    if s.levels.len() != s.n_qubits || s.levels.iter().enumerate().any(|(i, l)| l.level != i) {
        return Err(Error::Format("levels must run 0..n_qubits in order".into()));
    }
    Ok(s)
}

pub fn theta_from_json(v: &serde_json::Value) -> Result<ThetaSchedule> {
    let s = parse_json(v)?;
    if s.kind != "theta" {
        return Err(Error::Format(format!("expected a theta schedule, got {}", s.kind)));
    }
    let mut levels: Vec<Vec<f64>> = (0..s.n_qubits).map(|l| vec![0.0; 1 << l]).collect();
    let mut dead: Vec<Vec<bool>> = (0..s.n_qubits).map(|l| vec![false; 1 << l]).collect();
    for lj in &s.levels {
        let l = lj.level;
        for e in &lj.entries {
            if e.h != l || e.k >= 1 << l {
                return Err(Error::Format(format!("bad theta entry at level {l}")));
            }
            levels[l][e.k] = e.angle;
        }
        for &k in &lj.dead {
            *dead[l]
                .get_mut(k)
                .ok_or_else(|| Error::Format(format!("bad dead index at level {l}")))? = true;
        }
    }
    Ok(ThetaSchedule {
        n_qubits: s.n_qubits,
        levels,
        dead,
    })
}

pub fn alpha_from_json(v: &serde_json::Value) -> Result<AlphaSchedule> {
    let s = parse_json(v)?;
    if s.kind != "alpha" {
        return Err(Error::Format(format!("expected an alpha schedule, got {}", s.kind)));
    }
    let decomposition = s
        .decomposition
        .ok_or_else(|| Error::Format("alpha schedule without decomposition".into()))?;
    let mut levels = Vec::with_capacity(s.n_qubits);
    for lj in &s.levels {
        let mut terms: Vec<(usize, Vec<f64>)> =
            lj.h_set.iter().map(|&h| (h, vec![0.0; 1 << h])).collect();
        for e in &lj.entries {
            let slot = terms
                .iter_mut()
                .find(|(h, _)| *h == e.h)
                .ok_or_else(|| Error::Format(format!("h = {} not in level {} set", e.h, lj.level)))?;
            *slot
                .1
                .get_mut(e.k)
                .ok_or_else(|| Error::Format("control value out of range".into()))? = e.angle;
        }
        levels.push(terms);
    }
    Ok(AlphaSchedule {
        n_qubits: s.n_qubits,
        decomposition,
        levels,
    })
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}
