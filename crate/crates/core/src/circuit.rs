//! Circuits of multi-controlled `R_y` rotations.
//!
//! Each gate rotates one target qubit by the real rotation
//! `R(θ) = [[cos θ, −sin θ], [sin θ, cos θ]]` (OpenQASM's `ry(2θ)`) when the
//! `h` qubits directly above the target hold the control value `k`. Qubit
//! `ℓ` is level `ℓ` of the schedule; qubit 0 is the most significant bit of
//! the basis index.

use std::fmt::Write as _;

use crate::angles::{AlphaSchedule, Schedule, ThetaSchedule};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    Theta,
    Alpha,
}

impl GateKind {
    fn as_str(self) -> &'static str {
        match self {
            GateKind::Theta => "theta",
            GateKind::Alpha => "alpha",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub target: usize,
    /// `target − h, …, target − 1`.
    pub controls: Vec<usize>,
    /// Control value with the first control as the most significant bit.
    pub value: u64,
    pub angle: f64,
    pub kind: GateKind,
    /// Rotation on a zero-weight branch; rendered as a comment, never applied.
    pub dead: bool,
}

impl Gate {
    pub fn h(&self) -> usize {
        self.controls.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitIR {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    /// `key=value` metadata echoed into every rendering.
    pub metadata: Vec<(String, String)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct GateCounts {
    pub rotations: usize,
    pub dead: usize,
    /// `2^h` CNOTs for each multiplexor (distinct `(target, h)` with `h ≥ 1`).
    pub cnot_estimate: u128,
}

impl CircuitIR {
    pub fn counts(&self) -> GateCounts {
        let live: Vec<&Gate> = self.gates.iter().filter(|g| !g.dead).collect();
        let mut groups: Vec<(usize, usize)> = live.iter().map(|g| (g.target, g.h())).collect();
        groups.dedup();
        groups.sort_unstable();
        groups.dedup();
        GateCounts {
            rotations: live.len(),
            dead: self.gates.len() - live.len(),
            cnot_estimate: groups
                .iter()
                .filter(|(_, h)| *h >= 1)
                .map(|(_, h)| 1u128 << h)
                .sum(),
        }
    }
}

fn gate(target: usize, h: usize, k: usize, angle: f64, kind: GateKind, dead: bool) -> Gate {
    Gate {
        target,
        controls: (target - h..target).collect(),
        value: k as u64,
        angle,
        kind,
        dead,
    }
}

/// One gate per nonzero angle, level by level and, within a level, in
/// increasing control count and control value.
pub fn emit(schedule: &Schedule, metadata: Vec<(String, String)>) -> CircuitIR {
    let gates = match schedule {
        Schedule::Theta(t) => emit_thetas(t),
        Schedule::Alpha(a) => emit_alphas(a),
    };
    CircuitIR {
        n_qubits: schedule.n_qubits(),
        gates,
        metadata,
    }
}

fn emit_thetas(t: &ThetaSchedule) -> Vec<Gate> {
    let mut gates = Vec::new();
    for (l, lv) in t.levels.iter().enumerate() {
        for (k, &a) in lv.iter().enumerate() {
            let dead = t.dead[l][k];
            if a != 0.0 || dead {
                gates.push(gate(l, l, k, a, GateKind::Theta, dead));
            }
        }
    }
    gates
}

fn emit_alphas(s: &AlphaSchedule) -> Vec<Gate> {
    let mut gates = Vec::new();
    for (l, terms) in s.levels.iter().enumerate() {
        for (h, alpha) in terms {
            for (k, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    gates.push(gate(l, *h, k, a, GateKind::Alpha, false));
                }
            }
        }
    }
    gates
}

/// Dense simulation from `|0…0⟩`, skipping dead gates.
pub fn simulate(ir: &CircuitIR) -> Result<Vec<f64>> {
    let n = ir.n_qubits;
    if n > 30 {
        return Err(Error::invalid("simulation is limited to 30 qubits"));
    }
    let dim = 1usize << n;
    let mut psi = vec![0.0; dim];
    psi[0] = 1.0;
    for g in ir.gates.iter().filter(|g| !g.dead) {
        if g.target >= n || g.controls.iter().any(|&c| c >= g.target) {
            return Err(Error::invalid(format!("gate on qubit {} is malformed", g.target)));
        }
        let tbit = 1usize << (n - 1 - g.target);
        let (mut cmask, mut cval) = (0usize, 0usize);
        let h = g.h();
        for (j, &c) in g.controls.iter().enumerate() {
            let bit = 1usize << (n - 1 - c);
            cmask |= bit;
            if (g.value >> (h - 1 - j)) & 1 == 1 {
                cval |= bit;
            }
        }
        let (s, c) = g.angle.sin_cos();
        for i0 in 0..dim {
            if i0 & tbit != 0 || i0 & cmask != cval {
                continue;
            }
            let i1 = i0 | tbit;
            let (a0, a1) = (psi[i0], psi[i1]);
            psi[i0] = c * a0 - s * a1;
            psi[i1] = s * a0 + c * a1;
        }
    }
    Ok(psi)
}

/// Exact hexadecimal float, e.g. `0x1.921fb54442d18p+0`.
pub fn format_hex_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    if x.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let mut frac = format!("{mant:013x}");
    while frac.ends_with('0') {
        frac.pop();
    }
    let dot = if frac.is_empty() { String::new() } else { format!(".{frac}") };
    format!("{sign}0x{lead}{dot}p{e:+}")
}

pub fn parse_hex_float(s: &str) -> Result<f64> {
    let bad = || Error::Format(format!("bad hex float '{s}'"));
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let v = match body {
        "nan" => f64::NAN,
        "inf" => f64::INFINITY,
        _ => {
            let body = body.strip_prefix("0x").ok_or_else(bad)?;
            let (m, e) = body.split_once('p').ok_or_else(bad)?;
            let e: i64 = e.parse().map_err(|_| bad())?;
            let (lead, frac) = m.split_once('.').unwrap_or((m, ""));
            if frac.len() > 13 {
                return Err(bad());
            }
            let lead: u64 = match lead {
                "0" => 0,
                "1" => 1,
                _ => return Err(bad()),
            };
            let frac_bits = if frac.is_empty() {
                0
            } else {
                u64::from_str_radix(frac, 16).map_err(|_| bad())? << (4 * (13 - frac.len()))
            };
            if lead == 0 && frac_bits == 0 {
                0.0
            } else if lead == 0 {
                if e != -1022 {
                    return Err(bad());
                }
                f64::from_bits(frac_bits)
            } else {
                if !(-1022..=1023).contains(&e) {
                    return Err(bad());
                }
                f64::from_bits((((e + 1023) as u64) << 52) | frac_bits)
            }
        }
    };
    Ok(if neg { -v } else { v })
}

fn gate_line(g: &Gate) -> String {
    let (controls, value) = if g.controls.is_empty() {
        ("-".to_string(), "-".to_string())
    } else {
        let c: Vec<String> = g.controls.iter().map(|c| c.to_string()).collect();
        (c.join(","), format!("{:0width$b}", g.value, width = g.h()))
    };
    format!(
        "CRY target={} controls={} value={} angle={} kind={}",
        g.target,
        controls,
        value,
        format_hex_float(g.angle),
        g.kind.as_str()
    )
}

/// Line-oriented text form; `parse_text` inverts it exactly.
pub fn render_text(ir: &CircuitIR) -> String {
    let c = ir.counts();
    let mut out = String::new();
    writeln!(out, "# fieldprep circuit v1").unwrap();
    writeln!(out, "# n_qubits={}", ir.n_qubits).unwrap();
    for (k, v) in &ir.metadata {
        writeln!(out, "# meta {k}={v}").unwrap();
    }
    writeln!(out, "# rotations={} dead={} cnot_estimate={}", c.rotations, c.dead, c.cnot_estimate).unwrap();
    for g in &ir.gates {
        if g.dead {
            writeln!(out, "# DEAD {}", gate_line(g)).unwrap();
        } else {
            writeln!(out, "{}", gate_line(g)).unwrap();
        }
    }
    out
}

fn parse_gate(line: &str, dead: bool) -> Result<Gate> {
    let bad = |what: &str| Error::Format(format!("{what} in gate line '{line}'"));
    let mut fields = line.split_whitespace();
    if fields.next() != Some("CRY") {
        return Err(bad("missing CRY"));
    }
    let mut get = |key: &str| -> Result<&str> {
        let f = fields.next().ok_or_else(|| bad("missing field"))?;
        f.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| bad(key))
    };
    let target: usize = get("target")?.parse().map_err(|_| bad("target"))?;
    let controls_s = get("controls")?;
    let value_s = get("value")?;
    let angle = parse_hex_float(get("angle")?)?;
    let kind = match get("kind")? {
        "theta" => GateKind::Theta,
        "alpha" => GateKind::Alpha,
        _ => return Err(bad("kind")),
    };
    let controls: Vec<usize> = if controls_s == "-" {
        Vec::new()
    } else {
        controls_s
            .split(',')
            .map(|c| c.parse().map_err(|_| bad("controls")))
            .collect::<Result<_>>()?
    };
    let value = if value_s == "-" {
        0
    } else {
        if value_s.len() != controls.len() {
            return Err(bad("value width"));
        }
        u64::from_str_radix(value_s, 2).map_err(|_| bad("value"))?
    };
    Ok(Gate {
        target,
        controls,
        value,
        angle,
        kind,
        dead,
    })
}

pub fn parse_text(text: &str) -> Result<CircuitIR> {
    let mut n_qubits = None;
    let mut metadata = Vec::new();
    let mut gates = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(rest) = line.strip_prefix("# DEAD ") {
            gates.push(parse_gate(rest, true)?);
        } else if let Some(rest) = line.strip_prefix("# n_qubits=") {
            n_qubits = Some(rest.parse().map_err(|_| Error::Format("bad n_qubits".into()))?);
        } else if let Some(rest) = line.strip_prefix("# meta ") {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad metadata line '{line}'")))?;
            metadata.push((k.to_string(), v.to_string()));
        } else if line.starts_with('#') {
            continue;
        } else {
            gates.push(parse_gate(line, false)?);
        }
    }
    Ok(CircuitIR {
        n_qubits: n_qubits.ok_or_else(|| Error::Format("missing n_qubits header".into()))?,
        gates,
        metadata,
    })
}

/// OpenQASM 3 with symbolic multi-controls; 0-controls are conjugated by `x`.
pub fn render_qasm(ir: &CircuitIR) -> String {
    let c = ir.counts();
    let mut out = String::new();
    writeln!(out, "OPENQASM 3.0;").unwrap();
    writeln!(out, "include \"stdgates.inc\";").unwrap();
    writeln!(out, "// fieldprep circuit: R(theta) = ry(2*theta)").unwrap();
    for (k, v) in &ir.metadata {
        writeln!(out, "// {k}={v}").unwrap();
    }
    writeln!(out, "// rotations={} cnot_estimate={}", c.rotations, c.cnot_estimate).unwrap();
    writeln!(out, "qubit[{}] q;", ir.n_qubits).unwrap();
    for g in &ir.gates {
        if g.dead {
            writeln!(out, "// dead branch: {}", gate_line(g)).unwrap();
            continue;
        }
        let h = g.h();
        let zeros: Vec<usize> = g
            .controls
            .iter()
            .enumerate()
            .filter(|(j, _)| (g.value >> (h - 1 - j)) & 1 == 0)
            .map(|(_, &q)| q)
            .collect();
        for q in &zeros {
            writeln!(out, "x q[{q}];").unwrap();
        }
        let angle = 2.0 * g.angle;
        if h == 0 {
            writeln!(out, "ry({angle:?}) q[{}];", g.target).unwrap();
        } else {
            let ctrl: Vec<String> = g.controls.iter().map(|q| format!("q[{q}]")).collect();
            writeln!(out, "ctrl({h}) @ ry({angle:?}) {}, q[{}];", ctrl.join(", "), g.target).unwrap();
        }
        for q in &zeros {
            writeln!(out, "x q[{q}];").unwrap();
        }
    }
    out
}
