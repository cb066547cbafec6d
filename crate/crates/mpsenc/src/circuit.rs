//! Gate-level circuits in the RX/RY/RZ/CNOT basis, metrics and exports.
//!
//! Qubit 0 is the most significant grid bit. Gates act left to right on
//! `|0…0⟩`. Rotations follow `R_P(θ) = exp(−iθP/2)`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Rx {
        q: usize,
        theta: f64,
    },
    Ry {
        q: usize,
        theta: f64,
    },
    Rz {
        q: usize,
        theta: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    /// Generic two-qubit unitary on `(q0, q1)`, basis order `|q0 q1⟩`.
    U2q {
        q0: usize,
        q1: usize,
        matrix: Box<CMat>,
    },
}

/// Wraps an angle into `(−2π, 2π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (4.0 * PI);
    if t > 2.0 * PI {
        t -= 4.0 * PI;
    } else if t <= -2.0 * PI {
        t += 4.0 * PI;
    }
    t
}

impl Gate {
    pub fn rx(q: usize, theta: f64) -> Gate {
        Gate::Rx {
            q,
            theta: wrap_angle(theta),
        }
    }

    pub fn ry(q: usize, theta: f64) -> Gate {
        Gate::Ry {
            q,
            theta: wrap_angle(theta),
        }
    }

    pub fn rz(q: usize, theta: f64) -> Gate {
        Gate::Rz {
            q,
            theta: wrap_angle(theta),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Gate {
        Gate::Cnot { control, target }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rx { q, .. } | Gate::Ry { q, .. } | Gate::Rz { q, .. } => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::U2q { q0, q1, .. } => vec![q0, q1],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. } | Gate::U2q { .. })
    }

    /// The inverse gate.
    pub fn inverse(&self) -> Gate {
        match self {
            Gate::Rx { q, theta } => Gate::rx(*q, -theta),
            Gate::Ry { q, theta } => Gate::ry(*q, -theta),
            Gate::Rz { q, theta } => Gate::rz(*q, -theta),
            Gate::Cnot { .. } => self.clone(),
            Gate::U2q { q0, q1, matrix } => Gate::U2q {
                q0: *q0,
                q1: *q1,
                matrix: Box::new(matrix.adjoint()),
            },
        }
    }

    /// Same gate acting on relabelled qubits.
    pub fn remapped(&self, map: &[usize]) -> Gate {
        match self {
            Gate::Rx { q, theta } => Gate::Rx {
                q: map[*q],
                theta: *theta,
            },
            Gate::Ry { q, theta } => Gate::Ry {
                q: map[*q],
                theta: *theta,
            },
            Gate::Rz { q, theta } => Gate::Rz {
                q: map[*q],
                theta: *theta,
            },
            Gate::Cnot { control, target } => Gate::Cnot {
                control: map[*control],
                target: map[*target],
            },
            Gate::U2q { q0, q1, matrix } => Gate::U2q {
                q0: map[*q0],
                q1: map[*q1],
                matrix: matrix.clone(),
            },
        }
    }

    /// 2×2 matrix of a one-qubit gate.
    pub fn matrix1(&self) -> Option<[[C64; 2]; 2]> {
        let i = C64::new(0.0, 1.0);
        match *self {
            Gate::Rx { theta, .. } => {
                let (s, co) = (0.5 * theta).sin_cos();
                Some([[c(co), -i * s], [-i * s, c(co)]])
            }
            Gate::Ry { theta, .. } => {
                let (s, co) = (0.5 * theta).sin_cos();
                Some([[c(co), c(-s)], [c(s), c(co)]])
            }
            Gate::Rz { theta, .. } => {
                let e = C64::from_polar(1.0, 0.5 * theta);
                Some([[e.conj(), c(0.0)], [c(0.0), e]])
            }
            _ => None,
        }
    }

    /// 4×4 matrix of a two-qubit gate in the basis `|q_a q_b⟩` where
    /// `(q_a, q_b)` is the order returned by [`Gate::qubits`].
    pub fn matrix2(&self) -> Option<CMat> {
        match self {
            Gate::Cnot { .. } => {
                let mut m = CMat::zeros(4, 4);
                m[(0, 0)] = c(1.0);
                m[(1, 1)] = c(1.0);
                m[(2, 3)] = c(1.0);
                m[(3, 2)] = c(1.0);
                Some(m)
            }
            Gate::U2q { matrix, .. } => Some((**matrix).clone()),
            _ => None,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Gate::Rx { .. } => "rx",
            Gate::Ry { .. } => "ry",
            Gate::Rz { .. } => "rz",
            Gate::Cnot { .. } => "cx",
            Gate::U2q { .. } => "u2q",
        }
    }
}

/// One disentangling layer inside the gate list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerInfo {
    /// Bond carrying the central two-qubit gate (1-indexed).
    pub origin: usize,
    /// Gate index range `[start, end)`.
    pub start: usize,
    pub end: usize,
    /// Bonds whose two-qubit gate was omitted by the truncation threshold.
    pub skipped_bonds: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub layers: Vec<LayerInfo>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitMetrics {
    pub depth: usize,
    pub cnot_count: usize,
    pub gate_count: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            layers: Vec::new(),
        }
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        let qs = g.qubits();
        if qs.iter().any(|&q| q >= self.n_qubits) {
            return Err(Error::Precondition(format!(
                "gate on {qs:?} outside {} qubits",
                self.n_qubits
            )));
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::Precondition(
                "two-qubit gate on a single qubit".into(),
            ));
        }
        self.gates.push(g);
        Ok(())
    }

    /// Appends the gates of `other` (layer annotations shifted accordingly).
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::LengthMismatch(other.n_qubits, self.n_qubits));
        }
        let off = self.gates.len();
        self.gates.extend(other.gates.iter().cloned());
        self.layers.extend(other.layers.iter().map(|l| LayerInfo {
            start: l.start + off,
            end: l.end + off,
            ..l.clone()
        }));
        Ok(())
    }

    /// Fuses consecutive same-axis rotations on a qubit and drops rotations
    /// that cancel. Layer ranges are kept; a fused gate stays in the layer of
    /// its first factor.
    pub fn merge_rotations(&mut self) {
        let layer_of = |i: usize| self.layers.iter().position(|l| i >= l.start && i < l.end);
        let mut out: Vec<(Gate, Option<usize>)> = Vec::with_capacity(self.gates.len());
        let mut last: Vec<Option<usize>> = vec![None; self.n_qubits];
        for (i, g) in self.gates.iter().enumerate() {
            let fused = match (g, g.qubits()[0]) {
                (Gate::Rx { theta, .. } | Gate::Ry { theta, .. } | Gate::Rz { theta, .. }, q) => {
                    match last[q].map(|j| &mut out[j].0) {
                        Some(Gate::Rx { theta: t, .. }) if matches!(g, Gate::Rx { .. }) => {
                            *t = wrap_angle(*t + theta);
                            true
                        }
                        Some(Gate::Ry { theta: t, .. }) if matches!(g, Gate::Ry { .. }) => {
                            *t = wrap_angle(*t + theta);
                            true
                        }
                        Some(Gate::Rz { theta: t, .. }) if matches!(g, Gate::Rz { .. }) => {
                            *t = wrap_angle(*t + theta);
                            true
                        }
                        _ => false,
                    }
                }
                _ => false,
            };
            if fused {
                continue;
            }
            let qs = g.qubits();
            if qs.len() == 1 {
                last[qs[0]] = Some(out.len());
            } else {
                for q in qs {
                    last[q] = None;
                }
            }
            out.push((g.clone(), layer_of(i)));
        }
        out.retain(|(g, _)| match g {
            Gate::Rx { theta, .. } | Gate::Ry { theta, .. } | Gate::Rz { theta, .. } => {
                theta.abs() > 1e-14 && (theta.abs() - 4.0 * PI).abs() > 1e-14
            }
            _ => true,
        });
        for (li, l) in self.layers.iter_mut().enumerate() {
            let first = out.iter().position(|(_, id)| id.is_some_and(|x| x >= li));
            l.start = first.unwrap_or(out.len());
            l.end = l.start + out.iter().filter(|(_, id)| *id == Some(li)).count();
        }
        self.gates = out.into_iter().map(|(g, _)| g).collect();
    }

    /// The inverse circuit (layer annotations dropped).
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            layers: Vec::new(),
        }
    }

    pub fn cnot_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Cnot { .. }))
            .count()
    }

    /// Longest dependency chain, counting only two-qubit gates when `two_qubit_only`.
    fn depth_with(&self, two_qubit_only: bool) -> usize {
        let mut front = vec![0usize; self.n_qubits];
        for g in &self.gates {
            if two_qubit_only && !g.is_two_qubit() {
                continue;
            }
            let qs = g.qubits();
            let level = qs.iter().map(|&q| front[q]).max().unwrap_or(0) + 1;
            for q in qs {
                front[q] = level;
            }
        }
        front.into_iter().max().unwrap_or(0)
    }

    pub fn two_qubit_depth(&self) -> usize {
        self.depth_with(true)
    }

    /// Depth, CNOT and gate counts; requires a lowered circuit.
    pub fn metrics(&self) -> Result<CircuitMetrics> {
        self.check_lowered()?;
        Ok(CircuitMetrics {
            depth: self.depth_with(false),
            cnot_count: self.cnot_count(),
            gate_count: self.gates.len(),
        })
    }

    fn check_lowered(&self) -> Result<()> {
        match self
            .gates
            .iter()
            .position(|g| matches!(g, Gate::U2q { .. }))
        {
            Some(i) => Err(Error::Unlowered(i)),
            None => Ok(()),
        }
    }

    /// OpenQASM 2.0 text using only `rx`, `ry`, `rz` and `cx`.
    pub fn to_qasm(&self) -> Result<String> {
        self.check_lowered()?;
        let mut out = String::new();
        out.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
        let _ = writeln!(out, "qreg q[{}];", self.n_qubits);
        for (i, g) in self.gates.iter().enumerate() {
            for (l, layer) in self.layers.iter().enumerate() {
                if layer.start == i && layer.end > layer.start {
                    let _ = writeln!(
                        out,
                        "// layer {} origin {} skipped {:?}",
                        l + 1,
                        layer.origin,
                        layer.skipped_bonds
                    );
                }
            }
            let _ = match *g {
                Gate::Rx { q, theta } | Gate::Ry { q, theta } | Gate::Rz { q, theta } => {
                    writeln!(out, "{}({:.17e}) q[{}];", g.kind_name(), theta, q)
                }
                Gate::Cnot { control, target } => writeln!(out, "cx q[{control}],q[{target}];"),
                Gate::U2q { .. } => unreachable!("checked above"),
            };
        }
        Ok(out)
    }

    /// Parses the subset of OpenQASM 2.0 written by [`Circuit::to_qasm`].
    pub fn from_qasm(text: &str) -> Result<Circuit> {
        let bad = |line: &str| Error::Config(format!("unsupported QASM line: {line}"));
        let qubit = |s: &str| -> Result<usize> {
            let s = s.trim();
            let inner = s
                .strip_prefix("q[")
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| bad(s))?;
            inner.parse().map_err(|_| bad(s))
        };
        let mut circ: Option<Circuit> = None;
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty()
                || line.starts_with("//")
                || line.starts_with("OPENQASM")
                || line.starts_with("include")
            {
                continue;
            }
            let body = line.strip_suffix(';').ok_or_else(|| bad(line))?;
            if let Some(rest) = body.strip_prefix("qreg q[") {
                let n = rest
                    .strip_suffix(']')
                    .ok_or_else(|| bad(line))?
                    .parse()
                    .map_err(|_| bad(line))?;
                circ = Some(Circuit::new(n));
                continue;
            }
            let c = circ.as_mut().ok_or_else(|| bad(line))?;
            if let Some(args) = body.strip_prefix("cx ") {
                let (a, b) = args.split_once(',').ok_or_else(|| bad(line))?;
                c.push(Gate::cnot(qubit(a)?, qubit(b)?))?;
                continue;
            }
            let (head, arg) = body.split_once(')').ok_or_else(|| bad(line))?;
            let (name, angle) = head.split_once('(').ok_or_else(|| bad(line))?;
            let theta: f64 = angle.trim().parse().map_err(|_| bad(line))?;
            let q = qubit(arg)?;
            c.push(match name {
                "rx" => Gate::rx(q, theta),
                "ry" => Gate::ry(q, theta),
                "rz" => Gate::rz(q, theta),
                _ => return Err(bad(line)),
            })?;
        }
        circ.ok_or_else(|| Error::Config("QASM text declares no register".into()))
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_lowered()?;
        let doc = CircuitDoc {
            n_qubits: self.n_qubits,
            gates: self
                .gates
                .iter()
                .map(|g| GateRecord {
                    kind: g.kind_name().to_string(),
                    qubits: g.qubits(),
                    angle: match *g {
                        Gate::Rx { theta, .. }
                        | Gate::Ry { theta, .. }
                        | Gate::Rz { theta, .. } => Some(theta),
                        _ => None,
                    },
                })
                .collect(),
            layers: self.layers.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Circuit> {
        let doc: CircuitDoc = serde_json::from_str(text)?;
        let mut c = Circuit::new(doc.n_qubits);
        for r in doc.gates {
            let angle = || {
                r.angle
                    .ok_or_else(|| Error::Config(format!("{} gate without angle", r.kind)))
            };
            let q = |i: usize| {
                r.qubits
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("{} gate missing qubit {i}", r.kind)))
            };
            let g = match r.kind.as_str() {
                "rx" => Gate::rx(q(0)?, angle()?),
                "ry" => Gate::ry(q(0)?, angle()?),
                "rz" => Gate::rz(q(0)?, angle()?),
                "cx" => Gate::cnot(q(0)?, q(1)?),
                other => return Err(Error::Config(format!("unknown gate kind {other}"))),
            };
            c.push(g)?;
        }
        c.layers = doc.layers;
        Ok(c)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateRecord {
    kind: String,
    qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitDoc {
    n_qubits: usize,
    gates: Vec<GateRecord>,
    #[serde(default)]
    layers: Vec<LayerInfo>,
}
