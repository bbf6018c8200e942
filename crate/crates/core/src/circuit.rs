//! Gate-level intermediate representation for parameterized circuits with
//! mid-circuit measurement, reset and classically conditioned gate groups.
//!
//! Circuits are parameter-free data: rotation gates refer to parameter slots
//! that are bound to angles only when a simulator runs the circuit.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub mod text;

pub type Qubit = usize;
pub type ParamSlot = usize;
pub type ClassicalSlot = usize;

/// Real 2×2 matrix in row-major order. Every gate in the set is real.
pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CircuitError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// `[[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]`.
pub fn ry_matrix(theta: f64) -> Result<Mat2, CircuitError> {
    if !theta.is_finite() {
        return Err(CircuitError::InvalidArgument(format!(
            "rotation angle must be finite, got {theta}"
        )));
    }
    let (s, c) = (theta / 2.0).sin_cos();
    Ok([[c, -s], [s, c]])
}

pub const PAULI_X: Mat2 = [[0.0, 1.0], [1.0, 0.0]];

/// Condition on classical bits guarding a [`Gate::Conditioned`] group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predicate {
    /// The slot holds the given bit.
    SlotEquals { slot: ClassicalSlot, bit: bool },
    /// At least one of the slots holds 1, i.e. the register is not all zeros.
    AnyNonZero { slots: Vec<ClassicalSlot> },
    And(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn and(a: Predicate, b: Predicate) -> Predicate {
        Predicate::And(Box::new(a), Box::new(b))
    }

    pub fn eval(&self, bits: &[bool]) -> bool {
        match self {
            Predicate::SlotEquals { slot, bit } => bits[*slot] == *bit,
            Predicate::AnyNonZero { slots } => slots.iter().any(|&s| bits[s]),
            Predicate::And(a, b) => a.eval(bits) && b.eval(bits),
        }
    }

    /// Classical slots read by the predicate, in first-mention order.
    pub fn slots(&self) -> Vec<ClassicalSlot> {
        let mut out = Vec::new();
        self.collect_slots(&mut out);
        out
    }

    fn collect_slots(&self, out: &mut Vec<ClassicalSlot>) {
        match self {
            Predicate::SlotEquals { slot, .. } => out.push(*slot),
            Predicate::AnyNonZero { slots } => out.extend(slots.iter().copied()),
            Predicate::And(a, b) => {
                a.collect_slots(out);
                b.collect_slots(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Ry {
        target: Qubit,
        param: ParamSlot,
    },
    ControlledRy {
        control: Qubit,
        target: Qubit,
        param: ParamSlot,
    },
    Cnot {
        control: Qubit,
        target: Qubit,
    },
    X {
        target: Qubit,
    },
    /// Ry on `target` applied only on the branch where every listed register
    /// is in a basis state other than all-zeros (anti-control on `|0…0⟩` per
    /// register).
    PresenceRy {
        registers: Vec<Vec<Qubit>>,
        target: Qubit,
        param: ParamSlot,
    },
    Measure {
        qubit: Qubit,
        slot: ClassicalSlot,
    },
    Reset {
        qubit: Qubit,
    },
    Conditioned {
        predicate: Predicate,
        body: Vec<Gate>,
    },
}

impl Gate {
    /// Qubits touched by this gate (not recursing into conditioned bodies).
    pub fn qubits(&self) -> Vec<Qubit> {
        match self {
            Gate::Ry { target, .. } | Gate::X { target } => vec![*target],
            Gate::ControlledRy {
                control, target, ..
            }
            | Gate::Cnot { control, target } => vec![*control, *target],
            Gate::PresenceRy {
                registers, target, ..
            } => registers
                .iter()
                .flatten()
                .copied()
                .chain(std::iter::once(*target))
                .collect(),
            Gate::Measure { qubit, .. } | Gate::Reset { qubit } => vec![*qubit],
            Gate::Conditioned { .. } => Vec::new(),
        }
    }

    pub fn param(&self) -> Option<ParamSlot> {
        match self {
            Gate::Ry { param, .. }
            | Gate::ControlledRy { param, .. }
            | Gate::PresenceRy { param, .. } => Some(*param),
            _ => None,
        }
    }

    /// Qubits used purely as quantum controls.
    fn control_qubits(&self) -> Vec<Qubit> {
        match self {
            Gate::ControlledRy { control, .. } | Gate::Cnot { control, .. } => vec![*control],
            Gate::PresenceRy { registers, .. } => registers.iter().flatten().copied().collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub n_params: usize,
    pub n_classical: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_params: usize, n_classical: usize) -> Self {
        Circuit {
            n_qubits,
            n_params,
            n_classical,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    /// Depth-first walk over every gate including conditioned bodies.
    pub fn walk<'a>(&'a self, mut f: impl FnMut(&'a Gate)) {
        fn go<'a>(gates: &'a [Gate], f: &mut impl FnMut(&'a Gate)) {
            for g in gates {
                f(g);
                if let Gate::Conditioned { body, .. } = g {
                    go(body, f);
                }
            }
        }
        go(&self.gates, &mut f);
    }

    pub fn count_where(&self, pred: impl Fn(&Gate) -> bool) -> usize {
        let mut n = 0;
        self.walk(|g| {
            if pred(g) {
                n += 1
            }
        });
        n
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    QubitOutOfRange { qubit: Qubit },
    ClassicalSlotOutOfRange { slot: ClassicalSlot },
    ParamSlotOutOfRange { param: ParamSlot },
    UnwrittenClassicalSlot { slot: ClassicalSlot },
    ParamSlotUnused { param: ParamSlot },
    MeasureOnGroupControl { qubit: Qubit },
    DuplicateOperand { qubit: Qubit },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::QubitOutOfRange { qubit } => write!(f, "qubit index out of range: q{qubit}"),
            Violation::ClassicalSlotOutOfRange { slot } => {
                write!(f, "classical slot out of range: c{slot}")
            }
            Violation::ParamSlotOutOfRange { param } => {
                write!(f, "param slot out of range: p{param}")
            }
            Violation::UnwrittenClassicalSlot { slot } => {
                write!(f, "unwritten classical slot: c{slot}")
            }
            Violation::ParamSlotUnused { param } => write!(f, "param slot unused: p{param}"),
            Violation::MeasureOnGroupControl { qubit } => {
                write!(f, "measure on qubit q{qubit} used as a control in the same group")
            }
            Violation::DuplicateOperand { qubit } => {
                write!(f, "gate uses qubit q{qubit} more than once")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks index ranges, classical dataflow and parameter coverage.
/// Violations are collected, never raised.
pub fn validate_circuit(c: &Circuit) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut written = vec![false; c.n_classical];
    let mut used = vec![false; c.n_params];
    check_gates(c, &c.gates, &mut written, &mut used, &mut report.violations);
    for (p, u) in used.iter().enumerate() {
        if !u {
            report.violations.push(Violation::ParamSlotUnused { param: p });
        }
    }
    report
}

fn check_gates(
    c: &Circuit,
    gates: &[Gate],
    written: &mut [bool],
    used: &mut [bool],
    out: &mut Vec<Violation>,
) {
    for g in gates {
        let qs = g.qubits();
        for &q in &qs {
            if q >= c.n_qubits {
                out.push(Violation::QubitOutOfRange { qubit: q });
            }
        }
        let mut seen = BTreeSet::new();
        if let Some(&q) = qs.iter().find(|&&q| !seen.insert(q)) {
            out.push(Violation::DuplicateOperand { qubit: q });
        }
        if let Some(p) = g.param() {
            if p >= c.n_params {
                out.push(Violation::ParamSlotOutOfRange { param: p });
            } else {
                used[p] = true;
            }
        }
        match g {
            Gate::Measure { slot, .. } => {
                if *slot >= c.n_classical {
                    out.push(Violation::ClassicalSlotOutOfRange { slot: *slot });
                } else {
                    written[*slot] = true;
                }
            }
            Gate::Conditioned { predicate, body } => {
                for s in predicate.slots() {
                    if s >= c.n_classical {
                        out.push(Violation::ClassicalSlotOutOfRange { slot: s });
                    } else if !written[s] {
                        out.push(Violation::UnwrittenClassicalSlot { slot: s });
                    }
                }
                let controls: BTreeSet<Qubit> =
                    body.iter().flat_map(|g| g.control_qubits()).collect();
                for g in body {
                    if let Gate::Measure { qubit, .. } = g {
                        if controls.contains(qubit) {
                            out.push(Violation::MeasureOnGroupControl { qubit: *qubit });
                        }
                    }
                }
                // a slot written only inside a group may stay unwritten on the
                // skip branch, so group writes do not count for later readers
                let mut inner = written.to_vec();
                check_gates(c, body, &mut inner, used, out);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CircuitStats {
    pub gate_count: usize,
    pub two_qubit_gate_count: usize,
    pub measure_count: usize,
    pub depth: usize,
}

/// Gate counts (conditioned groups count their body gates, not the wrapper)
/// and the dependency depth over shared qubits and classical slots.
pub fn circuit_stats(c: &Circuit) -> CircuitStats {
    let mut stats = CircuitStats::default();
    let mut qubit_level = vec![0usize; c.n_qubits];
    let mut slot_level = vec![0usize; c.n_classical];
    stats_gates(&c.gates, &[], &mut qubit_level, &mut slot_level, &mut stats);
    stats.depth = qubit_level
        .iter()
        .chain(slot_level.iter())
        .copied()
        .max()
        .unwrap_or(0);
    stats
}

fn stats_gates(
    gates: &[Gate],
    guard_slots: &[ClassicalSlot],
    qubit_level: &mut [usize],
    slot_level: &mut [usize],
    stats: &mut CircuitStats,
) {
    for g in gates {
        if let Gate::Conditioned { predicate, body } = g {
            let mut guard = guard_slots.to_vec();
            guard.extend(predicate.slots());
            stats_gates(body, &guard, qubit_level, slot_level, stats);
            continue;
        }
        let qs = g.qubits();
        stats.gate_count += 1;
        if qs.len() >= 2 {
            stats.two_qubit_gate_count += 1;
        }
        let mut level = qs.iter().map(|&q| qubit_level[q]).max().unwrap_or(0);
        for &s in guard_slots {
            level = level.max(slot_level[s]);
        }
        if let Gate::Measure { slot, .. } = g {
            stats.measure_count += 1;
            level = level.max(slot_level[*slot]);
            slot_level[*slot] = level + 1;
        }
        for &q in &qs {
            qubit_level[q] = level + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        m
    }

    fn assert_identity(m: &Mat2, tol: f64) {
        assert!((m[0][0] - 1.0).abs() < tol && (m[1][1] - 1.0).abs() < tol);
        assert!(m[0][1].abs() < tol && m[1][0].abs() < tol);
    }

    #[test]
    fn ry_examples() {
        assert_identity(&ry_matrix(0.0).unwrap(), 1e-15);
        let m = ry_matrix(std::f64::consts::PI).unwrap();
        assert!(m[0][0].abs() < 1e-15 && m[1][1].abs() < 1e-15);
        assert!((m[0][1] + 1.0).abs() < 1e-15 && (m[1][0] - 1.0).abs() < 1e-15);
        let h = ry_matrix(std::f64::consts::FRAC_PI_2).unwrap();
        let r = 0.7071067811865476;
        for (got, want) in [h[0][0], h[0][1], h[1][0], h[1][1]]
            .iter()
            .zip([r, -r, r, r])
        {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(ry_matrix(f64::NAN).is_err());
        assert!(ry_matrix(f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn ry_inverse_and_orthogonal(theta in -20.0f64..20.0) {
            let m = ry_matrix(theta).unwrap();
            assert_identity(&matmul(&m, &ry_matrix(-theta).unwrap()), 1e-12);
            let mt = [[m[0][0], m[1][0]], [m[0][1], m[1][1]]];
            assert_identity(&matmul(&mt, &m), 1e-12);
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            prop_assert!((det - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_qubit_is_reported() {
        let mut c = Circuit::new(2, 1, 0);
        c.push(Gate::Ry { target: 2, param: 0 });
        let r = validate_circuit(&c);
        assert_eq!(r.violations, vec![Violation::QubitOutOfRange { qubit: 2 }]);
        assert!(r.violations[0].to_string().contains("qubit index out of range"));
    }

    #[test]
    fn unwritten_slot_is_reported() {
        let mut c = Circuit::new(2, 0, 2);
        c.push(Gate::Measure { qubit: 0, slot: 0 });
        c.push(Gate::Conditioned {
            predicate: Predicate::SlotEquals { slot: 1, bit: true },
            body: vec![Gate::X { target: 1 }],
        });
        let r = validate_circuit(&c);
        assert_eq!(r.violations, vec![Violation::UnwrittenClassicalSlot { slot: 1 }]);
        assert!(r.violations[0].to_string().contains("unwritten classical slot"));
    }

    #[test]
    fn unused_param_and_group_measure_on_control() {
        let mut c = Circuit::new(2, 2, 2);
        c.push(Gate::Ry { target: 0, param: 0 });
        c.push(Gate::Measure { qubit: 0, slot: 0 });
        c.push(Gate::Conditioned {
            predicate: Predicate::SlotEquals { slot: 0, bit: true },
            body: vec![
                Gate::Cnot { control: 1, target: 0 },
                Gate::Measure { qubit: 1, slot: 1 },
            ],
        });
        let r = validate_circuit(&c);
        assert!(r.violations.contains(&Violation::ParamSlotUnused { param: 1 }));
        assert!(r.violations.contains(&Violation::MeasureOnGroupControl { qubit: 1 }));
    }

    #[test]
    fn stats_basic() {
        let c = Circuit::new(3, 0, 0);
        assert_eq!(circuit_stats(&c), CircuitStats::default());
        let mut c = Circuit::new(1, 1, 0);
        c.push(Gate::Ry { target: 0, param: 0 });
        let s = circuit_stats(&c);
        assert_eq!((s.gate_count, s.depth, s.two_qubit_gate_count), (1, 1, 0));
    }

    #[test]
    fn stats_depth_follows_classical_dependencies() {
        let mut c = Circuit::new(3, 1, 1);
        c.push(Gate::Ry { target: 0, param: 0 });
        c.push(Gate::Measure { qubit: 0, slot: 0 });
        c.push(Gate::Conditioned {
            predicate: Predicate::SlotEquals { slot: 0, bit: true },
            body: vec![Gate::X { target: 2 }],
        });
        c.push(Gate::X { target: 1 });
        let s = circuit_stats(&c);
        assert_eq!(s.gate_count, 4);
        assert_eq!(s.measure_count, 1);
        assert_eq!(s.depth, 3);
        assert_eq!(circuit_stats(&c), s);
    }
}
