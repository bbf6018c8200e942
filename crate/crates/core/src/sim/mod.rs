//! Circuit execution shared by the dense and MPS backends.
//!
//! A circuit is compiled once against a parameter vector into a flat list of
//! [`Op`]s; conditioned groups become forward jumps. Both backends implement
//! [`QuantumState`] and reuse the same trajectory sampler and branch
//! enumerator.
//!
//! Shot `k` draws its randomness from a ChaCha8 stream selected by `k`, so
//! shots can run in any order or in parallel and still produce identical
//! records. Each measurement or reset consumes exactly one uniform `u` and
//! yields 1 iff `u < P(1)`.

pub mod dense;
pub mod mps;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ansatz::classical_slot_count;
use crate::batch::{SampleBatch, ShotRecord};
use crate::circuit::{ry_matrix, Circuit, ClassicalSlot, Gate, Mat2, Predicate, Qubit, PAULI_X};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Below this both branch probabilities are considered lost to round-off.
const DEGENERATE_PROB: f64 = 1e-14;
/// Branches lighter than this are not explored by the enumerator.
const PRUNE_PROB: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Single { q: Qubit, m: Mat2 },
    Controlled { c: Qubit, t: Qubit, m: Mat2 },
    /// `m` on `t` where every register holds a nonzero basis state.
    Presence { registers: Vec<Vec<Qubit>>, t: Qubit, m: Mat2 },
    Measure { q: Qubit, slot: ClassicalSlot },
    Reset { q: Qubit },
    /// Continue at op `to` unless `pred` holds.
    SkipUnless { pred: Predicate, to: usize },
}

impl Op {
    fn is_branching(&self) -> bool {
        matches!(
            self,
            Op::Measure { .. } | Op::Reset { .. } | Op::SkipUnless { .. }
        )
    }
}

/// A circuit with parameters bound and groups flattened.
#[derive(Debug, Clone)]
pub struct Program {
    pub n_qubits: usize,
    pub n_classical: usize,
    pub ops: Vec<Op>,
    /// Ops before this index are unitary and identical for every shot.
    pub prefix_len: usize,
    pub measure_count: usize,
}

impl Program {
    pub fn compile(circuit: &Circuit, params: &[f64]) -> Result<Program> {
        if params.len() != circuit.n_params {
            return Err(SimError::InvalidArgument(format!(
                "expected {} parameters, got {}",
                circuit.n_params,
                params.len()
            )));
        }
        let mut ops = Vec::new();
        flatten(&circuit.gates, params, &mut ops)?;
        for op in &ops {
            let qs: Vec<Qubit> = match op {
                Op::Single { q, .. } | Op::Measure { q, .. } | Op::Reset { q } => vec![*q],
                Op::Controlled { c, t, .. } => vec![*c, *t],
                Op::Presence { registers, t, .. } => {
                    registers.iter().flatten().copied().chain([*t]).collect()
                }
                Op::SkipUnless { .. } => vec![],
            };
            if let Some(q) = qs.iter().find(|&&q| q >= circuit.n_qubits) {
                return Err(SimError::InvalidArgument(format!("qubit {q} out of range")));
            }
            let slots = match op {
                Op::Measure { slot, .. } => vec![*slot],
                Op::SkipUnless { pred, .. } => pred.slots(),
                _ => vec![],
            };
            if let Some(s) = slots.iter().find(|&&s| s >= circuit.n_classical) {
                return Err(SimError::InvalidArgument(format!(
                    "classical slot {s} out of range"
                )));
            }
        }
        let prefix_len = ops.iter().position(Op::is_branching).unwrap_or(ops.len());
        let measure_count = ops.iter().filter(|o| matches!(o, Op::Measure { .. })).count();
        Ok(Program {
            n_qubits: circuit.n_qubits,
            n_classical: circuit.n_classical,
            ops,
            prefix_len,
            measure_count,
        })
    }
}

fn bound(params: &[f64], slot: usize) -> Result<Mat2> {
    let theta = *params
        .get(slot)
        .ok_or_else(|| SimError::InvalidArgument(format!("parameter slot {slot} is unbound")))?;
    ry_matrix(theta).map_err(|e| SimError::InvalidArgument(e.to_string()))
}

fn flatten(gates: &[Gate], params: &[f64], ops: &mut Vec<Op>) -> Result<()> {
    for g in gates {
        match g {
            Gate::Ry { target, param } => ops.push(Op::Single {
                q: *target,
                m: bound(params, *param)?,
            }),
            Gate::X { target } => ops.push(Op::Single {
                q: *target,
                m: PAULI_X,
            }),
            Gate::ControlledRy {
                control,
                target,
                param,
            } => ops.push(Op::Controlled {
                c: *control,
                t: *target,
                m: bound(params, *param)?,
            }),
            Gate::Cnot { control, target } => ops.push(Op::Controlled {
                c: *control,
                t: *target,
                m: PAULI_X,
            }),
            Gate::PresenceRy {
                registers,
                target,
                param,
            } => ops.push(Op::Presence {
                registers: registers.clone(),
                t: *target,
                m: bound(params, *param)?,
            }),
            Gate::Measure { qubit, slot } => ops.push(Op::Measure {
                q: *qubit,
                slot: *slot,
            }),
            Gate::Reset { qubit } => ops.push(Op::Reset { q: *qubit }),
            Gate::Conditioned { predicate, body } => {
                let at = ops.len();
                ops.push(Op::SkipUnless {
                    pred: predicate.clone(),
                    to: 0,
                });
                flatten(body, params, ops)?;
                let end = ops.len();
                if let Op::SkipUnless { to, .. } = &mut ops[at] {
                    *to = end;
                }
            }
        }
    }
    Ok(())
}

/// What a backend must provide to run a [`Program`].
pub trait QuantumState: Clone + Send + Sync {
    fn apply_single(&mut self, q: Qubit, m: &Mat2) -> Result<()>;
    fn apply_controlled(&mut self, c: Qubit, t: Qubit, m: &Mat2) -> Result<()>;
    fn apply_presence(&mut self, registers: &[Vec<Qubit>], t: Qubit, m: &Mat2) -> Result<()>;
    /// Probabilities of reading 0 and 1 on `q`.
    fn probabilities(&mut self, q: Qubit) -> Result<(f64, f64)>;
    /// Projects `q` onto `bit` and rescales by `1/sqrt(prob)`.
    fn collapse(&mut self, q: Qubit, bit: bool, prob: f64) -> Result<()>;

    /// Truncation weight discarded and largest bond dimension produced
    /// since the last call.
    fn take_stats(&mut self) -> (f64, usize) {
        (0.0, 1)
    }

    /// Whether shots are cheap enough to spread over worker threads.
    fn parallel_shots(&self) -> bool {
        true
    }

    fn apply_op_unitary(&mut self, op: &Op) -> Result<()> {
        match op {
            Op::Single { q, m } => self.apply_single(*q, m),
            Op::Controlled { c, t, m } => self.apply_controlled(*c, *t, m),
            Op::Presence { registers, t, m } => self.apply_presence(registers, *t, m),
            _ => Err(SimError::InvalidArgument(format!("{op:?} is not unitary"))),
        }
    }

    /// Samples `q` with the uniform `u`, collapses, and returns the bit.
    fn measure_with(&mut self, q: Qubit, u: f64) -> Result<bool> {
        let (p0, p1) = self.probabilities(q)?;
        if p0 < DEGENERATE_PROB && p1 < DEGENERATE_PROB {
            return Err(SimError::Numerical(format!(
                "both outcomes of qubit {q} have vanishing probability ({p0:e}, {p1:e})"
            )));
        }
        let total = p0 + p1;
        let p1 = p1 / total;
        let bit = u < p1;
        self.collapse(q, bit, if bit { p1 } else { 1.0 - p1 })?;
        Ok(bit)
    }

    fn reset_with(&mut self, q: Qubit, u: f64) -> Result<()> {
        if self.measure_with(q, u)? {
            self.apply_single(q, &PAULI_X)?;
        }
        Ok(())
    }
}

/// Per-op truncation bookkeeping accumulated over shots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruncationLog {
    /// Discarded weight summed over shots, indexed by op.
    pub discarded: Vec<f64>,
    /// Largest bond dimension seen right after each op.
    pub bond_dim: Vec<usize>,
}

impl TruncationLog {
    fn new(n_ops: usize) -> Self {
        TruncationLog {
            discarded: vec![0.0; n_ops],
            bond_dim: vec![1; n_ops],
        }
    }

    fn absorb(&mut self, other: &TruncationLog) {
        for (a, b) in self.discarded.iter_mut().zip(&other.discarded) {
            *a += b;
        }
        for (a, b) in self.bond_dim.iter_mut().zip(&other.bond_dim) {
            *a = (*a).max(*b);
        }
    }

    pub fn total_discarded(&self) -> f64 {
        self.discarded.iter().sum()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dim.iter().copied().max().unwrap_or(1)
    }

    /// CSV with columns `gate_index,discarded_weight,bond_dim`.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "gate_index,discarded_weight,bond_dim")?;
        for (i, (d, b)) in self.discarded.iter().zip(&self.bond_dim).enumerate() {
            writeln!(w, "{i},{d:e},{b}")?;
        }
        Ok(())
    }
}

fn shot_rng(seed: u64, shot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot as u64);
    rng
}

fn run_from<S: QuantumState>(
    prog: &Program,
    state: &mut S,
    start: usize,
    rng: &mut ChaCha8Rng,
    bits: &mut [bool],
    log: Option<&mut TruncationLog>,
) -> Result<()> {
    let mut log = log;
    let mut pc = start;
    while pc < prog.ops.len() {
        let op = &prog.ops[pc];
        let mut next = pc + 1;
        match op {
            Op::Measure { q, slot } => bits[*slot] = state.measure_with(*q, rng.gen())?,
            Op::Reset { q } => state.reset_with(*q, rng.gen())?,
            Op::SkipUnless { pred, to } => {
                if !pred.eval(bits) {
                    next = *to;
                }
            }
            _ => state.apply_op_unitary(op)?,
        }
        if let Some(log) = log.as_deref_mut() {
            let (w, bond) = state.take_stats();
            log.discarded[pc] += w;
            log.bond_dim[pc] = log.bond_dim[pc].max(bond);
        }
        pc = next;
    }
    Ok(())
}

/// Shots are processed in fixed-size chunks so log reduction order does not
/// depend on thread scheduling.
const SHOT_CHUNK: usize = 256;

/// Runs `n_shots` trajectories and returns each shot's classical register.
pub fn sample_trajectories<S: QuantumState>(
    prog: &Program,
    initial: S,
    n_shots: usize,
    seed: u64,
    want_log: bool,
) -> Result<(Vec<Vec<bool>>, Option<TruncationLog>)> {
    if n_shots == 0 {
        return Err(SimError::InvalidArgument("n_shots must be at least 1".into()));
    }
    let mut prefix = initial;
    let mut log = want_log.then(|| TruncationLog::new(prog.ops.len()));
    for (i, op) in prog.ops[..prog.prefix_len].iter().enumerate() {
        prefix.apply_op_unitary(op)?;
        if let Some(log) = log.as_mut() {
            // prefix work is shared, so it is counted once per shot
            let (w, bond) = prefix.take_stats();
            log.discarded[i] += w * n_shots as f64;
            log.bond_dim[i] = bond;
        }
    }
    let one_shot = |shot: usize| -> Result<(Vec<bool>, Option<TruncationLog>)> {
        let mut state = prefix.clone();
        let mut rng = shot_rng(seed, shot);
        let mut bits = vec![false; prog.n_classical];
        let mut shot_log = want_log.then(|| TruncationLog::new(prog.ops.len()));
        run_from(prog, &mut state, prog.prefix_len, &mut rng, &mut bits, shot_log.as_mut())?;
        Ok((bits, shot_log))
    };
    let mut records = Vec::with_capacity(n_shots);
    let parallel = prefix.parallel_shots() && rayon::current_num_threads() > 1;
    for start in (0..n_shots).step_by(SHOT_CHUNK) {
        let range = start..(start + SHOT_CHUNK).min(n_shots);
        let chunk: Vec<_> = if parallel {
            range.into_par_iter().map(one_shot).collect::<Result<_>>()?
        } else {
            range.map(one_shot).collect::<Result<_>>()?
        };
        for (bits, shot_log) in chunk {
            if let (Some(log), Some(s)) = (log.as_mut(), shot_log.as_ref()) {
                log.absorb(s);
            }
            records.push(bits);
        }
    }
    Ok((records, log))
}

/// Exact distribution over classical registers by depth-first branching at
/// every measurement and reset.
pub fn enumerate_outcomes<S: QuantumState>(
    prog: &Program,
    initial: S,
    max_measures: usize,
) -> Result<BTreeMap<Vec<bool>, f64>> {
    if prog.measure_count > max_measures {
        return Err(SimError::Capacity(format!(
            "enumeration needs up to 2^{} branches, cap is 2^{max_measures}",
            prog.measure_count
        )));
    }
    let mut out = BTreeMap::new();
    let mut bits = vec![false; prog.n_classical];
    explore(prog, initial, 0, 1.0, &mut bits, &mut out)?;
    Ok(out)
}

fn explore<S: QuantumState>(
    prog: &Program,
    mut state: S,
    mut pc: usize,
    weight: f64,
    bits: &mut Vec<bool>,
    out: &mut BTreeMap<Vec<bool>, f64>,
) -> Result<()> {
    while pc < prog.ops.len() {
        match &prog.ops[pc] {
            Op::SkipUnless { pred, to } => {
                pc = if pred.eval(bits) { pc + 1 } else { *to };
            }
            op @ (Op::Measure { .. } | Op::Reset { .. }) => {
                let (q, slot, reset) = match op {
                    Op::Measure { q, slot } => (*q, Some(*slot), false),
                    Op::Reset { q } => (*q, None, true),
                    _ => unreachable!(),
                };
                let (p0, p1) = state.probabilities(q)?;
                let total = p0 + p1;
                if total < DEGENERATE_PROB {
                    return Err(SimError::Numerical(format!(
                        "qubit {q} has vanishing total probability"
                    )));
                }
                let saved = slot.map(|s| bits[s]);
                let branches = [(false, p0 / total), (true, p1 / total)];
                let live: Vec<_> = branches
                    .into_iter()
                    .filter(|&(_, p)| weight * p > PRUNE_PROB)
                    .collect();
                let mut owned = Some(state);
                for (k, &(bit, p)) in live.iter().enumerate() {
                    // the last branch takes the state instead of copying it
                    let mut s = if k + 1 == live.len() {
                        owned.take().expect("state still owned")
                    } else {
                        owned.as_ref().expect("state still owned").clone()
                    };
                    s.collapse(q, bit, p)?;
                    if reset && bit {
                        s.apply_single(q, &PAULI_X)?;
                    }
                    if let Some(slot) = slot {
                        bits[slot] = bit;
                    }
                    explore(prog, s, pc + 1, weight * p, bits, out)?;
                }
                if let (Some(slot), Some(v)) = (slot, saved) {
                    bits[slot] = v;
                }
                return Ok(());
            }
            op => {
                state.apply_op_unitary(op)?;
                pc += 1;
            }
        }
    }
    *out.entry(bits.clone()).or_insert(0.0) += weight;
    Ok(())
}

/// Ansatz-shaped registers hold `N(N+2)` bits; recover `N`.
pub fn n_atoms_for_register(n_classical: usize) -> Result<usize> {
    let n = ((n_classical + 1) as f64).sqrt().round() as usize;
    let n = n.saturating_sub(1);
    if n >= 1 && classical_slot_count(n) == n_classical {
        Ok(n)
    } else {
        Err(SimError::InvalidArgument(format!(
            "a classical register of {n_classical} bits does not match any ansatz size"
        )))
    }
}

pub(crate) fn to_batch(n_classical: usize, bits: Vec<Vec<bool>>, seed: u64) -> Result<SampleBatch> {
    let n_atoms = n_atoms_for_register(n_classical)?;
    Ok(SampleBatch {
        n_atoms,
        seed,
        records: bits.iter().map(|b| ShotRecord::from_bits(n_atoms, b)).collect(),
        wall_time: std::time::Duration::ZERO,
    })
}

/// Empirical distribution of shot registers.
pub fn empirical<K: Ord + Clone>(samples: &[K]) -> BTreeMap<K, f64> {
    let mut out = BTreeMap::new();
    let w = 1.0 / samples.len() as f64;
    for s in samples {
        *out.entry(s.clone()).or_insert(0.0) += w;
    }
    out
}

pub fn total_variation<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, a) in p {
        sum += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in q {
        if !p.contains_key(k) {
            sum += b;
        }
    }
    0.5 * sum
}

/// Re-keys a register distribution by shot record.
pub fn records_distribution(
    n_atoms: usize,
    dist: &BTreeMap<Vec<bool>, f64>,
) -> BTreeMap<ShotRecord, f64> {
    let mut out = BTreeMap::new();
    for (bits, p) in dist {
        *out.entry(ShotRecord::from_bits(n_atoms, bits)).or_insert(0.0) += p;
    }
    out
}
