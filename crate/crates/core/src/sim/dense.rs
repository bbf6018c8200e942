//! Dense state-vector backend.
//!
//! Qubit `q` is bit `q` of the amplitude index. Large states run their gate
//! kernels and reductions on the rayon pool; reductions sum fixed-size
//! blocks in index order so results do not depend on the thread count.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::{
    enumerate_outcomes, sample_trajectories, to_batch, Program, QuantumState, Result, SimError,
};
use crate::batch::SampleBatch;
use crate::circuit::{Circuit, Gate, Mat2, Qubit};

pub const DEFAULT_MAX_QUBITS: usize = 30;
pub const DEFAULT_MAX_ENUMERATION_MEASURES: usize = 20;

/// States at least this large use the thread pool inside one shot.
const PAR_QUBITS: usize = 16;
const REDUCE_BLOCK: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
    /// Qubits currently known to be in a computational basis state. Used
    /// only to skip work whose result is already determined.
    known: Vec<Option<bool>>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> StateVector {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector {
            n_qubits,
            amps,
            known: vec![Some(false); n_qubits],
        }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<StateVector> {
        if !amps.len().is_power_of_two() {
            return Err(SimError::InvalidArgument(
                "amplitude count must be a power of two".into(),
            ));
        }
        let n_qubits = amps.len().trailing_zeros() as usize;
        Ok(StateVector {
            n_qubits,
            amps,
            known: vec![None; n_qubits],
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.block_sum(|_, a| a.norm_sqr())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    fn check(&self, q: Qubit) -> Result<()> {
        if q < self.n_qubits {
            Ok(())
        } else {
            Err(SimError::InvalidArgument(format!(
                "qubit {q} out of range for {} qubits",
                self.n_qubits
            )))
        }
    }

    fn parallel(&self) -> bool {
        self.n_qubits >= PAR_QUBITS
    }

    fn block_sum(&self, f: impl Fn(usize, &Complex64) -> f64 + Sync) -> f64 {
        let block = |(b, chunk): (usize, &[Complex64])| -> f64 {
            let base = b * REDUCE_BLOCK;
            chunk.iter().enumerate().map(|(i, a)| f(base + i, a)).sum()
        };
        let partials: Vec<f64> = if self.parallel() {
            self.amps.par_chunks(REDUCE_BLOCK).enumerate().map(block).collect()
        } else {
            self.amps.chunks(REDUCE_BLOCK).enumerate().map(block).collect()
        };
        partials.iter().sum()
    }

    /// Runs `f` over consecutive blocks of `unit` amplitudes (a power of
    /// two), in parallel for large states.
    fn for_blocks(&mut self, unit: usize, f: impl Fn(&mut [Complex64]) + Sync + Send) {
        if self.parallel() && self.amps.len() / unit >= 2 {
            let block = unit.max(REDUCE_BLOCK);
            self.amps.par_chunks_mut(block).for_each(f);
        } else {
            f(&mut self.amps);
        }
    }

    fn rotate_range(&mut self, t: Qubit, control: Option<Qubit>, m: &Mat2) {
        let par_leaves = self.parallel() && (2usize << t.max(control.unwrap_or(0))) > self.amps.len() / 2;
        let rot = |lo: &mut [Complex64], hi: &mut [Complex64]| {
            if par_leaves {
                lo.par_chunks_mut(REDUCE_BLOCK)
                    .zip(hi.par_chunks_mut(REDUCE_BLOCK))
                    .for_each(|(a, b)| rotate(a, b, m));
            } else {
                rotate(lo, hi, m);
            }
        };
        let ts = 1usize << t;
        match control {
            None => self.for_blocks(2 * ts, |blk| {
                for chunk in blk.chunks_mut(2 * ts) {
                    let (lo, hi) = chunk.split_at_mut(ts);
                    rot(lo, hi);
                }
            }),
            Some(c) if c > t => {
                let cs = 1usize << c;
                self.for_blocks(2 * cs, |blk| {
                    for outer in blk.chunks_mut(2 * cs) {
                        for chunk in outer[cs..].chunks_mut(2 * ts) {
                            let (lo, hi) = chunk.split_at_mut(ts);
                            rot(lo, hi);
                        }
                    }
                })
            }
            Some(c) => {
                let cs = 1usize << c;
                self.for_blocks(2 * ts, |blk| {
                    for chunk in blk.chunks_mut(2 * ts) {
                        let (lo, hi) = chunk.split_at_mut(ts);
                        for (l, h) in lo.chunks_mut(2 * cs).zip(hi.chunks_mut(2 * cs)) {
                            rotate(&mut l[cs..], &mut h[cs..], m);
                        }
                    }
                })
            }
        }
    }

    /// Applies `m` to `t` on every basis pair whose index satisfies `cond`.
    fn apply_where(&mut self, t: Qubit, m: &Mat2, cond: impl Fn(usize) -> bool + Sync) {
        let ts = 1usize << t;
        let unit = 2 * ts;
        let len = self.amps.len();
        let f = |(k, chunk): (usize, &mut [Complex64])| {
            let (lo, hi) = chunk.split_at_mut(ts);
            for (i, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                if cond(k * unit + i) {
                    let (x, y) = (*a0, *a1);
                    *a0 = x * m[0][0] + y * m[0][1];
                    *a1 = x * m[1][0] + y * m[1][1];
                }
            }
        };
        if self.parallel() && len / unit >= 2 {
            self.amps.par_chunks_mut(unit).enumerate().for_each(f);
        } else {
            self.amps.chunks_mut(unit).enumerate().for_each(f);
        }
    }

    /// Projects `q` onto `bit`, rescales, and optionally moves the surviving
    /// half onto `|0⟩` in the same pass.
    fn project(&mut self, q: Qubit, bit: bool, scale: f64, to_zero: bool) {
        let qs = 1usize << q;
        let zero = Complex64::new(0.0, 0.0);
        self.for_blocks(2 * qs, |blk| {
            for chunk in blk.chunks_mut(2 * qs) {
                let (lo, hi) = chunk.split_at_mut(qs);
                match (bit, to_zero) {
                    (false, _) => {
                        lo.iter_mut().for_each(|a| *a *= scale);
                        hi.fill(zero);
                    }
                    (true, false) => {
                        lo.fill(zero);
                        hi.iter_mut().for_each(|a| *a *= scale);
                    }
                    (true, true) => {
                        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                            *a = *b * scale;
                            *b = zero;
                        }
                    }
                }
            }
        });
    }

    /// Basis-state bookkeeping for `m` acting on `q`.
    fn track(&mut self, q: Qubit, m: &Mat2, certain: bool) {
        self.known[q] = match self.known[q] {
            Some(b) if m[!b as usize][b as usize] == 0.0 => Some(b),
            Some(b) if certain && m[b as usize][b as usize] == 0.0 => Some(!b),
            _ => None,
        };
    }

    /// Applies a unitary gate. Measurement, reset and conditioned groups need
    /// the executor and are rejected here.
    pub fn apply_gate(&mut self, gate: &Gate, params: &[f64]) -> Result<()> {
        let mut c = Circuit::new(self.n_qubits, params.len(), 0);
        if matches!(
            gate,
            Gate::Measure { .. } | Gate::Reset { .. } | Gate::Conditioned { .. }
        ) {
            return Err(SimError::InvalidArgument(
                "apply_gate only takes unitary gates".into(),
            ));
        }
        c.push(gate.clone());
        let prog = Program::compile(&c, params)?;
        for op in &prog.ops {
            self.apply_op_unitary(op)?;
        }
        Ok(())
    }

    pub fn measure_and_collapse(&mut self, q: Qubit, rng: &mut impl Rng) -> Result<bool> {
        self.measure_with(q, rng.gen())
    }

    pub fn reset(&mut self, q: Qubit, rng: &mut impl Rng) -> Result<()> {
        self.reset_with(q, rng.gen())
    }

    /// Marginal probability of `q` reading 1.
    pub fn prob_one(&self, q: Qubit) -> f64 {
        self.block_sum(|i, a| if i >> q & 1 == 1 { a.norm_sqr() } else { 0.0 })
    }
}

impl QuantumState for StateVector {
    fn apply_single(&mut self, q: Qubit, m: &Mat2) -> Result<()> {
        self.check(q)?;
        self.rotate_range(q, None, m);
        self.track(q, m, true);
        Ok(())
    }

    fn apply_controlled(&mut self, c: Qubit, t: Qubit, m: &Mat2) -> Result<()> {
        self.check(c)?;
        self.check(t)?;
        if c == t {
            return Err(SimError::InvalidArgument("control equals target".into()));
        }
        match self.known[c] {
            Some(false) => Ok(()),
            Some(true) => self.apply_single(t, m),
            None => {
                self.rotate_range(t, Some(c), m);
                self.track(t, m, false);
                Ok(())
            }
        }
    }

    fn apply_presence(&mut self, registers: &[Vec<Qubit>], t: Qubit, m: &Mat2) -> Result<()> {
        self.check(t)?;
        let mut masks = Vec::with_capacity(registers.len());
        for reg in registers {
            let mut mask = 0usize;
            for &q in reg {
                self.check(q)?;
                if q == t {
                    return Err(SimError::InvalidArgument("control equals target".into()));
                }
                mask |= 1 << q;
            }
            if reg.iter().all(|&q| self.known[q] == Some(false)) {
                return Ok(());
            }
            masks.push(mask);
        }
        self.apply_where(t, m, |i| masks.iter().all(|&mk| i & mk != 0));
        self.track(t, m, false);
        Ok(())
    }

    fn probabilities(&mut self, q: Qubit) -> Result<(f64, f64)> {
        self.check(q)?;
        if let Some(b) = self.known[q] {
            return Ok(if b { (0.0, 1.0) } else { (1.0, 0.0) });
        }
        let qs = 1usize << q;
        let unit = (2 * qs).max(REDUCE_BLOCK).min(self.amps.len());
        let block = |blk: &[Complex64]| -> (f64, f64) {
            let mut p = (0.0, 0.0);
            for chunk in blk.chunks(2 * qs) {
                p.0 += chunk[..qs].iter().map(|a| a.norm_sqr()).sum::<f64>();
                p.1 += chunk[qs..].iter().map(|a| a.norm_sqr()).sum::<f64>();
            }
            p
        };
        let partials: Vec<(f64, f64)> = if self.parallel() {
            self.amps.par_chunks(unit).map(block).collect()
        } else {
            self.amps.chunks(unit).map(block).collect()
        };
        Ok(partials
            .iter()
            .fold((0.0, 0.0), |(x, y), (dx, dy)| (x + dx, y + dy)))
    }

    fn collapse(&mut self, q: Qubit, bit: bool, prob: f64) -> Result<()> {
        self.check(q)?;
        if prob <= 0.0 {
            return Err(SimError::Numerical(format!(
                "collapse of qubit {q} onto a zero-probability outcome"
            )));
        }
        if self.known[q] != Some(bit) {
            self.project(q, bit, 1.0 / prob.sqrt(), false);
            self.known[q] = Some(bit);
        }
        Ok(())
    }

    fn reset_with(&mut self, q: Qubit, u: f64) -> Result<()> {
        let (p0, p1) = self.probabilities(q)?;
        if p0 < super::DEGENERATE_PROB && p1 < super::DEGENERATE_PROB {
            return Err(SimError::Numerical(format!(
                "both outcomes of qubit {q} have vanishing probability ({p0:e}, {p1:e})"
            )));
        }
        let p1 = p1 / (p0 + p1);
        let bit = u < p1;
        if self.known[q] != Some(false) {
            let prob = if bit { p1 } else { 1.0 - p1 };
            let scale = if self.known[q].is_some() { 1.0 } else { 1.0 / prob.sqrt() };
            self.project(q, bit, scale, true);
            self.known[q] = Some(false);
        }
        Ok(())
    }

    fn parallel_shots(&self) -> bool {
        !self.parallel()
    }
}

fn rotate(lo: &mut [Complex64], hi: &mut [Complex64], m: &Mat2) {
    let [[m00, m01], [m10, m11]] = *m;
    for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
        let (x, y) = (*a0, *a1);
        *a0 = x * m00 + y * m01;
        *a1 = x * m10 + y * m11;
    }
}

/// Dense backend configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSimulator {
    pub max_qubits: usize,
    pub max_enumeration_measures: usize,
}

impl Default for DenseSimulator {
    fn default() -> Self {
        DenseSimulator {
            max_qubits: DEFAULT_MAX_QUBITS,
            max_enumeration_measures: DEFAULT_MAX_ENUMERATION_MEASURES,
        }
    }
}

impl DenseSimulator {
    pub fn check_capacity(&self, n_qubits: usize) -> Result<()> {
        if n_qubits > self.max_qubits {
            let bytes = 16f64 * 2f64.powi(n_qubits as i32);
            return Err(SimError::Capacity(format!(
                "dense state on {n_qubits} qubits needs 2^{n_qubits} amplitudes ({:.3e} bytes), \
                 above the {}-qubit cap; use the mps backend",
                bytes, self.max_qubits
            )));
        }
        Ok(())
    }

    fn initial(&self, prog: &Program) -> Result<StateVector> {
        self.check_capacity(prog.n_qubits)?;
        Ok(StateVector::new(prog.n_qubits))
    }

    /// Raw classical registers of `n_shots` trajectories.
    pub fn sample_registers(
        &self,
        circuit: &Circuit,
        params: &[f64],
        n_shots: usize,
        seed: u64,
    ) -> Result<Vec<Vec<bool>>> {
        let prog = Program::compile(circuit, params)?;
        let init = self.initial(&prog)?;
        Ok(sample_trajectories(&prog, init, n_shots, seed, false)?.0)
    }

    pub fn run_shots(
        &self,
        circuit: &Circuit,
        params: &[f64],
        n_shots: usize,
        seed: u64,
    ) -> Result<SampleBatch> {
        let start = std::time::Instant::now();
        let bits = self.sample_registers(circuit, params, n_shots, seed)?;
        let mut batch = to_batch(circuit.n_classical, bits, seed)?;
        batch.wall_time = start.elapsed();
        Ok(batch)
    }

    pub fn enumerate_distribution(
        &self,
        circuit: &Circuit,
        params: &[f64],
    ) -> Result<BTreeMap<Vec<bool>, f64>> {
        let prog = Program::compile(circuit, params)?;
        let init = self.initial(&prog)?;
        enumerate_outcomes(&prog, init, self.max_enumeration_measures)
    }

    /// Final state of a measurement-free circuit.
    pub fn final_state(&self, circuit: &Circuit, params: &[f64]) -> Result<StateVector> {
        let prog = Program::compile(circuit, params)?;
        let mut s = self.initial(&prog)?;
        for op in &prog.ops {
            s.apply_op_unitary(op)?;
        }
        Ok(s)
    }
}

pub fn run_shots(circuit: &Circuit, params: &[f64], n_shots: usize, seed: u64) -> Result<SampleBatch> {
    DenseSimulator::default().run_shots(circuit, params, n_shots, seed)
}

pub fn enumerate_distribution(
    circuit: &Circuit,
    params: &[f64],
) -> Result<BTreeMap<Vec<bool>, f64>> {
    DenseSimulator::default().enumerate_distribution(circuit, params)
}
