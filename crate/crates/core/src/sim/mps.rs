//! Matrix-product-state backend.
//!
//! Site tensors have shape `(l, 2, r)` and are stored row-major as
//! `data[a * 2 * r + p * r + b]`. The state is kept in mixed canonical form
//! around `center`. Logical qubits start on the site with the same index;
//! swap routing for long-range gates moves them temporarily and restores the
//! identity layout afterwards.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use super::{
    enumerate_outcomes, sample_trajectories, to_batch, Op, Program, QuantumState, Result,
    SimError, TruncationLog,
};
use crate::batch::SampleBatch;
use crate::circuit::{Circuit, Mat2, Qubit};

pub type Mat4 = [[Complex64; 4]; 4];

pub const DEFAULT_THRESHOLD: f64 = 1e-12;
pub const EXACT_CHI: usize = 1 << 16;
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;

/// Singular values this far below the largest are round-off, not
/// truncation, and are dropped silently.
const NUMERICAL_ZERO: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
struct Site {
    l: usize,
    r: usize,
    data: Vec<Complex64>,
}

impl Site {
    fn basis(bit: bool) -> Site {
        let mut data = vec![ZERO; 2];
        data[bit as usize] = ONE;
        Site { l: 1, r: 1, data }
    }

    fn as_rows(&self, rows: usize) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(rows, self.data.len() / rows, &self.data)
    }
}

fn row_major(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    m.transpose().as_slice().to_vec()
}

#[derive(Debug, Clone)]
pub struct MpsState {
    sites: Vec<Site>,
    center: usize,
    /// logical qubit -> site
    pos: Vec<usize>,
    /// site -> logical qubit
    logical: Vec<Qubit>,
    chi_max: usize,
    threshold: f64,
    pending_discarded: f64,
    pending_bond: usize,
    swaps: usize,
}

pub fn mat4_controlled(m: &Mat2) -> Mat4 {
    let mut u = [[ZERO; 4]; 4];
    u[0][0] = ONE;
    u[1][1] = ONE;
    for i in 0..2 {
        for j in 0..2 {
            u[2 + i][2 + j] = Complex64::new(m[i][j], 0.0);
        }
    }
    u
}

pub fn mat4_swap() -> Mat4 {
    let mut u = [[ZERO; 4]; 4];
    u[0][0] = ONE;
    u[1][2] = ONE;
    u[2][1] = ONE;
    u[3][3] = ONE;
    u
}

pub fn mat4_identity() -> Mat4 {
    let mut u = [[ZERO; 4]; 4];
    for (i, row) in u.iter_mut().enumerate() {
        row[i] = ONE;
    }
    u
}

/// Same gate with the roles of its two qubits exchanged.
fn mat4_flip(u: &Mat4) -> Mat4 {
    let f = |i: usize| (i & 1) << 1 | i >> 1;
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[f(i)][f(j)] = u[i][j];
        }
    }
    out
}

impl MpsState {
    pub fn new(n_qubits: usize, chi_max: usize, threshold: f64) -> Result<MpsState> {
        if n_qubits == 0 {
            return Err(SimError::InvalidArgument("an MPS needs at least one site".into()));
        }
        if chi_max == 0 || !(threshold >= 0.0) {
            return Err(SimError::InvalidArgument(format!(
                "chi_max must be positive and threshold non-negative (got {chi_max}, {threshold})"
            )));
        }
        Ok(MpsState {
            sites: vec![Site::basis(false); n_qubits],
            center: 0,
            pos: (0..n_qubits).collect(),
            logical: (0..n_qubits).collect(),
            chi_max,
            threshold,
            pending_discarded: 0.0,
            pending_bond: 1,
            swaps: 0,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.sites.len()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    /// Bond dimensions between consecutive sites.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1].iter().map(|s| s.r).collect()
    }

    pub fn site_of(&self, q: Qubit) -> usize {
        self.pos[q]
    }

    pub fn qubit_at(&self, site: usize) -> Qubit {
        self.logical[site]
    }

    /// Swap gates applied so far by routing.
    pub fn swap_count(&self) -> usize {
        self.swaps
    }

    fn check(&self, q: Qubit) -> Result<()> {
        if q < self.sites.len() {
            Ok(())
        } else {
            Err(SimError::InvalidArgument(format!(
                "qubit {q} out of range for {} sites",
                self.sites.len()
            )))
        }
    }

    fn shift_center_right(&mut self) {
        let c = self.center;
        let (l, r) = (self.sites[c].l, self.sites[c].r);
        let qr = self.sites[c].as_rows(2 * l).qr();
        let (q, rm) = (qr.q(), qr.r());
        let k = q.ncols();
        self.sites[c] = Site { l, r: k, data: row_major(&q) };
        let next = &self.sites[c + 1];
        let merged = rm * next.as_rows(r);
        self.sites[c + 1] = Site { l: k, r: next.r, data: row_major(&merged) };
        self.center = c + 1;
    }

    fn shift_center_left(&mut self) {
        let c = self.center;
        let (l, r) = (self.sites[c].l, self.sites[c].r);
        // LQ through the QR of the adjoint
        let qr = self.sites[c].as_rows(l).adjoint().qr();
        let (q, rm) = (qr.q(), qr.r());
        let k = q.ncols();
        self.sites[c] = Site { l: k, r, data: row_major(&q.adjoint()) };
        let prev = &self.sites[c - 1];
        let merged = prev.as_rows(2 * prev.l) * rm.adjoint();
        self.sites[c - 1] = Site { l: prev.l, r: k, data: row_major(&merged) };
        self.center = c - 1;
    }

    pub fn move_center(&mut self, to: usize) {
        while self.center < to {
            self.shift_center_right();
        }
        while self.center > to {
            self.shift_center_left();
        }
    }

    fn is_product_site(&self, s: usize) -> bool {
        self.sites[s].l == 1 && self.sites[s].r == 1
    }

    /// Applies `u` (input index `2·p_site + p_{site+1}`) to two adjacent
    /// sites and returns the discarded weight.
    pub fn apply_two_site(&mut self, site: usize, u: &Mat4) -> Result<f64> {
        if site + 1 >= self.sites.len() {
            return Err(SimError::InvalidArgument(format!(
                "two-site gate at {site} runs past the last site"
            )));
        }
        if self.center < site {
            self.move_center(site);
        } else if self.center > site + 1 {
            self.move_center(site + 1);
        }
        let (a, b) = (&self.sites[site], &self.sites[site + 1]);
        let (l, m, r) = (a.l, a.r, b.r);
        // theta[x][p][q][y]
        let mut theta = vec![ZERO; l * 4 * r];
        for x in 0..l {
            for p in 0..2 {
                for k in 0..m {
                    let av = a.data[x * 2 * m + p * m + k];
                    if av == ZERO {
                        continue;
                    }
                    for q in 0..2 {
                        for y in 0..r {
                            theta[((x * 2 + p) * 2 + q) * r + y] += av * b.data[k * 2 * r + q * r + y];
                        }
                    }
                }
            }
        }
        let mut mat = DMatrix::<Complex64>::zeros(2 * l, 2 * r);
        for x in 0..l {
            for y in 0..r {
                let v: [Complex64; 4] =
                    std::array::from_fn(|pq| theta[(x * 4 + pq) * r + y]);
                for (out, row) in u.iter().enumerate() {
                    let val: Complex64 = row.iter().zip(&v).map(|(g, t)| g * t).sum();
                    mat[(x * 2 + out / 2, (out % 2) * r + y)] = val;
                }
            }
        }
        let svd = mat.try_svd(true, true, f64::EPSILON, 0).ok_or_else(|| {
            SimError::Numerical(format!("SVD did not converge at sites {site}-{}", site + 1))
        })?;
        let (uu, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let sv = svd.singular_values;
        if sv.iter().any(|s| !s.is_finite()) {
            return Err(SimError::Numerical(format!(
                "non-finite singular values at sites {site}-{}",
                site + 1
            )));
        }
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
        let s0 = sv[order[0]];
        if s0 == 0.0 {
            return Err(SimError::Numerical(format!(
                "two-site block at {site} vanished"
            )));
        }
        let keep_limit = self.threshold.max(NUMERICAL_ZERO) * s0;
        let mut keep = order
            .iter()
            .take_while(|&&i| sv[i] > keep_limit)
            .count()
            .clamp(1, self.chi_max);
        keep = keep.min(order.len());
        let total: f64 = order.iter().map(|&i| sv[i] * sv[i]).sum();
        let kept: f64 = order[..keep].iter().map(|&i| sv[i] * sv[i]).sum();
        let discarded: f64 = order[keep..]
            .iter()
            .filter(|&&i| sv[i] > NUMERICAL_ZERO * s0)
            .map(|&i| sv[i] * sv[i])
            .sum::<f64>()
            / total;
        let norm = kept.sqrt();

        let mut left = vec![ZERO; l * 2 * keep];
        let mut right = vec![ZERO; keep * 2 * r];
        for (k, &i) in order[..keep].iter().enumerate() {
            for row in 0..2 * l {
                left[row * keep + k] = uu[(row, i)];
            }
            let s = sv[i] / norm;
            for col in 0..2 * r {
                right[k * 2 * r + col] = vt[(i, col)] * s;
            }
        }
        self.sites[site] = Site { l, r: keep, data: left };
        self.sites[site + 1] = Site { l: keep, r, data: right };
        self.center = site + 1;
        self.pending_discarded += discarded;
        self.pending_bond = self.pending_bond.max(keep);
        Ok(discarded)
    }

    fn swap_sites(&mut self, site: usize) -> Result<()> {
        self.apply_two_site(site, &mat4_swap())?;
        let (x, y) = (self.logical[site], self.logical[site + 1]);
        self.logical.swap(site, site + 1);
        self.pos[x] = site + 1;
        self.pos[y] = site;
        self.swaps += 1;
        Ok(())
    }

    /// Applies `u` (input index `2·p_a + p_b`) to logical qubits `a` and `b`,
    /// swapping `a` next to `b` and back when they are not adjacent.
    pub fn route_and_apply(&mut self, a: Qubit, b: Qubit, u: &Mat4) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(SimError::InvalidArgument("two-qubit gate on a single qubit".into()));
        }
        let target = self.pos[b];
        let mut path = Vec::new();
        while self.pos[a] + 1 < target {
            let s = self.pos[a];
            self.swap_sites(s)?;
            path.push(s);
        }
        while self.pos[a] > target + 1 {
            let s = self.pos[a] - 1;
            self.swap_sites(s)?;
            path.push(s);
        }
        let (sa, sb) = (self.pos[a], self.pos[b]);
        if sa < sb {
            self.apply_two_site(sa, u)?;
        } else {
            self.apply_two_site(sb, &mat4_flip(u))?;
        }
        for &s in path.iter().rev() {
            self.swap_sites(s)?;
        }
        Ok(())
    }

    /// Dense amplitudes indexed with bit `q` for logical qubit `q`.
    pub fn to_amplitudes(&self) -> Vec<Complex64> {
        // acc[(config, bond)] over processed sites
        let mut acc: Vec<Complex64> = vec![ONE];
        let mut configs = 1usize;
        for site in &self.sites {
            let mut next = vec![ZERO; configs * 2 * site.r];
            for c in 0..configs {
                for a in 0..site.l {
                    let w = acc[c * site.l + a];
                    if w == ZERO {
                        continue;
                    }
                    for p in 0..2 {
                        for b in 0..site.r {
                            next[(c * 2 + p) * site.r + b] += w * site.data[a * 2 * site.r + p * site.r + b];
                        }
                    }
                }
            }
            acc = next;
            configs *= 2;
        }
        let n = self.sites.len();
        let mut out = vec![ZERO; 1 << n];
        for (c, amp) in acc.into_iter().enumerate() {
            // c has site 0 as its most significant bit
            let mut idx = 0usize;
            for s in 0..n {
                if c >> (n - 1 - s) & 1 == 1 {
                    idx |= 1 << self.logical[s];
                }
            }
            out[idx] = amp;
        }
        out
    }
}

impl QuantumState for MpsState {
    fn apply_single(&mut self, q: Qubit, m: &Mat2) -> Result<()> {
        self.check(q)?;
        let site = &mut self.sites[self.pos[q]];
        let r = site.r;
        for a in 0..site.l {
            let base = a * 2 * r;
            for b in 0..r {
                let x = site.data[base + b];
                let y = site.data[base + r + b];
                site.data[base + b] = x * m[0][0] + y * m[0][1];
                site.data[base + r + b] = x * m[1][0] + y * m[1][1];
            }
        }
        Ok(())
    }

    fn apply_controlled(&mut self, c: Qubit, t: Qubit, m: &Mat2) -> Result<()> {
        self.route_and_apply(c, t, &mat4_controlled(m))
    }

    fn apply_presence(&mut self, _: &[Vec<Qubit>], _: Qubit, _: &Mat2) -> Result<()> {
        Err(SimError::Unsupported(
            "register-controlled rotations need the dense backend; build the ansatz with early-measured conditioning".into(),
        ))
    }

    fn probabilities(&mut self, q: Qubit) -> Result<(f64, f64)> {
        self.check(q)?;
        let s = self.pos[q];
        if !self.is_product_site(s) {
            self.move_center(s);
        }
        let site = &self.sites[s];
        let r = site.r;
        let mut p = [0.0; 2];
        for a in 0..site.l {
            for (bit, pb) in p.iter_mut().enumerate() {
                let off = a * 2 * r + bit * r;
                *pb += site.data[off..off + r].iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        Ok((p[0], p[1]))
    }

    fn collapse(&mut self, q: Qubit, bit: bool, prob: f64) -> Result<()> {
        self.check(q)?;
        if prob <= 0.0 {
            return Err(SimError::Numerical(format!(
                "collapse of qubit {q} onto a zero-probability outcome"
            )));
        }
        let s = self.pos[q];
        if !self.is_product_site(s) {
            self.move_center(s);
        }
        let site = &mut self.sites[s];
        let r = site.r;
        let scale = 1.0 / prob.sqrt();
        let keep = bit as usize;
        for a in 0..site.l {
            for p in 0..2 {
                let off = a * 2 * r + p * r;
                for z in &mut site.data[off..off + r] {
                    *z = if p == keep { *z * scale } else { ZERO };
                }
            }
        }
        Ok(())
    }

    fn take_stats(&mut self) -> (f64, usize) {
        let out = (self.pending_discarded, self.pending_bond);
        self.pending_discarded = 0.0;
        self.pending_bond = 1;
        out
    }
}

/// Bytes held by site tensors when every bond is at its largest possible
/// dimension under `chi_max`.
pub fn memory_estimate(n_qubits: usize, chi_max: usize) -> f64 {
    let bond = |k: usize| -> f64 {
        let room = k.min(n_qubits - k);
        let full = if room >= 63 { f64::INFINITY } else { (1u64 << room) as f64 };
        full.min(chi_max as f64)
    };
    (0..n_qubits)
        .map(|s| {
            let l = if s == 0 { 1.0 } else { bond(s) };
            let r = if s + 1 == n_qubits { 1.0 } else { bond(s + 1) };
            l * 2.0 * r * 16.0
        })
        .sum()
}

/// MPS backend configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpsSimulator {
    pub chi_max: usize,
    pub threshold: f64,
    /// Hard cap on the site-tensor footprint of one state, in bytes.
    pub memory_budget: usize,
    pub max_enumeration_measures: usize,
}

impl Default for MpsSimulator {
    fn default() -> Self {
        MpsSimulator {
            chi_max: 64,
            threshold: DEFAULT_THRESHOLD,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            max_enumeration_measures: super::dense::DEFAULT_MAX_ENUMERATION_MEASURES,
        }
    }
}

impl MpsSimulator {
    /// Untruncated simulation: bond cap 2^16 and no relative threshold.
    pub fn exact() -> Self {
        MpsSimulator {
            chi_max: EXACT_CHI,
            threshold: 0.0,
            ..Default::default()
        }
    }

    pub fn with_chi(chi_max: usize) -> Self {
        MpsSimulator {
            chi_max,
            ..Default::default()
        }
    }

    pub fn check_capacity(&self, n_qubits: usize) -> Result<()> {
        let budget = self.memory_budget as f64;
        if memory_estimate(n_qubits, self.chi_max) <= budget {
            return Ok(());
        }
        let (mut lo, mut hi) = (0usize, self.chi_max);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if memory_estimate(n_qubits, mid) <= budget {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        Err(SimError::Capacity(format!(
            "bond dimension {} on {n_qubits} sites could need {:.3e} bytes, over the {} byte budget; \
             max feasible chi is {lo}",
            self.chi_max,
            memory_estimate(n_qubits, self.chi_max),
            self.memory_budget
        )))
    }

    fn compile(&self, circuit: &Circuit, params: &[f64]) -> Result<(Program, MpsState)> {
        let prog = Program::compile(circuit, params)?;
        if prog.ops.iter().any(|o| matches!(o, Op::Presence { .. })) {
            return Err(SimError::Unsupported(
                "quantum-controlled conditioning is only available on the dense backend".into(),
            ));
        }
        self.check_capacity(prog.n_qubits)?;
        let state = MpsState::new(prog.n_qubits, self.chi_max, self.threshold)?;
        Ok((prog, state))
    }

    pub fn sample_registers(
        &self,
        circuit: &Circuit,
        params: &[f64],
        n_shots: usize,
        seed: u64,
    ) -> Result<(Vec<Vec<bool>>, TruncationLog)> {
        let (prog, init) = self.compile(circuit, params)?;
        let (bits, log) = sample_trajectories(&prog, init, n_shots, seed, true)?;
        Ok((bits, log.expect("log requested")))
    }

    pub fn run_shots(
        &self,
        circuit: &Circuit,
        params: &[f64],
        n_shots: usize,
        seed: u64,
    ) -> Result<(SampleBatch, TruncationLog)> {
        let start = std::time::Instant::now();
        let (bits, log) = self.sample_registers(circuit, params, n_shots, seed)?;
        let mut batch = to_batch(circuit.n_classical, bits, seed)?;
        batch.wall_time = start.elapsed();
        Ok((batch, log))
    }

    pub fn enumerate_distribution(
        &self,
        circuit: &Circuit,
        params: &[f64],
    ) -> Result<BTreeMap<Vec<bool>, f64>> {
        let (prog, init) = self.compile(circuit, params)?;
        enumerate_outcomes(&prog, init, self.max_enumeration_measures)
    }

    /// State after a measurement-free circuit.
    pub fn final_state(&self, circuit: &Circuit, params: &[f64]) -> Result<MpsState> {
        let (prog, mut state) = self.compile(circuit, params)?;
        for op in &prog.ops {
            state.apply_op_unitary(op)?;
        }
        Ok(state)
    }
}

pub fn run_shots_mps(
    circuit: &Circuit,
    params: &[f64],
    n_shots: usize,
    chi_max: usize,
    threshold: f64,
    seed: u64,
) -> Result<(SampleBatch, TruncationLog)> {
    MpsSimulator {
        chi_max,
        threshold,
        ..Default::default()
    }
    .run_shots(circuit, params, n_shots, seed)
}

impl MpsState {
    pub fn measure_site(&mut self, q: Qubit, rng: &mut impl Rng) -> Result<bool> {
        self.measure_with(q, rng.gen())
    }

    pub fn reset_site(&mut self, q: Qubit, rng: &mut impl Rng) -> Result<()> {
        self.reset_with(q, rng.gen())
    }

    /// Squared norm, read off the orthogonality center.
    pub fn norm_sqr(&self) -> f64 {
        self.sites[self.center].data.iter().map(|z| z.norm_sqr()).sum()
    }
}
