//! Trajectory sampling against exact enumeration, determinism and
//! capacity behaviour of both backends.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqmg_core::ansatz::*;
use sqmg_core::batch::SampleBatch;
use sqmg_core::circuit::{Circuit, Gate};
use sqmg_core::sim::dense::{self, DenseSimulator};
use sqmg_core::sim::mps::{run_shots_mps, MpsSimulator};
use sqmg_core::sim::{empirical, records_distribution, total_variation, SimError};

fn random_params(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.0..TAU)).collect()
}

fn early(n: usize, v: Variant) -> Circuit {
    AnsatzSpec::de_novo(n, v, Conditioning::EarlyMeasured)
        .build()
        .unwrap()
        .0
}

/// Expected total-variation distance between an `shots`-sample empirical
/// distribution and `p`, to leading order.
fn sampling_floor<K>(p: &BTreeMap<K, f64>, shots: usize) -> f64 {
    let c = (2.0 / (std::f64::consts::PI * shots as f64)).sqrt();
    0.5 * c * p.values().map(|q| (q * (1.0 - q)).sqrt()).sum::<f64>()
}

#[test]
fn dense_sampling_converges_at_n2() {
    let c = early(2, Variant::Hybrid);
    let p = random_params(21, c.n_params);
    let exact = records_distribution(2, &dense::enumerate_distribution(&c, &p).unwrap());
    let batch = dense::run_shots(&c, &p, 200_000, 7).unwrap();
    let tv = total_variation(&empirical(&batch.records), &exact);
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn mps_sampling_converges_at_n3() {
    let c = early(3, Variant::Hybrid);
    let p = random_params(22, c.n_params);
    let exact = records_distribution(3, &dense::enumerate_distribution(&c, &p).unwrap());
    let (batch, log) = MpsSimulator::exact().run_shots(&c, &p, 200_000, 8).unwrap();
    let tv = total_variation(&empirical(&batch.records), &exact);
    let floor = sampling_floor(&exact, 200_000);
    assert!(tv < 1.5 * floor, "tv {tv} vs expected {floor}");
    assert_eq!(log.total_discarded(), 0.0);
}

#[test]
fn zero_parameters_sample_empty_molecules() {
    let c = early(2, Variant::Hybrid);
    let batch = dense::run_shots(&c, &vec![0.0; c.n_params], 100, 1).unwrap();
    assert_eq!(batch.records.len(), 100);
    assert!(batch.records.iter().all(|r| r.atoms == [0, 0] && r.bonds == [0]));
}

#[test]
fn same_seed_same_batch() {
    let c = early(2, Variant::Hybrid);
    let p = random_params(23, c.n_params);
    let a = dense::run_shots(&c, &p, 500, 99).unwrap();
    let b = dense::run_shots(&c, &p, 500, 99).unwrap();
    assert_eq!(a.records, b.records);
    let other = dense::run_shots(&c, &p, 500, 100).unwrap();
    assert_ne!(a.records, other.records);
    let (m1, _) = run_shots_mps(&c, &p, 500, 64, 1e-12, 99).unwrap();
    let (m2, _) = run_shots_mps(&c, &p, 500, 64, 1e-12, 99).unwrap();
    assert_eq!(m1.records, m2.records);
}

#[test]
fn shot_results_do_not_depend_on_thread_count() {
    let c = early(2, Variant::Hybrid);
    let p = random_params(24, c.n_params);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let d = dense::run_shots(&c, &p, 1000, 5).unwrap();
                let (m, log) = MpsSimulator::default().run_shots(&c, &p, 1000, 5).unwrap();
                (d.records, m.records, log)
            })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn prefix_of_a_shot_does_not_depend_on_shot_count() {
    let c = early(2, Variant::Hybrid);
    let p = random_params(25, c.n_params);
    let short = dense::run_shots(&c, &p, 10, 3).unwrap();
    let long = dense::run_shots(&c, &p, 1000, 3).unwrap();
    assert_eq!(short.records[..], long.records[..10]);
}

#[test]
fn dense_capacity_error_at_ten_atoms() {
    let c = early(10, Variant::Hybrid);
    let err = dense::run_shots(&c, &vec![0.0; c.n_params], 1, 0).unwrap_err();
    assert!(matches!(&err, SimError::Capacity(m) if m.contains("2^32")), "{err}");
}

#[test]
fn mps_handles_twenty_atoms_as_product_state() {
    let c = early(20, Variant::Hybrid);
    let (batch, log) = MpsSimulator::with_chi(64)
        .run_shots(&c, &vec![0.0; c.n_params], 100, 0)
        .unwrap();
    assert_eq!(batch.n_atoms, 20);
    assert!(batch.records.iter().all(|r| r.atoms.iter().all(|&a| a == 0)));
    assert_eq!(log.max_bond_dim(), 1);
    assert_eq!(log.total_discarded(), 0.0);
}

#[test]
fn mps_twenty_atoms_random_parameters() {
    let c = early(20, Variant::Hybrid);
    let p = random_params(26, c.n_params);
    let (batch, log) = MpsSimulator::with_chi(64).run_shots(&c, &p, 1000, 0).unwrap();
    assert_eq!(batch.records.len(), 1000);
    assert!(log.max_bond_dim() <= 64);
    assert!(dense::run_shots(&c, &p, 1, 0).is_err());
}

/// Brickwork of random rotations and CNOTs with measurements at the end.
fn brickwork(n: usize, layers: usize) -> (Circuit, usize) {
    let mut c = Circuit::new(n, n * layers, n);
    let mut slot = 0;
    for layer in 0..layers {
        for q in 0..n {
            c.push(Gate::Ry { target: q, param: slot });
            slot += 1;
        }
        for q in (layer % 2..n - 1).step_by(2) {
            c.push(Gate::Cnot { control: q, target: q + 1 });
        }
    }
    for q in 0..n {
        c.push(Gate::Measure { qubit: q, slot: q });
    }
    (c, slot)
}

#[test]
fn discarded_weight_shrinks_as_chi_grows() {
    let (c, n_params) = brickwork(12, 10);
    let p = random_params(27, n_params);
    let mut last = f64::INFINITY;
    for chi in [1, 2, 4, 8, 16, 32, 64] {
        let sim = MpsSimulator {
            chi_max: chi,
            threshold: 0.0,
            ..Default::default()
        };
        let (_, log) = sim.sample_registers(&c, &p, 10, 1).unwrap_or_else(|e| panic!("{e}"));
        let w = log.total_discarded();
        assert!(w >= 0.0 && w <= last + 1e-12, "chi {chi}: {w} after {last}");
        assert!(log.max_bond_dim() <= chi);
        last = w;
    }
    assert_eq!(last, 0.0);
}

#[test]
fn truncation_log_csv() {
    let (c, n_params) = brickwork(6, 4);
    let p = random_params(28, n_params);
    let (_, log) = MpsSimulator::with_chi(2).sample_registers(&c, &p, 5, 1).unwrap();
    let mut out = Vec::new();
    log.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("gate_index,discarded_weight,bond_dim"));
    assert_eq!(lines.count(), log.discarded.len());
}

#[test]
fn batches_round_trip_through_files() {
    let c = early(3, Variant::Hybrid);
    let p = random_params(29, c.n_params);
    let batch = DenseSimulator::default().run_shots(&c, &p, 300, 2).unwrap();
    let mut bin = Vec::new();
    batch.write_binary(&mut bin).unwrap();
    let back = SampleBatch::read_binary(&bin[..]).unwrap();
    assert_eq!(back.records, batch.records);
    let mut json = Vec::new();
    batch.write_jsonl(&mut json).unwrap();
    assert_eq!(SampleBatch::read_jsonl(&json[..]).unwrap().records, batch.records);
}

#[test]
fn quantum_controlled_circuits_are_dense_only() {
    let c = AnsatzSpec::de_novo(2, Variant::Hybrid, Conditioning::QuantumControlled)
        .build()
        .unwrap()
        .0;
    let p = vec![0.1; c.n_params];
    assert!(matches!(
        MpsSimulator::default().run_shots(&c, &p, 1, 0),
        Err(SimError::Unsupported(_))
    ));
    assert!(dense::run_shots(&c, &p, 10, 0).is_ok());
}
