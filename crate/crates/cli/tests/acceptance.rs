//! Acceptance suite. Prints one PASS/FAIL line per criterion followed by a
//! tally.
//!
//!     cargo test -p sqmg-cli --test acceptance            # all criteria
//!     cargo test -p sqmg-cli --test acceptance -- 2 6     # a selection
//!
//! The process exits 0 regardless of the verdicts so that the workspace test
//! run stays usable; set `SQMG_ACCEPTANCE_STRICT=1` to exit 1 on any FAIL.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::time::Instant;

use oracles::{brute_isomorphic, brute_valid, random_graph, random_permutation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqmg_cli::bench::{run_bench, BenchOutcome, Status};
use sqmg_cli::config::{Backend, OptimizerKind, RunConfig};
use sqmg_cli::generate::run_decode;
use sqmg_cli::generate::run_generate;
use sqmg_cli::report::{write_scaling, write_trajectories};
use sqmg_cli::train::run_train;
use sqmg_core::ansatz::{param_count, qubit_count, AnsatzSpec, AtomCodebook, Conditioning, Variant};
use sqmg_core::batch::ShotRecord;
use sqmg_core::chem::Element::{self, C, O};
use sqmg_core::circuit::Circuit;
use sqmg_core::molgraph::{canonical_key, validate, Decoder, Failure, MoleculeGraph, ValenceTable};
use sqmg_core::sim::dense::DenseSimulator;
use sqmg_core::sim::mps::MpsSimulator;
use sqmg_core::sim::{empirical, records_distribution, total_variation};
use sqmg_optim::{cobyla_minimize, BayesOpt, BoConfig};

const TV_TOL: f64 = 0.02;
const SHOTS: usize = 200_000;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

type Dist = BTreeMap<ShotRecord, f64>;

fn random_params(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..TAU)).collect()
}

fn circuit(n: usize, v: Variant, c: Conditioning) -> Circuit {
    AnsatzSpec::de_novo(n, v, c).build().unwrap().0
}

fn exact(c: &Circuit, n: usize, p: &[f64]) -> Dist {
    records_distribution(n, &DenseSimulator::default().enumerate_distribution(c, p).unwrap())
}

/// Leading-order expected TV between an empirical distribution of `shots`
/// draws and `p`. Two independent samples sit about √2 higher.
fn sampling_floor(p: &Dist, shots: usize) -> f64 {
    let c = (2.0 / (PI * shots as f64)).sqrt();
    0.5 * c * p.values().map(|q| (q * (1.0 - q)).sqrt()).sum::<f64>()
}

fn max_abs_diff(a: &Dist, b: &Dist) -> f64 {
    a.keys()
        .chain(b.keys())
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .fold(0.0, f64::max)
}

fn criterion_1() -> Verdict {
    let expected = [
        (2, 21, 8, 8),
        (3, 35, 11, 15),
        (4, 51, 14, 24),
        (5, 69, 17, 35),
        (10, 189, 32, 120),
        (20, 479, 62, 440),
        (30, 849, 92, 960),
        (40, 1959, 122, 1680),
    ];
    let wrong: Vec<String> = expected
        .iter()
        .filter(|&&(n, p, h, s)| {
            (param_count(n).ok(), qubit_count(n, Variant::Hybrid).ok(), qubit_count(n, Variant::Static).ok())
                != (Some(p), Some(h), Some(s))
        })
        .map(|&(n, p, ..)| format!("N={n} expected {p} params, computed {}", param_count(n).unwrap()))
        .collect();
    verdict(
        wrong.is_empty(),
        if wrong.is_empty() {
            "all 8 rows match".to_string()
        } else {
            format!("8 rows, qubit counts match; parameter mismatches: {}", wrong.join(", "))
        },
    )
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [2, 3] {
        let c = circuit(n, Variant::Hybrid, Conditioning::EarlyMeasured);
        let (mut worst_sum, mut worst_ed, mut worst_em, mut worst_dm, mut floor) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut exact_gap = 0.0f64;
        for k in 0..10u64 {
            let p = random_params(&mut rng, c.n_params);
            let e = exact(&c, n, &p);
            worst_sum = worst_sum.max((e.values().sum::<f64>() - 1.0).abs());
            let me = records_distribution(n, &MpsSimulator::exact().enumerate_distribution(&c, &p).unwrap());
            exact_gap = exact_gap.max(max_abs_diff(&e, &me));
            let d = empirical(&DenseSimulator::default().run_shots(&c, &p, SHOTS, 100 + k).unwrap().records);
            let m = empirical(&MpsSimulator::exact().run_shots(&c, &p, SHOTS, 200 + k).unwrap().0.records);
            worst_ed = worst_ed.max(total_variation(&e, &d));
            worst_em = worst_em.max(total_variation(&e, &m));
            worst_dm = worst_dm.max(total_variation(&d, &m));
            floor = floor.max(sampling_floor(&e, SHOTS));
        }
        pass &= worst_sum <= 1e-10 && worst_ed < TV_TOL && worst_em < TV_TOL && worst_dm < TV_TOL;
        parts.push(format!(
            "N={n}: max TV enum-dense {worst_ed:.4}, enum-mps {worst_em:.4}, dense-mps {worst_dm:.4} \
             (sampling floor up to {floor:.4}), |sum-1| {worst_sum:.1e}, \
             exact mps vs dense max |Δp| {exact_gap:.1e}"
        ));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let early = circuit(2, Variant::Hybrid, Conditioning::EarlyMeasured);
    let quantum = circuit(2, Variant::Hybrid, Conditioning::QuantumControlled);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let p = random_params(&mut rng, early.n_params);
        worst = worst.max(max_abs_diff(&exact(&early, 2, &p), &exact(&quantum, 2, &p)));
    }
    verdict(worst < 1e-10, format!("N=2, 10 vectors, max |Δp| {worst:.1e}"))
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let hybrid = circuit(3, Variant::Hybrid, Conditioning::EarlyMeasured);
    let fixed = circuit(3, Variant::Static, Conditioning::EarlyMeasured);
    let (mut worst, mut worst_exact, mut floor) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..10u64 {
        let p = random_params(&mut rng, hybrid.n_params);
        let sim = MpsSimulator::exact();
        let h = empirical(&sim.run_shots(&hybrid, &p, SHOTS, 300 + k).unwrap().0.records);
        let s = empirical(&sim.run_shots(&fixed, &p, SHOTS, 400 + k).unwrap().0.records);
        worst = worst.max(total_variation(&h, &s));
        let eh = exact(&hybrid, 3, &p);
        worst_exact = worst_exact.max(total_variation(&eh, &exact(&fixed, 3, &p)));
        floor = floor.max(sampling_floor(&eh, SHOTS) * 2f64.sqrt());
    }
    verdict(
        worst < TV_TOL,
        format!(
            "N=3, 10 vectors, {SHOTS} shots each: max sampled TV {worst:.4} \
             (two-sample floor up to {floor:.4}); exact TV {worst_exact:.1e}"
        ),
    )
}

fn criterion_5() -> Verdict {
    let valence = ValenceTable::default();
    let decoder = Decoder::de_novo(2);
    let book = AtomCodebook::default();
    let mut sweep_bad = 0;
    for bits in 0u32..1 << 8 {
        let bits: Vec<bool> = (0..8).map(|i| bits >> i & 1 == 1).collect();
        let rec = ShotRecord::from_bits(2, &bits);
        let Ok(mol) = decoder.decode(&rec) else {
            sweep_bad += 1;
            continue;
        };
        let present: Vec<Element> = rec.atoms.iter().filter_map(|&c| book.kind(c).element()).collect();
        let (ok, over, _) = brute_valid(&mol, &valence);
        let got = validate(&mol, &valence);
        let reported: Vec<usize> = got
            .failures
            .iter()
            .filter_map(|f| match f {
                Failure::ValenceExceeded(i) => Some(*i),
                _ => None,
            })
            .collect();
        if mol.atoms != present || got.valid != ok || reported != over {
            sweep_bad += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut key_bad = 0;
    let mut oracle_checked = 0;
    for _ in 0..1000 {
        let g = random_graph(&mut rng, 8, &Element::ALL, 0.3);
        let key = canonical_key(&g);
        for _ in 0..20 {
            let h = g.permuted(&random_permutation(&mut rng, g.atoms.len()));
            if canonical_key(&h) != key || !brute_isomorphic(&g, &h) {
                key_bad += 1;
            }
            oracle_checked += 1;
        }
    }

    // distinct graphs: equal keys exactly when the oracle finds an isomorphism
    let graphs: Vec<MoleculeGraph> = (0..300)
        .map(|_| {
            let mut g = random_graph(&mut rng, 7, &[C, O], 0.4);
            g.bonds.iter_mut().for_each(|b| b.2 = 1);
            g
        })
        .collect();
    let keys: Vec<String> = graphs.iter().map(canonical_key).collect();
    let mut pair_bad = 0;
    let mut pairs = 0;
    for i in 0..graphs.len() {
        for j in i + 1..graphs.len() {
            if graphs[i].atoms.len() == graphs[j].atoms.len() && graphs[i].bonds.len() == graphs[j].bonds.len() {
                pairs += 1;
                pair_bad += ((keys[i] == keys[j]) != brute_isomorphic(&graphs[i], &graphs[j])) as usize;
            }
        }
    }
    verdict(
        sweep_bad == 0 && key_bad == 0 && pair_bad == 0,
        format!(
            "256-pattern sweep mismatches {sweep_bad}; {oracle_checked} permutations, key or oracle \
             disagreements {key_bad}; {pairs} same-size pairs, key/isomorphism disagreements {pair_bad}"
        ),
    )
}

fn branin(x: &[f64]) -> f64 {
    let (b, c) = (5.1 / (4.0 * PI * PI), 5.0 / PI);
    (x[1] - b * x[0] * x[0] + c * x[0] - 6.0).powi(2) + 10.0 * (1.0 - 1.0 / (8.0 * PI)) * x[0].cos() + 10.0
}

fn criterion_6() -> Verdict {
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let sphere = cobyla_minimize(|x| x.iter().map(|v| v * v).sum(), &[1.0, 1.0], &[free, free], 0.5, 1e-8, 500).unwrap();
    let rosen = cobyla_minimize(
        |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
        &[-1.2, 1.0],
        &[free, free],
        0.5,
        1e-8,
        2000,
    )
    .unwrap();
    let hits = (0..10u64)
        .filter(|&seed| {
            let mut bo = BayesOpt::new(vec![(-5.0, 10.0), (0.0, 15.0)], BoConfig::default(), seed);
            for _ in 0..100 {
                let x = bo.ask();
                let y = -branin(&x);
                bo.tell(x, y);
            }
            -bo.best().unwrap().y - 0.397887 <= 0.1
        })
        .count();
    let ok = (sphere.f < 1e-6, rosen.f < 1e-4, hits >= 8);
    verdict(
        ok == (true, true, true),
        format!(
            "sphere f={:.1e} in {} evals [{}]; Rosenbrock f={:.1e} in {} evals [{}]; Branin {hits}/10 seeds [{}]",
            sphere.f,
            sphere.evals,
            tag(ok.0),
            rosen.f,
            rosen.evals,
            tag(ok.1),
            tag(ok.2)
        ),
    )
}

fn tag(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "miss"
    }
}

fn median3(mut v: Vec<f64>) -> f64 {
    sqmg_cli::bench::median(&mut v)
}

fn criterion_7() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let mut best = BTreeMap::new();
    for kind in [OptimizerKind::Bo, OptimizerKind::Cobyla] {
        let mut scores = Vec::new();
        for seed in 1..=3 {
            let mut cfg = RunConfig::new(4);
            cfg.backend = Backend::Mps;
            cfg.shots = 1000;
            cfg.seed = seed;
            cfg.optimizer.kind = kind;
            cfg.optimizer.evaluations = 150;
            cfg.output_dir = root.path().join(format!("{kind:?}-{seed}"));
            scores.push(run_train(&cfg, false).unwrap().best.objective);
        }
        best.insert(format!("{kind:?}"), scores);
    }
    let bo = median3(best["Bo"].clone());
    let cobyla = median3(best["Cobyla"].clone());
    verdict(
        bo >= cobyla && bo >= 0.3,
        format!(
            "N=4, 150 evals, 1000 shots, mps: BO best {:?} (median {bo:.3}), COBYLA best {:?} (median {cobyla:.3})",
            best["Bo"], best["Cobyla"]
        ),
    )
}

fn bench(dir: &Path) -> BenchOutcome {
    let mut cfg = RunConfig::new(2);
    cfg.output_dir = dir.to_path_buf();
    cfg.chi_max = 64;
    cfg.bench.shots = 1000;
    // the dense N=8 point needs close to a minute per shot on one core
    cfg.bench.dense_shots = 1;
    cfg.bench.repetitions = 3;
    run_bench(&cfg, |r| eprintln!("    bench {} {:?} N={} {:?}", r.backend, r.variant, r.n_atoms, r.seconds)).unwrap()
}

fn criterion_8(b: &BenchOutcome) -> Verdict {
    let slope = |backend, variant| {
        b.fits
            .fits
            .iter()
            .find(|f| f.backend == backend && f.variant == variant)
            .map(|f| f.log_slope)
    };
    let row = |backend, n| b.records.iter().find(|r| r.backend == backend && r.variant == Variant::Hybrid && r.n_atoms == n);
    let dense = slope(Backend::Dense, Variant::Hybrid).unwrap_or(f64::NAN);
    let mps = slope(Backend::Mps, Variant::Hybrid).unwrap_or(f64::NAN);
    let factor = dense.exp();
    let cap = row(Backend::Dense, 10).is_some_and(|r| r.status == Status::CapacityError);
    let n20 = row(Backend::Mps, 20).and_then(|r| r.seconds);
    let steps: Vec<String> = (2..8)
        .filter_map(|n| Some(row(Backend::Dense, n + 1)?.seconds? / row(Backend::Dense, n)?.seconds?))
        .map(|r| format!("{r:.1}"))
        .collect();
    let ok = (
        (5.0..=12.0).contains(&factor),
        mps < dense,
        cap,
        n20.is_some_and(|s| s < 1800.0),
    );
    verdict(
        ok == (true, true, true, true),
        format!(
            "dense factor/atom {factor:.2} over N=2..8, step ratios {} [{}]; mps slope {mps:.3} vs dense {dense:.3} [{}]; \
             dense N=10 capacity_error [{}]; mps N=20 1000 shots {} [{}]",
            steps.join(" "),
            tag(ok.0),
            tag(ok.1),
            tag(ok.2),
            n20.map_or("missing".into(), |s| format!("{s:.3} s")),
            tag(ok.3)
        ),
    )
}

fn criterion_9(b: &BenchOutcome) -> Verdict {
    let ratios: Vec<(usize, f64)> = [16, 20]
        .iter()
        .map(|&n| {
            let r = b.fits.mps_reuse_ratios.iter().find(|r| r.n_atoms == n);
            (n, r.map_or(f64::NAN, |r| r.static_over_hybrid))
        })
        .collect();
    verdict(
        ratios.iter().all(|&(_, r)| r <= 1.0),
        format!(
            "mps chi 64, 1000 shots, static/hybrid median runtime: {}",
            ratios.iter().map(|(n, r)| format!("N={n} {r:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

/// Every file under `dir`, keyed by relative path. Timing sidecars are
/// excluded; they are the only outputs allowed to change between runs.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path.to_string_lossy().contains(".timing.") {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn pipeline_once(root: &Path) {
    let mut cfg = RunConfig::new(3);
    cfg.seed = 10;
    cfg.shots = 500;
    cfg.optimizer.evaluations = 12;
    cfg.output_dir = root.join("train");
    let trained = run_train(&cfg, false).unwrap();
    cfg.output_dir = root.join("generate");
    run_generate(&cfg, &trained.best.params).unwrap();
    run_decode(&cfg, &cfg.output_dir.join("samples.jsonl"), &root.join("decoded.jsonl")).unwrap();
    write_trajectories(&[&root.join("train/history.jsonl")], &root.join("trajectories.csv")).unwrap();
    // bench timings are the measurement itself, so the report path is
    // checked from a fixed CSV
    let csv = "backend,variant,n_atoms,qubits,shots,seconds,peak_bond_dim,amplitudes,status\n\
               dense,hybrid,2,8,1,0.001,,256,ok\ndense,hybrid,3,11,1,0.008,,2048,ok\n\
               mps,hybrid,8,26,1000,0.1,2,,ok\nmps,static,8,80,1000,0.09,2,,ok\n";
    std::fs::write(root.join("bench.csv"), csv).unwrap();
    write_scaling(&root.join("bench.csv"), &root.join("scaling.csv")).unwrap();
}

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("run");
    pipeline_once(&root);
    let first = snapshot(&root);
    std::fs::remove_dir_all(&root).unwrap();
    pipeline_once(&root);
    let second = snapshot(&root);
    let differing: Vec<&String> = first
        .keys()
        .chain(second.keys())
        .filter(|k| first.get(*k) != second.get(*k))
        .collect();
    verdict(
        differing.is_empty() && first.len() >= 10,
        format!(
            "train, generate, decode and report rerun in place: {} files compared, differing: {differing:?}",
            first.len()
        ),
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |k: u32| selected.is_empty() || selected.contains(&k);
    let strict = std::env::var("SQMG_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let mut results: Vec<(u32, Verdict, f64)> = Vec::new();
    let mut run = |k: u32, f: &mut dyn FnMut() -> Verdict| {
        if want(k) {
            let start = Instant::now();
            let v = f();
            let secs = start.elapsed().as_secs_f64();
            println!("criterion {k:>2}: {} ({secs:.1} s) {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
            results.push((k, v, secs));
        }
    };
    run(1, &mut criterion_1);
    run(2, &mut criterion_2);
    run(3, &mut criterion_3);
    run(4, &mut criterion_4);
    run(5, &mut criterion_5);
    run(6, &mut criterion_6);
    run(7, &mut criterion_7);
    if want(8) || want(9) {
        let dir = tempfile::tempdir().unwrap();
        let b = bench(dir.path());
        run(8, &mut || criterion_8(&b));
        run(9, &mut || criterion_9(&b));
    }
    run(10, &mut criterion_10);

    let failed: Vec<u32> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!(", failed: {failed:?}") }
    );
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
