use std::fs;
use std::path::Path;

use rgsb_core::algorithms::Method;
use rgsb_core::channel::TopologyConfig;
use rgsb_core::harness::*;

fn tiny(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        topology: TopologyConfig {
            n_aps: 2,
            n_users: 2,
            antennas: 2,
            ..Default::default()
        },
        gamma_db: vec![0.0, 4.0],
        qos_tests: 4,
        qos_retrain: 2,
        feasibility_realizations: 2,
        power_realizations: 2,
        methods: vec![Method::ReweightedDc, Method::CbSdr, Method::MixedL1L2],
        output_dir: out.to_path_buf(),
        ..Default::default()
    }
}

fn run_all(cfg: &ExperimentConfig) -> Vec<Manifest> {
    let dir = &cfg.output_dir;
    vec![
        emit_qos_table(dir, cfg, &run_qos_table(cfg).unwrap()).unwrap(),
        emit_feasibility(dir, cfg, &run_feasibility_sweep(cfg).unwrap()).unwrap(),
        emit_convergence(dir, cfg, &run_convergence(cfg).unwrap()).unwrap(),
        emit_power_sweep(dir, cfg, &run_power_sweep(cfg).unwrap()).unwrap(),
    ]
}

#[test]
fn config_toml_round_trip() {
    let cfg = ExperimentConfig::default();
    let text = cfg.to_toml().unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    let partial = ExperimentConfig::from_toml("seed = 7\ngamma_db = [1.0, 3.0]\n").unwrap();
    assert_eq!(partial.seed, 7);
    assert_eq!(partial.gamma_db, vec![1.0, 3.0]);
    assert_eq!(partial.qos_tests, 2000);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    fs::write(&path, &text).unwrap();
    assert_eq!(ExperimentConfig::load(&path).unwrap(), cfg);
}

#[test]
fn config_validation_errors() {
    for text in [
        "gamma_db = []\n",
        "qos_tests = 0\n",
        "power_realizations = 0\n",
        "methods = []\n",
        "error_var = -1.0\n",
        "unknown_field = 3\n",
        "[robust]\nzeta = 0.01\n",
        "[algo]\ntau = 0.0\n",
        "methods = [\"bogus\"]\n",
    ] {
        assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
    }
    let relaxed = "robust_mode = false\n[robust]\nzeta = 0.01\n";
    assert!(ExperimentConfig::from_toml(relaxed).is_ok());
}

#[test]
fn hash_tracks_every_field() {
    let base = ExperimentConfig::default();
    let h = base.hash();
    assert_eq!(h.len(), 64);
    assert_eq!(h, ExperimentConfig::default().hash());
    let variants: Vec<Box<dyn Fn(&mut ExperimentConfig)>> = vec![
        Box::new(|c| c.seed += 1),
        Box::new(|c| c.topology.n_aps = 3),
        Box::new(|c| c.robust.epsilon = 0.04),
        Box::new(|c| c.algo.mu = 11.0),
        Box::new(|c| c.error_var = 2e-4),
        Box::new(|c| c.gamma_db.push(8.0)),
        Box::new(|c| c.qos_gamma_db = 5.0),
        Box::new(|c| c.qos_tests = 10),
        Box::new(|c| c.qos_retrain = 10),
        Box::new(|c| c.feasibility_realizations = 3),
        Box::new(|c| c.power_realizations = 3),
        Box::new(|c| c.methods.pop().map(drop).unwrap_or(())),
        Box::new(|c| c.robust_mode = false),
        Box::new(|c| c.output_dir = "elsewhere".into()),
    ];
    for change in variants {
        let mut c = base.clone();
        change(&mut c);
        assert_ne!(c.hash(), h);
    }
}

#[test]
fn streams_are_distinct_and_repeatable() {
    use rand::Rng;
    let mut a = stream_rng(1, Experiment::PowerSweep, 0);
    let mut b = stream_rng(1, Experiment::PowerSweep, 0);
    let mut c = stream_rng(1, Experiment::PowerSweep, 1);
    let mut d = stream_rng(1, Experiment::Feasibility, 0);
    let (x, y, z, w): (u64, u64, u64, u64) = (a.random(), b.random(), c.random(), d.random());
    assert_eq!(x, y);
    assert_ne!(x, z);
    assert_ne!(x, w);
}

#[test]
fn mean_se_examples() {
    assert!(mean_se(&[]).0.is_nan());
    let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    // sample sd sqrt(5/3), divided by sqrt(4)
    assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
}

#[test]
fn outputs_are_byte_identical_on_rerun() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let m1 = run_all(&tiny(d1.path()));
    let mut c2 = tiny(d2.path());
    c2.output_dir = d1.path().to_path_buf();
    let h1 = c2.hash();
    c2.output_dir = d2.path().to_path_buf();
    let m2 = run_all(&c2);
    assert_ne!(h1, c2.hash());
    for (a, b) in m1.iter().zip(&m2) {
        assert_eq!(a.files, b.files);
        for f in &a.files {
            let x = fs::read(d1.path().join(f)).unwrap();
            let y = fs::read(d2.path().join(f)).unwrap();
            assert!(!x.is_empty());
            assert_eq!(x, y, "{f} differs");
        }
        assert!(d1.path().join(format!("{}_manifest.json", a.experiment)).exists());
    }

    let cfg = tiny(d1.path());
    let power = fs::read_to_string(d1.path().join("power_sweep.csv")).unwrap();
    let mut lines = power.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + cfg.methods.len());
    assert_eq!(header[0], "gamma_db");
    assert_eq!(lines.count(), cfg.gamma_db.len());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d1.path().join("power_sweep_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], cfg.hash());
    assert_eq!(manifest["seed"], 1);
}

#[test]
fn power_sweep_structure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let sweep = run_power_sweep(&cfg).unwrap();
    assert_eq!(sweep.runs.len(), 2 * 2 * 3);
    let budget: f64 = {
        let r = realization(&cfg, Experiment::PowerSweep, 0).unwrap();
        r.topology.max_tx_power.iter().zip(&r.topology.amplifier_efficiency).map(|(p, e)| p / e).sum::<f64>()
            + r.topology.compute_power.sum()
    };
    for &db in &cfg.gamma_db {
        let cb = sweep.point(db, Method::CbSdr).unwrap();
        if cb.runs > 0 {
            assert_eq!(cb.mean_tasks, 4.0);
            assert_eq!(cb.se_tasks, 0.0);
        }
        for &m in &cfg.methods {
            let p = sweep.point(db, m).unwrap();
            assert_eq!(p.runs + p.attrition, cfg.power_realizations);
            assert!(p.mean_power <= budget);
        }
    }
    for run in &sweep.runs {
        if let Ok(r) = &run.report {
            assert!(r.trace.len() <= cfg.algo.outer_max);
        }
    }
}

#[test]
fn feasibility_probabilities_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let pts = run_feasibility_sweep(&cfg).unwrap();
    assert_eq!(pts.len(), cfg.gamma_db.len());
    for p in &pts {
        for q in [p.robust_probability(), p.scenario_probability()] {
            assert!((0.0..=1.0).contains(&q));
        }
        assert!(p.robust_feasible >= p.scenario_feasible);
    }
}

#[test]
fn exact_csi_meets_qos_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.error_var = 0.0;
    let table = run_qos_table(&cfg).unwrap();
    assert_eq!(table.aborted, 0);
    assert!(table.completed > 0);
    for k in 0..2 {
        assert_eq!(table.robust_fraction(k), 1.0);
        assert_eq!(table.nonrobust_fraction(k), 1.0);
    }
}

#[test]
fn solve_one_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let a = solve_one(&cfg, Method::CbSdr, 4.0, 3).unwrap();
    let b = solve_one(&cfg, Method::CbSdr, 4.0, 3).unwrap();
    assert_eq!(a.total_power, b.total_power);
    assert_eq!(a.beamformer, b.beamformer);
}
