mod common;

use common::{instance, random_cvec, random_psd, rng, small_config};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::index::sample;
use rgsb_core::algorithms::{robust_margins, run_method, sample_margin, AlgoSettings, Method};
use rgsb_core::channel::{sinr, Beamformer, ChannelSample, Topology, TopologyConfig};
use rgsb_core::reform::*;
use rgsb_core::uncertainty::build_region;
use rgsb_sdp::linalg::min_eigenvalue;
use rgsb_sdp::{CMat, Settings, C64};

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn topo(n: usize, k: usize, l: usize) -> Topology {
    rgsb_core::channel::generate_topology(&small_config(n, k, l), &mut rng(0)).unwrap()
}

fn outer(v: &DVector<C64>) -> CMat {
    v * v.adjoint()
}

fn settings() -> Settings {
    Settings::default()
}

#[test]
fn q_matrix_at_zero_multiplier() {
    let t = topo(2, 2, 2);
    let layout = LiftedVariableLayout::new(&t);
    let h = CMat::zeros(4, 5);
    let qc = qos_constraint(&h, 0, 2.0, 0.3, &layout).unwrap();
    let q = qc.q(0.0);
    assert_eq!(q[(0, 0)], c(0.3));
    assert!(q.iter().skip(1).all(|z| *z == c(0.0)));
    assert!(qos_constraint(&h, 0, 0.0, 0.3, &layout).is_err());
    assert!(qos_constraint(&h, 0, -1.0, 0.3, &layout).is_err());
    assert!(qos_constraint(&CMat::zeros(3, 5), 0, 1.0, 0.3, &layout).is_err());
}

#[test]
fn zero_uncertainty_reduces_to_nominal_sinr() {
    let t = topo(2, 3, 2);
    let layout = LiftedVariableLayout::new(&t);
    let mut r = rng(1);
    let v = random_cvec(&mut r, t.dim());
    let hk = random_cvec(&mut r, t.user_dim());
    let mut h = CMat::zeros(t.user_dim(), t.user_dim() + 1);
    h.set_column(0, &hk);
    let (gamma, noise) = (1.5, 0.2);
    let qc = qos_constraint(&h, 1, gamma, noise, &layout).unwrap();
    let m = qc.matrix(&layout, &outer(&v), 0.0);
    let vk = |k: usize| v.rows_range(t.user_range(k)).into_owned();
    let p = |k: usize| hk.dotc(&vk(k)).norm_sqr();
    let expected = p(1) / gamma - p(0) - p(2) - noise;
    assert!((m[(0, 0)].re - expected).abs() < 1e-12);
}

#[test]
fn lifted_matches_vector_form() {
    let t = topo(2, 2, 2);
    let layout = LiftedVariableLayout::new(&t);
    let mut r = rng(2);
    let v = random_cvec(&mut r, t.dim());
    let center = random_cvec(&mut r, 4);
    let reg = build_region(center.clone(), random_psd(&mut r, 4, 4), 0.5).unwrap();
    let h = rgsb_core::uncertainty::build_h(&reg);
    let (gamma, noise, lambda) = (2.0, 0.1, 0.7);
    let qc = qos_constraint(&h, 0, gamma, noise, &layout).unwrap();
    let lifted = qc.matrix(&layout, &outer(&v), lambda);

    // Phi from the vectors, then the 2x2 block form directly.
    let vk = |k: usize| v.rows_range(t.user_range(k)).into_owned();
    let phi = outer(&vk(0)) * c(1.0 / gamma) - outer(&vk(1));
    let b = &reg.factor;
    let mut direct = CMat::zeros(5, 5);
    direct[(0, 0)] = center.dotc(&(&phi * &center)) - c(noise + lambda);
    let top = center.adjoint() * &phi * b;
    for j in 0..4 {
        direct[(0, j + 1)] = top[(0, j)];
        direct[(j + 1, 0)] = top[(0, j)].conj();
    }
    let bb = b.adjoint() * &phi * b;
    for i in 0..4 {
        for j in 0..4 {
            direct[(i + 1, j + 1)] = bb[(i, j)] + if i == j { c(lambda) } else { c(0.0) };
        }
    }
    assert!((lifted - direct).norm() < 1e-10);
}

#[test]
fn robust_solution_lmi_is_psd() {
    let inst = instance(&TopologyConfig::default(), 3);
    let gamma = vec![2.0; 4];
    let sol = assemble_robust_program(&inst.h, &gamma, &inst.topo, &unit_cost(&inst.topo))
        .unwrap()
        .solve(&settings())
        .unwrap();
    let layout = LiftedVariableLayout::new(&inst.topo);
    for k in 0..4 {
        let qc = qos_constraint(&inst.h[k], k, gamma[k], inst.topo.noise_power[k], &layout).unwrap();
        let m = qc.matrix(&layout, &sol.v, sol.lambda[k]);
        // normalized by the noise power, the scale of the constraint
        assert!(min_eigenvalue(&m) / inst.topo.noise_power[k] >= -1e-6, "user {k}");
        assert!(sol.lambda[k] >= 0.0);
    }
}

/// Unit cost on transmit power so the program has a bounded optimum.
fn unit_cost(t: &Topology) -> LiftedObjective {
    let mut obj = LiftedObjective::zero(t);
    obj.group_cost.fill(1.0);
    obj
}

#[test]
fn tx_functional_examples() {
    let t = topo(3, 2, 2);
    let layout = LiftedVariableLayout::new(&t);
    let mut r = rng(4);
    let v = random_cvec(&mut r, t.dim());
    for n in 0..3 {
        let f = tx_power_functional(&layout, n).unwrap();
        let direct: f64 = (0..2).map(|k| v.rows_range(t.group_range(n, k)).norm_squared()).sum();
        assert!((f.eval(&outer(&v)) - direct).abs() < 1e-12);
        assert_eq!(f.eval(&CMat::identity(t.dim(), t.dim())), (2 * 2) as f64);
        let m = random_psd(&mut r, t.dim(), 5);
        let mut brute = 0.0;
        for k in 0..2 {
            for a in 0..2 {
                let i = t.index(n, k, a);
                brute += m[(i, i)].re;
            }
        }
        assert!((f.eval(&m) - brute).abs() < 1e-12);
    }
    assert!(tx_power_functional(&layout, 3).is_err());
}

#[test]
fn dc_objective_at_rank_one_point() {
    let t = topo(2, 2, 2);
    let layout = LiftedVariableLayout::new(&t);
    let mut r = rng(5);
    let v = random_cvec(&mut r, t.dim());
    let w = DMatrix::from_fn(2, 2, |n, k| 0.5 + n as f64 + 2.0 * k as f64);
    let gvec = random_cvec(&mut r, t.dim());
    let g = outer(&gvec) * c(1.0 / gvec.norm_squared());
    let mut obj = LiftedObjective::reweighted(&t, &w);
    obj.mu = 3.0;
    obj.g = Some(g.clone());
    let mut direct = 0.0;
    for n in 0..2 {
        for k in 0..2 {
            let cost = 1.0 / t.amplifier_efficiency[n] + w[(n, k)] * t.compute_power[(n, k)];
            direct += cost * v.rows_range(t.group_range(n, k)).norm_squared();
        }
    }
    direct += 3.0 * (v.norm_squared() - v.dotc(&(&g * &v)).re);
    assert!((obj.eval(&layout, &outer(&v)) - direct).abs() < 1e-10 * direct.abs().max(1.0));

    // G = 0 adds mu Tr V.
    let base = LiftedObjective::reweighted(&t, &w);
    let mut plus = base.clone();
    plus.mu = 2.0;
    let m = random_psd(&mut r, t.dim(), 3);
    let tr: f64 = (0..t.dim()).map(|i| m[(i, i)].re).sum();
    assert!((plus.eval(&layout, &m) - base.eval(&layout, &m) - 2.0 * tr).abs() < 1e-10);
}

#[test]
fn dc_program_objective_uses_complex_scale() {
    let inst = instance(&small_config(2, 2, 2), 6);
    let gamma = vec![1.0; 2];
    let w = DMatrix::from_element(2, 2, 0.0);
    let prog = assemble_dc_iterate_program(&inst.h, &gamma, &inst.topo, &w, 0.0, None).unwrap();
    assert_eq!(prog.form, VariableForm::PerUser);
    let sol = prog.solve(&settings()).unwrap();
    let obj = LiftedObjective::reweighted(&inst.topo, &w);
    let eval = obj.eval(&prog.layout, &sol.v);
    assert!((sol.objective - eval).abs() <= 1e-6 * eval.abs().max(1e-12), "{} vs {eval}", sol.objective);

    let full = assemble_dc_iterate_program(&inst.h, &gamma, &inst.topo, &w, 1.0, None).unwrap();
    assert_eq!(full.form, VariableForm::Full);
    let bad = DMatrix::from_element(2, 2, -1.0);
    assert!(assemble_dc_iterate_program(&inst.h, &gamma, &inst.topo, &bad, 0.0, None).is_err());
    assert!(assemble_dc_iterate_program(&inst.h, &gamma, &inst.topo, &w, -1.0, None).is_err());
    assert!(assemble_dc_iterate_program(&inst.h[..1], &gamma, &inst.topo, &w, 0.0, None).is_err());
}

#[test]
fn objective_and_constraints_are_affine() {
    let t = topo(2, 2, 2);
    let layout = LiftedVariableLayout::new(&t);
    let mut r = rng(7);
    let w = DMatrix::from_fn(2, 2, |n, k| (n + k) as f64);
    let mut obj = LiftedObjective::reweighted(&t, &w);
    obj.mu = 1.5;
    obj.g = Some(random_psd(&mut r, t.dim(), 2));
    let h = CMat::from_fn(4, 5, |i, j| c((i * 5 + j) as f64 * 0.1));
    let qc = qos_constraint(&h, 1, 2.0, 0.5, &layout).unwrap();
    let v0 = random_psd(&mut r, t.dim(), 8);
    for _ in 0..5 {
        let d = random_psd(&mut r, t.dim(), 8) - random_psd(&mut r, t.dim(), 8);
        let (a, b) = (0.3, -1.7);
        let fa = obj.eval(&layout, &(&v0 + &d * c(a)));
        let fb = obj.eval(&layout, &(&v0 + &d * c(b)));
        let f0 = obj.eval(&layout, &v0);
        // f(v0 + t d) is affine in t
        assert!(((fa - f0) / a - (fb - f0) / b).abs() < 1e-9 * (1.0 + f0.abs()));
        let ma = qc.matrix(&layout, &(&v0 + &d * c(a)), 0.4);
        let mb = qc.matrix(&layout, &(&v0 + &d * c(b)), 0.4);
        let m0 = qc.matrix(&layout, &v0, 0.4);
        assert!(((&ma - &m0) * c(1.0 / a) - (&mb - &m0) * c(1.0 / b)).norm() < 1e-9 * (1.0 + m0.norm()));
    }
}

fn center_sample(inst: &common::Instance) -> ChannelSample {
    let mut h = DVector::from_element(inst.topo.dim(), c(0.0));
    for (k, reg) in inst.regions.iter().enumerate() {
        h.rows_mut(inst.topo.user_range(k).start, inst.topo.user_dim()).copy_from(&reg.center);
    }
    ChannelSample { h }
}

#[test]
fn single_sample_matches_nominal_constraints() {
    let inst = instance(&small_config(2, 2, 2), 8);
    let gamma = vec![3.0; 2];
    let s = &inst.data[0];
    let nominal = assemble_nominal_program(s, &gamma, &inst.topo).unwrap().solve(&settings()).unwrap();
    let obj = LiftedObjective {
        group_cost: DMatrix::from_fn(2, 2, |n, _| 1.0 / inst.topo.amplifier_efficiency[n]),
        mu: 0.0,
        g: None,
        offset: inst.topo.compute_power.sum(),
    };
    let scen = assemble_scenario_program(std::slice::from_ref(s), &gamma, &inst.topo, Some(&obj))
        .unwrap()
        .solve(&settings())
        .unwrap();
    assert!((nominal.objective - scen.objective).abs() < 1e-6 * nominal.objective);
}

#[test]
fn scenario_feasible_set_shrinks_with_samples() {
    let inst = instance(&small_config(2, 2, 2), 9);
    let gamma = vec![3.0; 2];
    let obj = LiftedObjective {
        group_cost: DMatrix::from_element(2, 2, 1.0),
        mu: 0.0,
        g: None,
        offset: 0.0,
    };
    let mut last = 0.0;
    for d in [1, 10, 50, 200] {
        let sol = assemble_scenario_program(&inst.data[..d], &gamma, &inst.topo, Some(&obj))
            .unwrap()
            .solve(&settings())
            .unwrap();
        assert!(sol.objective >= last * (1.0 - 1e-6), "{d}: {} < {last}", sol.objective);
        last = sol.objective;
        if d == 200 {
            let layout = LiftedVariableLayout::new(&inst.topo);
            let mut r = rng(10);
            for _ in 0..5 {
                for i in sample(&mut r, 200, 100) {
                    for k in 0..2 {
                        let hk = inst.data[i].user(&inst.topo, k);
                        let m = sample_margin(&layout, &sol.v, &hk, k, gamma[k], inst.topo.noise_power[k]);
                        assert!(m >= -1e-6);
                    }
                }
            }
        }
    }
    assert!(assemble_scenario_program(&[], &gamma, &inst.topo, None).is_err());
}

#[test]
fn center_scenario_feasible_when_robust_feasible() {
    let inst = instance(&TopologyConfig::default(), 11);
    let center = center_sample(&inst);
    let mut seen_feasible = false;
    for db in [0.0, 6.0, 12.0, 18.0, 24.0] {
        let gamma = vec![10f64.powf(db / 10.0); 4];
        let robust = assemble_robust_feasibility(&inst.h, &gamma, &inst.topo).unwrap().feasibility(&settings()).unwrap();
        if robust == Feasibility::Feasible {
            seen_feasible = true;
            let scen = assemble_scenario_program(std::slice::from_ref(&center), &gamma, &inst.topo, None)
                .unwrap()
                .feasibility(&settings())
                .unwrap();
            assert_eq!(scen, Feasibility::Feasible, "{db} dB");
        }
    }
    assert!(seen_feasible);
}

/// Smallest `D >= m` with `sum_{i<m} C(D,i) eps^i (1-eps)^(D-i) <= delta`,
/// summing the pmf in log space.
fn oracle_sg(m: usize, eps: f64, delta: f64) -> usize {
    let tail = |d: usize| {
        let mut lc = 0.0;
        let mut acc = 0.0;
        for i in 0..m {
            if i > 0 {
                lc += ((d - i + 1) as f64).ln() - (i as f64).ln();
            }
            acc += (lc + i as f64 * eps.ln() + (d - i) as f64 * (1.0 - eps).ln()).exp();
        }
        acc
    };
    (m..).find(|&d| tail(d) <= delta).unwrap()
}

#[test]
fn sg_required_samples_examples() {
    assert_eq!(sg_required_samples(32, 0.5, 1.0).unwrap(), 32);
    assert_eq!(sg_required_samples(2, 0.5, 1.0).unwrap(), 2);
    let d = sg_required_samples(32, 0.05, 0.05).unwrap();
    assert_eq!(d, oracle_sg(32, 0.05, 0.05));
    assert_eq!(d, 832);
    for &(m, e, dl) in &[(2, 0.1, 0.1), (8, 0.05, 0.01), (16, 0.2, 0.05), (32, 0.1, 0.05)] {
        assert_eq!(sg_required_samples(m, e, dl).unwrap(), oracle_sg(m, e, dl));
    }
    let mut last = usize::MAX;
    for i in 1..20 {
        let d = sg_required_samples(32, i as f64 * 0.025, 0.05).unwrap();
        assert!(d <= last);
        last = d;
    }
    assert!(sg_required_samples(0, 0.05, 0.05).is_err());
}

#[test]
fn s_procedure_zero_uncertainty_is_nominal() {
    let t = topo(2, 2, 2);
    let mut r = rng(12);
    let v = Beamformer {
        v: random_cvec(&mut r, t.dim()),
    };
    let center = random_cvec(&mut r, 4);
    let reg = build_region(center.clone(), CMat::zeros(4, 4), 0.0).unwrap();
    let est = s_procedure_soundness(&t, &v, &reg, 0, 100, &mut r);
    assert_eq!(est, sinr(&t, &v, &center, 0, t.noise_power[0]));
}

#[test]
fn s_procedure_certificate_is_sound() {
    let inst = instance(&TopologyConfig::default(), 13);
    let gamma = vec![2.0; 4];
    let report = run_method(Method::CbSdr, &inst.h, &gamma, &inst.topo, &AlgoSettings::default()).unwrap();
    let b = &report.beamformer;
    let v = outer(&b.v);
    let margins = robust_margins(&inst.h, &gamma, &inst.topo, &v).unwrap();
    assert!(margins.iter().all(|&m| m >= -1e-6), "{margins:?}");
    let mut r = rng(14);
    for k in 0..4 {
        let est = s_procedure_soundness(&inst.topo, b, &inst.regions[k], k, 2000, &mut r);
        assert!(est >= 2.0 * (1.0 - 1e-6), "user {k}: {est}");
    }
    let weak = Beamformer { v: &b.v * c(0.1) };
    let drops = (0..4).any(|k| s_procedure_soundness(&inst.topo, &weak, &inst.regions[k], k, 200, &mut r) < 2.0);
    assert!(drops);
}

#[test]
fn layout_blocks() {
    let t = topo(3, 2, 2);
    let layout = LiftedVariableLayout::new(&t);
    assert_eq!(layout.dim(), 12);
    assert_eq!(layout.user_range(1), 6..12);
    assert_eq!(layout.group_range(2, 1), 10..12);
    let m = CMat::from_fn(12, 12, |i, j| c((i * 12 + j) as f64));
    let sub = layout.v_ll_nn(&m, 1, 2);
    assert_eq!(sub[(0, 0)], m[(10, 10)]);
    assert_eq!(sub[(1, 0)], m[(11, 10)]);
    assert_eq!(layout.v_ll(&m, 1).view((4, 4), (2, 2)).into_owned(), sub);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn group_traces_sum_to_trace(seed in 0u64..10_000, n in 1usize..4, k in 1usize..4, l in 1usize..3) {
        let t = topo(n, k, l);
        let layout = LiftedVariableLayout::new(&t);
        let m = random_psd(&mut rng(seed), t.dim(), 2);
        let tr: f64 = (0..t.dim()).map(|i| m[(i, i)].re).sum();
        prop_assert!((layout.group_traces(&m).sum() - tr).abs() < 1e-9 * (1.0 + tr));
        let per_ap: f64 = (0..n).map(|a| tx_power_functional(&layout, a).unwrap().eval(&m)).sum();
        prop_assert!((per_ap - tr).abs() < 1e-9 * (1.0 + tr));
    }

    #[test]
    fn scaled_feasible_point_keeps_positive_margin(seed in 0u64..10_000, scale in 1.0f64..10.0) {
        let t = topo(2, 1, 2);
        let layout = LiftedVariableLayout::new(&t);
        let mut r = rng(seed);
        let hk = random_cvec(&mut r, 4);
        let v = random_cvec(&mut r, 4);
        let noise = 0.1;
        let gamma = 0.5 * hk.dotc(&v).norm_sqr() / noise;
        let mut h = CMat::zeros(4, 5);
        h.set_column(0, &hk);
        let qc = qos_constraint(&h, 0, gamma, noise, &layout).unwrap();
        let (m1, _) = qc.robust_margin(&layout, &outer(&v));
        let (m2, _) = qc.robust_margin(&layout, &(outer(&v) * c(scale)));
        prop_assert!(m1 > 0.0);
        prop_assert!(m2 >= m1 - 1e-12);
    }
}
