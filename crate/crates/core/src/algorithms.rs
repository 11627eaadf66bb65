//! Rank-penalized reweighted power minimization and the comparison methods.
//!
//! The proposed method alternates two loops. The inner loop minimizes the
//! weighted transmit/compute cost plus `mu (Tr V - ||V||)` by linearizing
//! the spectral norm at the current iterate. The outer loop updates the
//! group weights `w_nl = c / (Tr(V_ll[n, n]) + tau)`, which majorizes a
//! log-sum surrogate of the number of active (AP, task) pairs.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rgsb_sdp::linalg::{c64, herm_eigen};
use rgsb_sdp::{CMat, Settings, C64};
use serde::{Deserialize, Serialize};

use crate::channel::{sinr, total_power, Beamformer, ChannelSample, Pattern, Topology};
use crate::error::{Error, Result};
use crate::reform::{
    assemble_nominal_program, assemble_robust_feasibility, assemble_robust_program,
    assemble_scenario_program, qos_constraint, Feasibility, LiftedObjective, LiftedSolution,
    LiftedVariableLayout,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoSettings {
    pub tau: f64,
    /// Reweighting scale; `None` means `1 / ln(1 + 1/tau)`.
    pub c: Option<f64>,
    pub mu: f64,
    pub outer_max: usize,
    pub inner_max: usize,
    pub outer_tol: f64,
    pub inner_tol: f64,
    pub rank_tol: f64,
    pub sparsity_tol: f64,
    /// Factor applied to `mu` for the single retry after a refused extraction.
    pub mu_retry_factor: f64,
}

impl Default for AlgoSettings {
    fn default() -> Self {
        AlgoSettings {
            tau: 1e-6,
            c: None,
            mu: 10.0,
            outer_max: 20,
            inner_max: 30,
            outer_tol: 1e-4,
            inner_tol: 1e-5,
            rank_tol: 1e-6,
            sparsity_tol: 1e-5,
            mu_retry_factor: 5.0,
        }
    }
}

impl AlgoSettings {
    pub fn c(&self) -> f64 {
        self.c.unwrap_or_else(|| 1.0 / (1.0 + 1.0 / self.tau).ln())
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.tau, self.c(), self.outer_tol, self.inner_tol, self.rank_tol, self.sparsity_tol];
        if pos.iter().any(|&x| !(x > 0.0) || !x.is_finite()) || !(self.mu >= 0.0) {
            return Err(Error::InvalidArgument("algorithm tolerances must be positive".into()));
        }
        if self.outer_max == 0 || self.inner_max == 0 {
            return Err(Error::InvalidArgument("iteration caps must be >= 1".into()));
        }
        if !(self.mu_retry_factor >= 1.0) {
            return Err(Error::InvalidArgument("mu retry factor must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `Tr V - lambda_max(V)`.
pub fn rank_one_residual(v: &CMat) -> f64 {
    let (vals, _) = herm_eigen(v);
    let n = vals.len();
    if n == 0 {
        return 0.0;
    }
    vals.iter().take(n - 1).sum()
}

/// `u_1 u_1^H` for the leading eigenvector. With ties the eigenvector of the
/// last position in ascending order is used.
pub fn spectral_subgradient(v: &CMat) -> CMat {
    let (_, vecs) = herm_eigen(v);
    let n = vecs.ncols();
    let u = vecs.column(n - 1);
    &u * u.adjoint()
}

/// `c / (Tr(V_ll[n, n]) + tau)` on the `N x K` grid.
pub fn update_weights(layout: &LiftedVariableLayout, v: &CMat, tau: f64, c: f64) -> DMatrix<f64> {
    layout.group_traces(v).map(|t| c / (t.max(0.0) + tau))
}

/// `sum_{n,l} [(1/eta_n) Tr + P^c ln(1 + Tr/tau) / ln(1 + 1/tau)] + mu R(V)`.
pub fn surrogate_objective(topo: &Topology, v: &CMat, tau: f64, mu: f64) -> f64 {
    let layout = LiftedVariableLayout::new(topo);
    let tr = layout.group_traces(v);
    let denom = (1.0 + 1.0 / tau).ln();
    let mut f = 0.0;
    for n in 0..topo.n_aps() {
        for l in 0..topo.n_users() {
            let t = tr[(n, l)].max(0.0);
            f += t / topo.amplifier_efficiency[n] + topo.compute_power[(n, l)] * (1.0 + t / tau).ln() / denom;
        }
    }
    if mu > 0.0 {
        f += mu * rank_one_residual(v).max(0.0);
    }
    f
}

fn leading(v: &CMat) -> (f64, DVector<C64>) {
    let (vals, vecs) = herm_eigen(v);
    let n = vals.len();
    (vals[n - 1].max(0.0), vecs.column(n - 1).into_owned())
}

fn normalize_phase(v: &mut DVector<C64>) {
    if let Some((_, z)) = v.iter().enumerate().max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr())) {
        let r = z.norm();
        if r > 0.0 {
            let rot = z.conj() / r;
            *v *= rot;
        }
    }
}

/// `sqrt(sigma_1) u_1` with the largest-magnitude entry made real and
/// nonnegative. Refused when `R(V) > rank_tol Tr(V)`.
pub fn extract_beamformer(v: &CMat, rank_tol: f64) -> Result<Beamformer> {
    let trace: f64 = (0..v.nrows()).map(|i| v[(i, i)].re).sum();
    let r = rank_one_residual(v);
    if r > rank_tol * trace.max(0.0) {
        return Err(Error::ExtractionRefused {
            residual: r,
            limit: rank_tol * trace,
        });
    }
    let (s, u) = leading(v);
    let mut b = u * c64(s.sqrt(), 0.0);
    normalize_phase(&mut b);
    Ok(Beamformer { v: b })
}

/// Leading eigenpair of every diagonal block `V_kk`, without a rank check.
/// Returns the beamformer and the summed per-block rank residual.
pub fn extract_per_user(layout: &LiftedVariableLayout, v: &CMat) -> (Beamformer, f64) {
    let mut out = DVector::from_element(layout.dim(), C64::new(0.0, 0.0));
    let mut residual = 0.0;
    for k in 0..layout.n_users {
        let block = layout.v_ll(v, k);
        residual += rank_one_residual(&block).max(0.0);
        let (s, u) = leading(&block);
        let mut b = u * c64(s.sqrt(), 0.0);
        normalize_phase(&mut b);
        out.rows_mut(layout.user_range(k).start, layout.user_dim()).copy_from(&b);
    }
    (Beamformer { v: out }, residual)
}

/// `{(n, k) : ||v_nk||^2 > tol * max group}`.
pub fn sparsity_pattern(topo: &Topology, v: &Beamformer, tol: f64) -> Pattern {
    let norms = DMatrix::from_fn(topo.n_aps(), topo.n_users(), |n, k| v.group_norm_sqr(topo, n, k));
    pattern_from_groups(&norms, tol)
}

/// Same rule on the group traces of a lifted matrix.
pub fn sparsity_pattern_lifted(layout: &LiftedVariableLayout, v: &CMat, tol: f64) -> Pattern {
    pattern_from_groups(&layout.group_traces(v), tol)
}

fn pattern_from_groups(g: &DMatrix<f64>, tol: f64) -> Pattern {
    let max = g.iter().copied().fold(0.0, f64::max);
    let mut out = Pattern::new();
    if max <= 0.0 {
        return out;
    }
    for n in 0..g.nrows() {
        for k in 0..g.ncols() {
            if g[(n, k)] > tol * max {
                out.insert((n, k));
            }
        }
    }
    out
}

/// SINR of user `k` computed from `V` rather than from a beamformer.
pub fn lifted_sinr(layout: &LiftedVariableLayout, v: &CMat, h_k: &DVector<C64>, k: usize, noise: f64) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for l in 0..layout.n_users {
        let p = h_k.dotc(&(layout.v_ll(v, l) * h_k)).re;
        if l == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    signal / (interference + noise)
}

/// Robust QoS margin of every user at `V`, see
/// [`crate::reform::QosConstraint::robust_margin`].
pub fn robust_margins(h: &[CMat], gamma: &[f64], topo: &Topology, v: &CMat) -> Result<Vec<f64>> {
    let layout = LiftedVariableLayout::new(topo);
    (0..topo.n_users())
        .map(|k| {
            let qc = qos_constraint(&h[k], k, gamma[k], topo.noise_power[k], &layout)?;
            Ok(qc.robust_margin(&layout, v).0)
        })
        .collect()
}

fn outer(b: &Beamformer) -> CMat {
    &b.v * b.v.adjoint()
}

/// Trace of one DC inner loop.
#[derive(Clone, Debug)]
pub struct DcOutcome {
    pub solution: LiftedSolution,
    /// Optimal values of the successive linearized programs.
    pub trace: Vec<f64>,
    pub rank_residual: f64,
    pub solves: usize,
}

fn solver_settings() -> Settings {
    Settings::default()
}

/// Inner loop at fixed weights. With `mu = 0` this is one relaxation solve.
/// Otherwise it starts from the relaxation, built into a rank-one matrix by
/// aligning the leading eigenvectors of the user blocks, and repeats
/// `G <- u_1 u_1^H`, solve, until the relative decrease is at most
/// `inner_tol`.
pub fn dc_solve(
    h: &[CMat],
    gamma: &[f64],
    topo: &Topology,
    weights: &DMatrix<f64>,
    mu: f64,
    settings: &AlgoSettings,
) -> Result<DcOutcome> {
    let layout = LiftedVariableLayout::new(topo);
    let base = LiftedObjective::reweighted(topo, weights);
    let relax = assemble_robust_program(h, gamma, topo, &base)?.solve(&solver_settings())?;
    if mu == 0.0 {
        let r = rank_one_residual(&relax.v);
        return Ok(DcOutcome {
            trace: vec![relax.objective],
            rank_residual: r,
            solution: relax,
            solves: 1,
        });
    }
    let (b0, block_res) = extract_per_user(&layout, &relax.v);
    let relax_trace: f64 = (0..relax.v.nrows()).map(|i| relax.v[(i, i)].re).sum();
    let mut current = outer(&b0);
    if block_res <= settings.rank_tol * relax_trace {
        // The aligned matrix attains the relaxation bound with a zero
        // penalty, so it already solves every linearized program.
        let f0 = base.eval(&layout, &current);
        let rank_residual = rank_one_residual(&current);
        return Ok(DcOutcome {
            solution: LiftedSolution {
                v: current,
                objective: f0,
                ..relax
            },
            trace: vec![f0],
            rank_residual,
            solves: 1,
        });
    }
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    let mut last = None;
    let mut solves = 1;
    for _ in 0..settings.inner_max {
        let mut obj = base.clone();
        obj.mu = mu;
        obj.g = Some(spectral_subgradient(&current));
        let sol = assemble_robust_program(h, gamma, topo, &obj)?.solve(&solver_settings())?;
        solves += 1;
        trace.push(sol.objective);
        let f = sol.objective;
        current = sol.v.clone();
        last = Some(sol);
        if prev.is_finite() && prev - f <= settings.inner_tol * prev.abs().max(1e-12) {
            break;
        }
        prev = f;
    }
    let solution = last.expect("inner_max >= 1");
    Ok(DcOutcome {
        rank_residual: rank_one_residual(&solution.v),
        solution,
        trace,
        solves,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Reweighted loop with the rank penalty (proposed).
    ReweightedDc,
    /// Reweighted loop on the plain relaxation.
    ReweightedSdr,
    /// Fixed-weight mixed l1/l2 surrogate, single relaxation solve.
    MixedL1L2,
    /// Robust relaxation with every task at every AP.
    CbSdr,
    /// Single-sample relaxation with every task at every AP.
    NonRobust,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::ReweightedDc,
        Method::ReweightedSdr,
        Method::MixedL1L2,
        Method::CbSdr,
        Method::NonRobust,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::ReweightedDc => "reweighted-dc",
            Method::ReweightedSdr => "reweighted-sdr",
            Method::MixedL1L2 => "mixed-l1l2",
            Method::CbSdr => "cb-sdr",
            Method::NonRobust => "non-robust",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OuterRecord {
    pub iteration: usize,
    pub surrogate: f64,
    pub rank_residual: f64,
    pub active_groups: usize,
    pub ap_power: Vec<f64>,
    pub inner_solves: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub method: Method,
    pub trace: Vec<OuterRecord>,
    pub lifted: CMat,
    pub beamformer: Beamformer,
    pub pattern: Pattern,
    /// `sum (1/eta_n) ||v_nk||^2` of the reported beamformer.
    pub transmit_power: f64,
    pub compute_power: f64,
    pub total_power: f64,
    /// `R(V)` of the final lifted matrix; per-block sum for block solutions.
    pub rank_residual: f64,
    /// True when the beamformer was read off a matrix failing the rank test.
    pub approximate: bool,
    pub converged: bool,
    pub seconds: f64,
}

impl RunReport {
    pub fn active_groups(&self) -> usize {
        self.pattern.len()
    }

    pub const CSV_HEADER: &'static str =
        "row,iteration,surrogate,rank_residual,active_groups,max_ap_power,inner_solves,seconds,total_power";

    /// One row per outer iteration and a final `summary` row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.trace {
            let maxp = r.ap_power.iter().copied().fold(0.0, f64::max);
            writeln!(
                out,
                "iter,{},{:e},{:e},{},{:e},{},{:.6},",
                r.iteration, r.surrogate, r.rank_residual, r.active_groups, maxp, r.inner_solves, r.seconds
            )?;
        }
        let last = self.trace.last();
        let maxp = last.map(|r| r.ap_power.iter().copied().fold(0.0, f64::max)).unwrap_or(0.0);
        writeln!(
            out,
            "summary,{},{:e},{:e},{},{:e},{},{:.6},{:e}",
            self.trace.len(),
            last.map(|r| r.surrogate).unwrap_or(f64::NAN),
            self.rank_residual,
            self.pattern.len(),
            maxp,
            self.trace.iter().map(|r| r.inner_solves).sum::<usize>(),
            self.seconds,
            self.total_power
        )
    }
}

fn ap_powers(layout: &LiftedVariableLayout, v: &CMat) -> Vec<f64> {
    let tr = layout.group_traces(v);
    (0..layout.n_aps).map(|n| tr.row(n).sum()).collect()
}

fn transmit_part(topo: &Topology, b: &Beamformer) -> f64 {
    total_power(topo, b, &Pattern::new())
}

fn compute_part(topo: &Topology, pattern: &Pattern) -> f64 {
    pattern.iter().map(|&(n, k)| topo.compute_power[(n, k)]).sum()
}

/// Largest common scaling `alpha` of `b` allowed by the per-AP power limits.
fn max_scale(topo: &Topology, b: &Beamformer) -> f64 {
    (0..topo.n_aps())
        .map(|n| {
            let p = b.ap_power(topo, n);
            if p > 0.0 {
                (topo.max_tx_power[n] / p).sqrt()
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn scaled(b: &Beamformer, alpha: f64) -> Beamformer {
    Beamformer {
        v: &b.v * C64::new(alpha, 0.0),
    }
}

fn robust_ok(h: &[CMat], gamma: &[f64], topo: &Topology, b: &Beamformer, margin_tol: f64) -> Result<bool> {
    Ok(robust_margins(h, gamma, topo, &outer(b))?.iter().all(|&m| m >= -margin_tol))
}

/// Zeros the groups below `tol` one at a time. A zeroing is kept when the
/// robust QoS constraints hold after scaling the whole beamformer up by at
/// most the factor the per-AP power limits allow. The final beamformer is
/// scaled by the smallest such factor found by bisection. Returns the
/// beamformer and the pattern actually used.
fn truncate_verified(
    h: &[CMat],
    gamma: &[f64],
    topo: &Topology,
    b: &Beamformer,
    tol: f64,
    margin_tol: f64,
) -> Result<(Beamformer, Pattern)> {
    let keep = sparsity_pattern(topo, b, tol);
    let mut out = b.clone();
    let mut pattern = topo.all_pairs();
    for n in 0..topo.n_aps() {
        for k in 0..topo.n_users() {
            if keep.contains(&(n, k)) {
                continue;
            }
            let mut trial = out.clone();
            trial.zero_group(topo, n, k);
            let alpha = max_scale(topo, &trial).max(1.0);
            let probe = if alpha.is_finite() { scaled(&trial, alpha) } else { trial.clone() };
            if robust_ok(h, gamma, topo, &probe, margin_tol)? {
                out = trial;
                pattern.remove(&(n, k));
            }
        }
    }
    if pattern.len() == topo.n_users() * topo.n_aps() || robust_ok(h, gamma, topo, &out, margin_tol)? {
        return Ok((out, pattern));
    }
    let mut lo = 1.0;
    let mut hi = max_scale(topo, &out).max(1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if robust_ok(h, gamma, topo, &scaled(&out, mid), margin_tol)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    Ok((scaled(&out, hi), pattern))
}

/// Outer reweighting loop shared by the DC and relaxation variants.
fn reweighted(
    h: &[CMat],
    gamma: &[f64],
    topo: &Topology,
    settings: &AlgoSettings,
    mu: f64,
    method: Method,
) -> Result<RunReport> {
    settings.validate()?;
    let start = Instant::now();
    let layout = LiftedVariableLayout::new(topo);
    let c = settings.c();
    let mut weights = DMatrix::from_element(topo.n_aps(), topo.n_users(), 1.0);
    let mut trace = Vec::new();
    let mut prev_f = f64::INFINITY;
    let mut converged = false;
    let mut outcome = None;
    let mut used = weights.clone();
    for it in 0..settings.outer_max {
        let dc = dc_solve(h, gamma, topo, &weights, mu, settings)?;
        used = weights.clone();
        let v = &dc.solution.v;
        let f = surrogate_objective(topo, v, settings.tau, mu);
        trace.push(OuterRecord {
            iteration: it + 1,
            surrogate: f,
            rank_residual: dc.rank_residual,
            active_groups: sparsity_pattern_lifted(&layout, v, settings.sparsity_tol).len(),
            ap_power: ap_powers(&layout, v),
            inner_solves: dc.solves,
            seconds: start.elapsed().as_secs_f64(),
        });
        weights = update_weights(&layout, v, settings.tau, c);
        let done = prev_f.is_finite() && (prev_f - f).abs() <= settings.outer_tol * prev_f.abs().max(1e-12);
        prev_f = f;
        outcome = Some(dc);
        if done {
            converged = true;
            break;
        }
    }
    let mut dc = outcome.expect("outer_max >= 1");

    let rank_limit = |dc: &DcOutcome| settings.rank_tol * dc.solution.v.trace().re.max(0.0);
    let (b, approximate, rank_residual) = if mu > 0.0 {
        if dc.rank_residual > rank_limit(&dc) {
            // one retry at the final weights with a stronger penalty
            dc = dc_solve(h, gamma, topo, &used, mu * settings.mu_retry_factor, settings)?;
        }
        match extract_beamformer(&dc.solution.v, settings.rank_tol) {
            Ok(b) => (b, false, dc.rank_residual),
            Err(Error::ExtractionRefused { .. }) => {
                let (b, _) = extract_per_user(&layout, &dc.solution.v);
                (b, true, dc.rank_residual)
            }
            Err(e) => return Err(e),
        }
    } else {
        let (b, res) = extract_per_user(&layout, &dc.solution.v);
        (b, res > settings.rank_tol * dc.solution.v.trace().re.max(0.0), res)
    };
    let (b, pattern) = truncate_verified(h, gamma, topo, &b, settings.sparsity_tol, 1e-9)?;
    let transmit = transmit_part(topo, &b);
    let compute = compute_part(topo, &pattern);
    Ok(RunReport {
        method,
        trace,
        lifted: dc.solution.v,
        beamformer: b,
        pattern,
        transmit_power: transmit,
        compute_power: compute,
        total_power: transmit + compute,
        rank_residual,
        approximate,
        converged,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Proposed method: reweighted outer loop with the rank-penalized inner loop.
pub fn reweighted_power_min(h: &[CMat], gamma: &[f64], topo: &Topology, settings: &AlgoSettings) -> Result<RunReport> {
    reweighted(h, gamma, topo, settings, settings.mu, Method::ReweightedDc)
}

/// Same outer loop with `mu = 0`.
pub fn reweighted_sdr(h: &[CMat], gamma: &[f64], topo: &Topology, settings: &AlgoSettings) -> Result<RunReport> {
    reweighted(h, gamma, topo, settings, 0.0, Method::ReweightedSdr)
}

fn single_solve_report(
    method: Method,
    topo: &Topology,
    sol: LiftedSolution,
    pattern: Option<Pattern>,
    settings: &AlgoSettings,
    start: Instant,
) -> RunReport {
    let layout = LiftedVariableLayout::new(topo);
    let (b, res) = extract_per_user(&layout, &sol.v);
    let pattern = pattern.unwrap_or_else(|| sparsity_pattern_lifted(&layout, &sol.v, settings.sparsity_tol));
    let transmit = transmit_part(topo, &b);
    let compute = compute_part(topo, &pattern);
    let record = OuterRecord {
        iteration: 1,
        surrogate: surrogate_objective(topo, &sol.v, settings.tau, 0.0),
        rank_residual: res,
        active_groups: pattern.len(),
        ap_power: ap_powers(&layout, &sol.v),
        inner_solves: 1,
        seconds: start.elapsed().as_secs_f64(),
    };
    RunReport {
        method,
        trace: vec![record],
        approximate: res > settings.rank_tol * sol.v.trace().re.max(0.0),
        lifted: sol.v,
        beamformer: b,
        pattern,
        transmit_power: transmit,
        compute_power: compute,
        total_power: transmit + compute,
        rank_residual: res,
        converged: true,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Robust relaxation with the full task pattern; the objective carries all
/// computation power as a constant.
pub fn baseline_robust_cb(h: &[CMat], gamma: &[f64], topo: &Topology, settings: &AlgoSettings) -> Result<RunReport> {
    let start = Instant::now();
    let obj = LiftedObjective {
        group_cost: DMatrix::from_fn(topo.n_aps(), topo.n_users(), |n, _| 1.0 / topo.amplifier_efficiency[n]),
        mu: 0.0,
        g: None,
        offset: topo.compute_power.sum(),
    };
    let sol = assemble_robust_program(h, gamma, topo, &obj)?.solve(&solver_settings())?;
    Ok(single_solve_report(Method::CbSdr, topo, sol, Some(topo.all_pairs()), settings, start))
}

/// Fixed group weights `rho_nl = sqrt(P^c_nl)` added to the transmit cost,
/// one relaxation solve. Stand-in for the weighted mixed l1/l2 method.
pub fn baseline_mixed_l1l2(h: &[CMat], gamma: &[f64], topo: &Topology, settings: &AlgoSettings) -> Result<RunReport> {
    let start = Instant::now();
    let obj = LiftedObjective {
        group_cost: DMatrix::from_fn(topo.n_aps(), topo.n_users(), |n, l| {
            1.0 / topo.amplifier_efficiency[n] + topo.compute_power[(n, l)].sqrt()
        }),
        mu: 0.0,
        g: None,
        offset: 0.0,
    };
    let sol = assemble_robust_program(h, gamma, topo, &obj)?.solve(&solver_settings())?;
    let layout = LiftedVariableLayout::new(topo);
    let (b, _) = extract_per_user(&layout, &sol.v);
    let (b, pattern) = truncate_verified(h, gamma, topo, &b, settings.sparsity_tol, 1e-9)?;
    let mut report = single_solve_report(Method::MixedL1L2, topo, sol, Some(pattern), settings, start);
    report.transmit_power = transmit_part(topo, &b);
    report.total_power = report.transmit_power + report.compute_power;
    report.beamformer = b;
    Ok(report)
}

/// Nominal design from a single channel sample, every task at every AP.
pub fn baseline_nonrobust(h1: &ChannelSample, gamma: &[f64], topo: &Topology, settings: &AlgoSettings) -> Result<RunReport> {
    let start = Instant::now();
    let sol = assemble_nominal_program(h1, gamma, topo)?.solve(&solver_settings())?;
    Ok(single_solve_report(Method::NonRobust, topo, sol, Some(topo.all_pairs()), settings, start))
}

/// Dispatch on a robust method. `NonRobust` uses the first column of each
/// `H_k` as its single sample.
pub fn run_method(method: Method, h: &[CMat], gamma: &[f64], topo: &Topology, settings: &AlgoSettings) -> Result<RunReport> {
    match method {
        Method::ReweightedDc => reweighted_power_min(h, gamma, topo, settings),
        Method::ReweightedSdr => reweighted_sdr(h, gamma, topo, settings),
        Method::MixedL1L2 => baseline_mixed_l1l2(h, gamma, topo, settings),
        Method::CbSdr => baseline_robust_cb(h, gamma, topo, settings),
        Method::NonRobust => {
            let mut v = DVector::from_element(topo.dim(), C64::new(0.0, 0.0));
            for (k, hk) in h.iter().enumerate() {
                v.rows_mut(topo.user_range(k).start, topo.user_dim()).copy_from(&hk.column(0));
            }
            baseline_nonrobust(&ChannelSample { h: v }, gamma, topo, settings)
        }
    }
}

pub fn feasibility_robust(h: &[CMat], gamma: &[f64], topo: &Topology) -> Result<Feasibility> {
    assemble_robust_feasibility(h, gamma, topo)?.feasibility(&solver_settings())
}

/// Per-sample feasibility by constraint generation: solve on a working set,
/// add the most violated samples, repeat. An infeasible working set
/// certifies infeasibility of the full set.
pub fn feasibility_scenario(samples: &[ChannelSample], gamma: &[f64], topo: &Topology) -> Result<Feasibility> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let layout = LiftedVariableLayout::new(topo);
    let mut working: Vec<usize> = vec![0];
    loop {
        let subset: Vec<ChannelSample> = working.iter().map(|&i| samples[i].clone()).collect();
        let prog = assemble_scenario_program(&subset, gamma, topo, None)?;
        let sol = match prog.solve(&solver_settings()) {
            Ok(s) => s,
            Err(Error::Infeasible) => return Ok(Feasibility::Infeasible),
            Err(e) => return Err(e),
        };
        let mut violations: Vec<(f64, usize)> = Vec::new();
        for (i, s) in samples.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let worst = (0..topo.n_users())
                .map(|k| sample_margin(&layout, &sol.v, &s.user(topo, k), k, gamma[k], topo.noise_power[k]))
                .fold(f64::INFINITY, f64::min);
            if worst < -1e-7 {
                violations.push((worst, i));
            }
        }
        if violations.is_empty() {
            return Ok(Feasibility::Feasible);
        }
        violations.sort_by(|a, b| a.0.total_cmp(&b.0));
        working.extend(violations.iter().take(8).map(|v| v.1));
    }
}

/// `h^H ((1/gamma) V_kk - sum_{l != k} V_ll) h / sigma^2 - 1`.
pub fn sample_margin(layout: &LiftedVariableLayout, v: &CMat, h_k: &DVector<C64>, k: usize, gamma: f64, noise: f64) -> f64 {
    let mut acc = 0.0;
    for l in 0..layout.n_users {
        let p = h_k.dotc(&(layout.v_ll(v, l) * h_k)).re;
        acc += if l == k { p / gamma } else { -p };
    }
    acc / noise - 1.0
}

/// Relative slack when counting `SINR >= gamma`, at the level of the
/// solver accuracy.
pub const QOS_TOL: f64 = 1e-6;

/// Number of channels on which a beamformer meets `gamma_k`, per user.
pub fn qos_counts(topo: &Topology, b: &Beamformer, channels: &[ChannelSample], gamma: &[f64]) -> Vec<usize> {
    (0..topo.n_users())
        .map(|k| {
            channels
                .iter()
                .filter(|c| sinr(topo, b, &c.user(topo, k), k, topo.noise_power[k]) >= gamma[k] * (1.0 - QOS_TOL))
                .count()
        })
        .collect()
}

/// Largest relative gap over users between the SINR computed from `V` and
/// from the vector `b` on channel `h`.
pub fn sinr_consistency(topo: &Topology, v: &CMat, b: &Beamformer, h: &ChannelSample) -> f64 {
    let layout = LiftedVariableLayout::new(topo);
    (0..topo.n_users())
        .map(|k| {
            let hk = h.user(topo, k);
            let noise = topo.noise_power[k];
            let lifted = lifted_sinr(&layout, v, &hk, k, noise);
            let vector = sinr(topo, b, &hk, k, noise);
            (lifted - vector).abs() / lifted.abs().max(vector.abs()).max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}
