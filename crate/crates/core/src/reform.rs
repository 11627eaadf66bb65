//! Lifted conic programs for robust and sample-based QoS constraints.
//!
//! Channels enter the programs normalized by the noise standard deviation,
//! so every QoS constraint reads `... >= 1` and the multipliers are carried
//! as `lambda / sigma^2`. Reported multipliers are in the original scale.
//!
//! The lifted variable is either the full `NKL x NKL` matrix `V` (needed
//! when the rank penalty couples user blocks) or only its `K` diagonal
//! blocks `V_kk`. Constraints and the transmit-power objective read the
//! diagonal blocks only, so for a pure relaxation the block form has the
//! same optimal value.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rgsb_sdp::linalg::{c64, hermitian_defect, identity, min_eigenvalue};
use rgsb_sdp::{
    solve, Block, CMat, ConicProgram, ProgramBuilder, Row, Settings, SolverSolution, Status, Term, C64,
};

use crate::channel::{sinr, Beamformer, ChannelSample, Topology};
use crate::error::{Error, Result};
use crate::stats::ln_binomial_cdf;
use crate::uncertainty::UncertaintyRegion;

/// Index bookkeeping for the lifted matrix `V = v v^H`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LiftedVariableLayout {
    pub n_aps: usize,
    pub n_users: usize,
    pub antennas: usize,
}

impl LiftedVariableLayout {
    pub fn new(topo: &Topology) -> Self {
        LiftedVariableLayout {
            n_aps: topo.n_aps(),
            n_users: topo.n_users(),
            antennas: topo.antennas,
        }
    }

    pub fn user_dim(&self) -> usize {
        self.n_aps * self.antennas
    }

    pub fn dim(&self) -> usize {
        self.user_dim() * self.n_users
    }

    /// Rows/columns of `V_ll`.
    pub fn user_range(&self, l: usize) -> std::ops::Range<usize> {
        l * self.user_dim()..(l + 1) * self.user_dim()
    }

    /// Rows/columns of `V_ll[n, n]`.
    pub fn group_range(&self, n: usize, l: usize) -> std::ops::Range<usize> {
        let start = l * self.user_dim() + n * self.antennas;
        start..start + self.antennas
    }

    pub fn v_ll(&self, v: &CMat, l: usize) -> CMat {
        let r = self.user_range(l);
        v.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }

    pub fn v_ll_nn(&self, v: &CMat, l: usize, n: usize) -> CMat {
        let r = self.group_range(n, l);
        v.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }

    /// `Tr(V_ll[n, n])`.
    pub fn group_trace(&self, v: &CMat, n: usize, l: usize) -> f64 {
        self.group_range(n, l).map(|i| v[(i, i)].re).sum()
    }

    /// `N x K` matrix of group traces.
    pub fn group_traces(&self, v: &CMat) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_aps, self.n_users, |n, l| self.group_trace(v, n, l))
    }
}

/// Linear functional `V -> sum_l Tr(V_ll[n, n])`.
#[derive(Clone, Debug, PartialEq)]
pub struct TxPowerFunctional {
    pub ap: usize,
    pub indices: Vec<usize>,
}

impl TxPowerFunctional {
    pub fn eval(&self, v: &CMat) -> f64 {
        self.indices.iter().map(|&i| v[(i, i)].re).sum()
    }
}

pub fn tx_power_functional(layout: &LiftedVariableLayout, n: usize) -> Result<TxPowerFunctional> {
    if n >= layout.n_aps {
        return Err(Error::InvalidArgument(format!("AP index {n} out of range")));
    }
    Ok(TxPowerFunctional {
        ap: n,
        indices: (0..layout.n_users).flat_map(|l| layout.group_range(n, l)).collect(),
    })
}

/// Robust QoS constraint of one user as an LMI in `(V, lambda)`:
/// `H^H ((1/gamma) V_kk - sum_{l != k} V_ll) H - diag(lambda + sigma^2, -lambda I) >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct QosConstraint {
    pub user: usize,
    pub gamma: f64,
    pub noise: f64,
    pub h: CMat,
}

pub fn qos_constraint(h: &CMat, user: usize, gamma: f64, noise: f64, layout: &LiftedVariableLayout) -> Result<QosConstraint> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("target SINR must be positive, got {gamma}")));
    }
    if !(noise > 0.0) {
        return Err(Error::InvalidArgument("noise power must be positive".into()));
    }
    if h.nrows() != layout.user_dim() || user >= layout.n_users {
        return Err(Error::Dimension(format!("H has {} rows, expected {}", h.nrows(), layout.user_dim())));
    }
    Ok(QosConstraint {
        user,
        gamma,
        noise,
        h: h.clone(),
    })
}

impl QosConstraint {
    /// `(1/gamma) V_kk - sum_{l != k} V_ll`.
    pub fn phi(&self, layout: &LiftedVariableLayout, v: &CMat) -> CMat {
        let mut out = CMat::zeros(layout.user_dim(), layout.user_dim());
        for l in 0..layout.n_users {
            let a = if l == self.user { 1.0 / self.gamma } else { -1.0 };
            out += layout.v_ll(v, l) * c64(a, 0.0);
        }
        out
    }

    pub fn q(&self, lambda: f64) -> CMat {
        let m = self.h.ncols();
        let mut q = CMat::zeros(m, m);
        q[(0, 0)] = c64(lambda + self.noise, 0.0);
        for i in 1..m {
            q[(i, i)] = c64(-lambda, 0.0);
        }
        q
    }

    /// The LMI matrix; PSD iff the constraint holds.
    pub fn matrix(&self, layout: &LiftedVariableLayout, v: &CMat, lambda: f64) -> CMat {
        self.h.adjoint() * self.phi(layout, v) * &self.h - self.q(lambda)
    }

    /// `max_{lambda >= 0} lambda_min(matrix(V, lambda)) / sigma^2` and the
    /// maximizer. Nonnegative iff some multiplier certifies the constraint.
    pub fn robust_margin(&self, layout: &LiftedVariableLayout, v: &CMat) -> (f64, f64) {
        let a = self.h.adjoint() * self.phi(layout, v) * &self.h;
        let g = |lambda: f64| min_eigenvalue(&(&a - self.q(lambda))) / self.noise;
        // concave in lambda: bracket the maximizer, then golden-section search
        let mut lo = 0.0;
        let mut hi = self.noise;
        let mut ghi = g(hi);
        let g0 = g(0.0);
        if ghi <= g0 {
            hi = self.noise;
        } else {
            loop {
                let next = 2.0 * hi;
                let gn = g(next);
                if gn <= ghi || next > 1e30 * self.noise {
                    hi = next;
                    break;
                }
                lo = hi / 2.0;
                hi = next;
                ghi = gn;
            }
        }
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a1, mut b1) = (lo, hi);
        let mut x1 = b1 - phi * (b1 - a1);
        let mut x2 = a1 + phi * (b1 - a1);
        let (mut f1, mut f2) = (g(x1), g(x2));
        for _ in 0..100 {
            if f1 < f2 {
                a1 = x1;
                x1 = x2;
                f1 = f2;
                x2 = a1 + phi * (b1 - a1);
                f2 = g(x2);
            } else {
                b1 = x2;
                x2 = x1;
                f2 = f1;
                x1 = b1 - phi * (b1 - a1);
                f1 = g(x1);
            }
        }
        let (mut best, mut arg) = if f1 > f2 { (f1, x1) } else { (f2, x2) };
        if g0 > best {
            best = g0;
            arg = 0.0;
        }
        (best, arg)
    }
}

/// How the lifted variable is represented in a program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariableForm {
    /// One `NKL x NKL` block.
    Full,
    /// `K` blocks `V_kk` of size `NL`.
    PerUser,
}

/// A program over the lifted variable with enough bookkeeping to read the
/// solution back.
#[derive(Clone, Debug)]
pub struct LiftedProgram {
    pub program: ConicProgram,
    pub form: VariableForm,
    pub layout: LiftedVariableLayout,
    /// Noise powers used to undo the normalization of the multipliers.
    noise: Vec<f64>,
    /// Index of the nonnegative block holding multipliers then slacks.
    lp_block: usize,
    /// Number of multipliers at the start of the nonnegative block.
    n_lambda: usize,
}

/// Lifted solution read back from the solver.
#[derive(Clone, Debug)]
pub struct LiftedSolution {
    pub v: CMat,
    /// Robust multipliers in the original scale (empty for sample programs).
    pub lambda: DVector<f64>,
    pub objective: f64,
    pub status: Status,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible,
}

struct VBlocks {
    form: VariableForm,
    layout: LiftedVariableLayout,
    blocks: Vec<usize>,
}

impl VBlocks {
    fn new(builder: &mut ProgramBuilder, form: VariableForm, layout: LiftedVariableLayout) -> Self {
        let blocks = match form {
            VariableForm::Full => vec![builder.add_psd(layout.dim())],
            VariableForm::PerUser => (0..layout.n_users).map(|_| builder.add_psd(layout.user_dim())).collect(),
        };
        VBlocks { form, layout, blocks }
    }

    fn block(&self, l: usize) -> usize {
        match self.form {
            VariableForm::Full => self.blocks[0],
            VariableForm::PerUser => self.blocks[l],
        }
    }

    fn offset(&self, l: usize) -> usize {
        match self.form {
            VariableForm::Full => l * self.layout.user_dim(),
            VariableForm::PerUser => 0,
        }
    }

    fn block_dim(&self) -> usize {
        match self.form {
            VariableForm::Full => self.layout.dim(),
            VariableForm::PerUser => self.layout.user_dim(),
        }
    }

    /// Registers `x` (length `NL`) placed in the slot of user block `l`.
    fn add_vector(&self, builder: &mut ProgramBuilder, l: usize, x: &DVector<C64>) -> usize {
        let mut full = DVector::from_element(self.block_dim(), C64::new(0.0, 0.0));
        full.rows_mut(self.offset(l), x.len()).copy_from(x);
        builder.add_vector(self.block(l), full)
    }

    fn diag_index(&self, n: usize, l: usize, a: usize) -> usize {
        self.offset(l) + n * self.layout.antennas + a
    }

    fn assemble(&self, sol_x: &rgsb_sdp::BlockVec) -> CMat {
        match self.form {
            VariableForm::Full => sol_x.psd(self.blocks[0]).clone(),
            VariableForm::PerUser => {
                let mut v = CMat::zeros(self.layout.dim(), self.layout.dim());
                for l in 0..self.layout.n_users {
                    let r = self.layout.user_range(l);
                    v.view_mut((r.start, r.start), (r.len(), r.len()))
                        .copy_from(sol_x.psd(self.blocks[l]));
                }
                v
            }
        }
    }
}

fn phi_coef(k: usize, l: usize, gamma: f64) -> f64 {
    if l == k {
        1.0 / gamma
    } else {
        -1.0
    }
}

/// Rows `sum_l Tr(V_ll[n, n]) + t_n = P_n`.
fn add_tx_rows(builder: &mut ProgramBuilder, vb: &VBlocks, topo: &Topology, lp: usize, first: usize) {
    let layout = vb.layout;
    for n in 0..layout.n_aps {
        let mut row = Row::with_rhs(topo.max_tx_power[n]);
        for l in 0..layout.n_users {
            let terms: Vec<Term> = (0..layout.antennas)
                .map(|a| {
                    let i = vb.diag_index(n, l, a);
                    Term::real(1.0, i, i)
                })
                .collect();
            row.psd_terms(vb.block(l), terms);
        }
        row.lp_entry(lp, first + n, 1.0);
        builder.add_row(row);
    }
}

/// Robust QoS rows `Hb^H Phi_k(V) Hb - Q_k(lambda) - S_k = 0` with a PSD slack
/// `S_k`, one row per real degree of freedom of the Hermitian equation.
fn add_robust_rows(
    builder: &mut ProgramBuilder,
    vb: &VBlocks,
    hbar: &[CMat],
    gamma: &[f64],
    lp: usize,
) {
    let layout = vb.layout;
    let kk = layout.n_users;
    let m = layout.user_dim() + 1;
    for k in 0..kk {
        // idx[l][p]: column p of Hb_k placed in block l
        let idx: Vec<Vec<usize>> = (0..kk)
            .map(|l| {
                (0..m)
                    .map(|p| vb.add_vector(builder, l, &hbar[k].column(p).into_owned()))
                    .collect()
            })
            .collect();
        let slack = builder.add_psd(m);
        for p in 0..m {
            for q in p..m {
                let parts: &[bool] = if p == q { &[false] } else { &[false, true] };
                for &imag in parts {
                    let rot = if imag { c64(0.0, -1.0) } else { c64(1.0, 0.0) };
                    let rhs = if p == 0 && q == 0 { 1.0 } else { 0.0 };
                    let mut row = Row::with_rhs(rhs);
                    for l in 0..kk {
                        let coef = rot * phi_coef(k, l, gamma[k]);
                        row.psd_terms(vb.block(l), [Term::new(coef, idx[l][q], idx[l][p])]);
                    }
                    row.psd_terms(slack, [Term::new(-rot, q, p)]);
                    if p == q {
                        row.lp_entry(lp, k, if p == 0 { -1.0 } else { 1.0 });
                    }
                    builder.add_row(row);
                }
            }
        }
    }
}

fn check_inputs(topo: &Topology, gamma: &[f64], weights: Option<&DMatrix<f64>>) -> Result<()> {
    topo.validate()?;
    if gamma.len() != topo.n_users() {
        return Err(Error::Dimension(format!("{} targets for {} users", gamma.len(), topo.n_users())));
    }
    if gamma.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidArgument("target SINRs must be positive and finite".into()));
    }
    if let Some(w) = weights {
        if w.nrows() != topo.n_aps() || w.ncols() != topo.n_users() {
            return Err(Error::Dimension("weights must be N x K".into()));
        }
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
    }
    Ok(())
}

fn normalized_h(topo: &Topology, h: &[CMat]) -> Result<Vec<CMat>> {
    if h.len() != topo.n_users() {
        return Err(Error::Dimension(format!("{} H matrices for {} users", h.len(), topo.n_users())));
    }
    let d = topo.user_dim();
    h.iter()
        .enumerate()
        .map(|(k, hk)| {
            if hk.nrows() != d || hk.ncols() != d + 1 {
                return Err(Error::Dimension(format!("H_{k} is {}x{}, expected {d}x{}", hk.nrows(), hk.ncols(), d + 1)));
            }
            Ok(hk * c64(1.0 / topo.noise_power[k].sqrt(), 0.0))
        })
        .collect()
}

/// Per-group linear cost `C[(n, l)] Tr(V_ll[n, n])` plus `mu (Tr V - Tr(G V))`.
#[derive(Clone, Debug)]
pub struct LiftedObjective {
    pub group_cost: DMatrix<f64>,
    pub mu: f64,
    pub g: Option<CMat>,
    pub offset: f64,
}

impl LiftedObjective {
    pub fn zero(topo: &Topology) -> Self {
        LiftedObjective {
            group_cost: DMatrix::zeros(topo.n_aps(), topo.n_users()),
            mu: 0.0,
            g: None,
            offset: 0.0,
        }
    }

    /// `1 / eta_n + w_nl P^c_nl`.
    pub fn reweighted(topo: &Topology, weights: &DMatrix<f64>) -> Self {
        LiftedObjective {
            group_cost: DMatrix::from_fn(topo.n_aps(), topo.n_users(), |n, l| {
                1.0 / topo.amplifier_efficiency[n] + weights[(n, l)] * topo.compute_power[(n, l)]
            }),
            mu: 0.0,
            g: None,
            offset: 0.0,
        }
    }

    /// Value at a lifted matrix.
    pub fn eval(&self, layout: &LiftedVariableLayout, v: &CMat) -> f64 {
        let tr = layout.group_traces(v);
        let mut f = self.offset + tr.component_mul(&self.group_cost).sum();
        if self.mu > 0.0 {
            let total: f64 = (0..v.nrows()).map(|i| v[(i, i)].re).sum();
            let gv = self.g.as_ref().map(|g| rgsb_sdp::linalg::herm_inner(g, v)).unwrap_or(0.0);
            f += self.mu * (total - gv);
        }
        f
    }
}

fn set_objective(builder: &mut ProgramBuilder, vb: &VBlocks, obj: &LiftedObjective) -> Result<()> {
    let layout = vb.layout;
    if obj.mu > 0.0 && vb.form != VariableForm::Full {
        return Err(Error::InvalidArgument("rank penalty needs the full lifted variable".into()));
    }
    if obj.group_cost.iter().any(|c| !c.is_finite()) || !(obj.mu >= 0.0) {
        return Err(Error::InvalidArgument("objective coefficients must be finite, mu >= 0".into()));
    }
    for l in 0..layout.n_users {
        let dim = vb.block_dim();
        let mut c = CMat::zeros(dim, dim);
        for n in 0..layout.n_aps {
            for a in 0..layout.antennas {
                let i = vb.diag_index(n, l, a);
                c[(i, i)] = c64(obj.group_cost[(n, l)], 0.0);
            }
        }
        builder.add_objective_psd(vb.block(l), &c);
    }
    if obj.mu > 0.0 {
        let n = layout.dim();
        let mut c = identity(n);
        if let Some(g) = &obj.g {
            if g.nrows() != n || g.ncols() != n {
                return Err(Error::Dimension("G must match V".into()));
            }
            if hermitian_defect(g) > 1e-10 * (1.0 + g.norm()) {
                return Err(Error::InvalidArgument("G must be Hermitian".into()));
            }
            c -= g;
        }
        builder.add_objective_psd(vb.blocks[0], &(c * c64(obj.mu, 0.0)));
    }
    builder.set_offset(obj.offset);
    Ok(())
}

/// Robust program with `K` QoS LMIs, per-AP power limits and the given
/// objective. The full lifted variable is used exactly when `mu > 0`.
pub fn assemble_robust_program(
    h: &[CMat],
    gamma: &[f64],
    topo: &Topology,
    objective: &LiftedObjective,
) -> Result<LiftedProgram> {
    check_inputs(topo, gamma, Some(&objective.group_cost.map(|c| c.abs())))?;
    let hbar = normalized_h(topo, h)?;
    let layout = LiftedVariableLayout::new(topo);
    let form = if objective.mu > 0.0 { VariableForm::Full } else { VariableForm::PerUser };
    let mut builder = ProgramBuilder::new();
    let vb = VBlocks::new(&mut builder, form, layout);
    let kk = layout.n_users;
    let lp = builder.add_nonneg(kk + layout.n_aps);
    add_robust_rows(&mut builder, &vb, &hbar, gamma, lp);
    add_tx_rows(&mut builder, &vb, topo, lp, kk);
    set_objective(&mut builder, &vb, objective)?;
    Ok(LiftedProgram {
        program: builder.build()?,
        form,
        layout,
        noise: topo.noise_power.clone(),
        lp_block: lp,
        n_lambda: kk,
    })
}

/// One iterate of the penalized reweighted problem: group costs
/// `1/eta_n + w_nl P^c_nl`, plus `mu (Tr V - Tr(G V))`.
pub fn assemble_dc_iterate_program(
    h: &[CMat],
    gamma: &[f64],
    topo: &Topology,
    weights: &DMatrix<f64>,
    mu: f64,
    g: Option<&CMat>,
) -> Result<LiftedProgram> {
    check_inputs(topo, gamma, Some(weights))?;
    if !(mu >= 0.0) {
        return Err(Error::InvalidArgument("mu must be nonnegative".into()));
    }
    let mut obj = LiftedObjective::reweighted(topo, weights);
    obj.mu = mu;
    obj.g = g.cloned();
    assemble_robust_program(h, gamma, topo, &obj)
}

/// Robust constraint system with a zero objective.
pub fn assemble_robust_feasibility(h: &[CMat], gamma: &[f64], topo: &Topology) -> Result<LiftedProgram> {
    assemble_robust_program(h, gamma, topo, &LiftedObjective::zero(topo))
}

/// Rows `h^H ((1/gamma) V_kk - sum_{l != k} V_ll) h - t = sigma^2` for every
/// user and sample, plus the power limits. Block-form variable.
pub fn assemble_scenario_program(
    samples: &[ChannelSample],
    gamma: &[f64],
    topo: &Topology,
    objective: Option<&LiftedObjective>,
) -> Result<LiftedProgram> {
    check_inputs(topo, gamma, None)?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if samples.iter().any(|s| s.h.len() != topo.dim()) {
        return Err(Error::Dimension("sample length does not match topology".into()));
    }
    let layout = LiftedVariableLayout::new(topo);
    let mut builder = ProgramBuilder::new();
    let vb = VBlocks::new(&mut builder, VariableForm::PerUser, layout);
    let kk = layout.n_users;
    let d = samples.len();
    let lp = builder.add_nonneg(kk * d + layout.n_aps);
    for k in 0..kk {
        let scale = c64(1.0 / topo.noise_power[k].sqrt(), 0.0);
        for (i, s) in samples.iter().enumerate() {
            let hb = s.user(topo, k) * scale;
            let mut row = Row::with_rhs(1.0);
            for l in 0..kk {
                let idx = vb.add_vector(&mut builder, l, &hb);
                row.psd_terms(vb.block(l), [Term::real(phi_coef(k, l, gamma[k]), idx, idx)]);
            }
            row.lp_entry(lp, k * d + i, -1.0);
            builder.add_row(row);
        }
    }
    add_tx_rows(&mut builder, &vb, topo, lp, kk * d);
    if let Some(obj) = objective {
        set_objective(&mut builder, &vb, obj)?;
    }
    Ok(LiftedProgram {
        program: builder.build()?,
        form: VariableForm::PerUser,
        layout,
        noise: topo.noise_power.clone(),
        lp_block: lp,
        n_lambda: 0,
    })
}

/// Single-sample power minimization with every task at every AP.
pub fn assemble_nominal_program(h1: &ChannelSample, gamma: &[f64], topo: &Topology) -> Result<LiftedProgram> {
    let obj = LiftedObjective {
        group_cost: DMatrix::from_fn(topo.n_aps(), topo.n_users(), |n, _| 1.0 / topo.amplifier_efficiency[n]),
        mu: 0.0,
        g: None,
        offset: topo.compute_power.sum(),
    };
    assemble_scenario_program(std::slice::from_ref(h1), gamma, topo, Some(&obj))
}

impl LiftedProgram {
    pub fn extract(&self, sol: &SolverSolution) -> LiftedSolution {
        let blocks = match self.form {
            VariableForm::Full => vec![0],
            VariableForm::PerUser => (0..self.layout.n_users).collect(),
        };
        let vb = VBlocks {
            form: self.form,
            layout: self.layout,
            blocks,
        };
        let v = vb.assemble(&sol.x);
        let lambda = match &sol.x.blocks[self.lp_block] {
            Block::Nonneg(x) => DVector::from_fn(self.n_lambda, |k, _| x[k] * self.noise[k]),
            Block::Psd(_) => DVector::zeros(0),
        };
        LiftedSolution {
            v: rgsb_sdp::linalg::hermitian_part(&v),
            lambda,
            objective: sol.primal_objective,
            status: sol.status,
            iterations: sol.iterations,
        }
    }

    /// Solves and reads back the solution. Infeasibility and solver
    /// failures become errors.
    pub fn solve(&self, settings: &Settings) -> Result<LiftedSolution> {
        let sol = solve(&self.program, settings);
        match sol.status {
            Status::PrimalInfeasible => Err(Error::Infeasible),
            _ if sol.is_acceptable(1e-6) => Ok(self.extract(&sol)),
            status => Err(Error::Solver(status)),
        }
    }

    pub fn feasibility(&self, settings: &Settings) -> Result<Feasibility> {
        match self.solve(settings) {
            Ok(_) => Ok(Feasibility::Feasible),
            Err(Error::Infeasible) => Ok(Feasibility::Infeasible),
            Err(e) => Err(e),
        }
    }
}

/// Smallest `D >= nkl` with `P(Bin(D, eps) <= nkl - 1) <= delta`.
pub fn sg_required_samples(nkl: usize, epsilon: f64, delta: f64) -> Result<usize> {
    if nkl < 1 || !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument("need nkl >= 1, eps in (0,1), delta in (0,1]".into()));
    }
    let target = delta.ln();
    let mut d = nkl;
    loop {
        if ln_binomial_cdf(d as u64, nkl as u64 - 1, epsilon) <= target + 1e-15 {
            return Ok(d);
        }
        d += 1;
    }
}

/// Worst SINR of user `k` over `trials` channels `h_hat + B u`, with `u`
/// uniform in the unit ball.
pub fn s_procedure_soundness<R: Rng>(
    topo: &Topology,
    v: &Beamformer,
    region: &UncertaintyRegion,
    k: usize,
    trials: usize,
    rng: &mut R,
) -> f64 {
    let n = region.dim();
    let noise = topo.noise_power[k];
    let mut worst = sinr(topo, v, &region.center, k, noise);
    for _ in 0..trials {
        let mut u = DVector::from_fn(n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        });
        let norm = u.norm();
        if norm == 0.0 {
            continue;
        }
        let radius = rng.random::<f64>().powf(1.0 / (2 * n) as f64);
        u *= C64::new(radius / norm, 0.0);
        worst = worst.min(sinr(topo, v, &region.point(&u), k, noise));
    }
    worst
}
