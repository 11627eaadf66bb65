//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
//! Mehrotra predictor-corrector steps.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::cone::{BlockVec, Scaling};
use crate::program::ConicProgram;

#[derive(Clone, Debug)]
pub struct Settings {
    /// Relative primal and dual residual tolerance.
    pub feas_tol: f64,
    /// Relative duality gap tolerance.
    pub gap_tol: f64,
    /// Tolerance on normalized Farkas rays.
    pub infeas_tol: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary factor.
    pub step_fraction: f64,
    /// Print the iteration log to stderr.
    pub verbose: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            infeas_tol: 1e-8,
            max_iter: 200,
            step_fraction: 0.99,
            verbose: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct IterationLog {
    pub iter: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
    pub alpha_affine: f64,
    pub alpha: f64,
    pub sigma: f64,
}

impl IterationLog {
    pub const CSV_HEADER: &'static str =
        "iter,pobj,dobj,gap,pres,dres,mu,tau,kappa,alpha_aff,alpha,sigma";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6},{:.6},{:.6}",
            self.iter,
            self.primal_objective,
            self.dual_objective,
            self.gap,
            self.primal_residual,
            self.dual_residual,
            self.mu,
            self.tau,
            self.kappa,
            self.alpha_affine,
            self.alpha,
            self.sigma
        )
    }

    pub fn write_csv<W: Write>(log: &[IterationLog], mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for entry in log {
            writeln!(out, "{}", entry.csv_line())?;
        }
        Ok(())
    }
}

/// Result of [`solve`].
///
/// For `Optimal`, `MaxIterations` and `NumericalFailure` the fields hold the
/// last iterate divided by the homogenizing variable. For `PrimalInfeasible`
/// `(y, s)` is a Farkas ray normalized to `b^T y = 1` with `A^T y + s ~ 0`;
/// for `DualInfeasible` `x` is a ray normalized to `<C, x> = -1` with
/// `A x ~ 0`.
#[derive(Clone, Debug)]
pub struct SolverSolution {
    pub status: Status,
    pub x: BlockVec,
    pub y: DVector<f64>,
    pub s: BlockVec,
    /// `<C, X> + offset`.
    pub primal_objective: f64,
    /// `b^T y + offset`.
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub log: Vec<IterationLog>,
}

impl SolverSolution {
    /// True for an optimal status or for a stalled iterate whose residuals
    /// and gap are all below `tol`.
    pub fn is_acceptable(&self, tol: f64) -> bool {
        match self.status {
            Status::Optimal => true,
            Status::MaxIterations | Status::NumericalFailure => {
                self.primal_residual <= tol && self.dual_residual <= tol && self.gap <= tol
            }
            _ => false,
        }
    }
}

struct Direction {
    x: BlockVec,
    y: DVector<f64>,
    s: BlockVec,
    tau: f64,
    kappa: f64,
}

/// Regularized Cholesky of the Schur complement with iterative refinement
/// against the unregularized matrix.
struct SchurFactor {
    m: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    regularized: bool,
}

impl SchurFactor {
    fn new(m: DMatrix<f64>) -> Option<SchurFactor> {
        let n = m.nrows();
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Some(SchurFactor {
                m,
                chol,
                regularized: false,
            });
        }
        let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0_f64, f64::max).max(1e-300);
        let mut delta = 1e-13;
        while delta < 1e-3 {
            let mut reg = m.clone();
            for i in 0..n {
                reg[(i, i)] += delta * scale;
            }
            if let Some(chol) = Cholesky::new(reg) {
                return Some(SchurFactor {
                    m,
                    chol,
                    regularized: true,
                });
            }
            delta *= 100.0;
        }
        None
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut p = self.chol.solve(rhs);
        let mut r = rhs - &self.m * &p;
        let steps = if self.regularized { 3 } else { 1 };
        for _ in 0..steps {
            let cand = &p + self.chol.solve(&r);
            let rc = rhs - &self.m * &cand;
            // Refinement drifts along the null space of a singular M; stop
            // once it no longer pays off.
            if rc.norm() > 0.5 * r.norm() {
                break;
            }
            p = cand;
            r = rc;
        }
        p
    }
}

/// Complementarity reduction after which a run that has not met any
/// stopping test is declared stalled.
const STALL_MU: f64 = 1e-20;

/// Solves `prog`. Deterministic for a given program and settings.
pub fn solve(prog: &ConicProgram, settings: &Settings) -> SolverSolution {
    let cones = prog.cones().to_vec();
    let nu = prog.degree() as f64;
    let b = prog.rhs();
    let c = prog.objective().clone();
    let bnorm = b.norm();
    let cnorm = c.norm();

    let mut x = BlockVec::identity(&cones);
    let mut s = BlockVec::identity(&cones);
    let mut y = DVector::zeros(prog.num_rows());
    let mut tau = 1.0_f64;
    let mut kappa = 1.0_f64;
    let mut log = Vec::new();

    let finish = |status: Status,
                  x: &BlockVec,
                  y: &DVector<f64>,
                  s: &BlockVec,
                  tau: f64,
                  log: Vec<IterationLog>,
                  iterations: usize| {
        let (xs, ys, ss) = match status {
            Status::PrimalInfeasible => {
                let bty = b.dot(y);
                (x.scaled(0.0), y / bty, s.scaled(1.0 / bty))
            }
            Status::DualInfeasible => {
                let ctx = c.dot(x);
                (x.scaled(-1.0 / ctx), y * 0.0, s.scaled(0.0))
            }
            _ => (x.scaled(1.0 / tau), y / tau, s.scaled(1.0 / tau)),
        };
        let (pres, dres, gap, pobj, dobj) = match status {
            Status::PrimalInfeasible => {
                let r = prog.adjoint(&ys).add(&ss).norm();
                (f64::NAN, r, f64::NAN, f64::INFINITY, f64::INFINITY)
            }
            Status::DualInfeasible => {
                let r = prog.apply(&xs).norm();
                (r, f64::NAN, f64::NAN, f64::NEG_INFINITY, f64::NEG_INFINITY)
            }
            _ => {
                let pres = (prog.apply(&xs) - &b).norm() / (1.0 + bnorm);
                let dres = prog.adjoint(&ys).add(&ss).sub(&c).norm() / (1.0 + cnorm);
                let pobj = c.dot(&xs);
                let dobj = b.dot(&ys);
                let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
                (pres, dres, gap, pobj + prog.offset(), dobj + prog.offset())
            }
        };
        SolverSolution {
            status,
            x: xs,
            y: ys,
            s: ss,
            primal_objective: pobj,
            dual_objective: dobj,
            primal_residual: pres,
            dual_residual: dres,
            gap,
            iterations,
            log,
        }
    };

    let mu0 = (x.dot(&s) + tau * kappa) / (nu + 1.0);
    let mut iter = 0;
    loop {
        let ax = prog.apply(&x);
        let aty = prog.adjoint(&y);
        let rp = &ax - &b * tau;
        let rd = aty.add(&s).sub(&c.scaled(tau));
        let ctx = c.dot(&x);
        let bty = b.dot(&y);
        let rg = ctx - bty + kappa;
        let mu = (x.dot(&s) + tau * kappa) / (nu + 1.0);

        let pres = rp.norm() / tau / (1.0 + bnorm);
        let dres = rd.norm() / tau / (1.0 + cnorm);
        let pobj = ctx / tau;
        let dobj = bty / tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());

        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            return finish(Status::NumericalFailure, &x, &y, &s, tau, log, iter);
        }
        if pres <= settings.feas_tol && dres <= settings.feas_tol && gap <= settings.gap_tol {
            return finish(Status::Optimal, &x, &y, &s, tau, log, iter);
        }
        // Normalize before taking norms: squares of vanishing iterates
        // underflow and would fake a zero residual.
        if bty > 0.0 && aty.add(&s).scaled(1.0 / bty).norm() <= settings.infeas_tol {
            return finish(Status::PrimalInfeasible, &x, &y, &s, tau, log, iter);
        }
        if ctx < 0.0 && (&ax / (-ctx)).norm() <= settings.infeas_tol {
            return finish(Status::DualInfeasible, &x, &y, &s, tau, log, iter);
        }
        if mu <= STALL_MU * mu0 {
            return finish(Status::NumericalFailure, &x, &y, &s, tau, log, iter);
        }
        if iter >= settings.max_iter {
            return finish(Status::MaxIterations, &x, &y, &s, tau, log, iter);
        }

        let Some(sc) = Scaling::new(&x, &s) else {
            return finish(Status::NumericalFailure, &x, &y, &s, tau, log, iter);
        };
        let Some(fact) = SchurFactor::new(prog.schur(&sc)) else {
            return finish(Status::NumericalFailure, &x, &y, &s, tau, log, iter);
        };

        let wc = sc.apply_w(&c);
        let q = fact.solve(&(&b + prog.apply(&wc)));
        let wq = sc.apply_w(&prog.adjoint(&q)).sub(&wc);
        let den_base = b.dot(&q) - c.dot(&wq);

        let newton = |r1: &DVector<f64>, r2: &BlockVec, r3: f64, r4: &BlockVec, r5: f64| {
            let t = r4.add(&sc.apply_w(r2));
            let p = fact.solve(&(r1 - prog.apply(&t)));
            let u = t.add(&sc.apply_w(&prog.adjoint(&p)));
            let dtau = (r3 - b.dot(&p) + c.dot(&u) + r5 / tau) / (den_base + kappa / tau);
            let dy = &p + &q * dtau;
            let mut dx = u;
            dx.axpy(dtau, &wq);
            let mut ds = prog.adjoint(&dy).scaled(-1.0);
            ds.axpy(dtau, &c);
            ds.axpy(-1.0, r2);
            let dkappa = (r5 - kappa * dtau) / tau;
            Direction {
                x: dx,
                y: dy,
                s: ds,
                tau: dtau,
                kappa: dkappa,
            }
        };

        let step_len = |d: &Direction| {
            let mut alpha = sc
                .max_step(&sc.scale_primal(&d.x))
                .min(sc.max_step(&sc.scale_dual(&d.s)));
            if d.tau < 0.0 {
                alpha = alpha.min(-tau / d.tau);
            }
            if d.kappa < 0.0 {
                alpha = alpha.min(-kappa / d.kappa);
            }
            alpha
        };

        // Predictor.
        let neg_rp = -&rp;
        let neg_x = x.scaled(-1.0);
        let aff = newton(&neg_rp, &rd, rg, &neg_x, -tau * kappa);
        let alpha_aff = step_len(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // Corrector.
        let dxt = sc.scale_primal(&aff.x);
        let dst = sc.scale_dual(&aff.s);
        let mut target = BlockVec::identity(&cones).scaled(sigma * mu);
        target.axpy(-1.0, &dxt.jordan(&dst));
        let r4 = sc.unscale_primal(&sc.lambda_solve(&target)).sub(&x);
        let eta = 1.0 - sigma;
        let r1 = &rp * (-eta);
        let r2 = rd.scaled(eta);
        let r5 = sigma * mu - tau * kappa - aff.tau * aff.kappa;
        let dir = newton(&r1, &r2, eta * rg, &r4, r5);
        let alpha = (settings.step_fraction * step_len(&dir)).min(1.0);

        if !(alpha.is_finite()) || alpha < 1e-12 {
            return finish(Status::NumericalFailure, &x, &y, &s, tau, log, iter);
        }

        x.axpy(alpha, &dir.x);
        s.axpy(alpha, &dir.s);
        x.symmetrize();
        s.symmetrize();
        y.axpy(alpha, &dir.y, 1.0);
        tau += alpha * dir.tau;
        kappa += alpha * dir.kappa;

        let entry = IterationLog {
            iter,
            primal_objective: pobj + prog.offset(),
            dual_objective: dobj + prog.offset(),
            gap,
            primal_residual: pres,
            dual_residual: dres,
            mu,
            tau,
            kappa,
            alpha_affine: alpha_aff,
            alpha,
            sigma,
        };
        if settings.verbose {
            eprintln!("{}", entry.csv_line());
        }
        log.push(entry);
        iter += 1;
    }
}
