//! Residual checks recomputed from dense constraint matrices, independent of
//! the operator code used inside the solve loop.

use crate::cone::{Block, BlockVec};
use crate::linalg::{herm_inner, herm_norm, min_eigenvalue, CMat};
use crate::program::{ConeKind, ConicProgram};
use crate::solver::{SolverSolution, Status};

#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub status: Status,
    /// `||A x - b|| / (1 + ||b||)`; for a dual ray, `||A x||`.
    pub primal_residual: f64,
    /// `||A^T y + s - c|| / (1 + ||c||)`; for a primal ray, `||A^T y + s||`.
    pub dual_residual: f64,
    /// Relative gap between the objectives.
    pub gap: f64,
    /// Most negative relative eigenvalue or entry of `x` (0 if inside).
    pub primal_cone_violation: f64,
    /// Same for `s`.
    pub dual_cone_violation: f64,
    /// Human-readable descriptions of each check above `tol`.
    pub violations: Vec<String>,
}

impl ResidualReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn dense_apply(prog: &ConicProgram, x: &BlockVec) -> Vec<f64> {
    (0..prog.num_rows())
        .map(|i| {
            prog.cones()
                .iter()
                .enumerate()
                .map(|(b, cone)| match cone {
                    ConeKind::Psd(_) => herm_inner(&prog.row_matrix(i, b), x.psd(b)),
                    ConeKind::Nonneg(_) => prog.row_vector(i, b).dot(x.nonneg(b)),
                })
                .sum()
        })
        .collect()
}

fn dense_adjoint(prog: &ConicProgram, y: &nalgebra::DVector<f64>) -> BlockVec {
    let mut out = BlockVec::zeros(prog.cones());
    for i in 0..prog.num_rows() {
        for (b, cone) in prog.cones().iter().enumerate() {
            match (&mut out.blocks[b], cone) {
                (Block::Psd(m), ConeKind::Psd(_)) => {
                    *m += prog.row_matrix(i, b) * crate::linalg::c64(y[i], 0.0)
                }
                (Block::Nonneg(v), ConeKind::Nonneg(_)) => *v += prog.row_vector(i, b) * y[i],
                _ => unreachable!(),
            }
        }
    }
    out
}

fn cone_violation(v: &BlockVec) -> f64 {
    v.blocks
        .iter()
        .map(|b| match b {
            Block::Psd(m) => relative_min_eig(m),
            Block::Nonneg(v) => {
                let scale = 1.0 + v.amax();
                v.iter().fold(0.0_f64, |acc, &x| acc.max(-x / scale))
            }
        })
        .fold(0.0, f64::max)
}

fn relative_min_eig(m: &CMat) -> f64 {
    let scale = 1.0 + herm_norm(m);
    (-min_eigenvalue(m) / scale).max(0.0)
}

/// Verifies `sol` against `prog` with tolerance 1e-7 on residuals and the
/// PSD tolerance 1e-9 on cone membership.
pub fn verify(sol: &SolverSolution, prog: &ConicProgram) -> ResidualReport {
    verify_with_tol(sol, prog, 1e-7, 1e-9)
}

pub fn verify_with_tol(
    sol: &SolverSolution,
    prog: &ConicProgram,
    tol: f64,
    cone_tol: f64,
) -> ResidualReport {
    let b = prog.rhs();
    let c = prog.objective();
    let ax = dense_apply(prog, &sol.x);
    let aty = dense_adjoint(prog, &sol.y);
    let mut violations = Vec::new();

    let (pres, dres, gap) = match sol.status {
        Status::PrimalInfeasible => {
            let bty = b.dot(&sol.y);
            if !(bty > 0.0) {
                violations.push(format!("certificate has b^T y = {bty:.3e} <= 0"));
            }
            let r = aty.add(&sol.s).norm() / bty.abs().max(f64::MIN_POSITIVE);
            if r > tol {
                violations.push(format!("certificate residual ||A^T y + s|| = {r:.3e}"));
            }
            // -A^T y must lie in the cone for the ray to separate.
            let neg = aty.scaled(-1.0);
            let v = cone_violation(&neg);
            if v > tol {
                violations.push(format!("-A^T y leaves the cone by {v:.3e}"));
            }
            (f64::NAN, r, f64::NAN)
        }
        Status::DualInfeasible => {
            let ctx = c.dot(&sol.x);
            if !(ctx < 0.0) {
                violations.push(format!("ray has <C, x> = {ctx:.3e} >= 0"));
            }
            let r = ax.iter().map(|v| v * v).sum::<f64>().sqrt() / ctx.abs().max(f64::MIN_POSITIVE);
            if r > tol {
                violations.push(format!("ray residual ||A x|| = {r:.3e}"));
            }
            (r, f64::NAN, f64::NAN)
        }
        _ => {
            let pres = ax
                .iter()
                .zip(b.iter())
                .map(|(a, bi)| (a - bi) * (a - bi))
                .sum::<f64>()
                .sqrt()
                / (1.0 + b.norm());
            let dres = aty.add(&sol.s).sub(c).norm() / (1.0 + c.norm());
            let pobj = c.dot(&sol.x);
            let dobj = b.dot(&sol.y);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
            if pres > tol {
                violations.push(format!("primal residual {pres:.3e}"));
            }
            if dres > tol {
                violations.push(format!("dual residual {dres:.3e}"));
            }
            if gap > tol {
                violations.push(format!("duality gap {gap:.3e}"));
            }
            // Weak duality on the returned pair: pobj - dobj = <x, s> + residual terms.
            let slack = 1e-9 * (1.0 + pobj.abs() + dobj.abs());
            if pobj < dobj - slack - tol * (1.0 + pobj.abs()) {
                violations.push(format!("weak duality violated: {pobj:.6e} < {dobj:.6e}"));
            }
            if sol.status != Status::Optimal {
                violations.push(format!("status {:?}", sol.status));
            }
            (pres, dres, gap)
        }
    };

    let pcv = if sol.status == Status::PrimalInfeasible {
        0.0
    } else {
        cone_violation(&sol.x)
    };
    let dcv = if sol.status == Status::DualInfeasible {
        0.0
    } else {
        cone_violation(&sol.s)
    };
    if pcv > cone_tol {
        violations.push(format!("x leaves the cone by {pcv:.3e}"));
    }
    if dcv > cone_tol {
        violations.push(format!("s leaves the cone by {dcv:.3e}"));
    }

    ResidualReport {
        status: sol.status,
        primal_residual: pres,
        dual_residual: dres,
        gap,
        primal_cone_violation: pcv,
        dual_cone_violation: dcv,
        violations,
    }
}
