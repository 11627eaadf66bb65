//! Block vectors over products of PSD and nonnegative cones, and the
//! Nesterov-Todd scaling used by the interior-point iterations.

use nalgebra::{Cholesky, DVector};

use crate::linalg::{c64, herm_inner, hermitian_part, min_eigenvalue, CMat};
use crate::program::ConeKind;

#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Psd(CMat),
    Nonneg(DVector<f64>),
}

impl Block {
    fn dot(&self, other: &Block) -> f64 {
        match (self, other) {
            (Block::Psd(a), Block::Psd(b)) => herm_inner(a, b),
            (Block::Nonneg(a), Block::Nonneg(b)) => a.dot(b),
            _ => panic!("block kind mismatch"),
        }
    }
}

/// An element of the product space, one entry per cone block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVec {
    pub blocks: Vec<Block>,
}

impl BlockVec {
    pub fn zeros(cones: &[ConeKind]) -> Self {
        let blocks = cones
            .iter()
            .map(|c| match *c {
                ConeKind::Psd(n) => Block::Psd(CMat::zeros(n, n)),
                ConeKind::Nonneg(n) => Block::Nonneg(DVector::zeros(n)),
            })
            .collect();
        BlockVec { blocks }
    }

    /// The cone's identity element `e` (identity matrices, all-ones vectors).
    pub fn identity(cones: &[ConeKind]) -> Self {
        let blocks = cones
            .iter()
            .map(|c| match *c {
                ConeKind::Psd(n) => Block::Psd(CMat::identity(n, n)),
                ConeKind::Nonneg(n) => Block::Nonneg(DVector::from_element(n, 1.0)),
            })
            .collect();
        BlockVec { blocks }
    }

    pub fn dot(&self, other: &BlockVec) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).max(0.0).sqrt()
    }

    pub fn axpy(&mut self, alpha: f64, other: &BlockVec) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            match (a, b) {
                (Block::Psd(a), Block::Psd(b)) => *a += b * c64(alpha, 0.0),
                (Block::Nonneg(a), Block::Nonneg(b)) => a.axpy(alpha, b, 1.0),
                _ => panic!("block kind mismatch"),
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> BlockVec {
        let mut out = self.clone();
        for b in &mut out.blocks {
            match b {
                Block::Psd(m) => *m *= c64(alpha, 0.0),
                Block::Nonneg(v) => *v *= alpha,
            }
        }
        out
    }

    pub fn sub(&self, other: &BlockVec) -> BlockVec {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &BlockVec) -> BlockVec {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn psd(&self, block: usize) -> &CMat {
        match &self.blocks[block] {
            Block::Psd(m) => m,
            Block::Nonneg(_) => panic!("block {block} is not a PSD block"),
        }
    }

    pub fn nonneg(&self, block: usize) -> &DVector<f64> {
        match &self.blocks[block] {
            Block::Nonneg(v) => v,
            Block::Psd(_) => panic!("block {block} is not a nonnegative block"),
        }
    }

    /// Smallest eigenvalue (PSD) or entry (nonnegative), relative to the
    /// magnitude of the block, over all blocks.
    pub fn min_cone_value(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Psd(m) => min_eigenvalue(m),
                Block::Nonneg(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Makes every PSD block exactly Hermitian.
    pub fn symmetrize(&mut self) {
        for b in &mut self.blocks {
            if let Block::Psd(m) = b {
                *m = hermitian_part(m);
            }
        }
    }

    /// Jordan product `(a b + b a) / 2` blockwise.
    pub fn jordan(&self, other: &BlockVec) -> BlockVec {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| match (a, b) {
                (Block::Psd(a), Block::Psd(b)) => {
                    let ab = a * b;
                    Block::Psd((&ab + ab.adjoint()) * c64(0.5, 0.0))
                }
                (Block::Nonneg(a), Block::Nonneg(b)) => Block::Nonneg(a.component_mul(b)),
                _ => panic!("block kind mismatch"),
            })
            .collect();
        BlockVec { blocks }
    }
}

pub(crate) enum BlockScaling {
    Psd {
        r: CMat,
        rinv: CMat,
        w: CMat,
        lambda: DVector<f64>,
    },
    Nonneg {
        w: DVector<f64>,
        lambda: DVector<f64>,
    },
}

/// Nesterov-Todd scaling `W` with `W S W = X`, factored as `W = R R^H` so
/// that the scaled point `R^{-1} X R^{-H} = R^H S R = diag(lambda)`.
pub(crate) struct Scaling {
    pub blocks: Vec<BlockScaling>,
}

impl Scaling {
    /// Returns `None` when `x` or `s` is not strictly inside its cone.
    pub fn new(x: &BlockVec, s: &BlockVec) -> Option<Scaling> {
        let mut blocks = Vec::with_capacity(x.blocks.len());
        for (xb, sb) in x.blocks.iter().zip(&s.blocks) {
            match (xb, sb) {
                (Block::Psd(xm), Block::Psd(sm)) => {
                    let lx = Cholesky::new(hermitian_part(xm))?.l();
                    let ls = Cholesky::new(hermitian_part(sm))?.l();
                    let prod = ls.adjoint() * &lx;
                    let svd = prod.svd(true, true);
                    let u = svd.u?;
                    let v = svd.v_t?.adjoint();
                    let sv = svd.singular_values;
                    if sv.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                        return None;
                    }
                    let n = sv.len();
                    let mut r = lx * v;
                    let mut rinv = u.adjoint() * ls.adjoint();
                    for j in 0..n {
                        let f = 1.0 / sv[j].sqrt();
                        r.column_mut(j).scale_mut(f);
                        rinv.row_mut(j).scale_mut(f);
                    }
                    let w = hermitian_part(&(&r * r.adjoint()));
                    blocks.push(BlockScaling::Psd {
                        r,
                        rinv,
                        w,
                        lambda: sv,
                    });
                }
                (Block::Nonneg(xv), Block::Nonneg(sv)) => {
                    if xv.iter().chain(sv.iter()).any(|&v| !(v > 0.0) || !v.is_finite()) {
                        return None;
                    }
                    let w = xv.zip_map(sv, |a, b| (a / b).sqrt());
                    let lambda = xv.zip_map(sv, |a, b| (a * b).sqrt());
                    blocks.push(BlockScaling::Nonneg { w, lambda });
                }
                _ => panic!("block kind mismatch"),
            }
        }
        Some(Scaling { blocks })
    }

    fn map(&self, z: &BlockVec, f: impl Fn(&BlockScaling, &Block) -> Block) -> BlockVec {
        BlockVec {
            blocks: self.blocks.iter().zip(&z.blocks).map(|(s, b)| f(s, b)).collect(),
        }
    }

    /// `W Z W` blockwise.
    pub fn apply_w(&self, z: &BlockVec) -> BlockVec {
        self.map(z, |s, b| match (s, b) {
            (BlockScaling::Psd { w, .. }, Block::Psd(m)) => Block::Psd(hermitian_part(&(w * m * w))),
            (BlockScaling::Nonneg { w, .. }, Block::Nonneg(v)) => {
                Block::Nonneg(v.zip_map(w, |a, wi| a * wi * wi))
            }
            _ => panic!("block kind mismatch"),
        })
    }

    /// `R^{-1} dX R^{-H}`.
    pub fn scale_primal(&self, dx: &BlockVec) -> BlockVec {
        self.map(dx, |s, b| match (s, b) {
            (BlockScaling::Psd { rinv, .. }, Block::Psd(m)) => {
                Block::Psd(hermitian_part(&(rinv * m * rinv.adjoint())))
            }
            (BlockScaling::Nonneg { w, .. }, Block::Nonneg(v)) => Block::Nonneg(v.component_div(w)),
            _ => panic!("block kind mismatch"),
        })
    }

    /// `R^H dS R`.
    pub fn scale_dual(&self, ds: &BlockVec) -> BlockVec {
        self.map(ds, |s, b| match (s, b) {
            (BlockScaling::Psd { r, .. }, Block::Psd(m)) => {
                Block::Psd(hermitian_part(&(r.adjoint() * m * r)))
            }
            (BlockScaling::Nonneg { w, .. }, Block::Nonneg(v)) => Block::Nonneg(v.component_mul(w)),
            _ => panic!("block kind mismatch"),
        })
    }

    /// `R Z R^H`, the inverse of [`Scaling::scale_primal`].
    pub fn unscale_primal(&self, z: &BlockVec) -> BlockVec {
        self.map(z, |s, b| match (s, b) {
            (BlockScaling::Psd { r, .. }, Block::Psd(m)) => {
                Block::Psd(hermitian_part(&(r * m * r.adjoint())))
            }
            (BlockScaling::Nonneg { w, .. }, Block::Nonneg(v)) => Block::Nonneg(v.component_mul(w)),
            _ => panic!("block kind mismatch"),
        })
    }

    /// Solves `lambda o Z = r` for `Z`.
    pub fn lambda_solve(&self, rhs: &BlockVec) -> BlockVec {
        self.map(rhs, |s, b| match (s, b) {
            (BlockScaling::Psd { lambda, .. }, Block::Psd(m)) => {
                let n = lambda.len();
                let mut out = m.clone();
                for i in 0..n {
                    for j in 0..n {
                        out[(i, j)] = m[(i, j)] * (2.0 / (lambda[i] + lambda[j]));
                    }
                }
                Block::Psd(out)
            }
            (BlockScaling::Nonneg { lambda, .. }, Block::Nonneg(v)) => {
                Block::Nonneg(v.component_div(lambda))
            }
            _ => panic!("block kind mismatch"),
        })
    }

    /// Largest `alpha` with `lambda + alpha * d` in the cone, for a direction
    /// already expressed in scaled coordinates.
    pub fn max_step(&self, d: &BlockVec) -> f64 {
        let mut alpha = f64::INFINITY;
        for (s, b) in self.blocks.iter().zip(&d.blocks) {
            let worst = match (s, b) {
                (BlockScaling::Psd { lambda, .. }, Block::Psd(m)) => {
                    let n = lambda.len();
                    let mut t = m.clone();
                    for i in 0..n {
                        for j in 0..n {
                            t[(i, j)] = m[(i, j)] / (lambda[i] * lambda[j]).sqrt();
                        }
                    }
                    min_eigenvalue(&t)
                }
                (BlockScaling::Nonneg { lambda, .. }, Block::Nonneg(v)) => v
                    .iter()
                    .zip(lambda.iter())
                    .map(|(d, l)| d / l)
                    .fold(f64::INFINITY, f64::min),
                _ => panic!("block kind mismatch"),
            };
            if worst < 0.0 {
                alpha = alpha.min(-1.0 / worst);
            }
        }
        alpha
    }

    pub fn psd_r(&self, block: usize) -> Option<&CMat> {
        match &self.blocks[block] {
            BlockScaling::Psd { r, .. } => Some(r),
            BlockScaling::Nonneg { .. } => None,
        }
    }

    pub fn nonneg_w(&self, block: usize) -> Option<&DVector<f64>> {
        match &self.blocks[block] {
            BlockScaling::Nonneg { w, .. } => Some(w),
            BlockScaling::Psd { .. } => None,
        }
    }
}
