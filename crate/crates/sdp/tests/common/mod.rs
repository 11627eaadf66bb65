//! Random instance generators with known solutions or known infeasibility.
#![allow(dead_code)]

use nalgebra::DVector;
use rand::Rng;
use rgsb_sdp::{dense_terms, Block, BlockVec, CMat, ConeKind, ConicProgram, ProgramBuilder, Row, C64};

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize, complex: bool) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| {
        let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
        C64::new(rng.random_range(-1.0..1.0), im)
    });
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn random_unitary<R: Rng>(rng: &mut R, n: usize, complex: bool) -> CMat {
    let a = random_hermitian(rng, n, complex) + CMat::identity(n, n) * C64::new(0.1, 0.0);
    a.qr().q()
}

/// Random cones: 1-2 PSD blocks of size 1..=6, optionally one nonnegative block.
pub fn random_cones<R: Rng>(rng: &mut R) -> Vec<ConeKind> {
    let mut cones = Vec::new();
    for _ in 0..rng.random_range(1..=2) {
        cones.push(ConeKind::Psd(rng.random_range(1..=6)));
    }
    if rng.random_bool(0.5) {
        cones.push(ConeKind::Nonneg(rng.random_range(1..=4)));
    }
    cones
}

fn random_row<R: Rng>(rng: &mut R, cones: &[ConeKind], complex: bool) -> (Row, Vec<Block>) {
    let mut row = Row::default();
    let mut dense = Vec::new();
    for (b, cone) in cones.iter().enumerate() {
        match *cone {
            ConeKind::Psd(n) => {
                let m = random_hermitian(rng, n, complex);
                row.psd_terms(b, dense_terms(&m));
                dense.push(Block::Psd(m));
            }
            ConeKind::Nonneg(n) => {
                let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                for i in 0..n {
                    row.lp_entry(b, i, v[i]);
                }
                dense.push(Block::Nonneg(v));
            }
        }
    }
    (row, dense)
}

fn complementary_pair<R: Rng>(rng: &mut R, cone: ConeKind, complex: bool) -> (Block, Block) {
    match cone {
        ConeKind::Psd(n) => {
            let q = random_unitary(rng, n, complex);
            let rank = rng.random_range(0..=n);
            let mut xd = DVector::zeros(n);
            let mut sd = DVector::zeros(n);
            for i in 0..n {
                if i < rank {
                    xd[i] = rng.random_range(0.2..2.0);
                } else {
                    sd[i] = rng.random_range(0.2..2.0);
                }
            }
            let lift = |d: &DVector<f64>| {
                let dm = CMat::from_diagonal(&d.map(|v| C64::new(v, 0.0)));
                let m = &q * dm * q.adjoint();
                (&m + m.adjoint()) * C64::new(0.5, 0.0)
            };
            (Block::Psd(lift(&xd)), Block::Psd(lift(&sd)))
        }
        ConeKind::Nonneg(n) => {
            let mut x = DVector::zeros(n);
            let mut s = DVector::zeros(n);
            for i in 0..n {
                if rng.random_bool(0.5) {
                    x[i] = rng.random_range(0.2..2.0);
                } else {
                    s[i] = rng.random_range(0.2..2.0);
                }
            }
            (Block::Nonneg(x), Block::Nonneg(s))
        }
    }
}

/// Real dimension of the product space, the largest number of independent rows.
fn cone_dim(cones: &[ConeKind], complex: bool) -> usize {
    cones
        .iter()
        .map(|c| match *c {
            ConeKind::Psd(n) if complex => n * n,
            ConeKind::Psd(n) => n * (n + 1) / 2,
            ConeKind::Nonneg(n) => n,
        })
        .sum()
}

pub struct Planted {
    pub program: ConicProgram,
    pub optimum: f64,
    pub x: BlockVec,
}

/// Instance with a planted primal-dual pair satisfying the KKT conditions,
/// so the optimal value is `<C, X*> = b^T y*`.
pub fn planted_instance<R: Rng>(rng: &mut R) -> Planted {
    let complex = rng.random_bool(0.5);
    let cones = random_cones(rng);
    let m = rng.random_range(1..=cone_dim(&cones, complex));

    let mut xs = Vec::new();
    let mut ss = Vec::new();
    for &c in &cones {
        let (x, s) = complementary_pair(rng, c, complex);
        xs.push(x);
        ss.push(s);
    }
    let xstar = BlockVec { blocks: xs };
    let sstar = BlockVec { blocks: ss };
    let ystar = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));

    let mut builder = ProgramBuilder::new();
    for &c in &cones {
        match c {
            ConeKind::Psd(n) => builder.add_psd(n),
            ConeKind::Nonneg(n) => builder.add_nonneg(n),
        };
    }
    let mut cmat = sstar.clone();
    for i in 0..m {
        let (mut row, dense) = random_row(rng, &cones, complex);
        let a = BlockVec { blocks: dense };
        row.rhs = a.dot(&xstar);
        cmat.axpy(ystar[i], &a);
        builder.add_row(row);
    }
    for (b, block) in cmat.blocks.iter().enumerate() {
        match block {
            Block::Psd(mm) => builder.add_objective_psd(b, mm),
            Block::Nonneg(v) => {
                for (i, &val) in v.iter().enumerate() {
                    builder.add_objective_lp(b, i, val);
                }
            }
        }
    }
    let offset = rng.random_range(-1.0..1.0);
    builder.set_offset(offset);
    let optimum = cmat.dot(&xstar) + offset;
    Planted {
        program: builder.build().unwrap(),
        optimum,
        x: xstar,
    }
}

/// Instance whose primal feasible set is empty, certified by a planted ray
/// `y0` with `-A^T y0` positive definite and `b^T y0 = 1`.
pub fn infeasible_instance<R: Rng>(rng: &mut R) -> ConicProgram {
    let complex = rng.random_bool(0.5);
    let cones = random_cones(rng);
    let m = rng.random_range(1..=cone_dim(&cones, complex).min(6));
    let y0 = DVector::from_fn(m, |i, _| if i == m - 1 { 1.0 } else { rng.random_range(-1.0..1.0) });

    let mut builder = ProgramBuilder::new();
    for &c in &cones {
        match c {
            ConeKind::Psd(n) => builder.add_psd(n),
            ConeKind::Nonneg(n) => builder.add_nonneg(n),
        };
    }
    let mut acc = BlockVec::zeros(&cones);
    let mut bsum = 0.0;
    for i in 0..m - 1 {
        let (mut row, dense) = random_row(rng, &cones, complex);
        row.rhs = rng.random_range(-1.0..1.0);
        bsum += y0[i] * row.rhs;
        acc.axpy(y0[i], &BlockVec { blocks: dense });
        builder.add_row(row);
    }
    // Last row: A_m = -(S0 + sum_{i<m} y0_i A_i) with S0 positive definite.
    let mut last = Row::with_rhs(1.0 - bsum);
    for (b, cone) in cones.iter().enumerate() {
        match (*cone, &acc.blocks[b]) {
            (ConeKind::Psd(n), Block::Psd(sum)) => {
                let g = random_hermitian(rng, n, complex);
                let s0 = &g * &g + CMat::identity(n, n) * C64::new(0.3, 0.0);
                let am = -(s0 + sum);
                last.psd_terms(b, dense_terms(&am));
            }
            (ConeKind::Nonneg(n), Block::Nonneg(sum)) => {
                for i in 0..n {
                    last.lp_entry(b, i, -(rng.random_range(0.3..1.3) + sum[i]));
                }
            }
            _ => unreachable!(),
        }
    }
    builder.add_row(last);
    for (b, cone) in cones.iter().enumerate() {
        if let ConeKind::Psd(n) = *cone {
            builder.add_objective_psd(b, &random_hermitian(rng, n, complex));
        }
    }
    builder.build().unwrap()
}
