//! Standard-form conic programs and the linear maps the solver needs.

use nalgebra::{DMatrix, DVector};

use crate::cone::{Block, BlockVec, Scaling};
use crate::error::SdpError;
use crate::linalg::{c64, hermitian_defect, hermitian_part, C64, CMat, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeKind {
    /// Hermitian `n x n` positive semidefinite matrices.
    Psd(usize),
    /// The nonnegative orthant of dimension `n`.
    Nonneg(usize),
}

impl ConeKind {
    /// Barrier degree of the cone.
    pub fn degree(&self) -> usize {
        match *self {
            ConeKind::Psd(n) | ConeKind::Nonneg(n) => n,
        }
    }
}

/// Hermitian rank-two coefficient `(coef a b^H + conj(coef) b a^H) / 2`, with
/// `a` and `b` indexing the block's vector dictionary. Its inner product with
/// a Hermitian `X` is `Re(coef * b^H X a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub coef: C64,
    pub a: usize,
    pub b: usize,
}

impl Term {
    pub fn new(coef: C64, a: usize, b: usize) -> Self {
        Term { coef, a, b }
    }

    pub fn real(coef: f64, a: usize, b: usize) -> Self {
        Term { coef: c64(coef, 0.0), a, b }
    }
}

/// Terms reproducing a dense Hermitian matrix over the unit-vector part of a
/// block's dictionary. Only the upper triangle of `m` is read.
pub fn dense_terms(m: &CMat) -> Vec<Term> {
    let n = m.nrows();
    let mut out = Vec::new();
    for p in 0..n {
        if m[(p, p)].re != 0.0 {
            out.push(Term::real(m[(p, p)].re, p, p));
        }
        for q in p + 1..n {
            let z = m[(p, q)];
            if z.re != 0.0 || z.im != 0.0 {
                out.push(Term::new(z * 2.0, p, q));
            }
        }
    }
    out
}

/// One equality constraint `<A_i, X> = rhs`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row {
    /// `(block, terms)` coefficients on PSD blocks.
    pub psd: Vec<(usize, Vec<Term>)>,
    /// `(block, element, coefficient)` entries on nonnegative blocks.
    pub lp: Vec<(usize, usize, f64)>,
    pub rhs: f64,
}

impl Row {
    pub fn with_rhs(rhs: f64) -> Self {
        Row {
            rhs,
            ..Default::default()
        }
    }

    pub fn psd_terms(&mut self, block: usize, terms: impl IntoIterator<Item = Term>) -> &mut Self {
        if let Some(entry) = self.psd.iter_mut().find(|(b, _)| *b == block) {
            entry.1.extend(terms);
        } else {
            self.psd.push((block, terms.into_iter().collect()));
        }
        self
    }

    pub fn lp_entry(&mut self, block: usize, element: usize, coef: f64) -> &mut Self {
        self.lp.push((block, element, coef));
        self
    }
}

/// Incremental construction of a [`ConicProgram`].
#[derive(Default)]
pub struct ProgramBuilder {
    cones: Vec<ConeKind>,
    vectors: Vec<Vec<DVector<C64>>>,
    objective: Vec<Option<Block>>,
    offset: f64,
    rows: Vec<Row>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a Hermitian PSD block. Dictionary entries `0..n` are the unit
    /// vectors `e_0..e_{n-1}`.
    pub fn add_psd(&mut self, n: usize) -> usize {
        let dict = (0..n)
            .map(|i| {
                let mut e = DVector::from_element(n, ZERO);
                e[i] = c64(1.0, 0.0);
                e
            })
            .collect();
        self.cones.push(ConeKind::Psd(n));
        self.vectors.push(dict);
        self.objective.push(None);
        self.cones.len() - 1
    }

    pub fn add_nonneg(&mut self, n: usize) -> usize {
        self.cones.push(ConeKind::Nonneg(n));
        self.vectors.push(Vec::new());
        self.objective.push(None);
        self.cones.len() - 1
    }

    /// Appends a vector to a PSD block's dictionary and returns its index.
    pub fn add_vector(&mut self, block: usize, v: DVector<C64>) -> usize {
        self.vectors[block].push(v);
        self.vectors[block].len() - 1
    }

    pub fn add_objective_psd(&mut self, block: usize, c: &CMat) {
        match &mut self.objective[block] {
            Some(Block::Psd(m)) => *m += c,
            slot => *slot = Some(Block::Psd(c.clone())),
        }
    }

    pub fn add_objective_lp(&mut self, block: usize, element: usize, value: f64) {
        let n = self.cones[block].degree();
        let slot = self.objective[block].get_or_insert_with(|| Block::Nonneg(DVector::zeros(n)));
        if let Block::Nonneg(v) = slot {
            v[element] += value;
        }
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    pub fn add_row(&mut self, row: Row) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn build(self) -> Result<ConicProgram, SdpError> {
        let ProgramBuilder {
            cones,
            vectors,
            objective,
            offset,
            rows,
        } = self;
        let mut dicts = Vec::with_capacity(cones.len());
        for (b, (cone, vecs)) in cones.iter().zip(&vectors).enumerate() {
            match *cone {
                ConeKind::Psd(n) => {
                    if vecs.iter().any(|v| v.len() != n) {
                        return Err(SdpError::Dimension(format!(
                            "dictionary vector of block {b} has wrong length"
                        )));
                    }
                    let mut d = CMat::zeros(n, vecs.len());
                    for (j, v) in vecs.iter().enumerate() {
                        d.set_column(j, v);
                    }
                    dicts.push(d);
                }
                ConeKind::Nonneg(_) => dicts.push(CMat::zeros(0, 0)),
            }
        }

        let mut obj_blocks = Vec::with_capacity(cones.len());
        for (b, (cone, slot)) in cones.iter().zip(objective).enumerate() {
            let block = match (*cone, slot) {
                (ConeKind::Psd(n), None) => Block::Psd(CMat::zeros(n, n)),
                (ConeKind::Nonneg(n), None) => Block::Nonneg(DVector::zeros(n)),
                (ConeKind::Psd(n), Some(Block::Psd(m))) => {
                    if m.nrows() != n || m.ncols() != n {
                        return Err(SdpError::Dimension(format!("objective block {b}")));
                    }
                    let defect = hermitian_defect(&m);
                    if defect > 1e-10 * (1.0 + m.norm()) {
                        return Err(SdpError::NotHermitian(defect));
                    }
                    Block::Psd(hermitian_part(&m))
                }
                (ConeKind::Nonneg(_), Some(block @ Block::Nonneg(_))) => block,
                _ => return Err(SdpError::Malformed(format!("objective kind of block {b}"))),
            };
            let finite = match &block {
                Block::Psd(m) => m.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
                Block::Nonneg(v) => v.iter().all(|x| x.is_finite()),
            };
            if !finite {
                return Err(SdpError::Malformed(format!("non-finite objective in block {b}")));
            }
            obj_blocks.push(block);
        }

        let mut merged_rows = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SdpError::Malformed(format!("row {i} has non-finite rhs")));
            }
            let mut merged = Row::with_rhs(row.rhs);
            for (b, terms) in row.psd {
                let ConeKind::Psd(_) = cones.get(b).copied().ok_or_else(|| {
                    SdpError::Malformed(format!("row {i} references missing block {b}"))
                })?
                else {
                    return Err(SdpError::Malformed(format!("row {i}: block {b} is not PSD")));
                };
                let r = dicts[b].ncols();
                for t in &terms {
                    if t.a >= r || t.b >= r {
                        return Err(SdpError::Malformed(format!(
                            "row {i}: dictionary index out of range in block {b}"
                        )));
                    }
                    if !(t.coef.re.is_finite() && t.coef.im.is_finite()) {
                        return Err(SdpError::Malformed(format!("row {i}: non-finite term")));
                    }
                }
                merged.psd_terms(b, terms);
            }
            for (b, e, v) in row.lp {
                match cones.get(b) {
                    Some(ConeKind::Nonneg(n)) if e < *n && v.is_finite() => {}
                    _ => {
                        return Err(SdpError::Malformed(format!(
                            "row {i}: bad nonnegative entry ({b}, {e})"
                        )))
                    }
                }
                merged.lp.push((b, e, v));
            }
            merged_rows.push(merged);
        }

        let mut psd_touch = vec![Vec::new(); cones.len()];
        let mut lp_touch: Vec<Vec<Vec<(usize, f64)>>> = cones
            .iter()
            .map(|c| match *c {
                ConeKind::Nonneg(n) => vec![Vec::new(); n],
                ConeKind::Psd(_) => Vec::new(),
            })
            .collect();
        for (i, row) in merged_rows.iter().enumerate() {
            for (p, (b, _)) in row.psd.iter().enumerate() {
                psd_touch[*b].push((i, p));
            }
            for &(b, e, v) in &row.lp {
                lp_touch[b][e].push((i, v));
            }
        }

        Ok(ConicProgram {
            cones,
            vectors: dicts,
            objective: BlockVec { blocks: obj_blocks },
            offset,
            rows: merged_rows,
            psd_touch,
            lp_touch,
        })
    }
}

/// A conic program in standard primal form. See the crate documentation.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    cones: Vec<ConeKind>,
    vectors: Vec<CMat>,
    objective: BlockVec,
    offset: f64,
    rows: Vec<Row>,
    psd_touch: Vec<Vec<(usize, usize)>>,
    lp_touch: Vec<Vec<Vec<(usize, f64)>>>,
}

impl ConicProgram {
    pub fn cones(&self) -> &[ConeKind] {
        &self.cones
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &BlockVec {
        &self.objective
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dictionary(&self, block: usize) -> &CMat {
        &self.vectors[block]
    }

    pub fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.rhs))
    }

    /// Total barrier degree.
    pub fn degree(&self) -> usize {
        self.cones.iter().map(|c| c.degree()).sum()
    }

    pub fn objective_value(&self, x: &BlockVec) -> f64 {
        self.objective.dot(x) + self.offset
    }

    /// Copy with objective multiplied by `alpha` (offset included).
    pub fn with_scaled_objective(&self, alpha: f64) -> ConicProgram {
        let mut out = self.clone();
        out.objective = out.objective.scaled(alpha);
        out.offset *= alpha;
        out
    }

    /// `A(X)`, the vector of row values `<A_i, X>`.
    pub fn apply(&self, x: &BlockVec) -> DVector<f64> {
        let mut out = DVector::zeros(self.rows.len());
        for (b, touch) in self.psd_touch.iter().enumerate() {
            if touch.is_empty() {
                continue;
            }
            let dict = &self.vectors[b];
            let xu = x.psd(b) * dict;
            for &(ri, pi) in touch {
                let mut acc = 0.0;
                for t in &self.rows[ri].psd[pi].1 {
                    let v = dict.column(t.b).dotc(&xu.column(t.a));
                    acc += (t.coef * v).re;
                }
                out[ri] += acc;
            }
        }
        for (b, elems) in self.lp_touch.iter().enumerate() {
            if elems.is_empty() {
                continue;
            }
            let xv = x.nonneg(b);
            for (e, entries) in elems.iter().enumerate() {
                for &(ri, v) in entries {
                    out[ri] += v * xv[e];
                }
            }
        }
        out
    }

    /// `A^T(y) = sum_i y_i A_i`.
    pub fn adjoint(&self, y: &DVector<f64>) -> BlockVec {
        let mut out = BlockVec::zeros(&self.cones);
        for (b, touch) in self.psd_touch.iter().enumerate() {
            if touch.is_empty() {
                continue;
            }
            let dict = &self.vectors[b];
            let (n, r) = dict.shape();
            // u = (coef dict^H)^H accumulated column by column: sum_t c_t a_t b_t^H = dict u^H
            let mut u = CMat::zeros(n, r);
            for &(ri, pi) in touch {
                let yi = y[ri];
                if yi == 0.0 {
                    continue;
                }
                for t in &self.rows[ri].psd[pi].1 {
                    let c = (t.coef * (0.5 * yi)).conj();
                    u.column_mut(t.a).axpy(c, &dict.column(t.b), c64(1.0, 0.0));
                }
            }
            let z = dict * u.adjoint();
            out.blocks[b] = Block::Psd(&z + z.adjoint());
        }
        for (b, elems) in self.lp_touch.iter().enumerate() {
            if elems.is_empty() {
                continue;
            }
            let mut v = DVector::zeros(elems.len());
            for (e, entries) in elems.iter().enumerate() {
                for &(ri, c) in entries {
                    v[e] += c * y[ri];
                }
            }
            out.blocks[b] = Block::Nonneg(v);
        }
        out
    }

    /// Dense coefficient matrix of row `row` on PSD block `block`.
    pub fn row_matrix(&self, row: usize, block: usize) -> CMat {
        let ConeKind::Psd(n) = self.cones[block] else {
            panic!("block {block} is not PSD");
        };
        let mut m = CMat::zeros(n, n);
        let dict = &self.vectors[block];
        for (b, terms) in &self.rows[row].psd {
            if *b != block {
                continue;
            }
            for t in terms {
                let a = dict.column(t.a);
                let bb = dict.column(t.b);
                let ab = a * bb.adjoint();
                m += (&ab * t.coef + ab.adjoint() * t.coef.conj()) * c64(0.5, 0.0);
            }
        }
        m
    }

    /// Dense coefficient vector of row `row` on nonnegative block `block`.
    pub fn row_vector(&self, row: usize, block: usize) -> DVector<f64> {
        let n = self.cones[block].degree();
        let mut v = DVector::zeros(n);
        for &(b, e, c) in &self.rows[row].lp {
            if b == block {
                v[e] += c;
            }
        }
        v
    }

    /// Schur complement `M_ij = <A_i, W A_j W>` under the NT scaling.
    pub(crate) fn schur(&self, scaling: &Scaling) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut out = DMatrix::zeros(m, m);
        for (b, touch) in self.psd_touch.iter().enumerate() {
            if touch.is_empty() {
                continue;
            }
            let r = scaling.psd_r(b).expect("PSD scaling");
            let p = r.adjoint() * &self.vectors[b];
            let gram = p.adjoint() * &p;
            let r = gram.nrows();
            let g = gram.as_slice();
            let at = |i: usize, j: usize| g[i + j * r];
            for (ii, &(ri, pi)) in touch.iter().enumerate() {
                let ti = &self.rows[ri].psd[pi].1;
                for &(rj, pj) in &touch[ii..] {
                    let tj = &self.rows[rj].psd[pj].1;
                    let mut acc = 0.0;
                    for t in ti {
                        for s in tj {
                            let z = t.coef * s.coef * at(t.b, s.a) * at(s.b, t.a)
                                + t.coef * s.coef.conj() * at(t.b, s.b) * at(s.a, t.a);
                            acc += 0.5 * z.re;
                        }
                    }
                    out[(ri, rj)] += acc;
                    if ri != rj {
                        out[(rj, ri)] += acc;
                    }
                }
            }
        }
        for (b, elems) in self.lp_touch.iter().enumerate() {
            if elems.is_empty() {
                continue;
            }
            let w = scaling.nonneg_w(b).expect("LP scaling");
            for (e, entries) in elems.iter().enumerate() {
                let w2 = w[e] * w[e];
                for (ii, &(ri, vi)) in entries.iter().enumerate() {
                    for &(rj, vj) in &entries[ii..] {
                        let z = vi * vj * w2;
                        out[(ri, rj)] += z;
                        if ri != rj {
                            out[(rj, ri)] += z;
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{herm_inner, identity};

    fn sample_program() -> ConicProgram {
        let mut b = ProgramBuilder::new();
        let p = b.add_psd(3);
        let l = b.add_nonneg(2);
        let v = b.add_vector(
            p,
            DVector::from_vec(vec![c64(1.0, 0.5), c64(-0.2, 0.0), c64(0.3, -0.7)]),
        );
        let mut r0 = Row::with_rhs(1.0);
        r0.psd_terms(p, [Term::new(c64(0.4, -1.1), v, 1), Term::real(2.0, 0, 0)])
            .lp_entry(l, 1, -1.0);
        b.add_row(r0);
        let mut r1 = Row::with_rhs(0.0);
        r1.psd_terms(p, [Term::real(1.0, v, v), Term::new(c64(0.0, 1.0), 2, 0)])
            .lp_entry(l, 0, 1.0)
            .lp_entry(l, 1, 3.0);
        b.add_row(r1);
        b.add_objective_psd(p, &identity(3));
        b.build().unwrap()
    }

    #[test]
    fn apply_matches_dense_rows() {
        let prog = sample_program();
        let mut x = BlockVec::identity(prog.cones());
        if let Block::Psd(m) = &mut x.blocks[0] {
            m[(0, 1)] = c64(0.2, 0.3);
            m[(1, 0)] = c64(0.2, -0.3);
            m[(2, 2)] = c64(2.5, 0.0);
        }
        let ax = prog.apply(&x);
        for i in 0..prog.num_rows() {
            let dense = herm_inner(&prog.row_matrix(i, 0), x.psd(0)) + prog.row_vector(i, 1).dot(x.nonneg(1));
            assert!((dense - ax[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_is_transpose_of_apply() {
        let prog = sample_program();
        let y = DVector::from_vec(vec![0.7, -1.3]);
        let mut x = BlockVec::identity(prog.cones());
        if let Block::Psd(m) = &mut x.blocks[0] {
            m[(0, 2)] = c64(-0.4, 0.9);
            m[(2, 0)] = c64(-0.4, -0.9);
        }
        let lhs = prog.apply(&x).dot(&y);
        let rhs = prog.adjoint(&y).dot(&x);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn schur_matches_dense_formula() {
        let prog = sample_program();
        let mut x = BlockVec::identity(prog.cones());
        if let Block::Psd(m) = &mut x.blocks[0] {
            m[(0, 1)] = c64(0.2, 0.3);
            m[(1, 0)] = c64(0.2, -0.3);
        }
        let mut s = BlockVec::identity(prog.cones());
        if let Block::Psd(m) = &mut s.blocks[0] {
            m[(1, 2)] = c64(0.1, -0.4);
            m[(2, 1)] = c64(0.1, 0.4);
            m[(0, 0)] = c64(3.0, 0.0);
        }
        if let Block::Nonneg(v) = &mut s.blocks[1] {
            v[0] = 4.0;
        }
        let sc = Scaling::new(&x, &s).unwrap();
        let m = prog.schur(&sc);
        for j in 0..prog.num_rows() {
            let mut ej = DVector::zeros(prog.num_rows());
            ej[j] = 1.0;
            let col = prog.apply(&sc.apply_w(&prog.adjoint(&ej)));
            for i in 0..prog.num_rows() {
                assert!((col[i] - m[(i, j)]).abs() < 1e-10, "{} vs {}", col[i], m[(i, j)]);
            }
        }
    }

    #[test]
    fn bad_dictionary_index_rejected() {
        let mut b = ProgramBuilder::new();
        let p = b.add_psd(2);
        let mut r = Row::with_rhs(0.0);
        r.psd_terms(p, [Term::real(1.0, 5, 0)]);
        b.add_row(r);
        assert!(matches!(b.build(), Err(SdpError::Malformed(_))));
    }
}
