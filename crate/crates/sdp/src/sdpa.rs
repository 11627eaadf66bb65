//! Sparse SDPA text format (`.dat-s`) for cross-checking with external
//! solvers.
//!
//! A program `min <C, X> + offset, <A_i, X> = b_i, X in K` is written as the
//! SDPA dual problem `max <F_0, Y>, <F_i, Y> = c_i, Y psd` with `c_i = b_i`,
//! `F_i = A_i` and `F_0 = -C`. Hermitian blocks of size `n` are written as
//! real symmetric blocks of size `2n` holding `[[Re, -Im], [Im, Re]] / 2`, so
//! that inner products are preserved. Nonnegative blocks become diagonal
//! blocks (negative size). The layout is
//!
//! ```text
//! * comment lines, optionally "* offset = <value>"
//! m
//! number of blocks
//! block sizes
//! c_1 .. c_m
//! matrix block row col value      (1-based, upper triangle, matrix 0 = F_0)
//! ```
//!
//! Reading accepts any real SDPA file and returns a program with one PSD
//! block per SDPA block, so a written Hermitian block comes back in its real
//! embedding. Optimal values are unchanged by the round trip.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::SdpError;
use crate::linalg::embed_unchecked;
use crate::program::{ConeKind, ConicProgram, ProgramBuilder, Row, Term};

fn write_block_entries(out: &mut String, matno: usize, blkno: usize, m: &nalgebra::DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            let v = m[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "{} {} {} {} {:e}", matno, blkno + 1, i + 1, j + 1, v);
            }
        }
    }
}

pub fn to_sdpa_string(prog: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "* offset = {:e}", prog.offset());
    let _ = writeln!(out, "{}", prog.num_rows());
    let _ = writeln!(out, "{}", prog.cones().len());
    let sizes: Vec<String> = prog
        .cones()
        .iter()
        .map(|c| match *c {
            ConeKind::Psd(n) => format!("{}", 2 * n),
            ConeKind::Nonneg(n) => format!("-{n}"),
        })
        .collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = prog.rows().iter().map(|r| format!("{:e}", r.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));

    for matno in 0..=prog.num_rows() {
        for (b, cone) in prog.cones().iter().enumerate() {
            match cone {
                ConeKind::Psd(_) => {
                    let cm = if matno == 0 {
                        -prog.objective().psd(b)
                    } else {
                        prog.row_matrix(matno - 1, b)
                    };
                    if cm.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                        continue;
                    }
                    let e = embed_unchecked(&cm) * 0.5;
                    write_block_entries(&mut out, matno, b, &e);
                }
                ConeKind::Nonneg(_) => {
                    let v = if matno == 0 {
                        -prog.objective().nonneg(b)
                    } else {
                        prog.row_vector(matno - 1, b)
                    };
                    for (i, &val) in v.iter().enumerate() {
                        if val != 0.0 {
                            let _ = writeln!(out, "{} {} {} {} {:e}", matno, b + 1, i + 1, i + 1, val);
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn write_sdpa<W: Write>(prog: &ConicProgram, mut out: W) -> Result<(), SdpError> {
    out.write_all(to_sdpa_string(prog).as_bytes())?;
    Ok(())
}

struct Tokens {
    items: Vec<(usize, String)>,
    pos: usize,
}

impl Tokens {
    fn next(&mut self, what: &str) -> Result<(usize, &str), SdpError> {
        let last_line = self.items.last().map(|t| t.0).unwrap_or(0);
        let item = self.items.get(self.pos).ok_or_else(|| SdpError::Parse {
            line: last_line,
            msg: format!("unexpected end of input, expected {what}"),
        })?;
        self.pos += 1;
        Ok((item.0, item.1.as_str()))
    }

    fn int(&mut self, what: &str) -> Result<i64, SdpError> {
        let (line, tok) = self.next(what)?;
        tok.parse::<i64>().map_err(|_| SdpError::Parse {
            line,
            msg: format!("expected integer {what}, found {tok:?}"),
        })
    }

    fn float(&mut self, what: &str) -> Result<f64, SdpError> {
        let (line, tok) = self.next(what)?;
        let value = tok.replace(['d', 'D'], "e").parse::<f64>().map_err(|_| SdpError::Parse {
            line,
            msg: format!("expected number {what}, found {tok:?}"),
        })?;
        if !value.is_finite() {
            return Err(SdpError::Parse {
                line,
                msg: format!("non-finite {what}"),
            });
        }
        Ok(value)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.items.len()
    }
}

pub fn read_sdpa<R: BufRead>(input: R) -> Result<ConicProgram, SdpError> {
    let mut offset = 0.0;
    let mut items = Vec::new();
    let mut header = true;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if header && (trimmed.starts_with('*') || trimmed.starts_with('"')) {
            if let Some(rest) = trimmed.trim_start_matches(['*', '"']).trim().strip_prefix("offset") {
                let value = rest.trim().trim_start_matches('=').trim();
                offset = value.parse::<f64>().map_err(|_| SdpError::Parse {
                    line: lineno,
                    msg: format!("bad offset {value:?}"),
                })?;
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        header = false;
        let cleaned: String = trimmed
            .chars()
            .map(|c| if matches!(c, ',' | '(' | ')' | '{' | '}') { ' ' } else { c })
            .collect();
        for tok in cleaned.split_whitespace() {
            items.push((lineno, tok.to_string()));
        }
    }
    let mut toks = Tokens { items, pos: 0 };

    let m = toks.int("constraint count")?;
    let nblocks = toks.int("block count")?;
    if m < 0 || nblocks <= 0 {
        return Err(SdpError::Malformed(format!("m = {m}, blocks = {nblocks}")));
    }
    let mut sizes = Vec::new();
    for _ in 0..nblocks {
        let s = toks.int("block size")?;
        if s == 0 {
            return Err(SdpError::Malformed("zero block size".into()));
        }
        sizes.push(s);
    }
    let mut rhs = Vec::new();
    for _ in 0..m {
        rhs.push(toks.float("objective coefficient")?);
    }

    let mut builder = ProgramBuilder::new();
    let mut objective: Vec<nalgebra::DMatrix<f64>> = Vec::new();
    for &s in &sizes {
        let n = s.unsigned_abs() as usize;
        if s > 0 {
            builder.add_psd(n);
            objective.push(nalgebra::DMatrix::zeros(n, n));
        } else {
            builder.add_nonneg(n);
            objective.push(nalgebra::DMatrix::zeros(n, 1));
        }
    }
    let mut rows: Vec<Row> = rhs.iter().map(|&b| Row::with_rhs(b)).collect();

    while !toks.at_end() {
        let line = toks.items[toks.pos].0;
        let matno = toks.int("matrix number")?;
        let blk = toks.int("block number")?;
        let i = toks.int("row index")?;
        let j = toks.int("column index")?;
        let v = toks.float("entry value")?;
        if matno < 0 || matno > m || blk < 1 || blk > nblocks {
            return Err(SdpError::Parse {
                line,
                msg: format!("entry references matrix {matno}, block {blk}"),
            });
        }
        let b = (blk - 1) as usize;
        let s = sizes[b];
        let n = s.unsigned_abs() as i64;
        if i < 1 || j < 1 || i > n || j > n || (s < 0 && i != j) {
            return Err(SdpError::Parse {
                line,
                msg: format!("index ({i}, {j}) outside block {blk}"),
            });
        }
        let (i, j) = ((i.min(j) - 1) as usize, (i.max(j) - 1) as usize);
        if matno == 0 {
            if s > 0 {
                objective[b][(i, j)] -= v;
                if i != j {
                    objective[b][(j, i)] -= v;
                }
            } else {
                objective[b][(i, 0)] -= v;
            }
        } else {
            let row = &mut rows[(matno - 1) as usize];
            if s > 0 {
                let coef = if i == j { v } else { 2.0 * v };
                row.psd_terms(b, [Term::real(coef, i, j)]);
            } else {
                row.lp_entry(b, i, v);
            }
        }
    }

    for (b, obj) in objective.iter().enumerate() {
        if sizes[b] > 0 {
            builder.add_objective_psd(b, &crate::linalg::to_complex(obj));
        } else {
            for i in 0..obj.nrows() {
                if obj[(i, 0)] != 0.0 {
                    builder.add_objective_lp(b, i, obj[(i, 0)]);
                }
            }
        }
    }
    for row in rows {
        builder.add_row(row);
    }
    builder.set_offset(offset);
    builder.build()
}
