//! Ellipsoidal high-probability regions learned from channel samples.
//!
//! The region of one user is `{h_hat + B u : ||u|| <= 1}` with `B = sqrt(s) Delta`,
//! `Delta Delta^H = Sigma`. The shape `Sigma` is estimated on one half of the
//! data, the size `s` is an order statistic of the Mahalanobis values on the
//! other half, picked so that the region covers `1 - eps` of the channel
//! distribution with confidence `1 - delta`.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rgsb_sdp::linalg::{herm_eigen, herm_norm, hermitian_defect};
use rgsb_sdp::{CMat, C64};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSample, Topology};
use crate::error::{Error, Result};
use crate::stats::ln_binomial_cdf_prefix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustParams {
    pub epsilon: f64,
    pub delta: f64,
    /// QoS violation budget.
    pub zeta: f64,
    /// Total number of training samples.
    pub samples: usize,
    /// Samples used for the shape; the rest calibrate the size.
    pub shape_samples: usize,
}

impl Default for RobustParams {
    fn default() -> Self {
        RobustParams {
            epsilon: 0.05,
            delta: 0.05,
            zeta: 0.1,
            samples: 200,
            shape_samples: 100,
        }
    }
}

impl RobustParams {
    pub fn size_samples(&self) -> usize {
        self.samples.saturating_sub(self.shape_samples)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.epsilon) || !unit(self.delta) || !unit(self.zeta) {
            return Err(Error::InvalidArgument("epsilon, delta, zeta must lie in (0, 1)".into()));
        }
        if self.shape_samples < 1 || self.shape_samples >= self.samples {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= D1 < D, got D1 = {}, D = {}",
                self.shape_samples, self.samples
            )));
        }
        if self.zeta <= self.delta + self.epsilon * (1.0 - self.delta) {
            return Err(Error::InvalidArgument(format!(
                "zeta = {} must exceed delta + eps (1 - delta) = {}",
                self.zeta,
                self.delta + self.epsilon * (1.0 - self.delta)
            )));
        }
        Ok(())
    }
}

/// Uniformly random partition into `d1` and `len - d1` samples.
pub fn split_dataset<T: Clone, R: Rng>(samples: &[T], d1: usize, rng: &mut R) -> Result<(Vec<T>, Vec<T>)> {
    if d1 < 1 || d1 >= samples.len() {
        return Err(Error::InvalidArgument(format!(
            "split size {d1} invalid for {} samples",
            samples.len()
        )));
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(rng);
    let first = idx[..d1].iter().map(|&i| samples[i].clone()).collect();
    let second = idx[d1..].iter().map(|&i| samples[i].clone()).collect();
    Ok((first, second))
}

/// Sample mean and block-diagonal unbiased covariance with diagonal blocks
/// of size `block`.
pub fn learn_shape(part1: &[DVector<C64>], block: usize) -> Result<(DVector<C64>, CMat)> {
    if part1.len() < 2 {
        return Err(Error::InsufficientSamples { have: part1.len(), need: 2 });
    }
    let dim = part1[0].len();
    if block == 0 || dim % block != 0 || part1.iter().any(|h| h.len() != dim) {
        return Err(Error::Dimension(format!("samples of length {dim} with blocks of {block}")));
    }
    let count = part1.len() as f64;
    let mut mean = DVector::from_element(dim, C64::new(0.0, 0.0));
    for h in part1 {
        mean += h;
    }
    mean /= C64::new(count, 0.0);
    let mut sigma = CMat::zeros(dim, dim);
    for h in part1 {
        let d = h - &mean;
        for b in (0..dim).step_by(block) {
            for i in b..b + block {
                for j in b..b + block {
                    sigma[(i, j)] += d[i] * d[j].conj();
                }
            }
        }
    }
    sigma /= C64::new(count - 1.0, 0.0);
    Ok((mean, sigma))
}

/// Smallest `j` in `1..=d2` with `P(Bin(d2, 1 - eps) <= j - 1) >= 1 - delta`.
pub fn quantile_index(d2: usize, epsilon: f64, delta: f64) -> Result<usize> {
    if d2 == 0 {
        return Err(Error::InsufficientSamples { have: 0, need: 1 });
    }
    let target = (1.0 - delta).ln();
    let cdf = ln_binomial_cdf_prefix(d2 as u64, d2 as u64 - 1, 1.0 - epsilon);
    if let Some(k) = cdf.iter().position(|&c| c >= target) {
        return Ok(k + 1);
    }
    Err(Error::InsufficientSamples {
        have: d2,
        need: min_sample_size(epsilon, delta),
    })
}

/// Smallest `d` with `(1 - eps)^d <= delta`.
pub fn min_sample_size(epsilon: f64, delta: f64) -> usize {
    let q = 1.0 - epsilon;
    let mut d = (delta.ln() / q.ln()).ceil().max(1.0) as usize;
    while d > 1 && q.powi(d as i32 - 1) <= delta {
        d -= 1;
    }
    while q.powi(d as i32) > delta {
        d += 1;
    }
    d
}

/// Eigen-based square root and pseudo-inverse of a PSD matrix.
struct PsdFactors {
    sqrt: CMat,
    pinv: CMat,
    /// Orthogonal projector onto the range.
    range: CMat,
}

fn psd_factors(sigma: &CMat) -> Result<PsdFactors> {
    let n = sigma.nrows();
    let scale = herm_norm(sigma);
    if hermitian_defect(sigma) > 1e-12 * (1.0 + scale) {
        return Err(Error::InvalidArgument("shape matrix is not Hermitian".into()));
    }
    let (vals, vecs) = herm_eigen(sigma);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * scale {
        return Err(Error::NotPsd(min));
    }
    let cut = 1e-12 * scale;
    let mut sqrt = CMat::zeros(n, n);
    let mut pinv = CMat::zeros(n, n);
    let mut range = CMat::zeros(n, n);
    for (i, &l) in vals.iter().enumerate() {
        if l <= cut {
            continue;
        }
        let u = vecs.column(i);
        let p = &u * u.adjoint();
        sqrt += &p * C64::new(l.sqrt(), 0.0);
        pinv += &p * C64::new(1.0 / l, 0.0);
        range += p;
    }
    Ok(PsdFactors { sqrt, pinv, range })
}

fn quad(m: &CMat, d: &DVector<C64>) -> f64 {
    d.dotc(&(m * d)).re
}

/// `(h - h_hat)^H Sigma^+ (h - h_hat)` for each sample.
pub fn mahalanobis_values(samples: &[DVector<C64>], center: &DVector<C64>, shape: &CMat) -> Result<Vec<f64>> {
    let f = psd_factors(shape)?;
    Ok(samples.iter().map(|h| quad(&f.pinv, &(h - center))).collect())
}

/// The `j*`-th smallest Mahalanobis value over `part2`.
pub fn calibrate_size(
    part2: &[DVector<C64>],
    center: &DVector<C64>,
    shape: &CMat,
    epsilon: f64,
    delta: f64,
) -> Result<f64> {
    let j = quantile_index(part2.len(), epsilon, delta)?;
    let mut g = mahalanobis_values(part2, center, shape)?;
    g.sort_by(f64::total_cmp);
    Ok(g[j - 1].max(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyRegion {
    pub center: DVector<C64>,
    pub shape: CMat,
    pub size: f64,
    /// `sqrt(size) * Delta`.
    pub factor: CMat,
    pinv: CMat,
    range: CMat,
}

pub fn build_region(center: DVector<C64>, shape: CMat, size: f64) -> Result<UncertaintyRegion> {
    let n = center.len();
    if shape.nrows() != n || shape.ncols() != n {
        return Err(Error::Dimension(format!("center of length {n}, shape {}x{}", shape.nrows(), shape.ncols())));
    }
    if !(size >= 0.0) || !size.is_finite() {
        return Err(Error::InvalidArgument(format!("region size {size}")));
    }
    let f = psd_factors(&shape)?;
    Ok(UncertaintyRegion {
        center,
        factor: f.sqrt * C64::new(size.sqrt(), 0.0),
        shape,
        size,
        pinv: f.pinv,
        range: f.range,
    })
}

impl UncertaintyRegion {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Mahalanobis value of `h` with respect to the learned shape.
    pub fn mahalanobis(&self, h: &DVector<C64>) -> f64 {
        quad(&self.pinv, &(h - &self.center))
    }

    pub fn contains(&self, h: &DVector<C64>) -> bool {
        membership(h, self)
    }

    /// `h_hat + B u`.
    pub fn point(&self, u: &DVector<C64>) -> DVector<C64> {
        &self.center + &self.factor * u
    }

    /// Line-oriented text form: a header `region <dim> <size>`, one line
    /// `center` with interleaved re/im values, then one `shape` line per
    /// row of `Sigma`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "region {} {:e}", self.dim(), self.size);
        let line = |out: &mut String, tag: &str, vals: &mut dyn Iterator<Item = &C64>| {
            let _ = write!(out, "{tag}");
            for z in vals {
                let _ = write!(out, " {:e} {:e}", z.re, z.im);
            }
            out.push('\n');
        };
        line(&mut out, "center", &mut self.center.iter());
        for i in 0..self.dim() {
            line(&mut out, "shape", &mut self.shape.row(i).iter());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<UncertaintyRegion> {
        let bad = |m: &str| Error::InvalidArgument(format!("region text: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if header.len() != 3 || header[0] != "region" {
            return Err(bad("missing header"));
        }
        let n: usize = header[1].parse().map_err(|_| bad("dimension"))?;
        let size: f64 = header[2].parse().map_err(|_| bad("size"))?;
        let parse = |line: Option<&str>, tag: &str| -> Result<Vec<C64>> {
            let line = line.ok_or_else(|| bad("truncated"))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(tag) {
                return Err(bad(&format!("expected {tag} line")));
            }
            let vals: Vec<f64> = it
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("number"))?;
            if vals.len() != 2 * n {
                return Err(bad(&format!("{tag} line has {} values", vals.len())));
            }
            Ok(vals.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
        };
        let center = DVector::from_vec(parse(lines.next(), "center")?);
        let mut shape = CMat::zeros(n, n);
        for i in 0..n {
            let row = parse(lines.next(), "shape")?;
            for (j, z) in row.into_iter().enumerate() {
                shape[(i, j)] = z;
            }
        }
        build_region(center, shape, size)
    }
}

/// `[h_hat, B]`, of shape `n x (n + 1)`.
pub fn build_h(region: &UncertaintyRegion) -> CMat {
    let n = region.dim();
    let mut h = CMat::zeros(n, n + 1);
    h.set_column(0, &region.center);
    h.columns_mut(1, n).copy_from(&region.factor);
    h
}

/// Same factor, new center.
pub fn refresh_center(region: &UncertaintyRegion, center: DVector<C64>) -> Result<UncertaintyRegion> {
    if center.len() != region.dim() {
        return Err(Error::Dimension(format!("center of length {}, region of {}", center.len(), region.dim())));
    }
    Ok(UncertaintyRegion {
        center,
        ..region.clone()
    })
}

/// Mahalanobis test with pseudo-inverse; offsets outside the range of
/// `Sigma` are rejected.
pub fn membership(h: &DVector<C64>, region: &UncertaintyRegion) -> bool {
    let d = h - &region.center;
    let dn = d.norm();
    if dn == 0.0 {
        return true;
    }
    let off = (&d - &region.range * &d).norm();
    if off > 1e-9 * dn {
        return false;
    }
    region.mahalanobis(h) <= region.size * (1.0 + 1e-9)
}

/// Full pipeline for one user's samples.
pub fn learn_region<R: Rng>(
    samples: &[DVector<C64>],
    params: &RobustParams,
    block: usize,
    rng: &mut R,
) -> Result<UncertaintyRegion> {
    let (part1, part2) = split_dataset(samples, params.shape_samples, rng)?;
    let (center, shape) = learn_shape(&part1, block)?;
    let size = calibrate_size(&part2, &center, &shape, params.epsilon, params.delta)?;
    build_region(center, shape, size)
}

/// Regions for every user from network-wide samples. One random split is
/// shared by all users.
pub fn learn_regions<R: Rng>(
    topo: &Topology,
    samples: &[ChannelSample],
    params: &RobustParams,
    rng: &mut R,
) -> Result<Vec<UncertaintyRegion>> {
    let (part1, part2) = split_dataset(samples, params.shape_samples, rng)?;
    (0..topo.n_users())
        .map(|k| {
            let p1: Vec<_> = part1.iter().map(|s| s.user(topo, k)).collect();
            let p2: Vec<_> = part2.iter().map(|s| s.user(topo, k)).collect();
            let (center, shape) = learn_shape(&p1, topo.antennas)?;
            let size = calibrate_size(&p2, &center, &shape, params.epsilon, params.delta)?;
            build_region(center, shape, size)
        })
        .collect()
}
