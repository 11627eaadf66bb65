//! Network geometry, channel sampling and per-user SINR / power evaluation.
//!
//! Vectors over the whole network are laid out user-major: entry
//! `(n, k, a)` (AP `n`, user `k`, antenna `a`) sits at `k*N*L + n*L + a`, so
//! `h_k` and `v_k` are contiguous blocks of length `N*L` made of the per-AP
//! sub-blocks `h_kn`, `v_nk` of length `L`.

use std::collections::BTreeSet;
use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rgsb_sdp::C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Set of active `(ap, user)` pairs.
pub type Pattern = BTreeSet<(usize, usize)>;

/// Placement and power parameters for [`generate_topology`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub n_aps: usize,
    pub n_users: usize,
    pub antennas: usize,
    /// Users are placed uniformly in `[-w, w]^2` (meters).
    pub half_width: f64,
    /// Explicit AP coordinates in meters. When empty, four APs go to
    /// `(+-400, +-400)` and other counts are spread on a circle.
    pub ap_positions: Vec<[f64; 2]>,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    pub max_tx_power: f64,
    pub amplifier_efficiency: f64,
    /// Computation power per (AP, task) in watts.
    pub compute_power: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            n_aps: 4,
            n_users: 4,
            antennas: 2,
            half_width: 800.0,
            ap_positions: Vec::new(),
            noise_power: dbm_to_watts(-102.0),
            max_tx_power: 1.0,
            amplifier_efficiency: 0.25,
            compute_power: 0.6,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub ap_positions: Vec<[f64; 2]>,
    pub mu_positions: Vec<[f64; 2]>,
    pub antennas: usize,
    pub noise_power: Vec<f64>,
    pub max_tx_power: Vec<f64>,
    pub amplifier_efficiency: Vec<f64>,
    /// `N x K` matrix of computation powers.
    pub compute_power: DMatrix<f64>,
}

impl Topology {
    pub fn n_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn n_users(&self) -> usize {
        self.mu_positions.len()
    }

    /// `N * L`, the length of one user's block.
    pub fn user_dim(&self) -> usize {
        self.n_aps() * self.antennas
    }

    /// `N * K * L`.
    pub fn dim(&self) -> usize {
        self.user_dim() * self.n_users()
    }

    pub fn index(&self, n: usize, k: usize, a: usize) -> usize {
        k * self.user_dim() + n * self.antennas + a
    }

    pub fn user_range(&self, k: usize) -> Range<usize> {
        let d = self.user_dim();
        k * d..(k + 1) * d
    }

    pub fn group_range(&self, n: usize, k: usize) -> Range<usize> {
        let start = self.index(n, k, 0);
        start..start + self.antennas
    }

    /// Planar AP-user distance in meters.
    pub fn distance(&self, n: usize, k: usize) -> f64 {
        let a = self.ap_positions[n];
        let u = self.mu_positions[k];
        ((a[0] - u[0]).powi(2) + (a[1] - u[1]).powi(2)).sqrt()
    }

    /// Amplitude gain `10^(-PL/20)`. The path-loss formula takes the
    /// distance in kilometers; distances below one meter are clamped.
    pub fn amplitude_gain(&self, n: usize, k: usize) -> f64 {
        let d_km = self.distance(n, k).max(1.0) / 1000.0;
        let pl = 128.1 + 37.6 * d_km.log10();
        10f64.powf(-pl / 20.0)
    }

    pub fn all_pairs(&self) -> Pattern {
        (0..self.n_aps())
            .flat_map(|n| (0..self.n_users()).map(move |k| (n, k)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_aps() == 0 || self.n_users() == 0 || self.antennas == 0 {
            return Err(Error::InvalidArgument("N, K and L must be positive".into()));
        }
        let k = self.n_users();
        let n = self.n_aps();
        if self.noise_power.len() != k || self.noise_power.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidArgument("noise powers must be positive".into()));
        }
        if self.max_tx_power.len() != n || self.max_tx_power.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidArgument("max transmit powers must be positive".into()));
        }
        if self.amplifier_efficiency.len() != n
            || self.amplifier_efficiency.iter().any(|&e| !(e > 0.0 && e <= 1.0))
        {
            return Err(Error::InvalidArgument("efficiencies must lie in (0, 1]".into()));
        }
        if self.compute_power.nrows() != n
            || self.compute_power.ncols() != k
            || self.compute_power.iter().any(|&p| !(p >= 0.0))
        {
            return Err(Error::InvalidArgument("compute powers must be N x K and >= 0".into()));
        }
        Ok(())
    }
}

/// Path loss in dB, `128.1 + 37.6 log10(d)`, applied to `d` as given.
pub fn path_loss_db(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!("distance must be positive, got {d}")));
    }
    Ok(128.1 + 37.6 * d.log10())
}

fn default_ap_positions(n: usize) -> Vec<[f64; 2]> {
    if n == 4 {
        return vec![[400.0, 400.0], [-400.0, 400.0], [-400.0, -400.0], [400.0, -400.0]];
    }
    if n == 1 {
        return vec![[0.0, 0.0]];
    }
    let r = 400.0 * 2f64.sqrt();
    (0..n)
        .map(|i| {
            let t = std::f64::consts::FRAC_PI_4 + 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

pub fn generate_topology<R: Rng>(config: &TopologyConfig, rng: &mut R) -> Result<Topology> {
    if config.n_aps == 0 || config.n_users == 0 || config.antennas == 0 {
        return Err(Error::InvalidArgument("N, K and L must be positive".into()));
    }
    if !(config.half_width >= 0.0) {
        return Err(Error::InvalidArgument("region half-width must be >= 0".into()));
    }
    let ap_positions = if config.ap_positions.is_empty() {
        default_ap_positions(config.n_aps)
    } else if config.ap_positions.len() == config.n_aps {
        config.ap_positions.clone()
    } else {
        return Err(Error::InvalidArgument(format!(
            "{} AP positions given for {} APs",
            config.ap_positions.len(),
            config.n_aps
        )));
    };
    let w = config.half_width;
    let mu_positions = (0..config.n_users)
        .map(|_| [rng.random_range(-w..=w), rng.random_range(-w..=w)])
        .collect();
    let topo = Topology {
        ap_positions,
        mu_positions,
        antennas: config.antennas,
        noise_power: vec![config.noise_power; config.n_users],
        max_tx_power: vec![config.max_tx_power; config.n_aps],
        amplifier_efficiency: vec![config.amplifier_efficiency; config.n_aps],
        compute_power: DMatrix::from_element(config.n_aps, config.n_users, config.compute_power),
    };
    topo.validate()?;
    Ok(topo)
}

/// Circularly-symmetric complex normal with variance `var`.
pub fn complex_normal<R: Rng>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// A network-wide complex vector in the user-major layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSample {
    pub h: DVector<C64>,
}

impl ChannelSample {
    pub fn user(&self, topo: &Topology, k: usize) -> DVector<C64> {
        self.h.rows_range(topo.user_range(k)).into_owned()
    }

    pub fn sub(&self, topo: &Topology, k: usize, n: usize) -> DVector<C64> {
        self.h.rows_range(topo.group_range(n, k)).into_owned()
    }
}

/// Aggregated beamforming vector, same layout as [`ChannelSample`].
#[derive(Clone, Debug, PartialEq)]
pub struct Beamformer {
    pub v: DVector<C64>,
}

impl Beamformer {
    pub fn zeros(topo: &Topology) -> Self {
        Beamformer {
            v: DVector::from_element(topo.dim(), C64::new(0.0, 0.0)),
        }
    }

    pub fn user(&self, topo: &Topology, k: usize) -> DVector<C64> {
        self.v.rows_range(topo.user_range(k)).into_owned()
    }

    pub fn group_norm_sqr(&self, topo: &Topology, n: usize, k: usize) -> f64 {
        self.v.rows_range(topo.group_range(n, k)).norm_squared()
    }

    /// `sum_k ||v_nk||^2` for AP `n`.
    pub fn ap_power(&self, topo: &Topology, n: usize) -> f64 {
        (0..topo.n_users()).map(|k| self.group_norm_sqr(topo, n, k)).sum()
    }

    pub fn zero_group(&mut self, topo: &Topology, n: usize, k: usize) {
        for i in topo.group_range(n, k) {
            self.v[i] = C64::new(0.0, 0.0);
        }
    }
}

/// Small-scale fading `c` of one coherence interval, before path loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Fading {
    pub c: DVector<C64>,
}

pub fn draw_fading<R: Rng>(topo: &Topology, rng: &mut R) -> Fading {
    Fading {
        c: DVector::from_fn(topo.dim(), |_, _| complex_normal(rng, 1.0)),
    }
}

/// Channel for a fixed fading draw plus a fresh CSI error with per-entry
/// variance `error_var` (before path-loss scaling).
pub fn sample_with_fading<R: Rng>(
    topo: &Topology,
    fading: &Fading,
    error_var: f64,
    rng: &mut R,
) -> ChannelSample {
    let mut h = fading.c.clone();
    for k in 0..topo.n_users() {
        for n in 0..topo.n_aps() {
            let g = topo.amplitude_gain(n, k);
            for i in topo.group_range(n, k) {
                let e = if error_var > 0.0 {
                    complex_normal(rng, error_var)
                } else {
                    C64::new(0.0, 0.0)
                };
                h[i] = (h[i] + e) * g;
            }
        }
    }
    ChannelSample { h }
}

/// Noiseless channel `10^(-PL/20) c` of a fading draw.
pub fn true_channel(topo: &Topology, fading: &Fading) -> ChannelSample {
    let mut h = fading.c.clone();
    for k in 0..topo.n_users() {
        for n in 0..topo.n_aps() {
            let g = topo.amplitude_gain(n, k);
            for i in topo.group_range(n, k) {
                h[i] *= g;
            }
        }
    }
    ChannelSample { h }
}

/// Fresh fading and fresh error.
pub fn sample_channel<R: Rng>(topo: &Topology, error_var: f64, rng: &mut R) -> Result<ChannelSample> {
    if !(error_var >= 0.0) {
        return Err(Error::InvalidArgument("error variance must be >= 0".into()));
    }
    let fading = draw_fading(topo, rng);
    Ok(sample_with_fading(topo, &fading, error_var, rng))
}

/// `count` samples sharing one fading draw, differing only in the error.
pub fn sample_dataset<R: Rng>(
    topo: &Topology,
    fading: &Fading,
    count: usize,
    error_var: f64,
    rng: &mut R,
) -> Result<Vec<ChannelSample>> {
    if count == 0 {
        return Err(Error::InvalidArgument("dataset size must be >= 1".into()));
    }
    Ok((0..count)
        .map(|_| sample_with_fading(topo, fading, error_var, rng))
        .collect())
}

/// Sample sets for `blocks` consecutive coherence intervals: the first
/// carries `initial` training samples, each later one a single sample. The
/// fading is redrawn per block; the error statistics are shared.
pub fn block_fading_stream<R: Rng>(
    topo: &Topology,
    blocks: usize,
    initial: usize,
    error_var: f64,
    rng: &mut R,
) -> Result<Vec<Vec<ChannelSample>>> {
    if blocks == 0 {
        return Err(Error::InvalidArgument("need at least one block".into()));
    }
    (0..blocks)
        .map(|t| {
            let fading = draw_fading(topo, rng);
            sample_dataset(topo, &fading, if t == 0 { initial } else { 1 }, error_var, rng)
        })
        .collect()
}

/// `|h_k^H v_k|^2 / (sum_{l != k} |h_k^H v_l|^2 + noise)`.
pub fn sinr(topo: &Topology, v: &Beamformer, h_k: &DVector<C64>, k: usize, noise: f64) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for l in 0..topo.n_users() {
        let p = h_k.dotc(&v.v.rows_range(topo.user_range(l))).norm_sqr();
        if l == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    signal / (interference + noise)
}

/// `sum (1/eta_n) ||v_nk||^2 + sum_{(n,k) in pattern} P^c_nk`.
pub fn total_power(topo: &Topology, v: &Beamformer, pattern: &Pattern) -> f64 {
    let mut p = 0.0;
    for n in 0..topo.n_aps() {
        let eta = topo.amplifier_efficiency[n];
        for k in 0..topo.n_users() {
            p += v.group_norm_sqr(topo, n, k) / eta;
        }
    }
    p + pattern.iter().map(|&(n, k)| topo.compute_power[(n, k)]).sum::<f64>()
}

/// One CSV row per sample, columns `re_0, im_0, re_1, im_1, ...`.
pub fn write_dataset_csv<W: Write>(samples: &[ChannelSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = samples.first() {
        let header: Vec<String> = (0..first.h.len())
            .flat_map(|i| [format!("re_{i}"), format!("im_{i}")])
            .collect();
        w.write_record(&header)?;
    }
    for s in samples {
        let row: Vec<String> = s
            .h
            .iter()
            .flat_map(|z| [format!("{:e}", z.re), format!("{:e}", z.im)])
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
