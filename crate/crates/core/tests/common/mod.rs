//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rgsb_core::channel::{
    draw_fading, generate_topology, sample_dataset, ChannelSample, Fading, Topology, TopologyConfig,
};
use rgsb_core::uncertainty::{build_h, learn_regions, RobustParams, UncertaintyRegion};
use rgsb_sdp::{CMat, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_config(n: usize, k: usize, l: usize) -> TopologyConfig {
    TopologyConfig {
        n_aps: n,
        n_users: k,
        antennas: l,
        ..Default::default()
    }
}

pub fn random_cvec<R: Rng>(rng: &mut R, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_psd<R: Rng>(rng: &mut R, n: usize, rank: usize) -> CMat {
    let a = CMat::from_fn(n, rank, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &a * a.adjoint();
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub struct Instance {
    pub topo: Topology,
    pub fading: Fading,
    pub data: Vec<ChannelSample>,
    pub regions: Vec<UncertaintyRegion>,
    pub h: Vec<CMat>,
}

/// Topology, fading, `D = 200` samples and learned regions.
pub fn instance(cfg: &TopologyConfig, seed: u64) -> Instance {
    let mut r = rng(seed);
    let topo = generate_topology(cfg, &mut r).unwrap();
    let fading = draw_fading(&topo, &mut r);
    let data = sample_dataset(&topo, &fading, 200, 1e-4, &mut r).unwrap();
    let regions = learn_regions(&topo, &data, &RobustParams::default(), &mut r).unwrap();
    let h = regions.iter().map(build_h).collect();
    Instance {
        topo,
        fading,
        data,
        regions,
        h,
    }
}
