#![allow(dead_code)]

use bnsim_core::netgen::{generate_seeded, NetGenConfig};
use bnsim_core::samplers::logic_sample;
use bnsim_core::{Evidence, Network, NodeId};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random network; parent count capped by node count.
pub fn random_net(nodes: usize, seed: u64) -> Network {
    let cfg = NetGenConfig {
        node_count: nodes,
        max_parents: 3.min(nodes - 1),
        seed,
        ..NetGenConfig::default()
    };
    generate_seeded(&cfg).unwrap()
}

/// Evidence copied from a prior sample, so it is always possible.
pub fn possible_evidence(net: &Network, observed: usize, seed: u64) -> Evidence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let trial = logic_sample(net, &mut rng);
    index::sample(&mut rng, net.len(), observed.min(net.len()))
        .into_iter()
        .map(|i| (NodeId(i), trial.state(NodeId(i))))
        .collect()
}

/// Random evidence that may be impossible.
pub fn any_evidence(net: &Network, observed: usize, seed: u64) -> Evidence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    index::sample(&mut rng, net.len(), observed.min(net.len()))
        .into_iter()
        .map(|i| {
            let n = NodeId(i);
            (n, rng.gen_range(0..net.cardinality(n)))
        })
        .collect()
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
