mod common;

use std::collections::BTreeSet;

use bnsim_core::exact::{evidence_probability, exact_posterior, DEFAULT_BUDGET};
use bnsim_core::genetic::{
    breed_generation, full_conditional_weights, init_breeders, resample_node, splice,
};
use bnsim_core::netgen::{generate_seeded, select_low_prior_evidence, NetGenConfig};
use bnsim_core::samplers::logic_sampling_estimate;
use bnsim_core::{
    Archive, BeliefTable, Evidence, FrequencyTally, GaParams, Network, NetworkBuilder, NodeId,
    Sampler, SamplingMethod, Trial,
};
use common::{possible_evidence, random_net};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rmse(a: &BeliefTable, b: &BeliefTable) -> f64 {
    let (sum, cells) = a
        .rows()
        .iter()
        .flatten()
        .zip(b.rows().iter().flatten())
        .fold((0.0, 0usize), |(s, c), (x, y)| (s + (x - y) * (x - y), c + 1));
    (sum / cells as f64).sqrt()
}

fn estimate(net: &Network, ev: &Evidence, method: SamplingMethod, trials: usize, seed: u64) -> BeliefTable {
    let sampler = Sampler::new(net, ev, method).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = FrequencyTally::new(net);
    for _ in 0..trials {
        tally.record(&sampler.sample(&mut rng));
    }
    tally.estimate()
}

#[test]
fn forward_and_backward_converge_to_exact() {
    for seed in 0..3 {
        let net = random_net(8, seed);
        let ev = possible_evidence(&net, 2, seed);
        let exact = exact_posterior(&net, &ev, DEFAULT_BUDGET).unwrap().posterior;
        let fwd = estimate(&net, &ev, SamplingMethod::Forward, 100_000, seed);
        let bwd = estimate(&net, &ev, SamplingMethod::Backward, 100_000, seed);
        assert!(rmse(&fwd, &exact) < 0.01, "forward seed {seed}: {}", rmse(&fwd, &exact));
        assert!(rmse(&bwd, &exact) < 0.01, "backward seed {seed}: {}", rmse(&bwd, &exact));
    }
}

#[test]
fn samplers_agree_without_evidence() {
    let net = random_net(8, 42);
    let exact = exact_posterior(&net, &Evidence::new(), DEFAULT_BUDGET).unwrap().posterior;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let logic = logic_sampling_estimate(&net, &Evidence::new(), 50_000, &mut rng).beliefs;
    let fwd = estimate(&net, &Evidence::new(), SamplingMethod::Forward, 50_000, 2);
    assert!(rmse(&logic, &exact) < 0.01);
    assert!(rmse(&fwd, &exact) < 0.01);
    assert!(rmse(&logic, &fwd) < 0.01);
}

#[test]
fn error_shrinks_with_more_trials() {
    let net = random_net(7, 9);
    let ev = possible_evidence(&net, 1, 9);
    let exact = exact_posterior(&net, &ev, DEFAULT_BUDGET).unwrap().posterior;
    let mean = |trials| {
        (0..10)
            .map(|s| rmse(&estimate(&net, &ev, SamplingMethod::Forward, trials, s), &exact))
            .sum::<f64>()
            / 10.0
    };
    let small = mean(1_000);
    let large = mean(10_000);
    assert!(large > 0.0);
    assert!(large < small, "{large} !< {small}");
}

/// Brute-force `P(x_node | every other state)` by evaluating the joint.
fn brute_conditional(net: &Network, states: &[usize], node: NodeId) -> Vec<f64> {
    let mut probe = states.to_vec();
    let joints: Vec<f64> = (0..net.cardinality(node))
        .map(|s| {
            probe[node.0] = s;
            net.joint_probability(&Trial::new(probe.clone())).unwrap()
        })
        .collect();
    let total: f64 = joints.iter().sum();
    joints.iter().map(|j| j / total).collect()
}

#[test]
fn forced_mutation_matches_full_conditional() {
    let mut checked = 0;
    for seed in 0..40u64 {
        let net = random_net(4 + (seed % 3) as usize, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = bnsim_core::samplers::logic_sample(&net, &mut rng);
        let node = net
            .node_ids()
            .filter(|&n| !net.children(n).is_empty())
            .last()
            .unwrap_or(NodeId(0));
        let expected = brute_conditional(&net, base.states(), node);
        let mut scratch = base.states().to_vec();
        let weights = full_conditional_weights(&net, &mut scratch, node);
        let total: f64 = weights.iter().sum();
        for (w, e) in weights.iter().zip(&expected) {
            assert!((w / total - e).abs() < 1e-12);
        }
        if expected.iter().filter(|&&p| p > 0.0).count() < 2 {
            continue;
        }
        let draws = 100_000;
        let mut counts = vec![0usize; expected.len()];
        for _ in 0..draws {
            let mut states = base.states().to_vec();
            assert!(resample_node(&net, &mut states, node, &mut rng));
            counts[states[node.0]] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(&expected)
            .map(|(&c, &p)| (c as f64 / draws as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "seed {seed}: tv {tv}");
        checked += 1;
        if checked == 5 {
            break;
        }
    }
    assert_eq!(checked, 5);
}

/// Ten-node topology whose radius-one neighbourhood of A4 is {A1, A3, A4, A5, A7}.
fn splice_example() -> Network {
    let mut b = NetworkBuilder::new("splice");
    let ids: Vec<NodeId> = (1..=10).map(|i| b.add_node(format!("A{i}"), 2)).collect();
    let a = |i: usize| ids[i - 1];
    let edges = [
        (4, &[1, 3][..]),
        (3, &[2]),
        (5, &[2]),
        (7, &[4, 5]),
        (8, &[6]),
        (9, &[7, 8]),
        (10, &[9]),
    ];
    for (child, parents) in edges {
        let ps: Vec<NodeId> = parents.iter().map(|&p| a(p)).collect();
        b.set_parents(a(child), &ps);
    }
    for i in 1..=10 {
        let rows = b.row_count(a(i));
        b.set_cpt(a(i), [0.5, 0.5].repeat(rows));
    }
    b.build().unwrap()
}

#[test]
fn radius_one_splice_takes_the_blanket_region() {
    let net = splice_example();
    let center = net.find("A4").unwrap();
    let region = net.markov_neighborhood(center, 1);
    let names: BTreeSet<&str> = region.iter().map(|&n| net.node(n).name.as_str()).collect();
    assert_eq!(names, BTreeSet::from(["A1", "A3", "A4", "A5", "A7"]));

    let a = Trial::new(vec![0; 10]);
    let b = Trial::new(vec![1; 10]);
    let child = splice(&a, &b, region.iter().copied());
    let from_b: BTreeSet<&str> = net
        .node_ids()
        .filter(|&n| child.state(n) == 1)
        .map(|n| net.node(n).name.as_str())
        .collect();
    assert_eq!(from_b, names);
}

#[test]
fn search_recovers_low_prior_mass() {
    let cfg = NetGenConfig {
        node_count: 10,
        seed: 3,
        ..NetGenConfig::default()
    };
    let net = generate_seeded(&cfg).unwrap();
    let ev = select_low_prior_evidence(&net, 2, &mut cfg.rng()).unwrap();
    let target = evidence_probability(&net, &ev, DEFAULT_BUDGET).unwrap();
    let mut archive = Archive::new(&net);
    archive.set_evidence(&net, &ev).unwrap();
    let sampler = Sampler::new(&net, &ev, SamplingMethod::Forward).unwrap();
    let params = GaParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut pop, _) = init_breeders(&mut archive, &net, &params, &sampler, &mut rng).unwrap();
    let mut best = pop.max_fit();
    for _ in 0..20 {
        breed_generation(&mut pop, &mut archive, &net, &params, &mut rng);
        assert!(pop.max_fit() >= best);
        best = pop.max_fit();
    }
    assert!(
        archive.evidence_mass() >= 0.95 * target,
        "{} of {target}",
        archive.evidence_mass()
    );
}
