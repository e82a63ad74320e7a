mod common;

use bnsim_core::exact::{exact_posterior, DEFAULT_BUDGET};
use bnsim_core::genetic::{crossover, mutate, GaParams};
use bnsim_core::samplers::{backward_plan, backward_sample, forward_sample};
use bnsim_core::trial::conforming_trials;
use bnsim_core::{parse_network, write_network, Archive, Evidence, NodeId, Trial};
use common::{any_evidence, possible_evidence, random_net, relative_gap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn net_params() -> impl Strategy<Value = (usize, u64)> {
    (1usize..=8, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joint_sums_to_one((n, seed) in net_params()) {
        let net = random_net(n, seed);
        let total: f64 = conforming_trials(&net, &Evidence::new())
            .iter()
            .map(|t| net.joint_probability(t).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_rows_normalise((n, seed) in net_params(), k in 0usize..4) {
        let net = random_net(n, seed);
        let ev = possible_evidence(&net, k, seed);
        let sol = exact_posterior(&net, &ev, DEFAULT_BUDGET).unwrap();
        prop_assert!(sol.posterior.is_defined());
        prop_assert!(sol.posterior.max_row_error() < 1e-9);
        for (node, state) in ev.iter() {
            prop_assert_eq!(sol.posterior.node(node)[state], 1.0);
        }
    }

    #[test]
    fn id_codes_round_trip((n, seed) in net_params()) {
        let net = random_net(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let t = Trial::new(net.node_ids().map(|i| rng.gen_range(0..net.cardinality(i))).collect());
            let code = net.encode(&t);
            prop_assert_eq!(net.decode(&code).unwrap(), t.clone());
            let hex = net.layout().to_hex(&code);
            prop_assert_eq!(net.layout().from_hex(&hex).unwrap(), code);
        }
    }

    #[test]
    fn network_text_round_trips((n, seed) in net_params()) {
        let net = random_net(n, seed);
        let text = write_network(&net);
        let again = parse_network(&text).unwrap();
        prop_assert_eq!(write_network(&again), text);
    }

    #[test]
    fn blanket_is_symmetric((n, seed) in net_params()) {
        let net = random_net(n, seed);
        for a in net.node_ids() {
            let blanket = net.markov_blanket(a);
            prop_assert!(!blanket.contains(&a));
            for b in net.node_ids() {
                prop_assert_eq!(blanket.contains(&b), net.markov_blanket(b).contains(&a));
            }
        }
    }

    #[test]
    fn neighbourhoods_are_nested((n, seed) in net_params()) {
        let net = random_net(n, seed);
        for a in net.node_ids() {
            let mut prev = net.markov_neighborhood(a, 0);
            prop_assert_eq!(prev.len(), 1);
            for k in 1..=4 {
                let next = net.markov_neighborhood(a, k);
                prop_assert!(prev.is_subset(&next));
                prev = next;
            }
        }
    }

    #[test]
    fn archive_masses_never_decrease((n, seed) in net_params(), k in 0usize..3) {
        let net = random_net(n, seed);
        let ev = any_evidence(&net, k, seed);
        let mut archive = Archive::new(&net);
        archive.set_evidence(&net, &ev).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut total, mut cond) = (0.0, 0.0);
        for _ in 0..200 {
            let t = forward_sample(&net, &Evidence::new(), &mut rng).trial;
            archive.insert(&net, &t);
            prop_assert!(archive.total_mass() >= total);
            prop_assert!(archive.evidence_mass() >= cond);
            prop_assert!(archive.evidence_mass() <= archive.total_mass() * (1.0 + 1e-12));
            total = archive.total_mass();
            cond = archive.evidence_mass();
        }
        prop_assert!(total <= 1.0 + 1e-9);
    }

    #[test]
    fn full_archive_is_exact((n, seed) in net_params(), k in 0usize..4) {
        let net = random_net(n, seed);
        let ev = possible_evidence(&net, k, seed);
        let mut archive = Archive::new(&net);
        archive.set_evidence(&net, &ev).unwrap();
        for t in conforming_trials(&net, &ev) {
            archive.insert(&net, &t);
        }
        let exact = exact_posterior(&net, &ev, DEFAULT_BUDGET).unwrap();
        prop_assert!((archive.evidence_mass() - exact.evidence_probability).abs() < 1e-9);
        prop_assert!(archive.posterior().max_abs_diff(&exact.posterior) < 1e-9);
    }

    #[test]
    fn forward_weight_identity((n, seed) in net_params(), k in 0usize..4) {
        let net = random_net(n, seed);
        let ev = any_evidence(&net, k, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let s = forward_sample(&net, &ev, &mut rng);
            prop_assert!(s.trial.conforms(&ev));
            let joint = net.joint_probability(&s.trial).unwrap();
            prop_assert!(relative_gap(s.weight * s.sampling_probability, joint) < 1e-12);
        }
    }

    #[test]
    fn backward_weight_identity((n, seed) in net_params(), k in 1usize..4) {
        let net = random_net(n, seed);
        let ev = any_evidence(&net, k, seed);
        let plan = backward_plan(&net, &ev).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let s = backward_sample(&net, &plan, &mut rng).sample;
            prop_assert!(s.trial.conforms(&ev));
            if s.sampling_probability == 0.0 {
                prop_assert_eq!(s.weight, 0.0);
                continue;
            }
            let joint = net.joint_probability(&s.trial).unwrap();
            prop_assert!(relative_gap(s.weight * s.sampling_probability, joint) < 1e-9);
        }
    }

    #[test]
    fn backward_plan_places_children_first((n, seed) in net_params(), k in 1usize..4) {
        let net = random_net(n, seed);
        let ev = any_evidence(&net, k, seed);
        let plan = backward_plan(&net, &ev).unwrap();
        let mut seen = plan.ordering().to_vec();
        seen.sort();
        prop_assert_eq!(seen, net.node_ids().collect::<Vec<_>>());
        for node in net.node_ids() {
            if let Some(child) = plan.inversion_child(node) {
                prop_assert!(plan.position(child) < plan.position(node));
                prop_assert!(net.parents(child).contains(&node));
            }
            let hidden_ancestor = plan.is_ancestor(node) && !ev.contains(node);
            prop_assert_eq!(plan.inversion_child(node).is_some(), hidden_ancestor);
        }
    }

    #[test]
    fn offspring_respect_evidence((n, seed) in net_params(), k in 0usize..4) {
        let net = random_net(n, seed);
        let ev = any_evidence(&net, k, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = GaParams { crossover_prob: 1.0, mutation_prob: 0.5, ..GaParams::default() };
        for _ in 0..20 {
            let a = forward_sample(&net, &ev, &mut rng).trial;
            let b = forward_sample(&net, &ev, &mut rng).trial;
            let mut child = crossover(&a, &b, &net, &ev, &params, &mut rng);
            prop_assert!(child.conforms(&ev));
            for i in net.node_ids() {
                prop_assert!(child.state(i) == a.state(i) || child.state(i) == b.state(i));
            }
            mutate(&mut child, &net, &ev, &params, &mut rng);
            prop_assert!(child.conforms(&ev));
            prop_assert!(child.validate(&net).is_ok());
        }
    }
}

#[test]
fn evidence_helpers_behave() {
    let net = random_net(6, 1);
    let ev = possible_evidence(&net, 3, 1);
    assert_eq!(ev.len(), 3);
    assert!(ev.nodes().all(|n| n < NodeId(6)));
}
