mod common;

use std::collections::BTreeSet;

use common::{random_dag, relabel, replicated_dag};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wfforge::corpus::{known_recipe, AppFamily};
use wfforge::metrics::{thf, ThfScore};
use wfforge::patterns::occurrence_boundary;
use wfforge::simulator::{critical_path, simulate, total_work, Platform};
use wfforge::stats::{sample_from, Family, FitResult};
use wfforge::wfformat::{parse_instance, render_instance};
use wfforge::{compute_type_hashes, find_pattern_occurrences, generate, validate_instance, GenRequest};

fn subgraph_hash(hw: &wfforge::HashedWorkflow<'_>, ids: &[String]) -> BTreeSet<wfforge::TypeHash> {
    wfforge::graph::subgraph_type_hash(hw, ids.iter().map(String::as_str)).unwrap()
}

fn dag(seed: u64, n: usize) -> wfforge::WorkflowInstance {
    random_dag(&mut ChaCha8Rng::seed_from_u64(seed), n, &["a", "b", "c"], 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_is_identity(seed in any::<u64>(), n in 1usize..40) {
        let w = dag(seed, n);
        prop_assert!(validate_instance(&w).is_valid());
        let text = render_instance(&w);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &w);
        prop_assert_eq!(render_instance(&back), text);
    }

    #[test]
    fn children_transpose_parents(seed in any::<u64>(), n in 1usize..40) {
        let w = dag(seed, n);
        let mut edges = BTreeSet::new();
        for t in &w.tasks {
            for p in &t.parents {
                edges.insert((p.clone(), t.id.clone()));
            }
        }
        let derived: BTreeSet<_> = w.tasks.iter().flat_map(|t| t.children().iter().map(|c| (t.id.clone(), c.clone()))).collect();
        prop_assert_eq!(edges, derived);
    }

    #[test]
    fn thf_properties(seed in any::<u64>(), n in 2usize..30, m in 2usize..30) {
        let a = dag(seed, n);
        let b = dag(seed.wrapping_add(1), m);
        let ab: ThfScore<f64> = thf(&a, &b).unwrap();
        let ba: ThfScore<f64> = thf(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab.value));
        let (r, _) = relabel(&a, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(thf::<f64>(&a, &r).unwrap().value, 0.0);
        prop_assert_eq!(thf::<f64>(&r, &b).unwrap(), ab);

        let mut mutated = a.clone();
        let i = (seed as usize) % mutated.len();
        mutated.tasks[i].task_type = "zzz".into();
        prop_assert!(thf::<f64>(&a, &mutated).unwrap().value > 0.0);
    }

    #[test]
    fn catalog_invariants(seed in any::<u64>(), block in 1usize..4, copies in 2usize..5, extra in 0usize..3) {
        let w = replicated_dag(&mut ChaCha8Rng::seed_from_u64(seed), block, copies, extra);
        let hw = compute_type_hashes(&w).unwrap();
        let catalog = find_pattern_occurrences(&hw);
        prop_assert_eq!(&catalog, &find_pattern_occurrences(&hw));
        let mut seen = BTreeSet::new();
        for group in &catalog.patterns {
            let sig = subgraph_hash(&hw, &group[0].tasks);
            for occ in group {
                prop_assert_eq!(&subgraph_hash(&hw, &occ.tasks), &sig);
                for id in &occ.tasks {
                    prop_assert!(seen.insert(id.clone()), "task {} in two occurrences", id);
                }
                let (entry, exit) = occurrence_boundary(&w, occ).unwrap();
                prop_assert!(entry.iter().chain(&exit).all(|b| !occ.tasks.contains(b)));
            }
        }
    }

    #[test]
    fn simulator_bounds(seed in any::<u64>(), n in 1usize..60, nodes in 1u32..4, cores in 1u32..6) {
        let w = dag(seed, n);
        let p = Platform { nodes, cores_per_node: cores, ..Platform::<f64>::default() };
        let r = simulate(&w, &p).unwrap();
        let work = total_work(&w, 1.0);
        prop_assert!(r.makespan >= critical_path(&w, 1.0).unwrap() - 1e-9);
        prop_assert!(r.makespan >= work / p.total_cores() as f64 - 1e-9);
        prop_assert!((r.busy_core_seconds() - work).abs() <= 1e-9 * work.max(1.0));
        prop_assert!((0.0..=1.0).contains(&r.utilization));
        prop_assert_eq!(&r, &simulate(&w, &p).unwrap());
        for t in &w.tasks {
            let s = r.per_task[&t.id];
            prop_assert!(s.end >= s.start);
            for q in &t.parents {
                prop_assert!(s.start >= r.per_task[q].end);
            }
        }
    }

    #[test]
    fn draws_stay_in_bounds(lo in -50.0f64..50.0, width in 0.1f64..100.0, seed in any::<u64>()) {
        let fit = FitResult {
            distribution: Family::Normal,
            params: vec![lo + width / 2.0, width],
            mse: None,
            min: lo,
            max: lo + width,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let x = sample_from(&fit, &mut rng);
            prop_assert!(x >= fit.min && x <= fit.max);
        }
    }

    #[test]
    fn generator_size_contract(target_extra in 0usize..200, seed in any::<u64>()) {
        for family in AppFamily::ALL {
            let recipe = known_recipe(family);
            let target = recipe.min_tasks + target_extra;
            let w = generate(&GenRequest { recipe: &recipe, target_tasks: target, seed }).unwrap();
            prop_assert!(w.len() >= recipe.min_tasks && w.len() <= target);
            prop_assert!(target - w.len() < recipe.catalog.largest_occurrence());
            prop_assert!(validate_instance(&w).is_valid());
            for t in &w.tasks {
                let fit = &recipe.type_stats[&t.task_type].runtime;
                prop_assert!(t.runtime >= fit.min && t.runtime <= fit.max);
            }
        }
    }
}

#[test]
fn base_scale_generation_has_zero_thf() {
    for family in AppFamily::ALL {
        let recipe = known_recipe(family);
        let w = generate(&GenRequest {
            recipe: &recipe,
            target_tasks: recipe.min_tasks,
            seed: 4,
        })
        .unwrap();
        assert_eq!(thf::<f64>(&w, &recipe.base_graph).unwrap().value, 0.0);
    }
}

#[test]
fn adding_nodes_never_slows_corpus_instances() {
    for family in AppFamily::ALL {
        let recipe = known_recipe(family);
        let w = generate(&GenRequest {
            recipe: &recipe,
            target_tasks: recipe.min_tasks * 3,
            seed: 6,
        })
        .unwrap();
        let mut last = f64::INFINITY;
        for nodes in 1..=6 {
            let p = Platform {
                nodes,
                cores_per_node: 8,
                ..Platform::<f64>::default()
            };
            let ms = simulate(&w, &p).unwrap().makespan;
            assert!(ms <= last + 1e-9, "{}: {nodes} nodes slower", family.name());
            last = ms;
        }
    }
}
