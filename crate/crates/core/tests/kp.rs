use mttopt::gap::{optimality_gap, Sense};
use mttopt::graph::{Environment, KpState};
use mttopt::instances::{gen_kp_set, toy_knapsack, InstanceSet, KpInstance};
use mttopt::kp::{brute_force_kp, greedy_ratio, solve_kp_bb, solve_kp_dp, validate_kp, KpViolation};
use mttopt::rng::SplitMix64;
use proptest::prelude::*;

fn kp_set(n: usize, count: usize, capacity: u64, seed: u64) -> Vec<KpInstance> {
    match gen_kp_set(n, count, capacity, 1000, seed).unwrap() {
        InstanceSet::Kp { instances, .. } => instances,
        _ => unreachable!(),
    }
}

#[test]
fn toy_optimum_is_eleven() {
    let inst = toy_knapsack();
    for sol in [solve_kp_dp(&inst).unwrap(), solve_kp_bb(&inst).unwrap().solution, brute_force_kp(&inst).unwrap()] {
        assert_eq!(sol.objective, 11);
        assert_eq!(sol.selected_indices(), vec![0, 3]);
    }
}

#[test]
fn dp_and_bb_agree_at_sixty_items() {
    for inst in kp_set(60, 20, 15_000, 5) {
        let bb = solve_kp_bb(&inst).unwrap();
        assert!(bb.certified);
        assert_eq!(bb.solution.objective, solve_kp_dp(&inst).unwrap().objective);
    }
}

#[test]
fn capacity_violation_is_reported() {
    let inst = toy_knapsack();
    let mut sol = solve_kp_dp(&inst).unwrap();
    sol.selected = vec![true, true, true, false];
    sol.weight_used = 9;
    sol.objective = 12;
    assert_eq!(
        validate_kp(&inst, &sol).unwrap(),
        vec![KpViolation::CapacityExceeded { used: 9, capacity: 7, excess: 2 }]
    );
}

#[test]
fn greedy_trails_dp_on_average() {
    let mut total = 0.0;
    let set = kp_set(50, 32, 20_000, 3);
    for inst in &set {
        let opt = solve_kp_dp(inst).unwrap().objective as i64;
        let g = greedy_ratio(inst).objective as i64;
        total += optimality_gap(opt, g, Sense::Maximize).unwrap().gap;
    }
    assert!(total / set.len() as f64 > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn exact_solvers_agree_with_enumeration(n in 1usize..13, cap in 0u64..4000, seed in any::<u64>()) {
        let inst = &kp_set(n, 1, cap, seed)[0];
        let brute = brute_force_kp(inst).unwrap();
        let dp = solve_kp_dp(inst).unwrap();
        let bb = solve_kp_bb(inst).unwrap();
        prop_assert!(bb.certified);
        prop_assert_eq!(dp.objective, brute.objective);
        prop_assert_eq!(bb.solution.objective, brute.objective);
        prop_assert!(validate_kp(inst, &dp).unwrap().is_empty());
        prop_assert!(validate_kp(inst, &bb.solution).unwrap().is_empty());
        let g = greedy_ratio(inst);
        prop_assert!(validate_kp(inst, &g).unwrap().is_empty());
        prop_assert!(g.objective <= dp.objective);
    }

    #[test]
    fn masked_rollouts_are_feasible_and_maximal(n in 1usize..20, cap in 0u64..6000, seed in any::<u64>()) {
        let inst = &kp_set(n, 1, cap, seed)[0];
        let mut rng = SplitMix64::new(seed ^ 0x5555);
        let mut state = KpState::new(inst);
        while !state.is_terminal() {
            let g = state.encode();
            let feasible: Vec<usize> = g.feasible_actions().collect();
            prop_assert!(!feasible.is_empty());
            state = state.apply_action(feasible[rng.below(feasible.len())]).unwrap();
        }
        let residual = state.residual_capacity();
        let selected = state.selected().to_vec();
        let sol = state.finish().unwrap();
        prop_assert!(validate_kp(inst, &sol).unwrap().is_empty());
        // Terminal means nothing else fits.
        for i in 0..n {
            prop_assert!(selected[i] || inst.weights[i] > residual);
        }
    }
}
