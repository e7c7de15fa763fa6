use mttopt::ferro::{
    batch_value, discretize, plan_csv, plan_report, solve_charge, summarize, sweep, to_knapsack, Backend, Batch, FerroSpec,
    LoadingPlan, Material, MAX_BATCH_LB, MIN_BATCH_LB, PLAN_CSV_HEADER,
};
use mttopt::kp::solve_kp_dp;
use mttopt::Error;
use proptest::prelude::*;

fn material(name: &str, unit_cost: f64, max_usage: u64) -> Material {
    Material { name: name.into(), unit_cost, max_usage }
}

fn assert_plan_invariants(spec: &FerroSpec, plan: &LoadingPlan) {
    assert!(plan.total_weight <= spec.target_capacity);
    assert_eq!(plan.underfill, spec.target_capacity - plan.total_weight);
    assert_eq!(plan.usage.iter().sum::<u64>(), plan.total_weight);
    for (used, m) in plan.usage.iter().zip(&spec.materials) {
        assert!(*used <= m.max_usage, "{} over cap", m.name);
    }
    let cost: f64 = plan.lines.iter().map(|l| l.weight as f64 * spec.materials[l.material].unit_cost).sum();
    assert!((cost - plan.total_cost).abs() < 1e-9);
}

#[test]
fn ninety_batches_respect_range_and_caps() {
    let spec = FerroSpec::reconstructed();
    let batches = discretize(&spec, 90, 5).unwrap();
    assert_eq!(batches.len(), 90);
    assert!(batches.iter().all(|b| (MIN_BATCH_LB..=MAX_BATCH_LB).contains(&b.weight)));
    let mut per = vec![0u64; 14];
    batches.iter().for_each(|b| per[b.material] += b.weight);
    assert!(per.iter().zip(&spec.materials).all(|(u, m)| *u <= m.max_usage));
    let mut counts = vec![0usize; 14];
    batches.iter().for_each(|b| counts[b.material] += 1);
    assert!(counts.iter().all(|&c| c == 6 || c == 7));
}

#[test]
fn tight_caps_are_rejected() {
    let spec = FerroSpec::new(vec![material("only", 1.0, 100)], 100, 2.0, None).unwrap();
    assert!(discretize(&spec, 5, 0).is_ok());
    assert!(matches!(discretize(&spec, 6, 0), Err(Error::Infeasible(_))));
}

#[test]
fn cap_pressure_forces_redraws_that_still_fit() {
    let spec = FerroSpec::new(vec![material("a", 0.5, 130), material("b", 0.6, 2000)], 100, 2.0, None).unwrap();
    for seed in 0..200 {
        let batches = discretize(&spec, 10, seed).unwrap();
        let a: u64 = batches.iter().filter(|b| b.material == 0).map(|b| b.weight).sum();
        assert!(a <= 130);
        assert!(batches.iter().all(|b| b.weight >= MIN_BATCH_LB));
    }
}

#[test]
fn same_seed_same_batches() {
    let spec = FerroSpec::reconstructed();
    assert_eq!(discretize(&spec, 73, 9).unwrap(), discretize(&spec, 73, 9).unwrap());
    assert_ne!(discretize(&spec, 73, 9).unwrap(), discretize(&spec, 73, 10).unwrap());
}

#[test]
fn savings_values_in_cents() {
    let spec = FerroSpec::new(vec![material("cheap", 0.40, 900), material("dear", 1.99, 900)], 1800, 2.0, None).unwrap();
    assert_eq!(batch_value(&spec, Batch { material: 0, weight: 100 }), 16_000);
    assert_eq!(batch_value(&spec, Batch { material: 1, weight: 100 }), 100);
    let inst = to_knapsack(&spec, &[Batch { material: 1, weight: 37 }]).unwrap();
    assert_eq!(inst.values, vec![37]);
    assert_eq!(inst.capacity, 1800);
}

#[test]
fn invalid_specs_are_infeasible() {
    assert!(matches!(
        FerroSpec::new(vec![material("a", 0.5, 1000)], 1800, 2.0, None),
        Err(Error::Infeasible(_))
    ));
    assert!(matches!(
        FerroSpec::new(vec![material("a", 2.5, 2000)], 1800, 2.0, None),
        Err(Error::Infeasible(_))
    ));
    assert!(matches!(
        FerroSpec::new(vec![material("a", 0.5, 2000)], 1800, 2.0, Some(1)),
        Err(Error::Infeasible(_))
    ));
}

#[test]
fn spec_json_round_trip_and_defaults() {
    let spec = FerroSpec::reconstructed();
    assert_eq!(FerroSpec::from_json(&spec.to_json()).unwrap(), spec);
    let minimal = r#"{"materials":[{"name":"x","unit_cost":0.5,"max_usage":2000}]}"#;
    let parsed = FerroSpec::from_json(minimal).unwrap();
    assert_eq!(parsed.target_capacity, 1800);
    assert_eq!(parsed.p_ref, 2.0);
    assert_eq!(parsed.filler_material, None);
    assert!(matches!(FerroSpec::from_json("{"), Err(Error::Format { .. })));
}

#[test]
fn exact_fill_with_cheapest_materials() {
    let spec = FerroSpec::new(
        vec![material("cheap", 0.40, 1000), material("mid", 0.70, 1000), material("dear", 1.10, 1000)],
        1800,
        2.0,
        None,
    )
    .unwrap();
    let batches = vec![
        Batch { material: 0, weight: 200 },
        Batch { material: 0, weight: 200 },
        Batch { material: 0, weight: 200 },
        Batch { material: 0, weight: 200 },
        Batch { material: 0, weight: 200 },
        Batch { material: 1, weight: 200 },
        Batch { material: 1, weight: 200 },
        Batch { material: 1, weight: 200 },
        Batch { material: 1, weight: 200 },
        Batch { material: 2, weight: 200 },
        Batch { material: 2, weight: 200 },
    ];
    let plan = solve_charge(&spec, &batches, Backend::Dp, None).unwrap();
    assert_eq!(plan.underfill, 0);
    assert_eq!(plan.usage, vec![1000, 800, 0]);
    assert!((plan.total_cost - (1000.0 * 0.40 + 800.0 * 0.70)).abs() < 1e-9);
    assert!((plan.savings(&spec) - (3600.0 - plan.total_cost)).abs() < 1e-9);
    assert_plan_invariants(&spec, &plan);
}

#[test]
fn filler_tops_up_underfill() {
    let spec = FerroSpec::new(vec![material("a", 0.5, 1000), material("fill", 1.0, 1000)], 100, 2.0, Some(1)).unwrap();
    let batches = vec![Batch { material: 0, weight: 90 }];
    let plan = solve_charge(&spec, &batches, Backend::Dp, None).unwrap();
    let last = plan.lines.last().unwrap();
    assert!(last.filler);
    assert_eq!((last.material, last.weight), (1, 10));
    assert_eq!(plan.total_weight, 100);
    assert_eq!(plan.underfill, 0);
    assert!(plan_report(&spec, &plan).contains("filler: 10 lb of fill"));
    assert!(plan_csv(&spec, &plan).ends_with("fill,10,1.00,10.00\n"));
}

#[test]
fn filler_respects_its_cap() {
    let spec = FerroSpec::new(vec![material("a", 0.5, 1000), material("fill", 1.0, 4)], 100, 2.0, Some(1)).unwrap();
    let plan = solve_charge(&spec, &[Batch { material: 0, weight: 90 }], Backend::Dp, None).unwrap();
    assert_eq!(plan.lines.last().unwrap().weight, 4);
    assert_eq!(plan.underfill, 6);
}

#[test]
fn empty_plan_has_zero_totals() {
    let spec = FerroSpec::reconstructed();
    let batches = discretize(&spec, 50, 0).unwrap();
    let plan = LoadingPlan::assemble(&spec, &batches, &[false; 50]).unwrap();
    assert!(plan.lines.is_empty());
    assert_eq!(plan.total_weight, 0);
    assert_eq!(plan.total_cost, 0.0);
    assert_eq!(plan.savings_cents, 0);
    assert_eq!(plan.underfill, 1800);
    assert_eq!(plan_csv(&spec, &plan), format!("{PLAN_CSV_HEADER}\n"));
}

#[test]
fn csv_rows_sum_to_totals() {
    let spec = FerroSpec::reconstructed();
    let batches = discretize(&spec, 60, 4).unwrap();
    let plan = solve_charge(&spec, &batches, Backend::Dp, None).unwrap();
    let csv = plan_csv(&spec, &plan);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(PLAN_CSV_HEADER));
    let (mut w, mut c) = (0u64, 0.0);
    for row in lines {
        let f: Vec<&str> = row.split(',').collect();
        w += f[1].parse::<u64>().unwrap();
        c += f[3].parse::<f64>().unwrap();
    }
    assert_eq!(w, plan.total_weight);
    // Each row is rounded to the cent.
    assert!((c - plan.total_cost).abs() <= 0.005 * plan.lines.len() as f64);
}

#[test]
fn mtt_backend_needs_a_model() {
    let spec = FerroSpec::reconstructed();
    let batches = discretize(&spec, 50, 1).unwrap();
    assert!(matches!(
        solve_charge(&spec, &batches, Backend::Mtt, None),
        Err(Error::Configuration(_))
    ));
}

#[test]
fn backends_agree_on_the_optimum() {
    let spec = FerroSpec::reconstructed();
    for seed in 0..5 {
        let batches = discretize(&spec, 50, seed).unwrap();
        let dp = solve_charge(&spec, &batches, Backend::Dp, None).unwrap();
        let bb = solve_charge(&spec, &batches, Backend::Bb, None).unwrap();
        assert_eq!(dp.savings_cents, bb.savings_cents);
        assert_eq!(dp.savings_cents, solve_kp_dp(&to_knapsack(&spec, &batches).unwrap()).unwrap().objective);
    }
}

#[test]
fn sweep_invariants_hold() {
    let spec = FerroSpec::reconstructed();
    let rows = sweep(&spec, &[50, 75, 100], 0..10, Backend::Dp, None).unwrap();
    assert_eq!(rows.len(), 30);
    for r in &rows {
        assert_plan_invariants(&spec, &r.oracle);
        assert_eq!(r.oracle, r.candidate);
        assert_eq!(r.gap().unwrap(), 0.0);
    }
    let summary = summarize(&spec, &rows).unwrap();
    assert_eq!(summary.iter().map(|s| s.n_items).collect::<Vec<_>>(), vec![50, 75, 100]);
    assert!(summary.iter().all(|s| s.scenarios == 10 && s.mean_gap == 0.0));
}

/// Every selection of a small inventory, by bitmask.
fn all_plans(spec: &FerroSpec, batches: &[Batch]) -> Vec<LoadingPlan> {
    (0u32..1 << batches.len())
        .filter_map(|mask| {
            let sel: Vec<bool> = (0..batches.len()).map(|i| mask >> i & 1 == 1).collect();
            LoadingPlan::assemble(spec, batches, &sel).ok()
        })
        .collect()
}

#[test]
fn dp_plan_is_cheapest_at_its_weight_and_best_overall() {
    let spec = FerroSpec::new(
        vec![material("a", 0.45, 400), material("b", 0.80, 400), material("c", 1.05, 400)],
        500,
        2.0,
        None,
    )
    .unwrap();
    for seed in 0..10 {
        let batches = discretize(&spec, 11, seed).unwrap();
        let dp = solve_charge(&spec, &batches, Backend::Dp, None).unwrap();
        for plan in all_plans(&spec, &batches) {
            assert!(plan.savings_cents <= dp.savings_cents);
            if plan.total_weight == dp.total_weight {
                assert!(dp.total_cost <= plan.total_cost + 1e-9);
            }
        }
    }
}

proptest! {
    #[test]
    fn savings_and_cost_are_dual(seed in any::<u64>(), mask in any::<u32>()) {
        let spec = FerroSpec::reconstructed();
        let batches = discretize(&spec, 20, seed).unwrap();
        let mut sel: Vec<bool> = (0..20).map(|i| mask >> i & 1 == 1).collect();
        // Drop items until the charge fits.
        let mut weight: u64 = batches.iter().zip(&sel).filter(|(_, &s)| s).map(|(b, _)| b.weight).sum();
        for i in 0..20 {
            if weight <= spec.target_capacity { break; }
            if sel[i] { sel[i] = false; weight -= batches[i].weight; }
        }
        let plan = LoadingPlan::assemble(&spec, &batches, &sel).unwrap();
        let implied = spec.p_ref * plan.total_weight as f64 - plan.total_cost;
        // Each batch value is rounded to the nearest cent.
        prop_assert!((plan.savings_cents as f64 / 100.0 - implied).abs() <= 0.005 * plan.lines.len() as f64 + 1e-9);
        prop_assert!(batches.iter().all(|&b| batch_value(&spec, b) > 0));
    }
}

#[test]
fn bb_sweep_reports_gaps_against_dp() {
    let spec = FerroSpec::reconstructed();
    let rows = sweep(&spec, &[50], 0..3, Backend::Bb, None).unwrap();
    assert!(rows.iter().all(|r| r.gap().unwrap() == 0.0));
    assert!(matches!(sweep(&spec, &[50], 0..1, Backend::Mtt, None), Err(Error::Configuration(_))));
}
