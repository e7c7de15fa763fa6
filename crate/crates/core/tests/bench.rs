use mttopt::bench::{run_bench, BenchOptions, BenchResult, Solver, BENCH_CSV_HEADER};
use mttopt::gap::{format_gap, optimality_gap};
use mttopt::instances::{gen_jsp_set, gen_kp_set, InstanceSet, ProblemKind};
use mttopt::mtt::{init_model, MttConfig};
use mttopt::Error;

fn kp50() -> InstanceSet {
    gen_kp_set(50, 24, 20_000, 1000, 42).unwrap()
}

/// Recomputes the aggregate line from the per-instance CSV rows.
fn recompute_mean_line(csv: &str, kind: ProblemKind) -> String {
    let mut lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.remove(0), BENCH_CSV_HEADER);
    let mean = lines.pop().unwrap();
    let size = mean.split(',').nth(1).unwrap();
    let (mut o, mut c, mut g, mut n) = (0.0, 0.0, 0.0, 0usize);
    for row in &lines {
        let f: Vec<&str> = row.split(',').collect();
        if f[4] == "NA" {
            continue;
        }
        let (oracle, cand) = (f[2].parse::<i64>().unwrap(), f[3].parse::<i64>().unwrap());
        o += oracle as f64;
        c += cand as f64;
        g += optimality_gap(oracle, cand, kind.sense()).unwrap().gap;
        n += 1;
    }
    let k = n as f64;
    format!(
        "mean,{size},{:.2},{:.2},{},{n}/{}",
        o / k,
        c / k,
        format_gap(g / k, kind.gap_decimals()),
        lines.len()
    )
}

fn mean_line(result: &BenchResult) -> String {
    result.to_csv(false).lines().last().unwrap().to_string()
}

#[test]
fn candidate_equal_to_oracle_has_zero_gap() {
    let r = run_bench(&kp50(), Solver::Dp, Solver::Bb, &BenchOptions::default()).unwrap();
    assert_eq!(r.aggregate.mean_gap, 0.0);
    assert!(mean_line(&r).contains(",0.0000,24/24"));
}

#[test]
fn greedy_gap_is_positive_and_aggregates_recompute() {
    let r = run_bench(&kp50(), Solver::Dp, Solver::Greedy, &BenchOptions::default()).unwrap();
    assert!(r.aggregate.mean_gap > 0.0);
    assert!(r.rows.iter().all(|row| row.gap.unwrap() >= 0.0));
    let csv = r.to_csv(false);
    assert_eq!(recompute_mean_line(&csv, ProblemKind::Kp), mean_line(&r));
    assert_eq!(r.rows.iter().map(|row| row.index).collect::<Vec<_>>(), (0..24).collect::<Vec<_>>());
}

#[test]
fn markdown_carries_the_csv_numbers() {
    let set = gen_jsp_set(4, 4, 6, 9).unwrap();
    let r = run_bench(&set, Solver::Bb, Solver::Mwr, &BenchOptions::default()).unwrap();
    let csv = r.to_csv(false);
    let md = r.to_markdown(false);
    assert_eq!(recompute_mean_line(&csv, ProblemKind::Jsp), mean_line(&r));
    for row in csv.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        let cells = if f[0] == "mean" {
            vec![f[1], f[2], f[3], f[4]]
        } else {
            vec![f[0], f[1], f[2], f[3], f[4], f[5]]
        };
        let joined = format!("| {} |", cells.join(" | "));
        assert!(md.contains(&joined), "{joined} missing from\n{md}");
    }
}

#[test]
fn uncertified_oracle_rows_are_flagged_and_excluded() {
    let set = gen_jsp_set(6, 6, 4, 3).unwrap();
    let opts = BenchOptions { model: None, jsp_node_budget: 1 };
    let r = run_bench(&set, Solver::Bb, Solver::Spt, &opts).unwrap();
    let flagged = r.rows.iter().filter(|row| !row.certified).count();
    assert!(flagged > 0);
    assert_eq!(r.aggregate.excluded, flagged);
    assert!(r.rows.iter().all(|row| row.certified == row.gap.is_some()));
    assert!(r.to_csv(false).contains(",NA,false"));
}

#[test]
fn timing_columns_are_opt_in() {
    let set = gen_kp_set(10, 2, 2500, 1000, 1).unwrap();
    let r = run_bench(&set, Solver::Dp, Solver::Greedy, &BenchOptions::default()).unwrap();
    assert_eq!(r.to_csv(false).lines().next().unwrap(), BENCH_CSV_HEADER);
    assert!(r.to_csv(true).lines().next().unwrap().ends_with(",oracle_seconds,candidate_seconds"));
}

#[test]
fn mtt_candidate_runs_with_a_model_and_needs_one() {
    let set = gen_kp_set(10, 4, 2500, 1000, 1).unwrap();
    assert!(matches!(
        run_bench(&set, Solver::Dp, Solver::Mtt, &BenchOptions::default()),
        Err(Error::Configuration(_))
    ));
    let model = init_model(MttConfig::unified(0)).unwrap();
    let opts = BenchOptions { model: Some(&model), ..BenchOptions::default() };
    let r = run_bench(&set, Solver::Dp, Solver::Mtt, &opts).unwrap();
    assert_eq!(r.aggregate.included, 4);
    let jsp = gen_jsp_set(3, 3, 3, 1).unwrap();
    let r = run_bench(&jsp, Solver::Brute, Solver::Mtt, &opts).unwrap();
    assert!(r.rows.iter().all(|row| row.candidate_objective >= row.oracle_objective));
}

#[test]
fn solver_choices_are_validated() {
    let set = kp50();
    let opts = BenchOptions::default();
    assert!(matches!(run_bench(&set, Solver::Greedy, Solver::Dp, &opts), Err(Error::InvalidArgument(_))));
    assert!(matches!(run_bench(&set, Solver::Dp, Solver::Spt, &opts), Err(Error::InvalidArgument(_))));
    let jsp = gen_jsp_set(3, 3, 1, 1).unwrap();
    assert!(matches!(run_bench(&jsp, Solver::Dp, Solver::Spt, &opts), Err(Error::InvalidArgument(_))));
    assert!("simplex".parse::<Solver>().is_err());
}

#[test]
fn zero_optimum_rows_are_excluded_and_an_empty_mean_is_na() {
    let set = gen_kp_set(3, 1, 100, 1000, 1).unwrap();
    let r = run_bench(&set, Solver::Dp, Solver::Greedy, &BenchOptions::default()).unwrap();
    assert_eq!(r.rows[0].oracle_objective, 0);
    assert!(r.rows[0].certified && r.rows[0].gap.is_none());
    assert_eq!(mean_line(&r), "mean,3,0.00,0.00,NA,0/1");
}
