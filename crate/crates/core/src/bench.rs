//! Oracle-versus-candidate benchmarking over instance sets.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gap::{format_gap, optimality_gap, Sense};
use crate::graph::KpState;
use crate::instances::{InstanceSet, JspInstance, KpInstance, ProblemKind};
use crate::jsp::{brute_force_jsp, dispatch, solve_jsp_bb, DispatchRule, JspState, DEFAULT_JSP_NODE_BUDGET};
use crate::kp::{brute_force_kp, greedy_ratio, solve_kp_bb, solve_kp_dp};
use crate::mtt::{decode_greedy, MttModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Dp,
    Bb,
    Brute,
    Greedy,
    Spt,
    Mwr,
    Fifo,
    Mtt,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Dp => "dp",
            Solver::Bb => "bb",
            Solver::Brute => "brute",
            Solver::Greedy => "greedy",
            Solver::Spt => "spt",
            Solver::Mwr => "mwr",
            Solver::Fifo => "fifo",
            Solver::Mtt => "mtt",
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Solver::Dp | Solver::Bb | Solver::Brute)
    }

    pub fn supports(self, kind: ProblemKind) -> bool {
        match self {
            Solver::Dp | Solver::Greedy => kind == ProblemKind::Kp,
            Solver::Spt | Solver::Mwr | Solver::Fifo => kind == ProblemKind::Jsp,
            Solver::Bb | Solver::Brute | Solver::Mtt => true,
        }
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "dp" => Solver::Dp,
            "bb" => Solver::Bb,
            "brute" => Solver::Brute,
            "greedy" => Solver::Greedy,
            "spt" => Solver::Spt,
            "mwr" => Solver::Mwr,
            "fifo" => Solver::Fifo,
            "mtt" => Solver::Mtt,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown solver {s:?} (dp, bb, brute, greedy, spt, mwr, fifo, mtt)"
                )))
            }
        })
    }
}

impl ProblemKind {
    pub fn sense(self) -> Sense {
        match self {
            ProblemKind::Kp => Sense::Maximize,
            ProblemKind::Jsp => Sense::Minimize,
        }
    }

    /// Decimals used when printing gaps.
    pub fn gap_decimals(self) -> u32 {
        match self {
            ProblemKind::Kp => 4,
            ProblemKind::Jsp => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub index: usize,
    pub id: String,
    pub oracle_objective: i64,
    pub candidate_objective: i64,
    /// Whether the oracle proved optimality on this instance.
    pub certified: bool,
    /// `None` when the oracle is uncertified or its optimum is zero; the aggregate skips such rows.
    pub gap: Option<f64>,
    pub oracle_seconds: f64,
    pub candidate_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub included: usize,
    pub excluded: usize,
    pub mean_oracle: f64,
    pub mean_candidate: f64,
    pub mean_gap: f64,
    pub mean_oracle_seconds: f64,
    pub mean_candidate_seconds: f64,
}

impl Aggregate {
    /// Means over the rows that carry a gap.
    pub fn from_rows(rows: &[BenchRow]) -> Self {
        let kept: Vec<&BenchRow> = rows.iter().filter(|r| r.gap.is_some()).collect();
        let n = kept.len();
        let mean = |f: &dyn Fn(&BenchRow) -> f64| {
            if n == 0 {
                0.0
            } else {
                kept.iter().map(|r| f(r)).sum::<f64>() / n as f64
            }
        };
        Self {
            included: n,
            excluded: rows.len() - n,
            mean_oracle: mean(&|r| r.oracle_objective as f64),
            mean_candidate: mean(&|r| r.candidate_objective as f64),
            mean_gap: mean(&|r| r.gap.unwrap_or(0.0)),
            mean_oracle_seconds: mean(&|r| r.oracle_seconds),
            mean_candidate_seconds: mean(&|r| r.candidate_seconds),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub kind: ProblemKind,
    pub size: String,
    pub oracle: Solver,
    pub candidate: Solver,
    pub rows: Vec<BenchRow>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone)]
pub struct BenchOptions<'m> {
    pub model: Option<&'m MttModel>,
    /// Node budget for job-shop branch and bound.
    pub jsp_node_budget: u64,
}

impl Default for BenchOptions<'_> {
    fn default() -> Self {
        Self {
            model: None,
            jsp_node_budget: DEFAULT_JSP_NODE_BUDGET,
        }
    }
}

struct Run {
    objective: i64,
    certified: bool,
    seconds: f64,
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t = Instant::now();
    let out = f()?;
    Ok((out, t.elapsed().as_secs_f64()))
}

fn need_model<'m>(opts: &BenchOptions<'m>) -> Result<&'m MttModel> {
    opts.model
        .ok_or_else(|| Error::Configuration("the mtt solver needs a model checkpoint".into()))
}

fn run_kp(inst: &KpInstance, solver: Solver, opts: &BenchOptions) -> Result<Run> {
    let ((sol, certified), seconds) = timed(|| {
        Ok(match solver {
            Solver::Dp => (solve_kp_dp(inst)?, true),
            Solver::Bb => {
                let out = solve_kp_bb(inst)?;
                (out.solution, out.certified)
            }
            Solver::Brute => (brute_force_kp(inst)?, true),
            Solver::Greedy => (greedy_ratio(inst), false),
            Solver::Mtt => (decode_greedy(need_model(opts)?, KpState::new(inst))?, false),
            other => {
                return Err(Error::InvalidArgument(format!("{} does not solve knapsacks", other.as_str())))
            }
        })
    })?;
    Ok(Run {
        objective: sol.objective as i64,
        certified,
        seconds,
    })
}

fn run_jsp(inst: &JspInstance, solver: Solver, opts: &BenchOptions) -> Result<Run> {
    let ((sched, certified), seconds) = timed(|| {
        Ok(match solver {
            Solver::Bb => {
                let out = solve_jsp_bb(inst, opts.jsp_node_budget)?;
                (out.schedule, out.certified)
            }
            Solver::Brute => (brute_force_jsp(inst)?, true),
            Solver::Spt => (dispatch(inst, DispatchRule::Spt)?, false),
            Solver::Mwr => (dispatch(inst, DispatchRule::Mwr)?, false),
            Solver::Fifo => (dispatch(inst, DispatchRule::Fifo)?, false),
            Solver::Mtt => (decode_greedy(need_model(opts)?, JspState::new(inst))?, false),
            other => {
                return Err(Error::InvalidArgument(format!("{} does not solve job shops", other.as_str())))
            }
        })
    })?;
    Ok(Run {
        objective: sched.makespan as i64,
        certified,
        seconds,
    })
}

fn row(kind: ProblemKind, index: usize, id: &str, oracle: Run, candidate: Run) -> Result<BenchRow> {
    let gap = if oracle.certified && oracle.objective > 0 {
        Some(optimality_gap(oracle.objective, candidate.objective, kind.sense())?.gap)
    } else {
        None
    };
    Ok(BenchRow {
        index,
        id: id.to_string(),
        oracle_objective: oracle.objective,
        candidate_objective: candidate.objective,
        certified: oracle.certified,
        gap,
        oracle_seconds: oracle.seconds,
        candidate_seconds: candidate.seconds,
    })
}

/// Solves every instance with both solvers, in parallel across instances.
/// Rows come back in instance order. A candidate that beats a certified
/// oracle is an [`Error::OracleInconsistency`].
pub fn run_bench(set: &InstanceSet, oracle: Solver, candidate: Solver, opts: &BenchOptions) -> Result<BenchResult> {
    let kind = set.kind();
    if !oracle.is_exact() {
        return Err(Error::InvalidArgument(format!("{} is not an exact oracle", oracle.as_str())));
    }
    for s in [oracle, candidate] {
        if !s.supports(kind) {
            return Err(Error::InvalidArgument(format!(
                "{} does not apply to {} instances",
                s.as_str(),
                kind.as_str()
            )));
        }
    }
    if candidate == Solver::Mtt {
        need_model(opts)?;
    }
    let rows = match set {
        InstanceSet::Kp { instances, .. } => instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| row(kind, i, &inst.id, run_kp(inst, oracle, opts)?, run_kp(inst, candidate, opts)?))
            .collect::<Result<Vec<_>>>()?,
        InstanceSet::Jsp { instances, .. } => instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| row(kind, i, &inst.id, run_jsp(inst, oracle, opts)?, run_jsp(inst, candidate, opts)?))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(BenchResult {
        kind,
        size: set.size_label(),
        oracle,
        candidate,
        aggregate: Aggregate::from_rows(&rows),
        rows,
    })
}

pub const BENCH_CSV_HEADER: &str = "row,instance,oracle_objective,candidate_objective,gap,certified";

impl BenchResult {
    fn gap_text(&self, gap: Option<f64>) -> String {
        gap.map_or_else(|| "NA".to_string(), |g| format_gap(g, self.kind.gap_decimals()))
    }

    /// Per-instance rows, then a `mean` row whose last column is
    /// `included/total`. Timing columns are appended only when asked for.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from(BENCH_CSV_HEADER);
        if timing {
            out.push_str(",oracle_seconds,candidate_seconds");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                r.index,
                r.id,
                r.oracle_objective,
                r.candidate_objective,
                self.gap_text(r.gap),
                r.certified
            );
            if timing {
                let _ = write!(out, ",{:.6},{:.6}", r.oracle_seconds, r.candidate_seconds);
            }
            out.push('\n');
        }
        let a = &self.aggregate;
        let _ = write!(
            out,
            "mean,{},{:.2},{:.2},{},{}/{}",
            self.size,
            a.mean_oracle,
            a.mean_candidate,
            self.gap_text((a.included > 0).then_some(a.mean_gap)),
            a.included,
            self.rows.len()
        );
        if timing {
            let _ = write!(out, ",{:.6},{:.6}", a.mean_oracle_seconds, a.mean_candidate_seconds);
        }
        out.push('\n');
        out
    }

    /// The aggregate line in the layout of a results table, followed by the
    /// per-instance rows.
    pub fn to_markdown(&self, timing: bool) -> String {
        let mut out = String::new();
        let time_head = if timing { " time (s) |" } else { "" };
        let time_rule = if timing { "---|" } else { "" };
        let _ = writeln!(
            out,
            "| Problem | Size | Oracle ({}) | Candidate ({}) | Optimality Gap |{time_head}",
            self.oracle.as_str(),
            self.candidate.as_str()
        );
        let _ = writeln!(out, "|---|---|---|---|---|{time_rule}");
        let a = &self.aggregate;
        let _ = write!(
            out,
            "| {} | {} | {:.2} | {:.2} | {} |",
            self.kind.as_str().to_uppercase(),
            self.size,
            a.mean_oracle,
            a.mean_candidate,
            self.gap_text((a.included > 0).then_some(a.mean_gap))
        );
        if timing {
            let _ = write!(out, " {:.3} |", a.mean_candidate_seconds);
        }
        out.push('\n');
        let _ = writeln!(out, "\n{} of {} instances included in the means.\n", a.included, self.rows.len());
        let _ = writeln!(out, "| # | Instance | Oracle | Candidate | Gap | Certified |{time_head}");
        let _ = writeln!(out, "|---|---|---|---|---|---|{time_rule}");
        for r in &self.rows {
            let _ = write!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                r.index,
                r.id,
                r.oracle_objective,
                r.candidate_objective,
                self.gap_text(r.gap),
                r.certified
            );
            if timing {
                let _ = write!(out, " {:.3} |", r.candidate_seconds);
            }
            out.push('\n');
        }
        out
    }
}
