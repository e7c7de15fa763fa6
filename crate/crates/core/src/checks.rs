//! Self-check suites runnable from the command line.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{Environment, HetGraph, KpState};
use crate::instances::{gen_jsp_set, gen_kp_set, toy_job_shop, InstanceSet, JspInstance, KpInstance};
use crate::jsp::{brute_force_jsp, solve_jsp_bb, validate_schedule, JspState, DEFAULT_JSP_NODE_BUDGET};
use crate::kp::{brute_force_kp, solve_kp_bb, solve_kp_dp, validate_kp};
use crate::mtt::{cross_entropy, decode_greedy, init_model, MttConfig, MttModel, Tape};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gradients,
    Oracles,
    Masks,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradients" => Ok(Suite::Gradients),
            "oracles" => Ok(Suite::Oracles),
            "masks" => Ok(Suite::Masks),
            _ => Err(Error::InvalidArgument(format!(
                "unknown suite {s:?} (gradients, oracles, masks)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub kp_n: usize,
    pub trials: usize,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            kp_n: 15,
            trials: 200,
            episodes: 1000,
            seed: 0,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &CheckOptions) -> Result<Vec<CheckLine>> {
    match suite {
        Suite::Gradients => gradient_suite(),
        Suite::Oracles => oracle_suite(opts),
        Suite::Masks => mask_suite(opts),
    }
}

pub const GRADIENT_STEP: f64 = 1e-4;
pub const GRADIENT_TOLERANCE: f64 = 1e-3;

/// Worst per-parameter relative error of one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGradientError {
    pub tensor: String,
    pub max_relative_error: f64,
}

/// Compares the analytic gradient of the cross-entropy of `target` with
/// central differences, parameter by parameter. The relative error of a
/// parameter is `|analytic - numeric| / (|analytic| + 1e-8)`.
pub fn gradient_errors(model: &MttModel, graph: &HetGraph, target: usize) -> Result<Vec<TensorGradientError>> {
    let mut tape = Tape::new();
    let logits = model.forward_with_tape(graph, &mut tape)?;
    let (_, dlogits) = cross_entropy(&logits, target)?;
    let analytic = model.backward(&tape, &dlogits)?;
    let mut probe = model.clone();
    let loss = |probe: &MttModel| -> Result<f64> { Ok(cross_entropy(&probe.forward(graph)?, target)?.0) };
    let tensors = model.tensors().to_vec();
    let mut out = Vec::with_capacity(tensors.len());
    for spec in tensors {
        let mut worst = 0.0f64;
        for idx in spec.range() {
            let orig = probe.params()[idx];
            probe.params_mut()[idx] = orig + GRADIENT_STEP;
            let up = loss(&probe)?;
            probe.params_mut()[idx] = orig - GRADIENT_STEP;
            let down = loss(&probe)?;
            probe.params_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * GRADIENT_STEP);
            worst = worst.max((analytic[idx] - numeric).abs() / (analytic[idx].abs() + 1e-8));
        }
        out.push(TensorGradientError {
            tensor: spec.name.clone(),
            max_relative_error: worst,
        });
    }
    Ok(out)
}

/// The five-item knapsack graph used for gradient checks.
pub fn gradient_fixture_kp() -> KpInstance {
    KpInstance::new("grad5", vec![12, 7, 30, 18, 9], vec![20, 5, 41, 22, 16], 40, 10).expect("fixture is valid")
}

fn gradient_suite() -> Result<Vec<CheckLine>> {
    let kp = gradient_fixture_kp();
    let kp_graph = KpState::new(&kp).apply_action(1)?.encode();
    let jsp = toy_job_shop();
    let jsp_graph = JspState::new(&jsp).encode();
    let cases = [
        ("knapsack", init_model(MttConfig::knapsack(5))?, kp_graph, 3),
        ("job-shop", init_model(MttConfig::job_shop(5))?, jsp_graph, 3),
    ];
    let mut lines = Vec::new();
    for (label, model, graph, target) in cases {
        for e in gradient_errors(&model, &graph, target)? {
            lines.push(CheckLine {
                name: format!("{label} {}", e.tensor),
                passed: e.max_relative_error < GRADIENT_TOLERANCE,
                detail: format!("max relative error {:.2e}", e.max_relative_error),
            });
        }
    }
    Ok(lines)
}

fn kp_instances(n: usize, count: usize, seed: u64) -> Result<Vec<KpInstance>> {
    // Capacity near a third of the expected total weight keeps instances tight.
    let capacity = (n as u64 * 500 / 3).max(1);
    match gen_kp_set(n, count, capacity, 1000, seed)? {
        InstanceSet::Kp { instances, .. } => Ok(instances),
        InstanceSet::Jsp { .. } => unreachable!("generator returned the wrong kind"),
    }
}

fn jsp_instances(jobs: usize, machines: usize, count: usize, seed: u64) -> Result<Vec<JspInstance>> {
    match gen_jsp_set(jobs, machines, count, seed)? {
        InstanceSet::Jsp { instances, .. } => Ok(instances),
        InstanceSet::Kp { .. } => unreachable!("generator returned the wrong kind"),
    }
}

fn tally(name: &str, agree: usize, total: usize, what: &str) -> CheckLine {
    CheckLine {
        name: name.to_string(),
        passed: agree == total,
        detail: format!("{agree}/{total} {what}"),
    }
}

fn oracle_suite(opts: &CheckOptions) -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    let small = kp_instances(opts.kp_n, opts.trials, opts.seed)?;
    let mut agree = 0;
    for inst in &small {
        let dp = solve_kp_dp(inst)?;
        let bb = solve_kp_bb(inst)?;
        let brute = brute_force_kp(inst)?;
        if dp.objective == brute.objective
            && bb.certified
            && bb.solution.objective == brute.objective
            && validate_kp(inst, &dp)?.is_empty()
        {
            agree += 1;
        }
    }
    lines.push(tally(
        &format!("kp dp = bb = brute force (n={})", opts.kp_n),
        agree,
        small.len(),
        "agree",
    ));

    let mut agree = 0;
    for inst in jsp_instances(3, 3, opts.trials.min(50), opts.seed)? {
        let bb = solve_jsp_bb(&inst, DEFAULT_JSP_NODE_BUDGET)?;
        let brute = brute_force_jsp(&inst)?;
        if bb.certified && bb.schedule.makespan == brute.makespan && validate_schedule(&inst, &bb.schedule)?.is_empty() {
            agree += 1;
        }
    }
    lines.push(tally("jsp 3x3 bb = brute force", agree, opts.trials.min(50), "agree"));
    Ok(lines)
}

/// Plays uniformly random feasible actions to the end.
fn random_rollout<E: Environment>(start: E, rng: &mut SplitMix64) -> Result<E::Outcome> {
    let mut state = start;
    while !state.is_terminal() {
        let feasible: Vec<usize> = state.encode().feasible_actions().collect();
        if feasible.is_empty() {
            return Err(Error::State("non-terminal state without a feasible action".into()));
        }
        state = state.apply_action(feasible[rng.below(feasible.len())])?;
    }
    state.finish()
}

fn mask_suite(opts: &CheckOptions) -> Result<Vec<CheckLine>> {
    let half = opts.episodes / 2;
    let mut rng = SplitMix64::new(opts.seed);
    let kps = kp_instances(12, half, opts.seed)?;
    let jsps = jsp_instances(4, 3, opts.episodes - half, opts.seed)?;

    let mut valid = 0;
    for inst in &kps {
        let sol = random_rollout(KpState::new(inst), &mut rng)?;
        valid += usize::from(validate_kp(inst, &sol)?.is_empty());
    }
    for inst in &jsps {
        let sched = random_rollout(JspState::new(inst), &mut rng)?;
        valid += usize::from(validate_schedule(inst, &sched)?.is_empty());
    }
    let random = tally("random masked rollouts", valid, opts.episodes, "valid");

    let kp_model = init_model(MttConfig::knapsack(opts.seed))?;
    let jsp_model = init_model(MttConfig::job_shop(opts.seed))?;
    let mut valid = 0;
    for inst in &kps {
        let sol = decode_greedy(&kp_model, KpState::new(inst))?;
        valid += usize::from(validate_kp(inst, &sol)?.is_empty());
    }
    for inst in &jsps {
        let sched = decode_greedy(&jsp_model, JspState::new(inst))?;
        valid += usize::from(validate_schedule(inst, &sched)?.is_empty());
    }
    let policy = tally("policy greedy decodes", valid, opts.episodes, "valid");
    Ok(vec![random, policy])
}
