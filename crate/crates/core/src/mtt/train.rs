//! Behaviour cloning from exact oracles.

use super::{Adam, MttModel, Tape};
use crate::error::{Error, Result};
use crate::graph::{Environment, HetGraph, KpState};
use crate::instances::{JspInstance, KpInstance};
use crate::jsp::{solve_jsp_bb, JspState, DEFAULT_JSP_NODE_BUDGET};
use crate::kp::{ratio_order, solve_kp_dp};
use crate::rng::SplitMix64;

/// One supervised decision: the encoded state and the expert's action index.
#[derive(Debug, Clone, PartialEq)]
pub struct Demo {
    pub graph: HetGraph,
    pub action: usize,
}

/// Rolls the DP optimum out as a trajectory, taking the chosen items in
/// descending value/weight order.
pub fn kp_demos(instances: &[KpInstance]) -> Result<Vec<Demo>> {
    let mut demos = Vec::new();
    for inst in instances {
        let sol = solve_kp_dp(inst)?;
        let mut state = KpState::new(inst);
        for item in ratio_order(inst, sol.selected_indices()) {
            demos.push(Demo { graph: state.encode(), action: item });
            state = state.apply_action(item)?;
        }
    }
    Ok(demos)
}

/// Rolls the branch-and-bound schedule out in start-time order, ties by job.
pub fn jsp_demos(instances: &[JspInstance]) -> Result<Vec<Demo>> {
    let mut demos = Vec::new();
    for inst in instances {
        let outcome = solve_jsp_bb(inst, DEFAULT_JSP_NODE_BUDGET)?;
        let offsets = inst.job_offsets();
        let mut order: Vec<(u64, usize, usize)> = outcome
            .schedule
            .starts
            .iter()
            .enumerate()
            .flat_map(|(j, s)| s.iter().enumerate().map(move |(k, &t)| (t, j, k)))
            .collect();
        order.sort_unstable();
        let mut state = JspState::new(inst);
        for (_, j, k) in order {
            let action = offsets[j] + k;
            demos.push(Demo { graph: state.encode(), action });
            state = Environment::apply_action(&state, action)?;
        }
    }
    Ok(demos)
}

/// Negative log-likelihood of `target` under the masked softmax of `logits`,
/// with its gradient with respect to the logits.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    let probs = super::masked_softmax(logits)?;
    match logits.get(target) {
        Some(x) if x.is_finite() => {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
            let loss = lse - logits[target];
            let mut grad = probs;
            grad[target] -= 1.0;
            Ok((loss, grad))
        }
        _ => Err(Error::IllegalAction {
            action: target,
            reason: "expert action is masked or out of range".into(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub step_size: f64,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    /// Rescales each batch gradient to at most this Euclidean norm.
    pub max_grad_norm: Option<f64>,
    pub schedule: StepSchedule,
}

/// How the step size evolves over the run's optimizer steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSchedule {
    Constant,
    /// `step_size * (1 + cos(pi * t / T)) / 2` at step `t` of `T`.
    Cosine,
}

impl StepSchedule {
    pub fn factor(self, step: usize, total: usize) -> f64 {
        match self {
            StepSchedule::Constant => 1.0,
            StepSchedule::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total.max(1) as f64).cos()),
        }
    }
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 200,
            step_size: 1e-3,
            batch_size: 32,
            seed: 0,
            max_grad_norm: Some(1.0),
            schedule: StepSchedule::Cosine,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean loss over each epoch's demos, measured before each batch update.
    pub loss_curve: Vec<f64>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> Option<f64> {
        self.loss_curve.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_curve.last().copied()
    }

    /// Means of consecutive non-overlapping `window`-epoch blocks; a
    /// trailing partial block is dropped.
    pub fn window_means(&self, window: usize) -> Vec<f64> {
        self.loss_curve
            .chunks_exact(window.max(1))
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }

    /// Mean of the last `window` epochs ending at each epoch.
    pub fn trailing_means(&self, window: usize) -> Vec<f64> {
        let w = window.max(1);
        (0..self.loss_curve.len())
            .map(|e| {
                let lo = (e + 1).saturating_sub(w);
                let s = &self.loss_curve[lo..=e];
                s.iter().sum::<f64>() / s.len() as f64
            })
            .collect()
    }
}

/// Minimizes mean cross-entropy of the expert actions with mini-batch Adam.
/// Runs sequentially, so a fixed seed reproduces the trajectory bit for bit.
pub fn train_imitation(model: &mut MttModel, demos: &[Demo], opts: &TrainOptions) -> Result<TrainReport> {
    if demos.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if opts.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if !(opts.step_size >= 0.0 && opts.step_size.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid step size {}", opts.step_size)));
    }
    let n = model.param_count();
    let mut adam = Adam::new(n);
    let mut rng = SplitMix64::new(opts.seed);
    let mut order: Vec<usize> = (0..demos.len()).collect();
    let mut grads = vec![0.0; n];
    let mut tape = Tape::new();
    let mut loss_curve = Vec::with_capacity(opts.epochs);
    let total_steps = opts.epochs * demos.len().div_ceil(opts.batch_size);
    let mut step = 0;

    for epoch in 0..opts.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(opts.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let demo = &demos[i];
                let logits = model.forward_with_tape(&demo.graph, &mut tape).map_err(|e| match e {
                    Error::NumericalFault(m) => Error::NumericalFault(format!("epoch {epoch}: {m}")),
                    other => other,
                })?;
                let (loss, mut dlogits) = cross_entropy(&logits, demo.action)?;
                if loss.is_nan() {
                    return Err(Error::NumericalFault(format!("loss is NaN at epoch {epoch}")));
                }
                total += loss;
                dlogits.iter_mut().for_each(|g| *g *= scale);
                model.backward_into(&tape, &dlogits, &mut grads)?;
            }
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NumericalFault(format!("non-finite gradient at epoch {epoch}")));
            }
            if let Some(limit) = opts.max_grad_norm {
                let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > limit {
                    grads.iter_mut().for_each(|g| *g *= limit / norm);
                }
            }
            let step_size = opts.step_size * opts.schedule.factor(step, total_steps);
            adam.step(model.params_mut(), &grads, step_size);
            step += 1;
        }
        let mean = total / demos.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NumericalFault(format!("loss diverged at epoch {epoch}")));
        }
        loss_curve.push(mean);
    }
    Ok(TrainReport { loss_curve })
}
