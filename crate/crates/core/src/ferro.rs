//! Furnace charging as a knapsack.
//!
//! Inventory is simulated as discrete batches of known material. Each batch
//! is worth its savings against a reference price, `w * (p_ref - c)`, so a
//! maximum-savings load is a minimum-cost load at any fixed total weight.
//! Underfill is reported and optionally topped up with a filler material.
//!
//! Discretization draw order for a seed: the round-robin material list is
//! shuffled, then each batch in turn draws its weight with `int_in(20, 200)`.
//! A draw that would leave too little cap for the material's remaining
//! batches is replaced by one draw from `int_in(20, ub)`.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gap::{format_gap, optimality_gap, Sense};
use crate::graph::KpState;
use crate::instances::{KpInstance, KpSolution};
use crate::kp::{solve_kp_bb, solve_kp_dp};
use crate::mtt::{decode_greedy, MttModel};
use crate::rng::SplitMix64;

pub const MIN_BATCH_LB: u64 = 20;
pub const MAX_BATCH_LB: u64 = 200;
pub const DEFAULT_CAPACITY_LB: u64 = 1800;
pub const DEFAULT_P_REF: f64 = 2.0;
/// Knapsack values are savings in cents.
pub const VALUE_SCALE: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Dollars per lb.
    pub unit_cost: f64,
    /// Most lb of this material one charge may use.
    pub max_usage: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerroSpec {
    pub materials: Vec<Material>,
    #[serde(default = "default_capacity")]
    pub target_capacity: u64,
    #[serde(default = "default_p_ref")]
    pub p_ref: f64,
    #[serde(default)]
    pub filler_material: Option<usize>,
}

fn default_capacity() -> u64 {
    DEFAULT_CAPACITY_LB
}

fn default_p_ref() -> f64 {
    DEFAULT_P_REF
}

impl FerroSpec {
    pub fn new(
        materials: Vec<Material>,
        target_capacity: u64,
        p_ref: f64,
        filler_material: Option<usize>,
    ) -> Result<Self> {
        let spec = Self {
            materials,
            target_capacity,
            p_ref,
            filler_material,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Fourteen materials with costs evenly spaced over $0.40..$1.10 (to the
    /// cent) and 900 lb caps, for a 1800 lb charge at `p_ref` $2.00.
    pub fn reconstructed() -> Self {
        let materials = (0..14)
            .map(|k| Material {
                name: format!("M{:02}", k + 1),
                unit_cost: (40.0 + k as f64 * 70.0 / 13.0).round() / 100.0,
                max_usage: 900,
            })
            .collect();
        Self {
            materials,
            target_capacity: DEFAULT_CAPACITY_LB,
            p_ref: DEFAULT_P_REF,
            filler_material: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.materials.is_empty() {
            return Err(Error::Infeasible("no materials".into()));
        }
        if self.target_capacity == 0 {
            return Err(Error::Infeasible("target capacity must be positive".into()));
        }
        if !(self.p_ref.is_finite() && self.p_ref > 0.0) {
            return Err(Error::Infeasible(format!("invalid reference price {}", self.p_ref)));
        }
        for m in &self.materials {
            if !(m.unit_cost > 0.0 && m.unit_cost < self.p_ref) {
                return Err(Error::Infeasible(format!(
                    "{}: unit cost {} must lie strictly between 0 and the reference price {}",
                    m.name, m.unit_cost, self.p_ref
                )));
            }
        }
        let total_cap: u64 = self.materials.iter().map(|m| m.max_usage).sum();
        if total_cap < self.target_capacity {
            return Err(Error::Infeasible(format!(
                "caps total {total_cap} lb, below the {} lb target",
                self.target_capacity
            )));
        }
        if let Some(f) = self.filler_material {
            if f >= self.materials.len() {
                return Err(Error::Infeasible(format!("filler material {f} does not exist")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::format("spec", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes") + "\n"
    }

    /// Savings of a full charge bought at the reference price.
    pub fn reference_value(&self) -> f64 {
        self.p_ref * self.target_capacity as f64
    }
}

/// One container of a single material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub material: usize,
    pub weight: u64,
}

pub fn discretize(spec: &FerroSpec, n_items: usize, seed: u64) -> Result<Vec<Batch>> {
    spec.validate()?;
    let k = spec.materials.len();
    let mut assignment: Vec<usize> = (0..n_items).map(|i| i % k).collect();
    let mut remaining = vec![0u64; k];
    assignment.iter().for_each(|&m| remaining[m] += 1);
    for (m, mat) in spec.materials.iter().enumerate() {
        if remaining[m] * MIN_BATCH_LB > mat.max_usage {
            return Err(Error::Infeasible(format!(
                "{}: {} batches of at least {MIN_BATCH_LB} lb exceed the {} lb cap",
                mat.name, remaining[m], mat.max_usage
            )));
        }
    }
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut assignment);
    let mut left: Vec<u64> = spec.materials.iter().map(|m| m.max_usage).collect();
    let batches = assignment
        .into_iter()
        .map(|m| {
            remaining[m] -= 1;
            let ub = MAX_BATCH_LB.min(left[m] - remaining[m] * MIN_BATCH_LB);
            let mut w = rng.int_in(MIN_BATCH_LB, MAX_BATCH_LB);
            if w > ub {
                w = rng.int_in(MIN_BATCH_LB, ub);
            }
            left[m] -= w;
            Batch { material: m, weight: w }
        })
        .collect();
    Ok(batches)
}

fn check_batches(spec: &FerroSpec, batches: &[Batch]) -> Result<()> {
    match batches.iter().find(|b| b.material >= spec.materials.len()) {
        Some(b) => Err(Error::InvalidArgument(format!("batch uses unknown material {}", b.material))),
        None => Ok(()),
    }
}

/// Savings in cents for `weight` lb of `material`.
pub fn batch_value(spec: &FerroSpec, batch: Batch) -> u64 {
    let c = spec.materials[batch.material].unit_cost;
    (batch.weight as f64 * (spec.p_ref - c) * VALUE_SCALE as f64).round() as u64
}

pub fn to_knapsack(spec: &FerroSpec, batches: &[Batch]) -> Result<KpInstance> {
    check_batches(spec, batches)?;
    KpInstance::new(
        format!("ferro{}", batches.len()),
        batches.iter().map(|b| b.weight).collect(),
        batches.iter().map(|&b| batch_value(spec, b)).collect(),
        spec.target_capacity,
        VALUE_SCALE,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Dp,
    Bb,
    Mtt,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Dp => "dp",
            Backend::Bb => "bb",
            Backend::Mtt => "mtt",
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dp" => Ok(Backend::Dp),
            "bb" => Ok(Backend::Bb),
            "mtt" => Ok(Backend::Mtt),
            _ => Err(Error::InvalidArgument(format!("unknown backend {s:?} (dp, bb, mtt)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanLine {
    pub material: usize,
    pub weight: u64,
    pub filler: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingPlan {
    /// Chosen batches in inventory order, then the filler line if any.
    pub lines: Vec<PlanLine>,
    pub target_capacity: u64,
    pub total_weight: u64,
    /// Dollars.
    pub total_cost: f64,
    /// `target_capacity - total_weight`, after any filler.
    pub underfill: u64,
    /// Lb used per material.
    pub usage: Vec<u64>,
    /// Knapsack objective of the chosen batches, in cents.
    pub savings_cents: u64,
}

impl LoadingPlan {
    /// Assembles a plan from a knapsack selection, adding filler if the spec
    /// names one and the charge is short.
    pub fn assemble(spec: &FerroSpec, batches: &[Batch], selected: &[bool]) -> Result<Self> {
        check_batches(spec, batches)?;
        if selected.len() != batches.len() {
            return Err(Error::InvalidArgument(format!(
                "{} selection flags for {} batches",
                selected.len(),
                batches.len()
            )));
        }
        let mut lines: Vec<PlanLine> = batches
            .iter()
            .zip(selected)
            .filter(|(_, &s)| s)
            .map(|(b, _)| PlanLine { material: b.material, weight: b.weight, filler: false })
            .collect();
        let savings_cents = batches
            .iter()
            .zip(selected)
            .filter(|(_, &s)| s)
            .map(|(&b, _)| batch_value(spec, b))
            .sum();
        let mut usage = vec![0u64; spec.materials.len()];
        lines.iter().for_each(|l| usage[l.material] += l.weight);
        let weight: u64 = usage.iter().sum();
        if weight > spec.target_capacity {
            return Err(Error::Infeasible(format!(
                "selection weighs {weight} lb, over the {} lb target",
                spec.target_capacity
            )));
        }
        for (mat, &used) in spec.materials.iter().zip(&usage) {
            if used > mat.max_usage {
                return Err(Error::Infeasible(format!(
                    "{} used {used} lb, over its {} lb cap",
                    mat.name, mat.max_usage
                )));
            }
        }
        if let Some(f) = spec.filler_material {
            let short = spec.target_capacity - weight;
            let amount = short.min(spec.materials[f].max_usage - usage[f]);
            if amount > 0 {
                usage[f] += amount;
                lines.push(PlanLine { material: f, weight: amount, filler: true });
            }
        }
        let total_weight: u64 = usage.iter().sum();
        let total_cost = lines
            .iter()
            .map(|l| l.weight as f64 * spec.materials[l.material].unit_cost)
            .sum();
        Ok(Self {
            lines,
            target_capacity: spec.target_capacity,
            total_weight,
            total_cost,
            underfill: spec.target_capacity - total_weight,
            usage,
            savings_cents,
        })
    }

    /// Savings of the whole charge, filler included, in dollars.
    pub fn savings(&self, spec: &FerroSpec) -> f64 {
        spec.p_ref * self.total_weight as f64 - self.total_cost
    }

    /// Knapsack savings as a fraction of [`FerroSpec::reference_value`].
    pub fn normalized_savings(&self, spec: &FerroSpec) -> f64 {
        self.savings_cents as f64 / VALUE_SCALE as f64 / spec.reference_value()
    }
}

pub fn solve_charge(
    spec: &FerroSpec,
    batches: &[Batch],
    backend: Backend,
    model: Option<&MttModel>,
) -> Result<LoadingPlan> {
    let inst = to_knapsack(spec, batches)?;
    let sol: KpSolution = match backend {
        Backend::Dp => solve_kp_dp(&inst)?,
        Backend::Bb => solve_kp_bb(&inst)?.solution,
        Backend::Mtt => {
            let model = model.ok_or_else(|| {
                Error::Configuration("the mtt backend needs a model checkpoint".into())
            })?;
            decode_greedy(model, KpState::new(&inst))?
        }
    };
    LoadingPlan::assemble(spec, batches, &sol.selected)
}

/// Human-readable summary of a plan.
pub fn plan_report(spec: &FerroSpec, plan: &LoadingPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "material        used_lb   cap_lb");
    for (mat, used) in spec.materials.iter().zip(&plan.usage) {
        let _ = writeln!(out, "{:<14} {:>8} {:>8}", mat.name, used, mat.max_usage);
    }
    if let Some(filler) = plan.lines.iter().find(|l| l.filler) {
        let _ = writeln!(
            out,
            "filler: {} lb of {}",
            filler.weight, spec.materials[filler.material].name
        );
    }
    let _ = writeln!(out, "total weight: {} / {} lb", plan.total_weight, plan.target_capacity);
    let _ = writeln!(out, "underfill: {} lb", plan.underfill);
    let _ = writeln!(out, "total cost: ${:.2}", plan.total_cost);
    let _ = writeln!(out, "savings vs reference price: ${:.2}", plan.savings(spec));
    out
}

pub const PLAN_CSV_HEADER: &str = "material,weight_lb,unit_cost,line_cost";

/// One row per plan line; costs in dollars to the cent.
pub fn plan_csv(spec: &FerroSpec, plan: &LoadingPlan) -> String {
    let mut out = String::from(PLAN_CSV_HEADER);
    out.push('\n');
    for l in &plan.lines {
        let m = &spec.materials[l.material];
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2}",
            m.name,
            l.weight,
            m.unit_cost,
            l.weight as f64 * m.unit_cost
        );
    }
    out
}

/// One scenario of a size/seed sweep: the DP plan and the backend's plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_items: usize,
    pub seed: u64,
    pub oracle: LoadingPlan,
    pub candidate: LoadingPlan,
}

impl SweepRow {
    /// Relative savings shortfall of the candidate against the DP plan.
    pub fn gap(&self) -> Result<f64> {
        Ok(optimality_gap(
            self.oracle.savings_cents as i64,
            self.candidate.savings_cents as i64,
            Sense::Maximize,
        )?
        .gap)
    }
}

pub fn sweep(
    spec: &FerroSpec,
    sizes: &[usize],
    seeds: std::ops::Range<u64>,
    backend: Backend,
    model: Option<&MttModel>,
) -> Result<Vec<SweepRow>> {
    if backend == Backend::Mtt && model.is_none() {
        return Err(Error::Configuration("the mtt backend needs a model checkpoint".into()));
    }
    let jobs: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&n| seeds.clone().map(move |seed| (n, seed)))
        .collect();
    jobs.into_par_iter()
        .map(|(n, seed)| {
            let batches = discretize(spec, n, seed)?;
            let oracle = solve_charge(spec, &batches, Backend::Dp, None)?;
            let candidate = match backend {
                Backend::Dp => oracle.clone(),
                other => solve_charge(spec, &batches, other, model)?,
            };
            Ok(SweepRow { n_items: n, seed, oracle, candidate })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "n_items,seed,oracle_savings,candidate_savings,gap,candidate_weight_lb,candidate_cost,normalized_oracle";

/// Per-scenario rows; savings and costs in dollars.
pub fn sweep_csv(spec: &FerroSpec, rows: &[SweepRow]) -> Result<String> {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2},{},{},{:.2},{:.4}",
            r.n_items,
            r.seed,
            r.oracle.savings_cents as f64 / 100.0,
            r.candidate.savings_cents as f64 / 100.0,
            format_gap(r.gap()?, 4),
            r.candidate.total_weight,
            r.candidate.total_cost,
            r.oracle.normalized_savings(spec)
        );
    }
    Ok(out)
}

/// Means over the scenarios of one inventory size.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeSummary {
    pub n_items: usize,
    pub scenarios: usize,
    /// Dollars.
    pub mean_oracle_savings: f64,
    pub mean_candidate_savings: f64,
    pub mean_gap: f64,
    pub mean_normalized_oracle: f64,
}

/// One summary per size, in order of first appearance.
pub fn summarize(spec: &FerroSpec, rows: &[SweepRow]) -> Result<Vec<SizeSummary>> {
    let mut sizes: Vec<usize> = Vec::new();
    for r in rows {
        if !sizes.contains(&r.n_items) {
            sizes.push(r.n_items);
        }
    }
    sizes
        .into_iter()
        .map(|n| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.n_items == n).collect();
            let k = group.len() as f64;
            let mut gaps = 0.0;
            for r in &group {
                gaps += r.gap()?;
            }
            Ok(SizeSummary {
                n_items: n,
                scenarios: group.len(),
                mean_oracle_savings: group.iter().map(|r| r.oracle.savings_cents as f64).sum::<f64>() / k / 100.0,
                mean_candidate_savings: group.iter().map(|r| r.candidate.savings_cents as f64).sum::<f64>() / k / 100.0,
                mean_gap: gaps / k,
                mean_normalized_oracle: group.iter().map(|r| r.oracle.normalized_savings(spec)).sum::<f64>() / k,
            })
        })
        .collect()
}

pub const SUMMARY_CSV_HEADER: &str = "n_items,scenarios,oracle_savings,candidate_savings,gap,normalized_oracle";

pub fn summary_csv(summaries: &[SizeSummary]) -> String {
    let mut out = String::from(SUMMARY_CSV_HEADER);
    out.push('\n');
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2},{},{:.4}",
            s.n_items,
            s.scenarios,
            s.mean_oracle_savings,
            s.mean_candidate_savings,
            format_gap(s.mean_gap, 3),
            s.mean_normalized_oracle
        );
    }
    out
}

pub fn summary_markdown(summaries: &[SizeSummary], backend: Backend) -> String {
    let mut out = format!(
        "| Size | DP savings ($) | {} savings ($) | Optimality Gap | Normalized DP |\n|---|---|---|---|---|\n",
        backend.as_str()
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "| {} | {:.2} | {:.2} | {} | {:.4} |",
            s.n_items,
            s.mean_oracle_savings,
            s.mean_candidate_savings,
            format_gap(s.mean_gap, 3),
            s.mean_normalized_oracle
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructed_costs_span_the_range() {
        let spec = FerroSpec::reconstructed();
        spec.validate().unwrap();
        let costs: Vec<f64> = spec.materials.iter().map(|m| m.unit_cost).collect();
        assert_eq!(costs.len(), 14);
        assert_eq!(costs[0], 0.40);
        assert_eq!(costs[13], 1.10);
        assert!(costs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn value_in_cents() {
        let spec = FerroSpec::reconstructed();
        assert_eq!(batch_value(&spec, Batch { material: 0, weight: 100 }), 16_000);
    }

    #[test]
    fn backend_names() {
        assert_eq!("DP".parse::<Backend>().unwrap(), Backend::Dp);
        assert!("cp".parse::<Backend>().is_err());
    }
}
