//! Optimality-gap arithmetic and its fixed-precision rendering.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub oracle_objective: i64,
    pub candidate_objective: i64,
    pub sense: Sense,
    pub gap: f64,
}

impl GapReport {
    /// Exact shortfall numerator; the denominator is the oracle objective.
    fn shortfall(&self) -> i64 {
        match self.sense {
            Sense::Maximize => self.oracle_objective - self.candidate_objective,
            Sense::Minimize => self.candidate_objective - self.oracle_objective,
        }
    }

    /// Rendered with [`format_gap`] semantics, computed from the exact integer ratio.
    pub fn formatted(&self, decimals: u32) -> String {
        let pow = 10i128.pow(decimals);
        let num = i128::from(self.shortfall()) * pow;
        let den = i128::from(self.oracle_objective);
        let units = (num + den - 1) / den;
        render_units(units as u128, decimals)
    }
}

pub fn optimality_gap(oracle: i64, candidate: i64, sense: Sense) -> Result<GapReport> {
    if oracle <= 0 {
        return Err(Error::InvalidArgument(format!(
            "oracle objective must be positive, got {oracle}"
        )));
    }
    let better = match sense {
        Sense::Maximize => candidate > oracle,
        Sense::Minimize => candidate < oracle,
    };
    if better {
        return Err(Error::OracleInconsistency { oracle, candidate });
    }
    let mut report = GapReport {
        oracle_objective: oracle,
        candidate_objective: candidate,
        sense,
        gap: 0.0,
    };
    report.gap = report.shortfall() as f64 / oracle as f64;
    Ok(report)
}

/// Renders a non-negative gap at a fixed number of decimals, rounding up so a
/// printed gap never understates the measured one.
///
/// A relative slack of 1e-9 absorbs representation error, so an exact value
/// such as `0.0011` is not bumped to the next unit.
pub fn format_gap(gap: f64, decimals: u32) -> String {
    let pow = 10f64.powi(decimals as i32);
    let scaled = gap.max(0.0) * pow;
    let units = (scaled - scaled.abs() * 1e-9 - 1e-12).ceil().max(0.0);
    render_units(units as u128, decimals)
}

fn render_units(units: u128, decimals: u32) -> String {
    if decimals == 0 {
        return units.to_string();
    }
    let pow = 10u128.pow(decimals);
    format!(
        "{}.{:0width$}",
        units / pow,
        units % pow,
        width = decimals as usize
    )
}
