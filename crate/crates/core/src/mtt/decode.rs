use super::MttModel;
use crate::error::{Error, Result};
use crate::graph::Environment;

/// Softmax over the finite entries of `logits`; `-inf` entries get zero
/// probability. Fails when every entry is masked.
pub fn masked_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    let max = logits
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::State("no feasible action to normalize over".into()));
    }
    let exp: Vec<f64> = logits
        .iter()
        .map(|&x| if x.is_finite() { (x - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = exp.iter().sum();
    Ok(exp.into_iter().map(|e| e / z).collect())
}

/// Index of the highest finite logit, lowest index on ties.
pub(crate) fn argmax_feasible(logits: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in logits.iter().enumerate() {
        if x.is_finite() && best.map_or(true, |(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}

/// Rolls out the policy greedily from `start` until the environment is
/// terminal.
pub fn decode_greedy<E: Environment>(model: &MttModel, start: E) -> Result<E::Outcome> {
    let mut state = start;
    while !state.is_terminal() {
        let graph = state.encode();
        let logits = model.forward(&graph)?;
        let action = argmax_feasible(&logits)
            .ok_or_else(|| Error::State("non-terminal state without a feasible action".into()))?;
        state = state.apply_action(action)?;
    }
    state.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_entries_get_zero() {
        let p = masked_softmax(&[0.0, f64::NEG_INFINITY, 0.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn all_masked_is_an_error() {
        assert!(masked_softmax(&[f64::NEG_INFINITY; 3]).is_err());
        assert!(masked_softmax(&[]).is_err());
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        assert_eq!(argmax_feasible(&[f64::NEG_INFINITY, 1.0, 1.0]), Some(1));
        assert_eq!(argmax_feasible(&[f64::NEG_INFINITY]), None);
    }
}
