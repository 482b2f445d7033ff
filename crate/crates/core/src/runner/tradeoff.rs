use serde::{Deserialize, Serialize};

use super::RunnerError;

/// Epoch (0-based) where train and test accuracy meet, with both accuracies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// The later epoch of the first sign change of `train − test`; without a
/// crossing, the earliest epoch minimizing `|train − test|`.
///
/// Reaching an exact tie from a nonzero difference counts as a crossing at the
/// tied epoch, so `[+, 0, −]` yields epoch 1.
pub fn tradeoff_point(train: &[f64], test: &[f64]) -> Result<TradeoffPoint, RunnerError> {
    if train.len() != test.len() {
        return Err(RunnerError::Argument(format!(
            "curve lengths differ: {} train vs {} test",
            train.len(),
            test.len()
        )));
    }
    if train.is_empty() {
        return Err(RunnerError::Argument("empty accuracy curves".into()));
    }
    let diff: Vec<f64> = train.iter().zip(test).map(|(a, b)| a - b).collect();
    let point = |epoch: usize| TradeoffPoint {
        epoch,
        train_accuracy: train[epoch],
        test_accuracy: test[epoch],
    };
    if let Some(e) = (1..diff.len()).find(|&e| {
        diff[e - 1] * diff[e] < 0.0 || (diff[e] == 0.0 && diff[e - 1] != 0.0)
    }) {
        return Ok(point(e));
    }
    let mut best = 0;
    for e in 1..diff.len() {
        if diff[e].abs() < diff[best].abs() {
            best = e;
        }
    }
    Ok(point(best))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stated_examples() {
        assert_eq!(tradeoff_point(&[0.90, 0.92], &[0.95, 0.91]).unwrap().epoch, 1);
        assert_eq!(tradeoff_point(&[0.5, 0.6, 0.7], &[0.5, 0.6, 0.7]).unwrap().epoch, 0);
        assert_eq!(tradeoff_point(&[0.8, 0.9], &[0.6, 0.7]).unwrap().epoch, 0);
    }

    #[test]
    fn errors() {
        assert!(matches!(tradeoff_point(&[0.1], &[0.1, 0.2]), Err(RunnerError::Argument(_))));
        assert!(tradeoff_point(&[], &[]).is_err());
    }
}
