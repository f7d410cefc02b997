use crate::error::{Error, Result};

/// Tolerance on the total mass of a locally computed distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Probability vector over K classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist {
    probs: Vec<f64>,
}

impl ProbDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probs, SUM_TOLERANCE)
    }

    /// Validates nonnegativity and `|sum - 1| <= tolerance`. Never
    /// renormalizes.
    pub fn with_tolerance(probs: Vec<f64>, tolerance: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Numeric("empty probability vector".into()));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(Error::Numeric(format!("probability {i} is {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(Error::Numeric(format!(
                "probabilities sum to {sum}, outside 1 ± {tolerance:e}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, class: usize) -> Option<f64> {
        self.probs.get(class).copied()
    }

    /// Index of the largest probability; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_sum_and_sign() {
        assert!(ProbDist::new(vec![0.25, 0.75]).is_ok());
        assert!(ProbDist::new(vec![0.25, 0.25]).is_err());
        assert!(ProbDist::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbDist::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbDist::with_tolerance(vec![0.5, 0.5 + 5e-7], 1e-6).is_ok());
        assert!(ProbDist::new(vec![0.5, 0.5 + 5e-7]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        let p = ProbDist::new(vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(p.argmax(), 0);
    }
}
