use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::chromosome::Chromosome;
use crate::error::{Error, Result};

/// Which search produced an explanation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "elime")]
    Elime,
    #[serde(rename = "lime-baseline")]
    LimeBaseline,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Elime => "elime",
            Method::LimeBaseline => "lime-baseline",
        }
    }
}

/// The selected superpixels for one prediction plus how they were found.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub method: Method,
    pub best: Chromosome,
    pub best_fitness: f64,
    pub target_label: usize,
    pub original_probability: f64,
    /// Best-so-far fitness after initialization and after each generation.
    pub history: Vec<f64>,
    pub wall_time: Duration,
    pub seed: u64,
    /// Classifier calls made, including the prediction on the original image.
    pub classifier_calls: usize,
    pub params: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct ExplanationJson {
    method: Method,
    target_label: usize,
    original_probability: f64,
    best_fitness: f64,
    bits: String,
    selected: usize,
    history: Vec<f64>,
    wall_time_s: Option<f64>,
    seed: u64,
    classifier_calls: usize,
    params: serde_json::Value,
}

impl Explanation {
    /// Checks the archive invariants: a non-empty, non-decreasing history
    /// ending at `best_fitness`, and every fitness inside [0, 1].
    pub fn validate(&self) -> Result<()> {
        let Some(&last) = self.history.last() else {
            return Err(Error::Input("explanation has an empty history".into()));
        };
        if self.history.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Input("explanation history decreases".into()));
        }
        if last != self.best_fitness {
            return Err(Error::Input(format!(
                "best fitness {} differs from final history entry {last}",
                self.best_fitness
            )));
        }
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        if !in_unit(self.best_fitness) || !in_unit(self.original_probability) || !self.history.iter().all(|&h| in_unit(h)) {
            return Err(Error::Input("probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn selected_count(&self) -> usize {
        self.best.count_ones()
    }

    /// Serializes the report. Wall time is emitted only when `with_timing`
    /// is set (otherwise `null`), so repeated seeded runs produce identical
    /// bytes.
    pub fn to_json(&self, with_timing: bool) -> Result<String> {
        let json = ExplanationJson {
            method: self.method,
            target_label: self.target_label,
            original_probability: self.original_probability,
            best_fitness: self.best_fitness,
            bits: self.best.to_string(),
            selected: self.best.count_ones(),
            history: self.history.clone(),
            wall_time_s: with_timing.then(|| self.wall_time.as_secs_f64()),
            seed: self.seed,
            classifier_calls: self.classifier_calls,
            params: self.params.clone(),
        };
        let mut text = serde_json::to_string_pretty(&json)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ExplanationJson = serde_json::from_str(text)?;
        let best = Chromosome::from_bit_string(&raw.bits)?;
        if best.count_ones() != raw.selected {
            return Err(Error::Input(format!(
                "report claims {} selected superpixels but bits hold {}",
                raw.selected,
                best.count_ones()
            )));
        }
        let wall_time = match raw.wall_time_s {
            Some(s) => Duration::try_from_secs_f64(s).map_err(|_| Error::Input(format!("invalid wall time {s}")))?,
            None => Duration::ZERO,
        };
        let explanation = Explanation {
            method: raw.method,
            best,
            best_fitness: raw.best_fitness,
            target_label: raw.target_label,
            original_probability: raw.original_probability,
            history: raw.history,
            wall_time,
            seed: raw.seed,
            classifier_calls: raw.classifier_calls,
            params: raw.params,
        };
        explanation.validate()?;
        Ok(explanation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Explanation {
        Explanation {
            method: Method::Elime,
            best: Chromosome::from_bit_string("1010").unwrap(),
            best_fitness: 0.9,
            target_label: 3,
            original_probability: 0.7,
            history: vec![0.8, 0.85, 0.9],
            wall_time: Duration::from_millis(1500),
            seed: 42,
            classifier_calls: 301,
            params: serde_json::json!({"population_size": 100}),
        }
    }

    #[test]
    fn json_round_trip() {
        let e = sample();
        let text = e.to_json(true).unwrap();
        assert!(text.contains("\"bits\": \"1010\""));
        assert!(text.contains("\"method\": \"elime\""));
        assert!(text.contains("\"wall_time_s\": 1.5"));
        assert_eq!(Explanation::from_json(&text).unwrap(), e);
    }

    #[test]
    fn timing_can_be_omitted() {
        let text = sample().to_json(false).unwrap();
        assert!(text.contains("\"wall_time_s\": null"));
    }

    #[test]
    fn invariants_are_enforced() {
        let mut e = sample();
        e.history = vec![0.9, 0.8];
        assert!(e.validate().is_err());
        let mut e = sample();
        e.best_fitness = 0.95;
        assert!(e.validate().is_err());
        let mut e = sample();
        e.history.clear();
        assert!(e.validate().is_err());
        let text = sample().to_json(false).unwrap().replace("\"wall_time_s\": null", "\"wall_time_s\": 1e300");
        assert!(Explanation::from_json(&text).is_err());
    }
}
