//! Perturbation-sampling baseline: random masks around the full image are
//! scored by the classifier, weighted by closeness to the unmasked image,
//! and a weighted ridge model over the mask bits picks a fixed number of
//! superpixels.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chromosome::Chromosome;
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::explainer::{evaluate_fitness, Evaluator};
use crate::explanation::{Explanation, Method};
use crate::labels::SuperpixelMap;
use crate::raster::RasterImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeParams {
    pub num_samples: usize,
    /// Kernel width; `None` means `0.25 * sqrt(ns)`.
    pub kernel_width: Option<f64>,
    pub ridge_lambda: f64,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
}

impl Default for LimeParams {
    fn default() -> Self {
        Self { num_samples: 1000, kernel_width: None, ridge_lambda: 1e-3, seed: 0, workers: 1 }
    }
}

impl LimeParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kernel_width_for(&self, ns: usize) -> f64 {
        self.kernel_width.unwrap_or(0.25 * (ns as f64).sqrt())
    }

    pub fn validate(&self, ns: usize) -> Result<()> {
        if self.num_samples < ns + 1 {
            return Err(Error::Param(format!(
                "{} samples cannot fit {ns} superpixels plus an intercept",
                self.num_samples
            )));
        }
        let width = self.kernel_width_for(ns);
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Param(format!("kernel width {width} must be positive")));
        }
        if !(self.ridge_lambda > 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::Param(format!("ridge lambda {} must be positive", self.ridge_lambda)));
        }
        if self.workers == 0 {
            return Err(Error::Param("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Classifier calls one run makes.
    pub fn expected_calls(&self) -> usize {
        self.num_samples + 1
    }
}

/// `n` masks: the all-ones anchor first, then `n - 1` masks with
/// independent fair-coin bits.
pub fn sample_masks(ns: usize, n: usize, seed: u64) -> Vec<Chromosome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks = Vec::with_capacity(n);
    if n > 0 {
        masks.push(Chromosome::ones(ns));
    }
    while masks.len() < n {
        masks.push(Chromosome::new((0..ns).map(|_| rng.gen_bool(0.5)).collect()));
    }
    masks
}

/// `exp(-d² / width²)` with `d` the count of cleared bits over `sqrt(ns)`.
pub fn kernel_weight(c: &Chromosome, width: f64) -> f64 {
    let ns = c.len().max(1) as f64;
    let d = (c.len() - c.count_ones()) as f64 / ns.sqrt();
    (-(d * d) / (width * width)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// Weighted ridge regression of `targets` on mask bits with an unpenalized
/// intercept, solved through the normal equations.
///
/// Targets are shifted by the first sample's value before solving; the
/// shift only moves the intercept, and constant targets give exactly zero
/// coefficients.
pub fn fit_ridge(masks: &[Chromosome], targets: &[f64], weights: &[f64], lambda: f64) -> Result<RidgeFit> {
    let Some(first) = masks.first() else {
        return Err(Error::Input("no samples to fit".into()));
    };
    let ns = first.len();
    if masks.iter().any(|m| m.len() != ns) {
        return Err(Error::Input("masks differ in length".into()));
    }
    if targets.len() != masks.len() || weights.len() != masks.len() {
        return Err(Error::Input(format!(
            "{} masks, {} targets, {} weights",
            masks.len(),
            targets.len(),
            weights.len()
        )));
    }
    let shift = targets[0];
    let dim = ns + 1;
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    let mut row = vec![0.0; dim];
    for ((mask, &y), &w) in masks.iter().zip(targets).zip(weights) {
        row[0] = 1.0;
        for (slot, &bit) in row[1..].iter_mut().zip(mask.bits()) {
            *slot = if bit { 1.0 } else { 0.0 };
        }
        let y = y - shift;
        for i in 0..dim {
            if row[i] == 0.0 {
                continue;
            }
            rhs[i] += w * row[i] * y;
            for j in 0..dim {
                gram[(i, j)] += w * row[i] * row[j];
            }
        }
    }
    for i in 1..dim {
        gram[(i, i)] += lambda;
    }
    let solution = gram
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Numeric("ridge normal equations are singular".into()))?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("ridge solution is not finite".into()));
    }
    Ok(RidgeFit {
        intercept: solution[0] + shift,
        coefficients: solution.iter().skip(1).copied().collect(),
    })
}

/// Sets the `budget` bits with the largest coefficients; equal coefficients
/// are taken in index order.
pub fn select_top(coefficients: &[f64], budget: usize) -> Result<Chromosome> {
    let ns = coefficients.len();
    if budget == 0 || budget > ns {
        return Err(Error::Param(format!("budget {budget} outside [1, {ns}]")));
    }
    let mut order: Vec<usize> = (0..ns).collect();
    order.sort_by(|&a, &b| coefficients[b].total_cmp(&coefficients[a]).then(a.cmp(&b)));
    let mut bits = vec![false; ns];
    for &j in &order[..budget] {
        bits[j] = true;
    }
    Ok(Chromosome::new(bits))
}

pub fn fit_and_select(
    masks: &[Chromosome],
    fitnesses: &[f64],
    weights: &[f64],
    budget: usize,
    lambda: f64,
) -> Result<Chromosome> {
    let fit = fit_ridge(masks, fitnesses, weights, lambda)?;
    select_top(&fit.coefficients, budget)
}

/// Baseline explanation with exactly `budget` selected superpixels.
///
/// The anchor sample is the unmasked image, so its fitness is taken from
/// the original prediction; together with scoring the selected mask this
/// keeps the call count at `num_samples + 1`.
pub fn explain_lime(
    model: &dyn Classifier,
    img: &RasterImage,
    map: &SuperpixelMap,
    params: &LimeParams,
    budget: usize,
) -> Result<Explanation> {
    let ns = map.ns();
    params.validate(ns)?;
    if budget == 0 || budget > ns {
        return Err(Error::Param(format!("budget {budget} outside [1, {ns}]")));
    }
    if img.dimensions() != map.dimensions() {
        return Err(Error::Input(format!(
            "image is {:?} but the map is {:?}",
            img.dimensions(),
            map.dimensions()
        )));
    }
    let started = Instant::now();
    let original = model.predict(img)?;
    let target = original.argmax();
    let original_probability = original.probs()[target];

    let masks = sample_masks(ns, params.num_samples, params.seed);
    let evaluator = Evaluator::new(model, img, map, target, params.workers)?;
    let mut fitnesses = Vec::with_capacity(masks.len());
    fitnesses.push(original_probability);
    fitnesses.extend(evaluator.all(&masks[1..], None)?.into_iter());

    let width = params.kernel_width_for(ns);
    let weights: Vec<f64> = masks.iter().map(|m| kernel_weight(m, width)).collect();
    let selected = fit_and_select(&masks, &fitnesses, &weights, budget, params.ridge_lambda)?;
    let best_fitness = evaluate_fitness(model, img, target, &selected, map)?;

    let mut param_json = serde_json::to_value(params)?;
    param_json["budget"] = budget.into();
    param_json["kernel_width"] = width.into();
    Ok(Explanation {
        method: Method::LimeBaseline,
        best: selected,
        best_fitness,
        target_label: target,
        original_probability,
        history: vec![best_fitness],
        wall_time: started.elapsed(),
        seed: params.seed,
        classifier_calls: params.expected_calls(),
        params: param_json,
    })
}
