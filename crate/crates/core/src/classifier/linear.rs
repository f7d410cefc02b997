use crate::chromosome::Chromosome;
use crate::error::{Error, Result};
use crate::labels::SuperpixelMap;
use crate::prob::ProbDist;
use crate::raster::RasterImage;

use super::{presence_vector, softmax, Classifier, Logits};

/// Synthetic classifier whose scores are linear in which superpixels of a
/// reference image are still intact: `softmax(b + W·presence)`.
///
/// Because masking blackens exactly the cleared superpixels, the prediction
/// on a masked image is a closed-form function of the chromosome, which is
/// what makes exhaustive oracles exact.
#[derive(Debug, Clone)]
pub struct LinearSuperpixelClassifier {
    reference: RasterImage,
    map: SuperpixelMap,
    /// K rows of `ns` weights.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl LinearSuperpixelClassifier {
    pub fn new(reference: RasterImage, map: SuperpixelMap, weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        if reference.dimensions() != map.dimensions() {
            return Err(Error::Input(format!(
                "reference is {:?} but the map is {:?}",
                reference.dimensions(),
                map.dimensions()
            )));
        }
        let k = bias.len();
        if k < 2 {
            return Err(Error::Param(format!("need at least 2 classes, got {k}")));
        }
        if weights.len() != k {
            return Err(Error::Param(format!("{} weight rows for {k} classes", weights.len())));
        }
        if let Some(row) = weights.iter().position(|r| r.len() != map.ns()) {
            return Err(Error::Param(format!("weight row {row} does not have {} entries", map.ns())));
        }
        if weights.iter().flatten().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Param("weights and bias must be finite".into()));
        }
        let mut has_color = vec![false; map.ns()];
        for (p, &l) in reference.pixels().iter().zip(map.labels()) {
            if *p != [0, 0, 0] {
                has_color[l as usize] = true;
            }
        }
        if let Some(j) = has_color.iter().position(|&c| !c) {
            return Err(Error::Input(format!(
                "superpixel {j} of the reference is entirely black, presence would be ambiguous"
            )));
        }
        Ok(Self { reference, map, weights, bias })
    }

    pub fn reference(&self) -> &RasterImage {
        &self.reference
    }

    pub fn map(&self) -> &SuperpixelMap {
        &self.map
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// `b + W·bits`, the logits for a presence pattern.
    pub fn logits_for(&self, bits: &[bool]) -> Logits {
        let z = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                row.iter()
                    .zip(bits)
                    .fold(*b, |acc, (w, &on)| if on { acc + w } else { acc })
            })
            .collect();
        Logits::new(z).expect("finite weights give finite logits")
    }

    /// Closed-form prediction for the image masked by `chromosome`.
    pub fn predict_chromosome(&self, chromosome: &Chromosome) -> Result<ProbDist> {
        if chromosome.len() != self.map.ns() {
            return Err(Error::Input(format!(
                "chromosome has {} bits, map has {} superpixels",
                chromosome.len(),
                self.map.ns()
            )));
        }
        Ok(softmax(&self.logits_for(chromosome.bits())))
    }
}

impl Classifier for LinearSuperpixelClassifier {
    fn predict(&self, image: &RasterImage) -> Result<ProbDist> {
        let presence = presence_vector(image, &self.reference, &self.map)?;
        Ok(softmax(&self.logits_for(&presence)))
    }

    fn num_classes(&self) -> usize {
        self.bias.len()
    }
}
