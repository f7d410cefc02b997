//! The classifier port. Everything downstream talks to a model only through
//! [`Classifier::predict`], which maps an image to a probability vector.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::labels::SuperpixelMap;
use crate::prob::ProbDist;
use crate::raster::RasterImage;

mod linear;
mod remote;

pub use linear::LinearSuperpixelClassifier;
pub use remote::{
    check_health, parse_error_body, parse_health_response, parse_predict_response, PredictResponse,
    RemoteClassifier, REMOTE_SUM_TOLERANCE,
};

/// A black-box image classifier.
///
/// Implementations must be pure (same image, same distribution) and safe
/// to call from several threads at once.
pub trait Classifier: Send + Sync {
    fn predict(&self, image: &RasterImage) -> Result<ProbDist>;

    fn num_classes(&self) -> usize;

    fn label_names(&self) -> Option<&[String]> {
        None
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn predict(&self, image: &RasterImage) -> Result<ProbDist> {
        (**self).predict(image)
    }

    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn label_names(&self) -> Option<&[String]> {
        (**self).label_names()
    }
}

impl<C: Classifier + ?Sized> Classifier for Box<C> {
    fn predict(&self, image: &RasterImage) -> Result<ProbDist> {
        (**self).predict(image)
    }

    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn label_names(&self) -> Option<&[String]> {
        (**self).label_names()
    }
}

/// Raw class scores, at least two and all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits(Vec<f64>);

impl Logits {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.len() < 2 {
            return Err(Error::Input(format!("need at least 2 logits, got {}", z.len())));
        }
        if let Some(i) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("logit {i} is not finite")));
        }
        Ok(Self(z))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `exp(z_i) / Σ_j exp(z_j)`, evaluated after shifting by `max(z)`.
pub fn softmax(z: &Logits) -> ProbDist {
    let max = z.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.0.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    ProbDist::new(exps.into_iter().map(|e| e / total).collect())
        .expect("shifted softmax of finite logits is a distribution")
}

/// Bit `j` is set iff every pixel of superpixel `j` in `input` equals the
/// reference pixel byte for byte.
pub fn presence_vector(input: &RasterImage, reference: &RasterImage, map: &SuperpixelMap) -> Result<Vec<bool>> {
    if input.dimensions() != reference.dimensions() || input.dimensions() != map.dimensions() {
        return Err(Error::Input(format!(
            "dimension mismatch: input {:?}, reference {:?}, map {:?}",
            input.dimensions(),
            reference.dimensions(),
            map.dimensions()
        )));
    }
    let mut present = vec![true; map.ns()];
    for ((a, b), &label) in input.pixels().iter().zip(reference.pixels()).zip(map.labels()) {
        if a != b {
            present[label as usize] = false;
        }
    }
    Ok(present)
}

/// Counts `predict` calls on the wrapped classifier.
#[derive(Debug)]
pub struct CountingClassifier<C> {
    inner: C,
    calls: AtomicUsize,
}

impl<C: Classifier> CountingClassifier<C> {
    pub fn new(inner: C) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<C: Classifier> Classifier for CountingClassifier<C> {
    fn predict(&self, image: &RasterImage) -> Result<ProbDist> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.predict(image)
    }

    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn label_names(&self) -> Option<&[String]> {
        self.inner.label_names()
    }
}
