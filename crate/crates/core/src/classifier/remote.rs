//! HTTP client for classifiers served over the JSON wire protocol:
//!
//! * `POST {url}/predict`, `Content-Type: image/png`, body = PNG bytes,
//!   answered by `200 {"probabilities": [..K], "labels": [..K]?}`
//! * `GET {url}/healthz` answered by `200 {"classes": K}`
//! * any other status carries `{"error": "..."}`

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::prob::ProbDist;
use crate::raster::RasterImage;

use super::Classifier;

/// Allowed deviation of a remote distribution's sum from 1.
pub const REMOTE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictResponse {
    pub probabilities: ProbDist,
    pub labels: Option<Vec<String>>,
}

/// Parses and validates a `/predict` body. Distributions are never
/// renormalized; a bad sum or a negative entry is a protocol error.
pub fn parse_predict_response(body: &str, expected_classes: Option<usize>) -> Result<PredictResponse> {
    #[derive(Deserialize)]
    struct Raw {
        probabilities: Vec<f64>,
        #[serde(default)]
        labels: Option<Vec<String>>,
    }
    let raw: Raw = serde_json::from_str(body).map_err(|e| Error::Protocol(format!("malformed predict body: {e}")))?;
    let k = raw.probabilities.len();
    if let Some(expected) = expected_classes {
        if k != expected {
            return Err(Error::Protocol(format!("expected {expected} probabilities, got {k}")));
        }
    }
    if k < 2 {
        return Err(Error::Protocol(format!("need at least 2 probabilities, got {k}")));
    }
    if let Some(labels) = &raw.labels {
        if labels.len() != k {
            return Err(Error::Protocol(format!("{} labels for {k} probabilities", labels.len())));
        }
    }
    let probabilities = ProbDist::with_tolerance(raw.probabilities, REMOTE_SUM_TOLERANCE)
        .map_err(|e| Error::Protocol(e.to_string()))?;
    Ok(PredictResponse { probabilities, labels: raw.labels })
}

/// Parses a `/healthz` body into the class count.
pub fn parse_health_response(body: &str) -> Result<usize> {
    #[derive(Deserialize)]
    struct Raw {
        classes: usize,
    }
    let raw: Raw = serde_json::from_str(body).map_err(|e| Error::Protocol(format!("malformed health body: {e}")))?;
    if raw.classes < 2 {
        return Err(Error::Protocol(format!("endpoint reports {} classes", raw.classes)));
    }
    Ok(raw.classes)
}

/// Extracts the message of an `{"error": ...}` body, falling back to the raw
/// text.
pub fn parse_error_body(body: &str) -> String {
    #[derive(Deserialize)]
    struct Raw {
        error: String,
    }
    match serde_json::from_str::<Raw>(body) {
        Ok(raw) => raw.error,
        Err(_) => body.trim().to_string(),
    }
}

fn transport(e: ureq::Error) -> Error {
    Error::Transport(e.to_string())
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{path}", base.trim_end_matches('/'))
}

/// Queries `/healthz` and returns the class count.
pub fn check_health(base_url: &str, timeout: Duration) -> Result<usize> {
    let mut resp = agent(timeout).get(&endpoint(base_url, "healthz")).call().map_err(transport)?;
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_string().map_err(transport)?;
    if status != 200 {
        return Err(Error::Remote { status, body: parse_error_body(&body) });
    }
    parse_health_response(&body)
}

/// Counting gate bounding the number of concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    released: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Self { free: Mutex::new(permits), released: Condvar::new() }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.released.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        GatePermit(self)
    }
}

struct GatePermit<'a>(&'a Gate);

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.released.notify_one();
    }
}

#[derive(Debug)]
pub struct RemoteClassifier {
    base_url: String,
    agent: ureq::Agent,
    num_classes: usize,
    labels: Option<Vec<String>>,
    gate: Gate,
}

impl RemoteClassifier {
    /// Connects by querying `/healthz` for the class count.
    pub fn connect(base_url: &str, timeout: Duration, max_in_flight: usize) -> Result<Self> {
        let classes = check_health(base_url, timeout)?;
        Self::new(base_url, timeout, max_in_flight, classes)
    }

    pub fn new(base_url: &str, timeout: Duration, max_in_flight: usize, num_classes: usize) -> Result<Self> {
        if max_in_flight == 0 {
            return Err(Error::Param("max_in_flight must be at least 1".into()));
        }
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent: agent(timeout),
            num_classes,
            labels: None,
            gate: Gate::new(max_in_flight),
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }
}

impl Classifier for RemoteClassifier {
    fn predict(&self, image: &RasterImage) -> Result<ProbDist> {
        let png = image.to_png_bytes()?;
        let _permit = self.gate.acquire();
        let mut resp = self
            .agent
            .post(&endpoint(&self.base_url, "predict"))
            .header("Content-Type", "image/png")
            .send(&png[..])
            .map_err(transport)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(transport)?;
        if status != 200 {
            return Err(Error::Remote { status, body: parse_error_body(&body) });
        }
        Ok(parse_predict_response(&body, Some(self.num_classes))?.probabilities)
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn label_names(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_body_parsing() {
        let ok = parse_predict_response(r#"{"probabilities":[0.25,0.75]}"#, Some(2)).unwrap();
        assert_eq!(ok.probabilities.probs(), &[0.25, 0.75]);
        assert!(ok.labels.is_none());

        let labelled = parse_predict_response(r#"{"probabilities":[0.5,0.5],"labels":["cat","dog"]}"#, None).unwrap();
        assert_eq!(labelled.labels.unwrap(), vec!["cat", "dog"]);

        for bad in [
            r#"{"probabilities":[0.25,0.25]}"#,
            r#"{"probabilities":[-0.25,1.25]}"#,
            r#"{"probabilities":[1.0]}"#,
            r#"{"probabilities":[0.5,0.5],"labels":["x"]}"#,
            r#"{"probs":[0.5,0.5]}"#,
            "not json",
        ] {
            assert!(matches!(parse_predict_response(bad, None), Err(Error::Protocol(_))), "{bad}");
        }
        assert!(matches!(
            parse_predict_response(r#"{"probabilities":[0.5,0.5]}"#, Some(3)),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn sum_tolerance_is_one_in_a_million() {
        assert!(parse_predict_response(r#"{"probabilities":[0.5,0.5000009]}"#, None).is_ok());
        assert!(parse_predict_response(r#"{"probabilities":[0.5,0.500002]}"#, None).is_err());
    }

    #[test]
    fn health_and_error_bodies() {
        assert_eq!(parse_health_response(r#"{"classes":1000}"#).unwrap(), 1000);
        assert!(parse_health_response(r#"{"classes":"many"}"#).is_err());
        assert!(parse_health_response(r#"{"classes":1}"#).is_err());
        assert_eq!(parse_error_body(r#"{"error":"bad image"}"#), "bad image");
        assert_eq!(parse_error_body("plain text\n"), "plain text");
    }

    #[test]
    fn unreachable_endpoint_is_a_transport_error() {
        // port 9 on localhost is reserved (discard) and normally closed
        let err = check_health("http://127.0.0.1:9", Duration::from_millis(500)).unwrap_err();
        assert!(matches!(err, Error::Transport(_)), "{err}");
    }
}
