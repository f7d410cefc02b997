use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-pixel superpixel labels. Every label in `0..ns` owns at least one
/// pixel, so `ns` is also the length of a chromosome over this map.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SuperpixelMap {
    width: u32,
    height: u32,
    ns: usize,
    labels: Vec<u32>,
}

impl SuperpixelMap {
    pub fn new(width: u32, height: u32, ns: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!("label map must have nonzero area, got {width}x{height}")));
        }
        if ns == 0 {
            return Err(Error::Input("label map must have at least one superpixel".into()));
        }
        if labels.len() != width as usize * height as usize {
            return Err(Error::Input(format!(
                "label buffer holds {} entries, expected {}",
                labels.len(),
                width as usize * height as usize
            )));
        }
        if ns > labels.len() {
            return Err(Error::Input(format!("{ns} superpixels cannot fit in {} pixels", labels.len())));
        }
        let mut owned = vec![false; ns];
        for &label in &labels {
            let slot = owned
                .get_mut(label as usize)
                .ok_or_else(|| Error::Input(format!("label {label} out of range for ns={ns}")))?;
            *slot = true;
        }
        if let Some(empty) = owned.iter().position(|&o| !o) {
            return Err(Error::Input(format!("superpixel {empty} owns no pixels")));
        }
        Ok(Self { width, height, ns, labels })
    }

    /// Densely renumbers arbitrary labels in order of first appearance.
    pub fn from_sparse_labels(width: u32, height: u32, labels: &[u32]) -> Result<Self> {
        let mut remap = std::collections::HashMap::new();
        let dense = labels
            .iter()
            .map(|&l| {
                let next = remap.len() as u32;
                *remap.entry(l).or_insert(next)
            })
            .collect();
        Self::new(width, height, remap.len(), dense)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Pixel counts per superpixel.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.ns];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Row-major pixel indices belonging to each superpixel.
    pub fn pixel_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.ns];
        for (i, &l) in self.labels.iter().enumerate() {
            lists[l as usize].push(i);
        }
        lists
    }

    /// True when every superpixel's pixels form one 4-connected region.
    pub fn is_four_connected(&self) -> bool {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut seen = vec![false; self.labels.len()];
        let mut visited_labels = vec![false; self.ns];
        let mut stack = Vec::new();
        for start in 0..self.labels.len() {
            if seen[start] {
                continue;
            }
            let label = self.labels[start];
            if visited_labels[label as usize] {
                // a second component of a label already flooded
                return false;
            }
            visited_labels[label as usize] = true;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = (i % w, i / w);
                let mut visit = |j: usize| {
                    if !seen[j] && self.labels[j] == label {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
            }
        }
        true
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses `{width, height, ns, labels:[...]}` and re-validates every
    /// map invariant.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            width: u32,
            height: u32,
            ns: usize,
            labels: Vec<u32>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Self::new(raw.width, raw.height, raw.ns, raw.labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_label() {
        let err = SuperpixelMap::new(3, 1, 3, vec![0, 2, 2]).unwrap_err();
        assert!(err.to_string().contains("superpixel 1 owns no pixels"));
        let err = SuperpixelMap::new(2, 1, usize::MAX, vec![0, 1]).unwrap_err();
        assert!(err.to_string().contains("cannot fit"));
    }

    #[test]
    fn rejects_zero_ns_and_out_of_range() {
        assert!(SuperpixelMap::new(1, 1, 0, vec![0]).is_err());
        assert!(SuperpixelMap::new(2, 1, 1, vec![0, 1]).is_err());
    }

    #[test]
    fn connectivity_check() {
        // 0 1 0  -> label 0 is split
        let split = SuperpixelMap::new(3, 1, 2, vec![0, 1, 0]).unwrap();
        assert!(!split.is_four_connected());
        // diagonal touching is not 4-connected
        let diag = SuperpixelMap::new(2, 2, 2, vec![0, 1, 1, 0]).unwrap();
        assert!(!diag.is_four_connected());
        let ok = SuperpixelMap::new(2, 2, 2, vec![0, 0, 1, 1]).unwrap();
        assert!(ok.is_four_connected());
    }

    #[test]
    fn json_round_trip_and_revalidation() {
        let map = SuperpixelMap::new(2, 2, 2, vec![0, 0, 1, 1]).unwrap();
        let text = map.to_json().unwrap();
        assert_eq!(text, r#"{"width":2,"height":2,"ns":2,"labels":[0,0,1,1]}"#);
        assert_eq!(SuperpixelMap::from_json(&text).unwrap(), map);
        assert!(SuperpixelMap::from_json(r#"{"width":2,"height":2,"ns":3,"labels":[0,0,1,1]}"#).is_err());
    }

    #[test]
    fn sparse_labels_are_renumbered_by_first_appearance() {
        let map = SuperpixelMap::from_sparse_labels(3, 1, &[7, 2, 7]).unwrap();
        assert_eq!(map.labels(), &[0, 1, 0]);
        assert_eq!(map.ns(), 2);
    }
}
