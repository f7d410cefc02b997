use std::fmt;

use crate::error::{Error, Result};
use crate::labels::SuperpixelMap;

/// Binary selection over superpixels: bit `j` set keeps superpixel `j`,
/// cleared blackens it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chromosome {
    bits: Vec<bool>,
}

impl Chromosome {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn ones(len: usize) -> Self {
        Self { bits: vec![true; len] }
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    /// Bits of `value` read MSB-first into `len` positions.
    pub fn from_index(value: u64, len: usize) -> Self {
        let bits = (0..len).map(|j| (value >> (len - 1 - j)) & 1 == 1).collect();
        Self { bits }
    }

    /// Parses a string of `'0'`/`'1'` characters.
    pub fn from_bit_string(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Input(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn flip(&mut self, j: usize) {
        self.bits[j] = !self.bits[j];
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Indices of set bits, ascending.
    pub fn selected(&self) -> Vec<usize> {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j).collect()
    }

    pub fn is_valid_for(&self, map: &SuperpixelMap) -> bool {
        self.bits.len() == map.ns()
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl From<Vec<bool>> for Chromosome {
    fn from(bits: Vec<bool>) -> Self {
        Self::new(bits)
    }
}

/// True iff the chromosome length equals the map's superpixel count.
pub fn validate_chromosome(c: &Chromosome, map: &SuperpixelMap) -> bool {
    c.is_valid_for(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_with_ns(ns: usize) -> SuperpixelMap {
        SuperpixelMap::new(ns as u32, 1, ns, (0..ns as u32).collect()).unwrap()
    }

    #[test]
    fn validation_is_a_length_check() {
        let map = map_with_ns(100);
        assert!(validate_chromosome(&Chromosome::ones(100), &map));
        assert!(!validate_chromosome(&Chromosome::ones(99), &map));
    }

    #[test]
    fn msb_first_indexing() {
        assert_eq!(Chromosome::from_index(0b1011, 4).to_string(), "1011");
        assert_eq!(Chromosome::from_index(1, 3).bits(), &[false, false, true]);
    }

    #[test]
    fn bit_string_parse() {
        let c = Chromosome::from_bit_string("0110").unwrap();
        assert_eq!(c.selected(), vec![1, 2]);
        assert_eq!(c.count_ones(), 2);
        assert!(Chromosome::from_bit_string("01a").is_err());
    }
}
