use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A parameter `u ∈ ℝᵖ` stored as the concatenation of `k` blocks of length
/// `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    k: usize,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 || !values.len().is_multiple_of(k) {
            return Err(Error::dims(format!(
                "parameter of length {} cannot be split into {k} blocks",
                values.len()
            )));
        }
        Ok(ParamVector { values, k })
    }

    pub fn zeros(k: usize, m: usize) -> Self {
        ParamVector {
            values: vec![0.0; k * m],
            k,
        }
    }

    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let m = blocks.first().map_or(0, Vec::len);
        if blocks.iter().any(|b| b.len() != m) {
            return Err(Error::dims("blocks have unequal lengths"));
        }
        Self::new(blocks.concat(), blocks.len().max(1))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.values.len() / self.k
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn block(&self, j: usize) -> &[f64] {
        let m = self.m();
        &self.values[j * m..(j + 1) * m]
    }

    pub fn blocks(&self) -> Vec<Vec<f64>> {
        (0..self.k).map(|j| self.block(j).to_vec()).collect()
    }

    /// Indices `h` with `u_h ≠ 0`.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(h, _)| h)
            .collect()
    }

    /// Support of each block, indexed within the block.
    pub fn block_supports(&self) -> Vec<Vec<usize>> {
        (0..self.k)
            .map(|j| {
                self.block(j)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(h, _)| h)
                    .collect()
            })
            .collect()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }
}
