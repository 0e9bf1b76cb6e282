//! Block-partitioned vectors `x = (x^1; ...; x^d)`.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScviError};

/// Sizes and offsets of the `d` blocks of a point in `R^n`, `n = sum n_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(ScviError::ShapeMismatch("layout needs at least one block".into()));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(ScviError::ShapeMismatch("empty block in layout".into()));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    pub fn uniform(blocks: usize, block_size: usize) -> Result<Self> {
        Self::new(vec![block_size; blocks])
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn dim(&self) -> usize {
        self.offsets[self.sizes.len()]
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

/// A point of `R^n` together with its block partition.
///
/// The layout is shared, so cloning an iterate only copies the coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct BlockVector {
    layout: Arc<BlockLayout>,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(layout: Arc<BlockLayout>) -> Self {
        let data = vec![0.0; layout.dim()];
        Self { layout, data }
    }

    pub fn from_flat(layout: Arc<BlockLayout>, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.dim() {
            return Err(ScviError::DimensionMismatch {
                expected: layout.dim(),
                got: data.len(),
            });
        }
        Ok(Self { layout, data })
    }

    pub fn from_blocks(blocks: Vec<Vec<f64>>) -> Result<Self> {
        let layout = BlockLayout::new(blocks.iter().map(Vec::len).collect())?;
        let data = blocks.into_iter().flatten().collect();
        Ok(Self {
            layout: Arc::new(layout),
            data,
        })
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn num_blocks(&self) -> usize {
        self.layout.num_blocks()
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.layout.range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.layout.range(i);
        &mut self.data[r]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.num_blocks()).map(move |i| self.block(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &BlockVector) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }

    pub fn ensure_shape(&self, other: &BlockVector) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(ScviError::ShapeMismatch(format!(
                "block sizes {:?} vs {:?}",
                self.layout.sizes(),
                other.layout.sizes()
            )))
        }
    }

    pub fn dot(&self, other: &BlockVector) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl From<BlockVector> for Vec<Vec<f64>> {
    fn from(v: BlockVector) -> Self {
        v.blocks().map(<[f64]>::to_vec).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for BlockVector {
    type Error = ScviError;

    fn try_from(blocks: Vec<Vec<f64>>) -> Result<Self> {
        BlockVector::from_blocks(blocks)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_offsets() {
        let l = BlockLayout::new(vec![2, 3, 1]).unwrap();
        assert_eq!(l.dim(), 6);
        assert_eq!(l.range(1), 2..5);
        assert_eq!(l.range(2), 5..6);
        assert!(BlockLayout::new(vec![]).is_err());
        assert!(BlockLayout::new(vec![2, 0]).is_err());
    }

    #[test]
    fn blocks_round_trip_through_json() {
        let v = BlockVector::from_blocks(vec![vec![1.0, 2.0], vec![3.0]]).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0]]");
        let back: BlockVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.block(1), &[3.0]);
    }

    #[test]
    fn from_flat_checks_length() {
        let l = Arc::new(BlockLayout::uniform(2, 2).unwrap());
        assert!(BlockVector::from_flat(l.clone(), vec![0.0; 3]).is_err());
        let v = BlockVector::from_flat(l, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(v.block(1), &[3.0, 4.0]);
    }
}
