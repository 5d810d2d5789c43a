//! Mixed-radix indexing of joint configurations.
//!
//! The first variable is the most significant digit, so increasing flat
//! index coincides with lexicographic order of the configurations.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Radix {
    cards: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl Radix {
    /// Fails when the product of `cards` exceeds `cap`.
    pub fn new(cards: &[usize], cap: usize) -> Result<Self> {
        let cells = cells(cards);
        if cells > cap as u128 {
            return Err(Error::Capacity { cells, cap });
        }
        let mut strides = vec![0; cards.len()];
        let mut acc = 1usize;
        for k in (0..cards.len()).rev() {
            strides[k] = acc;
            acc *= cards[k];
        }
        Ok(Self {
            cards: cards.to_vec(),
            strides,
            size: acc,
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn index<T: Copy + Into<u64>>(&self, config: &[T]) -> usize {
        debug_assert_eq!(config.len(), self.cards.len());
        config
            .iter()
            .zip(&self.strides)
            .map(|(&v, &s)| v.into() as usize * s)
            .sum()
    }

    pub fn decode(&self, mut index: usize) -> Vec<u32> {
        let mut out = vec![0u32; self.cards.len()];
        for (k, &s) in self.strides.iter().enumerate() {
            out[k] = (index / s) as u32;
            index %= s;
        }
        out
    }

    /// Iterates all configurations in lexicographic order.
    pub fn configs(&self) -> impl Iterator<Item = Vec<u32>> + '_ {
        (0..self.size).map(move |i| self.decode(i))
    }
}

/// Product of cardinalities, saturating into u128.
pub fn cells(cards: &[usize]) -> u128 {
    cards
        .iter()
        .fold(1u128, |acc, &c| acc.saturating_mul(c as u128))
}
