//! Mini-set partitioning plans for one encoder layer.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// How one encoder layer splits its input set: a shuffle of the element
/// indices, an implicit partition of the shuffled order into `mini_sets`
/// contiguous equal blocks, and the fold order σ in which the reducing stage
/// consumes the mini-sets.
///
/// Training redraws a fresh plan per layer per forward pass; evaluation uses
/// the identity plan so predictions are reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniSetPlan {
    shuffle: Vec<usize>,
    mini_sets: usize,
    fold: Vec<usize>,
}

impl MiniSetPlan {
    /// Identity shuffle and identity fold order.
    pub fn identity(n: usize, mini_sets: usize) -> Result<Self> {
        Self::check(n, mini_sets)?;
        Ok(MiniSetPlan {
            shuffle: (0..n).collect(),
            mini_sets,
            fold: (0..mini_sets).collect(),
        })
    }

    /// Uniformly random shuffle and fold order.
    pub fn random<G: Rng>(n: usize, mini_sets: usize, rng: &mut G) -> Result<Self> {
        Self::check(n, mini_sets)?;
        let mut shuffle: Vec<usize> = (0..n).collect();
        shuffle.shuffle(rng);
        let mut fold: Vec<usize> = (0..mini_sets).collect();
        fold.shuffle(rng);
        Ok(MiniSetPlan { shuffle, mini_sets, fold })
    }

    /// Plan with explicit shuffle and fold permutations (used by oracles).
    pub fn explicit(shuffle: Vec<usize>, mini_sets: usize, fold: Vec<usize>) -> Result<Self> {
        Self::check(shuffle.len(), mini_sets)?;
        if !is_permutation(&shuffle) {
            return Err(Error::config("shuffle is not a permutation"));
        }
        if fold.len() != mini_sets || !is_permutation(&fold) {
            return Err(Error::config("fold is not a permutation of the mini-set labels"));
        }
        Ok(MiniSetPlan { shuffle, mini_sets, fold })
    }

    fn check(n: usize, mini_sets: usize) -> Result<()> {
        if mini_sets == 0 || n == 0 || n % mini_sets != 0 {
            return Err(Error::config(format!(
                "{n} elements cannot split into {mini_sets} equal mini-sets"
            )));
        }
        Ok(())
    }

    pub fn elements(&self) -> usize {
        self.shuffle.len()
    }

    pub fn mini_sets(&self) -> usize {
        self.mini_sets
    }

    pub fn mini_set_size(&self) -> usize {
        self.shuffle.len() / self.mini_sets
    }

    /// Original-set indices belonging to mini-set `m`.
    pub fn mini_set(&self, m: usize) -> &[usize] {
        let s = self.mini_set_size();
        &self.shuffle[m * s..(m + 1) * s]
    }

    /// Fold order σ over mini-set labels.
    pub fn fold_order(&self) -> &[usize] {
        &self.fold
    }

    /// Mini-set label that element `i` of the input set belongs to.
    pub fn mini_set_of(&self, i: usize) -> usize {
        let pos = self.shuffle.iter().position(|&x| x == i).expect("element in plan");
        pos / self.mini_set_size()
    }
}

fn is_permutation(v: &[usize]) -> bool {
    let mut seen = vec![false; v.len()];
    for &x in v {
        if x >= v.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}
