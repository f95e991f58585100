//! Bagged committee of random trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, majority, Node};
use super::{uncertainty, Feature, Label, Prediction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Node>,
}

/// Features tried per split: `ceil(log2(m) + 1)`, capped at `m`.
pub fn default_m_try(m: usize) -> usize {
    if m == 0 {
        return 0;
    }
    (((m as f64).log2() + 1.0).ceil() as usize).clamp(1, m)
}

impl Forest {
    /// `k` trees, each on a bootstrap sample of size `N` drawn with its own
    /// generator seeded from `seed` and the tree's position.
    pub fn train(xs: &[Vec<Feature>], ys: &[Label], k: usize, seed: u64) -> Forest {
        assert!(!xs.is_empty(), "training set must not be empty");
        let n = xs.len();
        let m_try = default_m_try(xs[0].len());
        let trees = (0..k)
            .into_par_iter()
            .map(|t| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(t as u64));
                let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                grow(xs, ys, sample, m_try, &mut rng)
            })
            .collect();
        Forest { trees }
    }

    pub fn votes(&self, x: &[Feature]) -> [usize; 3] {
        let mut v = [0; 3];
        for t in &self.trees {
            v[t.predict(x) as usize] += 1;
        }
        v
    }

    pub fn predict(&self, x: &[Feature]) -> Prediction {
        Prediction::from_votes(self.votes(x))
    }
}

impl Prediction {
    pub fn from_votes(votes: [usize; 3]) -> Prediction {
        let k: usize = votes.iter().sum();
        let fractions = if k == 0 {
            [0.0; 3]
        } else {
            votes.map(|v| v as f64 / k as f64)
        };
        Prediction {
            label: majority(&votes),
            fractions,
            confirm_prob: fractions[Label::Confirm as usize],
            uncertainty: uncertainty(&fractions),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_try_defaults() {
        assert_eq!(default_m_try(8), 4);
        assert_eq!(default_m_try(1), 1);
        assert_eq!(default_m_try(2), 2);
        assert_eq!(default_m_try(9), 5);
    }

    #[test]
    fn single_class_is_unanimous() {
        let xs = vec![vec![Feature::Cat("a".into()), Feature::Num(0.1)]; 12];
        let ys = vec![Label::Reject; 12];
        let f = Forest::train(&xs, &ys, 10, 4);
        let p = f.predict(&[Feature::Cat("zzz".into()), Feature::Num(0.9)]);
        assert_eq!(p.label, Label::Reject);
        assert_eq!(p.uncertainty, 0.0);
    }
}
