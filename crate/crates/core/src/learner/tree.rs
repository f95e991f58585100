//! Unpruned decision trees over mixed categorical/numeric features.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Feature, Label, LABELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Test {
    Equals(String),
    AtMost(f64),
}

impl Test {
    fn passes(&self, f: &Feature) -> bool {
        match (self, f) {
            (Test::Equals(v), Feature::Cat(x)) => v == x,
            (Test::AtMost(t), Feature::Num(x)) => x <= t,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        label: Label,
    },
    Split {
        feature: usize,
        test: Test,
        pass: Box<Node>,
        fail: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &[Feature]) -> Label {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { label } => return *label,
                Node::Split {
                    feature,
                    test,
                    pass,
                    fail,
                } => {
                    node = if test.passes(&x[*feature]) { pass } else { fail };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { pass, fail, .. } => 1 + pass.depth().max(fail.depth()),
        }
    }
}

/// Counts per label in `LABELS` order.
pub(crate) fn counts(ys: &[Label], idx: &[usize]) -> [usize; 3] {
    let mut c = [0; 3];
    for &i in idx {
        c[ys[i] as usize] += 1;
    }
    c
}

/// Most frequent label; ties go to the earlier label in `LABELS`.
pub(crate) fn majority(c: &[usize; 3]) -> Label {
    let mut best = 0;
    for i in 1..3 {
        if c[i] > c[best] {
            best = i;
        }
    }
    LABELS[best]
}

fn entropy(c: &[usize; 3]) -> f64 {
    let n: usize = c.iter().sum();
    if n == 0 {
        return 0.0;
    }
    c.iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

struct Candidate {
    gain: f64,
    feature: usize,
    test: Test,
}

fn best_split(xs: &[Vec<Feature>], ys: &[Label], idx: &[usize], feature: usize, parent: f64) -> Option<Candidate> {
    let n = idx.len() as f64;
    let total = counts(ys, idx);
    let mut best: Option<Candidate> = None;
    let mut consider = |gain: f64, test: Test| {
        if best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(Candidate { gain, feature, test });
        }
    };
    match &xs[idx[0]][feature] {
        Feature::Cat(_) => {
            let mut by_value: std::collections::BTreeMap<&str, [usize; 3]> = Default::default();
            for &i in idx {
                if let Feature::Cat(v) = &xs[i][feature] {
                    by_value.entry(v.as_str()).or_default()[ys[i] as usize] += 1;
                }
            }
            if by_value.len() < 2 {
                return None;
            }
            for (v, pass) in &by_value {
                let fail = [total[0] - pass[0], total[1] - pass[1], total[2] - pass[2]];
                let np: usize = pass.iter().sum();
                let split = (np as f64 / n) * entropy(pass) + ((n - np as f64) / n) * entropy(&fail);
                consider(parent - split, Test::Equals(v.to_string()));
            }
        }
        Feature::Num(_) => {
            let mut vals: Vec<(f64, Label)> = idx
                .iter()
                .filter_map(|&i| match xs[i][feature] {
                    Feature::Num(x) => Some((x, ys[i])),
                    Feature::Cat(_) => None,
                })
                .collect();
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0usize; 3];
            for k in 0..vals.len().saturating_sub(1) {
                left[vals[k].1 as usize] += 1;
                if vals[k].0 == vals[k + 1].0 {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1], total[2] - left[2]];
                let nl = (k + 1) as f64;
                let split = (nl / n) * entropy(&left) + ((n - nl) / n) * entropy(&right);
                consider(parent - split, Test::AtMost((vals[k].0 + vals[k + 1].0) / 2.0));
            }
        }
    }
    best
}

/// Grows a tree on the rows `idx` (with repetitions allowed). At every node
/// features are drawn in random order; at least `m_try` are scored, and the
/// draw continues past `m_try` until some split has positive gain.
pub fn grow<R: Rng>(xs: &[Vec<Feature>], ys: &[Label], idx: Vec<usize>, m_try: usize, rng: &mut R) -> Node {
    let c = counts(ys, &idx);
    if c.iter().filter(|&&k| k > 0).count() <= 1 {
        return Node::Leaf { label: majority(&c) };
    }
    let parent = entropy(&c);
    let n_features = xs[idx[0]].len();
    let mut order: Vec<usize> = (0..n_features).collect();
    order.shuffle(rng);
    let mut best: Option<Candidate> = None;
    for (tried, &f) in order.iter().enumerate() {
        if tried >= m_try && best.as_ref().is_some_and(|b| b.gain > 1e-12) {
            break;
        }
        if let Some(cand) = best_split(xs, ys, &idx, f, parent) {
            if best.as_ref().is_none_or(|b| cand.gain > b.gain) {
                best = Some(cand);
            }
        }
    }
    let Some(split) = best.filter(|b| b.gain > 1e-12) else {
        return Node::Leaf { label: majority(&c) };
    };
    let (pass, fail): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| split.test.passes(&xs[i][split.feature]));
    Node::Split {
        feature: split.feature,
        test: split.test,
        pass: Box::new(grow(xs, ys, pass, m_try, rng)),
        fail: Box::new(grow(xs, ys, fail, m_try, rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separates_on_the_informative_feature() {
        let xs: Vec<Vec<Feature>> = (0..20)
            .map(|i| {
                vec![
                    Feature::Cat(if i % 2 == 0 { "H1" } else { "H2" }.into()),
                    Feature::Num(i as f64 / 20.0),
                ]
            })
            .collect();
        let ys: Vec<Label> = (0..20)
            .map(|i| if i % 2 == 0 { Label::Retain } else { Label::Confirm })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = grow(&xs, &ys, (0..20).collect(), 2, &mut rng);
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(t.predict(x), *y);
        }
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn tie_order_prefers_confirm_then_reject() {
        assert_eq!(majority(&[1, 1, 1]), Label::Confirm);
        assert_eq!(majority(&[0, 2, 2]), Label::Reject);
    }
}
