//! Quadratic reference implementations, written from the definitions and
//! sharing no code with the index.

use std::collections::BTreeSet;
use std::sync::Arc;

use gdr_core::{parse_rules, AttrId, CfdRule, Dataset, PatternValue, RuleSet, Schema, Tuple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn value_matches(p: &PatternValue, v: &str) -> bool {
    match p {
        PatternValue::Wildcard => true,
        PatternValue::Const(c) => c == v,
    }
}

pub fn in_context(data: &Dataset, r: &CfdRule, row: usize) -> bool {
    r.lhs
        .iter()
        .zip(&r.lhs_pattern)
        .all(|(&a, p)| value_matches(p, data.cell(row, a)))
}

/// Unweighted count of one tuple for one rule.
pub fn count(data: &Dataset, r: &CfdRule, row: usize) -> usize {
    if !in_context(data, r, row) {
        return 0;
    }
    match &r.rhs_pattern {
        PatternValue::Const(c) => usize::from(data.cell(row, r.rhs) != c),
        PatternValue::Wildcard => (0..data.len())
            .filter(|&o| {
                o != row
                    && in_context(data, r, o)
                    && r.lhs.iter().all(|&a| data.cell(o, a) == data.cell(row, a))
                    && data.cell(o, r.rhs) != data.cell(row, r.rhs)
            })
            .count(),
    }
}

pub fn violations(data: &Dataset, r: &CfdRule) -> f64 {
    (0..data.len())
        .map(|row| data.tuples()[row].weight * count(data, r, row) as f64)
        .sum()
}

pub fn satisfying(data: &Dataset, r: &CfdRule) -> usize {
    (0..data.len())
        .filter(|&row| in_context(data, r, row) && count(data, r, row) == 0)
        .count()
}

pub fn context(data: &Dataset, r: &CfdRule) -> usize {
    (0..data.len()).filter(|&row| in_context(data, r, row)).count()
}

pub fn total(data: &Dataset, rules: &RuleSet) -> f64 {
    rules.rules().iter().map(|r| violations(data, r)).sum()
}

pub fn dirty(data: &Dataset, rules: &RuleSet) -> BTreeSet<usize> {
    (0..data.len())
        .filter(|&row| rules.rules().iter().any(|r| count(data, r, row) > 0))
        .collect()
}

/// Violations and satisfying tuples of a source rule read jointly.
pub fn joint(data: &Dataset, rules: &RuleSet, pieces: &[usize]) -> (f64, usize) {
    let vio = pieces.iter().map(|&p| violations(data, rules.rule(p))).sum();
    let sat = (0..data.len())
        .filter(|&row| {
            pieces.iter().all(|&p| {
                let r = rules.rule(p);
                in_context(data, r, row) && count(data, r, row) == 0
            })
        })
        .count();
    (vio, sat)
}

pub fn with_cell(data: &Dataset, row: usize, attr: AttrId, value: &str) -> Dataset {
    let mut tuples: Vec<Tuple> = data.tuples().to_vec();
    tuples[row].cells[attr.0] = value.to_string();
    Dataset::new(data.schema().clone(), tuples).unwrap()
}

/// A random relation with small domains (so groups collide) and a random
/// rule file mixing constant and variable rules, some with several RHS
/// attributes.
pub fn random_instance(seed: u64, max_rows: usize, max_rules: usize) -> (Dataset, Arc<RuleSet>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(3..=6);
    let names: Vec<String> = (0..m).map(|i| format!("A{i}")).collect();
    let schema = Schema::new("R", names.clone()).unwrap();
    let domain: Vec<usize> = (0..m).map(|_| rng.gen_range(2..=5)).collect();
    let value = |a: usize, k: usize| if k == 4 { format!("-{a}") } else { format!("v{a}{k}") };
    let n = rng.gen_range(5..=max_rows);
    let weighted = rng.gen_bool(0.3);
    let tuples: Vec<Tuple> = (0..n)
        .map(|i| {
            let cells = (0..m).map(|a| value(a, rng.gen_range(0..domain[a]))).collect();
            let mut t = Tuple::new(format!("t{i}"), cells);
            if weighted {
                t.weight = rng.gen_range(1..=3) as f64;
            }
            t
        })
        .collect();
    let data = Dataset::new(schema.clone(), tuples).unwrap();
    let escape = |s: &str| s.replace('-', "\\-");
    let mut text = String::from("# random rules\n");
    let k = rng.gen_range(1..=max_rules);
    for i in 0..k {
        let mut attrs: Vec<usize> = (0..m).collect();
        for j in 0..attrs.len() {
            let s = rng.gen_range(j..attrs.len());
            attrs.swap(j, s);
        }
        let n_lhs = rng.gen_range(1..=2.min(m - 1));
        let n_rhs = if rng.gen_bool(0.25) && m - n_lhs >= 2 { 2 } else { 1 };
        let lhs = &attrs[..n_lhs];
        let rhs = &attrs[n_lhs..n_lhs + n_rhs];
        let lhs_pat: Vec<String> = lhs
            .iter()
            .map(|&a| {
                if rng.gen_bool(0.35) {
                    escape(&value(a, rng.gen_range(0..domain[a])))
                } else {
                    "-".to_string()
                }
            })
            .collect();
        let rhs_pat: Vec<String> = rhs
            .iter()
            .map(|&a| {
                if rng.gen_bool(0.4) {
                    escape(&value(a, rng.gen_range(0..domain[a])))
                } else {
                    "-".to_string()
                }
            })
            .collect();
        let side = |xs: &[usize]| xs.iter().map(|&a| names[a].clone()).collect::<Vec<_>>().join(", ");
        text.push_str(&format!(
            "r{i}: {} -> {} : {} || {}\n",
            side(lhs),
            side(rhs),
            lhs_pat.join(", "),
            rhs_pat.join(", ")
        ));
    }
    let rules = parse_rules(&text, &schema).unwrap_or_else(|e| panic!("{e}\n{text}"));
    (data, Arc::new(rules))
}
