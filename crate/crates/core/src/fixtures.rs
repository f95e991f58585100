//! Small reference datasets and synthetic generators.
//!
//! [`figure1`] is the eight-row customer table used throughout the docs.
//! [`addresses`] builds a clean address relation with Zipf-skewed ZIP
//! frequencies, so that injected errors produce groups of very different
//! sizes. [`correlated_sources`] builds a dirty/clean pair where the `SRC`
//! column decides which attribute is wrong.

use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::evaluation::{inject_errors, ErrorSpec};
use crate::model::{parse_rules, Dataset, RuleSet, Schema, Tuple};

pub const FIGURE1_RULES: &str = "\
p1: ZIP -> CT, STT : 46360 || Michigan City, IN
p2: ZIP -> CT, STT : 46774 || New Haven, IN
p3: ZIP -> CT, STT : 46825 || Fort Wayne, IN
p4: ZIP -> CT, STT : 46391 || Westville, IN
p5: STR, CT -> ZIP : -, Fort Wayne || -
";

const FIGURE1_ROWS: [[&str; 6]; 8] = [
    ["Jim", "H1", "Redwood DR", "Michigan City", "MI", "46360"],
    ["Tom", "H2", "Redwood DR", "Westville", "IN", "46360"],
    ["Jeff", "H2", "Birch Parkway", "Westville", "IN", "46360"],
    ["Rick", "H2", "Birch Parkway", "Westville", "IN", "46360"],
    ["Joe", "H1", "Bell Avenue", "Fort Wayne", "IN", "46391"],
    ["Mark", "H1", "Bell Avenue", "Fort Wayne", "IN", "46825"],
    ["Cady", "H2", "Bell Avenue", "Fort Wayne", "IN", "46825"],
    ["Sindy", "H2", "Sherden RD", "FT Wayne", "IN", "46774"],
];

pub fn customer_schema() -> Schema {
    Schema::new("Customer", vec!["Name", "SRC", "STR", "CT", "STT", "ZIP"]).expect("static schema")
}

/// The eight-tuple customer table with rules `p1`..`p5`; every tuple is dirty.
pub fn figure1() -> (Dataset, Arc<RuleSet>) {
    let schema = customer_schema();
    let rows = FIGURE1_ROWS.iter().map(|r| r.to_vec()).collect();
    let data = Dataset::from_rows(schema, rows).expect("static rows");
    let rules = parse_rules(FIGURE1_RULES, data.schema()).expect("static rules");
    (data, Arc::new(rules))
}

/// A hand-repaired version of [`figure1`] that satisfies all five rules.
pub fn figure1_truth() -> Dataset {
    let mut rows: Vec<Vec<&str>> = FIGURE1_ROWS.iter().map(|r| r.to_vec()).collect();
    rows[0][4] = "IN";
    for r in &mut rows[1..4] {
        r[3] = "Michigan City";
    }
    rows[4][5] = "46825";
    rows[7][3] = "New Haven";
    Dataset::from_rows(customer_schema(), rows).expect("static rows")
}

const FIRST_NAMES: [&str; 24] = [
    "Ada", "Ben", "Cady", "Dan", "Eve", "Finn", "Gus", "Hana", "Ivan", "Jim", "Kira", "Lou", "Mark", "Nia", "Otto",
    "Pia", "Quin", "Rick", "Sindy", "Tom", "Uma", "Vic", "Wes", "Zoe",
];

const STREET_WORDS: [&str; 30] = [
    "Redwood", "Birch", "Bell", "Sherden", "Maple", "Cedar", "Elm", "Oak", "Pine", "Willow", "Ash", "Spruce",
    "Hickory", "Walnut", "Chestnut", "Poplar", "Aspen", "Linden", "Juniper", "Magnolia", "Laurel", "Hazel", "Alder",
    "Cypress", "Sycamore", "Beech", "Holly", "Myrtle", "Rowan", "Sequoia",
];

const STREET_SUFFIXES: [&str; 6] = ["DR", "Parkway", "Avenue", "RD", "Lane", "Court"];

const CITIES: [&str; 16] = [
    "Michigan City",
    "Westville",
    "Fort Wayne",
    "New Haven",
    "La Porte",
    "Valparaiso",
    "Goshen",
    "Elkhart",
    "Warsaw",
    "Plymouth",
    "Kokomo",
    "Marion",
    "Muncie",
    "Anderson",
    "Richmond",
    "Lafayette",
];

const STATES: [&str; 4] = ["IN", "MI", "OH", "IL"];

#[derive(Debug, Clone)]
pub struct AddressConfig {
    pub rows: usize,
    pub zips: usize,
    pub cities: usize,
    pub streets_per_zip: usize,
    /// Number of most frequent ZIPs that also get a constant rule.
    pub constant_rules: usize,
    /// Zipf exponent over ZIP ranks.
    pub skew: f64,
    pub seed: u64,
}

impl Default for AddressConfig {
    fn default() -> Self {
        AddressConfig {
            rows: 2000,
            zips: 40,
            cities: 16,
            streets_per_zip: 4,
            constant_rules: 6,
            skew: 1.1,
            seed: 1,
        }
    }
}

struct ZipInfo {
    code: String,
    city: &'static str,
    state: &'static str,
    streets: Vec<String>,
}

fn zip_table(cfg: &AddressConfig) -> Vec<ZipInfo> {
    let cities = cfg.cities.clamp(1, CITIES.len());
    let max_streets = STREET_WORDS.len() * STREET_SUFFIXES.len();
    assert!(cfg.zips * cfg.streets_per_zip <= max_streets, "not enough street names");
    (0..cfg.zips)
        .map(|i| {
            let c = i % cities;
            let streets = (0..cfg.streets_per_zip)
                .map(|k| {
                    let idx = i * cfg.streets_per_zip + k;
                    format!(
                        "{} {}",
                        STREET_WORDS[idx % STREET_WORDS.len()],
                        STREET_SUFFIXES[idx / STREET_WORDS.len()]
                    )
                })
                .collect();
            ZipInfo {
                code: format!("{}", 46001 + i * 13),
                city: CITIES[c],
                state: STATES[c % STATES.len()],
                streets,
            }
        })
        .collect()
}

/// Rule text for [`addresses`]: ZIP determines city and state, city
/// determines state, street and city determine ZIP, plus constant rules for
/// the most frequent ZIPs.
pub fn address_rules_text(cfg: &AddressConfig) -> String {
    let zips = zip_table(cfg);
    let mut text = String::from("zc: ZIP -> CT, STT\ncs: CT -> STT\nsz: STR, CT -> ZIP\n");
    for (i, z) in zips.iter().take(cfg.constant_rules).enumerate() {
        text.push_str(&format!(
            "k{}: ZIP -> CT, STT : {} || {}, {}\n",
            i + 1,
            z.code,
            z.city,
            z.state
        ));
    }
    text
}

/// A clean address relation that satisfies [`address_rules_text`].
pub fn addresses(cfg: &AddressConfig) -> (Dataset, Arc<RuleSet>) {
    let zips = zip_table(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weights: Vec<f64> = (1..=zips.len()).map(|k| 1.0 / (k as f64).powf(cfg.skew)).collect();
    let pick = WeightedIndex::new(&weights).expect("positive weights");
    let tuples = (0..cfg.rows)
        .map(|i| {
            let z = &zips[pick.sample(&mut rng)];
            let street = z.streets.choose(&mut rng).expect("streets");
            let src = ["H1", "H2", "H3"][rng.gen_range(0..3)];
            let name = FIRST_NAMES.choose(&mut rng).expect("names");
            Tuple::new(
                format!("t{}", i + 1),
                vec![
                    name.to_string(),
                    src.to_string(),
                    street.clone(),
                    z.city.to_string(),
                    z.state.to_string(),
                    z.code.clone(),
                ],
            )
        })
        .collect();
    let data = Dataset::new(customer_schema(), tuples).expect("generated tuples");
    let rules = parse_rules(&address_rules_text(cfg), data.schema()).expect("generated rules");
    (data, Arc::new(rules))
}

/// Clean addresses with 30% of the tuples perturbed by [`inject_errors`].
pub fn injected_addresses(cfg: &AddressConfig, error_seed: u64) -> (Dataset, Dataset, Arc<RuleSet>) {
    let (truth, rules) = addresses(cfg);
    let spec = ErrorSpec {
        seed: error_seed,
        ..ErrorSpec::default()
    };
    let dirty = inject_errors(&truth, &spec).expect("default error rates are valid");
    (dirty, truth, rules)
}

/// Address data where the source decides the error: tuples from `H2` get a
/// wrong city, tuples from `H1` a wrong ZIP (drawn from a different city),
/// `H3` stays clean. Returns `(dirty, truth, rules)`.
pub fn correlated_sources(cfg: &AddressConfig, error_rate: f64) -> (Dataset, Dataset, Arc<RuleSet>) {
    let (truth, rules) = addresses(cfg);
    let zips = zip_table(cfg);
    let schema = truth.schema().clone();
    let src = schema.attr("SRC").expect("SRC");
    let ct = schema.attr("CT").expect("CT");
    let zip = schema.attr("ZIP").expect("ZIP");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_c0de);
    let candidates: Vec<usize> = (0..truth.len()).filter(|&r| truth.cell(r, src) != "H3").collect();
    let n_dirty = ((truth.len() as f64) * error_rate).round() as usize;
    let chosen: Vec<usize> = candidates
        .choose_multiple(&mut rng, n_dirty.min(candidates.len()))
        .copied()
        .collect();
    let mut dirty = truth.clone();
    let cities: Vec<&str> = {
        let mut c: Vec<&str> = zips.iter().map(|z| z.city).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    for row in chosen {
        let city = truth.cell(row, ct).to_string();
        if truth.cell(row, src) == "H2" {
            let others: Vec<&&str> = cities.iter().filter(|c| **c != city).collect();
            if let Some(c) = others.choose(&mut rng) {
                dirty.set_cell(row, ct, c.to_string());
            }
        } else {
            let others: Vec<&ZipInfo> = zips.iter().filter(|z| z.city != city).collect();
            if let Some(z) = others.choose(&mut rng) {
                dirty.set_cell(row, zip, z.code.clone());
            }
        }
    }
    (dirty, truth, rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::violation::{detect_all, total_violations};

    #[test]
    fn figure1_truth_is_clean() {
        let (_, rules) = figure1();
        assert_eq!(total_violations(&figure1_truth(), &rules), 0.0);
    }

    #[test]
    fn generated_addresses_are_clean_and_skewed() {
        let cfg = AddressConfig::default();
        let (d, rules) = addresses(&cfg);
        let (dirty, _) = detect_all(&d, rules);
        assert!(dirty.is_empty());
        let zips = d.domain(d.schema().attr("ZIP").unwrap());
        let max = zips.values().max().unwrap();
        let min = zips.values().min().unwrap();
        assert!(*max > 10 * *min);
    }

    #[test]
    fn correlated_errors_follow_source() {
        let cfg = AddressConfig {
            rows: 300,
            ..AddressConfig::default()
        };
        let (dirty, truth, _) = correlated_sources(&cfg, 0.3);
        let s = truth.schema();
        let (src, ct, zip) = (s.attr("SRC").unwrap(), s.attr("CT").unwrap(), s.attr("ZIP").unwrap());
        let mut wrong = 0;
        for r in 0..truth.len() {
            let ct_wrong = dirty.cell(r, ct) != truth.cell(r, ct);
            let zip_wrong = dirty.cell(r, zip) != truth.cell(r, zip);
            match truth.cell(r, src) {
                "H2" => assert!(!zip_wrong),
                "H1" => assert!(!ct_wrong),
                _ => assert!(!ct_wrong && !zip_wrong),
            }
            wrong += usize::from(ct_wrong || zip_wrong);
        }
        assert_eq!(wrong, 90);
    }
}
