mod support;

use gdr_core::violation::detect_all;
use support::equivalence::check_instance;
use support::oracle;

#[test]
fn index_matches_brute_force_on_random_instances() {
    for seed in 0..40 {
        check_instance(seed, 120, 8, usize::MAX);
    }
}

#[test]
fn single_cell_probes_match_a_recount() {
    use gdr_core::violation::Overlay;
    for seed in 100..130 {
        let (data, rules) = oracle::random_instance(seed, 60, 6);
        let (_, index) = detect_all(&data, rules.clone());
        for row in (0..data.len()).step_by(3) {
            for a in data.schema().attr_ids() {
                for v in data.domain(a).keys() {
                    let after = oracle::with_cell(&data, row, a, v);
                    let ov = Overlay::new(row, a, v);
                    for (i, r) in rules.rules().iter().enumerate() {
                        let p = index.probe(i, &data, ov);
                        assert_eq!(p.vio_after, oracle::violations(&after, r));
                        assert_eq!(p.sat_after, oracle::satisfying(&after, r));
                        assert_eq!(p.row_count_after, oracle::count(&after, r, row));
                        assert_eq!(index.row_count_after(i, &data, ov), p.row_count_after);
                        let other = (row + 1) % data.len();
                        assert_eq!(index.count_under(i, &data, ov, other), oracle::count(&after, r, other));
                    }
                }
            }
        }
    }
}
