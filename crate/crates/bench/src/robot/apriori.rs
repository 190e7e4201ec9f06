use rfv_core::evolution::AprioriSet;
use rfv_core::system::FuzzyRule;

use super::dims;

/// Expert rules over `(L, C, R, B, G, y1)` with constant outputs
/// `(v1, v2, y1)`: cruise when clear, raise the flag on light, keep it
/// otherwise, and at a wall turn right (flag down) or left (flag up),
/// clearing the flag.
const TABLE: [([f64; 6], [f64; 3]); 6] = [
    ([0.0, 0.0, 0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0]),
    ([0.0, 0.0, 0.0, 0.0, 0.0, 1.0], [1.0, 1.0, 1.0]),
    ([0.0, 0.0, 0.0, 0.0, 1.0, 0.0], [1.0, 1.0, 1.0]),
    ([0.0, 0.0, 0.0, 0.0, 1.0, 1.0], [1.0, 1.0, 1.0]),
    ([0.0, 1.0, 0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
    ([0.0, 1.0, 0.0, 0.0, 0.0, 1.0], [0.0, 1.0, 0.0]),
];

pub fn load_apriori_table() -> AprioriSet {
    let dims = dims();
    let rules = TABLE
        .iter()
        .map(|(site, out)| FuzzyRule::constant(site.to_vec(), out, true))
        .collect();
    AprioriSet::new(rules, &dims, &dims.unit_domain()).expect("apriori table is valid")
}
