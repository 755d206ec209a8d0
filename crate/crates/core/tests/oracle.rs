//! Sampler uniformity against exhaustive enumeration at small sizes.

mod common;

use common::{enumerate_regular, index_of, mask_of};
use regraph::graph::UniformSampler;
use regraph::seeding::stream_rng;
use regraph::stats::chi_square;

#[test]
fn enumeration_counts_match_known_values() {
    // Labeled cubic graphs on 4, 6, 8 vertices; labeled 4-regular graphs on 6 vertices.
    assert_eq!(enumerate_regular(4, 3).len(), 1);
    assert_eq!(enumerate_regular(6, 3).len(), 70);
    assert_eq!(enumerate_regular(8, 3).len(), 19_355);
    assert_eq!(enumerate_regular(6, 4).len(), 15);
}

#[test]
fn enumeration_has_no_duplicates() {
    let all = enumerate_regular(8, 3);
    assert_eq!(index_of(&all).len(), all.len());
}

#[test]
fn sampler_is_uniform_on_six_vertices() {
    let graphs = enumerate_regular(6, 3);
    let index = index_of(&graphs);
    let mut counts = vec![0u64; graphs.len()];
    let mut rng = stream_rng(5, 0);
    let draws = 14_000;
    for _ in 0..draws {
        let (g, _) = UniformSampler::default().sample(6, 3, &mut rng).unwrap();
        counts[index[&mask_of(&g)]] += 1;
    }
    let expected = vec![draws as f64 / graphs.len() as f64; graphs.len()];
    let t = chi_square(&counts, &expected).unwrap();
    assert!(t.p_value > 0.001, "{t:?}");
}
