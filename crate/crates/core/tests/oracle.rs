//! The bounded explorer checked against its depth-first variant.

mod common;

use std::collections::HashSet;

use cpds::model::Configuration;
use cpds::oracle::{bounded_post, bounded_post_recursive};

#[test]
fn breadth_and_depth_first_exploration_agree() {
    for seed in 0..200u64 {
        let mut rng = common::rng(8_000_000 + seed);
        let m = common::random_model(&mut rng, common::Shape::SUITE);
        for c in common::random_seeds(&mut rng, &m, 2, 4) {
            let bfs: HashSet<Configuration> = bounded_post(&m, &c, 6, 10).all().cloned().collect();
            assert_eq!(bfs, bounded_post_recursive(&m, &c, 6, 10), "seed {seed}");
        }
    }
}
