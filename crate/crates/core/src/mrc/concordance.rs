//! Concordant-pair counting for the rank-correlation objective.
//!
//! For projections `p` and responses `y` the increasing count is the number of
//! ordered pairs `(i, j)` with `y_i > y_j` and `p_i > p_j`; the decreasing
//! count replaces `y_i > y_j` with `y_i < y_j`. Ties in either coordinate
//! never count. Sorting by projection and sweeping a Fenwick tree over the
//! dense response ranks gives `O(n log n)`.

use super::Direction;

/// Dense 1-based ranks of `y` (equal values share a rank) and the rank count.
pub fn dense_ranks(y: &[f64]) -> (Vec<u32>, usize) {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut ranks = vec![0u32; y.len()];
    let mut rank = 0u32;
    let mut prev: Option<f64> = None;
    for &i in &order {
        if prev != Some(y[i]) {
            rank += 1;
            prev = Some(y[i]);
        }
        ranks[i] = rank;
    }
    (ranks, rank as usize)
}

/// Reusable buffers for [`concordant_pairs`].
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    order: Vec<u32>,
    tree: Vec<u32>,
}

impl Scratch {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Number of concordant ordered pairs between `proj` and the responses whose
/// dense ranks are `y_rank` (with `n_ranks` distinct values).
pub fn concordant_pairs(
    proj: &[f64],
    y_rank: &[u32],
    n_ranks: usize,
    direction: Direction,
    scratch: &mut Scratch,
) -> u64 {
    debug_assert_eq!(proj.len(), y_rank.len());
    let n = proj.len();
    scratch.order.clear();
    scratch.order.extend(0..n as u32);
    scratch
        .order
        .sort_unstable_by(|&a, &b| proj[a as usize].total_cmp(&proj[b as usize]));
    scratch.tree.clear();
    scratch.tree.resize(n_ranks + 1, 0);

    let order = &scratch.order;
    let tree = &mut scratch.tree;
    let mut total = 0u64;
    let mut inserted = 0u64;
    let mut start = 0;
    while start < n {
        let p = proj[order[start] as usize];
        let mut end = start + 1;
        while end < n && proj[order[end] as usize] == p {
            end += 1;
        }
        // query the whole tie group before inserting it: equal projections never pair
        for &i in &order[start..end] {
            let r = y_rank[i as usize] as usize;
            total += match direction {
                Direction::Increasing => prefix(tree, r - 1),
                Direction::Decreasing => inserted - prefix(tree, r),
            };
        }
        for &i in &order[start..end] {
            add(tree, y_rank[i as usize] as usize);
        }
        inserted += (end - start) as u64;
        start = end;
    }
    total
}

fn prefix(tree: &[u32], mut i: usize) -> u64 {
    let mut s = 0u64;
    while i > 0 {
        s += tree[i] as u64;
        i &= i - 1;
    }
    s
}

fn add(tree: &mut [u32], mut i: usize) {
    while i < tree.len() {
        tree[i] += 1;
        i += i & i.wrapping_neg();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(proj: &[f64], y: &[f64], direction: Direction) -> u64 {
        let mut c = 0;
        for i in 0..proj.len() {
            for j in 0..proj.len() {
                if i == j || proj[i] <= proj[j] {
                    continue;
                }
                let ok = match direction {
                    Direction::Increasing => y[i] > y[j],
                    Direction::Decreasing => y[i] < y[j],
                };
                c += ok as u64;
            }
        }
        c
    }

    #[test]
    fn dense_ranks_share_ties() {
        let (r, k) = dense_ranks(&[0.5, -1.0, 0.5, 3.0]);
        assert_eq!(r, vec![2, 1, 2, 3]);
        assert_eq!(k, 3);
    }

    #[test]
    fn two_point_example() {
        let (r, k) = dense_ranks(&[1.0, 0.0]);
        let c = concordant_pairs(&[1.0, 0.0], &r, k, Direction::Increasing, &mut Scratch::new());
        assert_eq!(c, 1);
    }

    proptest! {
        #[test]
        fn matches_double_loop(
            pairs in prop::collection::vec((-4i32..4, -3i32..3), 2..60),
        ) {
            // small integer grids force ties in both coordinates
            let proj: Vec<f64> = pairs.iter().map(|p| p.0 as f64 * 0.5).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let (r, k) = dense_ranks(&y);
            let mut s = Scratch::new();
            for dir in [Direction::Increasing, Direction::Decreasing] {
                prop_assert_eq!(concordant_pairs(&proj, &r, k, dir, &mut s), brute(&proj, &y, dir));
            }
        }
    }
}
