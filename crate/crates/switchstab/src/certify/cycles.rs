//! Enumeration of the simple cycles of a set-valued successor map.

use crate::signal::{ModeId, SetValuedMap};

/// All simple cycles of `H`: sequences `g_1, ..., g_m` with `m >= 3`,
/// `g_1 = g_m`, every step an edge of `H`, and interior vertices distinct.
///
/// Cycles are canonicalized by rotating the smallest mode id to the front
/// (it appears again as the closing element) and the list is sorted by
/// length, then lexicographically.
pub fn simple_cycles(h: &SetValuedMap) -> Vec<Vec<ModeId>> {
    let nodes: Vec<ModeId> = h.domain().collect();
    let mut cycles = Vec::new();
    // anchor each cycle at its minimal node: the DFS only walks nodes larger
    // than the anchor, so every cycle is produced exactly once
    for &start in &nodes {
        let mut path = vec![start];
        dfs(h, start, &mut path, &mut cycles);
    }
    cycles.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    cycles
}

fn dfs(h: &SetValuedMap, start: ModeId, path: &mut Vec<ModeId>, out: &mut Vec<Vec<ModeId>>) {
    let current = *path.last().expect("path nonempty");
    let mut successors: Vec<ModeId> = h.successors(current).collect();
    successors.sort();
    for next in successors {
        if next == start {
            if path.len() >= 2 {
                let mut cycle = path.clone();
                cycle.push(start);
                out.push(cycle);
            }
        } else if next > start && !path.contains(&next) {
            path.push(next);
            dfs(h, start, path, out);
            path.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(edges: &[(u32, u32)]) -> SetValuedMap {
        SetValuedMap::from_edges(edges.iter().map(|&(a, b)| (ModeId(a), ModeId(b))))
    }

    fn ids(seq: &[u32]) -> Vec<ModeId> {
        seq.iter().copied().map(ModeId).collect()
    }

    #[test]
    fn two_cycle() {
        let h = map(&[(1, 2), (2, 1)]);
        assert_eq!(simple_cycles(&h), vec![ids(&[1, 2, 1])]);
    }

    #[test]
    fn no_return_edge_means_no_cycles() {
        let h = map(&[(1, 2)]);
        assert!(simple_cycles(&h).is_empty());
    }

    #[test]
    fn complete_digraph_on_three_nodes() {
        let h = map(&[(1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)]);
        let expected = vec![
            ids(&[1, 2, 1]),
            ids(&[1, 3, 1]),
            ids(&[2, 3, 2]),
            ids(&[1, 2, 3, 1]),
            ids(&[1, 3, 2, 1]),
        ];
        assert_eq!(simple_cycles(&h), expected);
    }

    #[test]
    fn self_loops_are_not_cycles() {
        let h = map(&[(1, 1), (1, 2), (2, 1)]);
        assert_eq!(simple_cycles(&h), vec![ids(&[1, 2, 1])]);
    }

    /// Brute-force oracle: enumerate every subset of nodes and every cyclic
    /// arrangement, keeping the edge-legal ones.
    pub(super) fn brute_force_cycles(h: &SetValuedMap) -> Vec<Vec<ModeId>> {
        let nodes: Vec<ModeId> = h.domain().collect();
        let n = nodes.len();
        let mut out = Vec::new();
        for mask in 1u32..(1 << n) {
            let subset: Vec<ModeId> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| nodes[i]).collect();
            if subset.len() < 2 {
                continue;
            }
            // fix the smallest as anchor; permute the rest
            let anchor = subset[0];
            let rest: Vec<ModeId> = subset[1..].to_vec();
            permute(&rest, &mut Vec::new(), &mut |perm| {
                let mut cycle = Vec::with_capacity(subset.len() + 1);
                cycle.push(anchor);
                cycle.extend_from_slice(perm);
                cycle.push(anchor);
                let legal = cycle.windows(2).all(|w| h.contains_edge(w[0], w[1]));
                if legal {
                    out.push(cycle);
                }
            });
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out
    }

    fn permute(rest: &[ModeId], acc: &mut Vec<ModeId>, visit: &mut impl FnMut(&[ModeId])) {
        if acc.len() == rest.len() {
            visit(acc);
            return;
        }
        for &m in rest {
            if !acc.contains(&m) {
                acc.push(m);
                permute(rest, acc, visit);
                acc.pop();
            }
        }
    }

    #[test]
    fn agrees_with_brute_force_on_small_random_digraphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..60 {
            let n = rng.gen_range(2..=5u32);
            let mut h = SetValuedMap::new((1..=n).map(ModeId));
            for a in 1..=n {
                for b in 1..=n {
                    if a != b && rng.gen::<f64>() < 0.4 {
                        h.add_edge(ModeId(a), ModeId(b));
                    }
                }
            }
            assert_eq!(simple_cycles(&h), brute_force_cycles(&h));
        }
    }
}
