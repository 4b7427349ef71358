//! Reverse Cuthill–McKee bandwidth reduction.

use std::collections::VecDeque;

/// Builds the symmetrized adjacency lists of a square sparsity pattern (self loops removed).
pub fn symmetric_adjacency(n: usize, row_ptr: &[usize], col_idx: &[usize]) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in &col_idx[row_ptr[i]..row_ptr[i + 1]] {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// BFS restricted to unplaced nodes: returns (visit order, depth of each visited node, eccentricity).
fn bfs_levels(adj: &[Vec<usize>], start: usize, placed: &[bool]) -> (Vec<usize>, Vec<usize>, usize) {
    let mut order = Vec::new();
    let mut depth = vec![usize::MAX; adj.len()];
    let mut q = VecDeque::new();
    depth[start] = 0;
    q.push_back(start);
    let mut ecc = 0;
    while let Some(v) = q.pop_front() {
        order.push(v);
        ecc = ecc.max(depth[v]);
        for &w in &adj[v] {
            if depth[w] == usize::MAX && !placed[w] {
                depth[w] = depth[v] + 1;
                q.push_back(w);
            }
        }
    }
    (order, depth, ecc)
}

/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();

    while order.len() < n {
        let mut start = (0..n)
            .filter(|&v| !placed[v])
            .min_by_key(|&v| (degree[v], v))
            .unwrap();
        // George-Liu pseudo-peripheral node search
        let (mut comp, mut depth, mut ecc) = bfs_levels(adj, start, &placed);
        loop {
            let cand = comp
                .iter()
                .copied()
                .filter(|&v| depth[v] == ecc)
                .min_by_key(|&v| (degree[v], v))
                .unwrap();
            let (c2, d2, e2) = bfs_levels(adj, cand, &placed);
            if e2 > ecc {
                start = cand;
                comp = c2;
                depth = d2;
                ecc = e2;
            } else {
                break;
            }
        }

        let base = order.len();
        placed[start] = true;
        order.push(start);
        let mut head = base;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !placed[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                placed[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// Lower and upper bandwidth of the pattern under permutation `perm` (`perm[new] = old`).
pub fn bandwidths(n: usize, row_ptr: &[usize], col_idx: &[usize], perm: &[usize]) -> (usize, usize) {
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let (mut kl, mut ku) = (0usize, 0usize);
    for i in 0..n {
        let ni = inv[i];
        for &j in &col_idx[row_ptr[i]..row_ptr[i + 1]] {
            let nj = inv[j];
            if nj < ni {
                kl = kl.max(ni - nj);
            } else {
                ku = ku.max(nj - ni);
            }
        }
    }
    (kl, ku)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rcm_is_a_permutation_and_reduces_bandwidth_of_a_path() {
        // path graph numbered badly: 0-5-1-4-2-3
        let edges = [(0, 5), (5, 1), (1, 4), (4, 2), (2, 3)];
        let mut adj = vec![Vec::new(); 6];
        for (a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut sorted = perm.clone();
        sorted.sort();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        let mut inv = vec![0; 6];
        for (n, &o) in perm.iter().enumerate() {
            inv[o] = n;
        }
        for (a, b) in edges {
            assert_eq!((inv[a] as i64 - inv[b] as i64).abs(), 1);
        }
    }

    #[test]
    fn handles_disconnected_components() {
        let adj = vec![vec![1], vec![0], vec![], vec![4], vec![3]];
        let perm = reverse_cuthill_mckee(&adj);
        assert_eq!(perm.len(), 5);
    }
}
