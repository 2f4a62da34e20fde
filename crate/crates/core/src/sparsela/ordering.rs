//! Reverse Cuthill–McKee bandwidth-reducing ordering.

use std::collections::VecDeque;

use super::CsrMatrix;

/// Returns `perm` with `perm[new] = old`. Works component by component, starting each from a
/// pseudo-peripheral vertex; ties are broken by vertex index so the result is deterministic.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let degree: Vec<usize> = (0..n)
        .map(|i| a.row(i).0.iter().filter(|&&j| j != i).count())
        .collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(a, seed, &degree, &mut level);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(a.row(v).0.iter().copied().filter(|&j| j != v && !visited[j]));
            nbrs.sort_by_key(|&j| (degree[j], j));
            for &j in &nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// George–Liu search: repeat BFS from the minimum-degree vertex of the last level until the
/// eccentricity stops growing.
fn pseudo_peripheral(a: &CsrMatrix, seed: usize, degree: &[usize], level: &mut [usize]) -> usize {
    let mut root = seed;
    let (mut ecc, mut last) = bfs_levels(a, root, level);
    loop {
        let candidate = last
            .iter()
            .copied()
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(root);
        let (e, l) = bfs_levels(a, candidate, level);
        if e > ecc {
            root = candidate;
            ecc = e;
            last = l;
        } else {
            return root;
        }
    }
}

fn bfs_levels(a: &CsrMatrix, root: usize, level: &mut [usize]) -> (usize, Vec<usize>) {
    let mut touched = vec![root];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut max_level = 0;
    while let Some(v) = queue.pop_front() {
        for &j in a.row(v).0 {
            if level[j] == usize::MAX {
                level[j] = level[v] + 1;
                max_level = max_level.max(level[j]);
                touched.push(j);
                queue.push_back(j);
            }
        }
    }
    let last: Vec<usize> = touched.iter().copied().filter(|&v| level[v] == max_level).collect();
    for v in touched {
        level[v] = usize::MAX;
    }
    (max_level, last)
}

/// Half-bandwidth of `A[perm, perm]`.
pub fn bandwidth(a: &CsrMatrix, perm: &[usize]) -> usize {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    (0..a.n_rows())
        .flat_map(|i| a.row(i).0.iter().map(move |&j| (i, j)))
        .map(|(i, j)| inv[i].abs_diff(inv[j]))
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rcm_is_permutation_and_narrows_shuffled_path() {
        // path graph with scrambled labels
        let n = 30;
        let label: Vec<usize> = (0..n).map(|i| (i * 7) % n).collect();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((label[i], label[i], 2.0));
            if i + 1 < n {
                t.push((label[i], label[i + 1], -1.0));
                t.push((label[i + 1], label[i], -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t, true).unwrap();
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        assert_eq!(bandwidth(&a, &perm), 1);
        let identity: Vec<usize> = (0..n).collect();
        assert!(bandwidth(&a, &identity) > 1);
    }
}
