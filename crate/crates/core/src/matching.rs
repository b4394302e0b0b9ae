//! Exact bipartite matching primitives used by the diagram metrics.
//!
//! Both solvers work on a dense square cost matrix stored row-major.

use std::collections::VecDeque;

/// Minimum-cost perfect assignment (Hungarian algorithm with potentials).
///
/// Returns `assignment[row] = column`. Runs in O(n^3).
pub(crate) fn min_cost_assignment(costs: &[f64], n: usize) -> Vec<usize> {
    debug_assert_eq!(costs.len(), n * n);
    if n == 0 {
        return Vec::new();
    }

    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|u| *u = false);

        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &costs[(i0 - 1) * n..i0 * n];
            let mut delta = inf;
            let mut j1 = 0usize;

            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }

            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }

            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }

        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Hopcroft–Karp feasibility check: does the bipartite graph with an edge
/// (i, j) whenever `costs[i * n + j] <= threshold` admit a perfect matching?
pub(crate) fn has_perfect_matching(costs: &[f64], n: usize, threshold: f64) -> bool {
    const NIL: usize = usize::MAX;
    let mut match_left = vec![NIL; n];
    let mut match_right = vec![NIL; n];
    let mut dist = vec![0usize; n];
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| costs[i * n + j] <= threshold)
                .collect()
        })
        .collect();
    if adjacency.iter().any(Vec::is_empty) {
        return false;
    }

    let mut matched = 0usize;
    loop {
        // BFS layering from free left vertices.
        let mut queue = VecDeque::new();
        for i in 0..n {
            if match_left[i] == NIL {
                dist[i] = 0;
                queue.push_back(i);
            } else {
                dist[i] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                let k = match_right[j];
                if k == NIL {
                    found = true;
                } else if dist[k] == usize::MAX {
                    dist[k] = dist[i] + 1;
                    queue.push_back(k);
                }
            }
        }
        if !found {
            break;
        }
        for i in 0..n {
            if match_left[i] == NIL
                && augment(i, &adjacency, &mut match_left, &mut match_right, &mut dist)
            {
                matched += 1;
            }
        }
    }
    matched == n
}

fn augment(
    i: usize,
    adjacency: &[Vec<usize>],
    match_left: &mut [usize],
    match_right: &mut [usize],
    dist: &mut [usize],
) -> bool {
    for &j in &adjacency[i] {
        let k = match_right[j];
        let ok = if k == usize::MAX {
            true
        } else if dist[k] == dist[i] + 1 {
            augment(k, adjacency, match_left, match_right, dist)
        } else {
            false
        };
        if ok {
            match_left[i] = j;
            match_right[j] = i;
            return true;
        }
    }
    dist[i] = usize::MAX;
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_on_small_matrix() {
        let costs = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let a = min_cost_assignment(&costs, 3);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| costs[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn perfect_matching_threshold() {
        let costs = [1.0, 5.0, 5.0, 1.0];
        assert!(has_perfect_matching(&costs, 2, 1.0));
        assert!(!has_perfect_matching(&costs, 2, 0.5));
        let costs = [1.0, 1.0, 1.0, 9.0];
        assert!(has_perfect_matching(&costs, 2, 1.0));
        let costs = [1.0, 9.0, 1.0, 9.0];
        assert!(!has_perfect_matching(&costs, 2, 1.0));
    }
}
