//! Brute-force reference implementations shared by integration tests.
#![allow(dead_code)]

use rand::Rng;
use topocause::{PersistenceDiagram, PersistencePair};

pub fn diagram(points: &[(f64, f64)]) -> PersistenceDiagram {
    let pairs = points.iter().map(|&(b, d)| PersistencePair::new(b, d)).collect();
    PersistenceDiagram::new(0, pairs).unwrap()
}

pub fn random_points<R: Rng>(rng: &mut R, max_points: usize) -> Vec<(f64, f64)> {
    let n = rng.gen_range(0..=max_points);
    (0..n)
        .map(|_| {
            let b: f64 = rng.gen_range(0.0..2.0);
            (b, b + rng.gen_range(0.0..1.5))
        })
        .collect()
}

pub fn random_diagram<R: Rng>(rng: &mut R, max_points: usize) -> PersistenceDiagram {
    diagram(&random_points(rng, max_points))
}

fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn to_diagonal(a: (f64, f64)) -> f64 {
    (a.1 - a.0) / 2.0
}

/// Every partial matching between `a` and `b`, as the list of costs it pays.
/// Unmatched points on either side pay their distance to the diagonal.
fn partial_matchings(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<Vec<f64>> {
    fn go(
        a: &[(f64, f64)],
        b: &[(f64, f64)],
        i: usize,
        used: &mut Vec<bool>,
        costs: &mut Vec<f64>,
        out: &mut Vec<Vec<f64>>,
    ) {
        if i == a.len() {
            let mut all = costs.clone();
            all.extend(b.iter().zip(used.iter()).filter(|(_, u)| !**u).map(|(p, _)| to_diagonal(*p)));
            out.push(all);
            return;
        }
        costs.push(to_diagonal(a[i]));
        go(a, b, i + 1, used, costs, out);
        costs.pop();
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                costs.push(linf(a[i], b[j]));
                go(a, b, i + 1, used, costs, out);
                costs.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(a, b, 0, &mut vec![false; b.len()], &mut Vec::new(), &mut out);
    out
}

pub fn brute_bottleneck(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    partial_matchings(a, b)
        .iter()
        .map(|c| c.iter().copied().fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

pub fn brute_wasserstein(a: &[(f64, f64)], b: &[(f64, f64)], p: f64) -> f64 {
    partial_matchings(a, b)
        .iter()
        .map(|c| c.iter().map(|x| x.powf(p)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .powf(1.0 / p)
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sum += d * d;
    }
    sum.sqrt()
}

/// Sorted edge lengths of a minimum-weight spanning tree, found by
/// enumerating every labelled tree through its Prüfer sequence.
pub fn exhaustive_spanning_tree(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    if n == 2 {
        return vec![distance(&points[0], &points[1])];
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut seq = vec![0usize; n - 2];
    loop {
        let lengths: Vec<f64> = prufer_edges(&seq, n)
            .into_iter()
            .map(|(i, j)| distance(&points[i], &points[j]))
            .collect();
        let total: f64 = lengths.iter().sum();
        if best.as_ref().is_none_or(|(w, _)| total < *w) {
            best = Some((total, lengths));
        }
        let mut k = 0;
        loop {
            if k == seq.len() {
                let mut lengths = best.unwrap().1;
                lengths.sort_by(f64::total_cmp);
                return lengths;
            }
            seq[k] += 1;
            if seq[k] < n {
                break;
            }
            seq[k] = 0;
            k += 1;
        }
    }
}

fn prufer_edges(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&i| degree[i] == 1).unwrap();
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Merge levels of the Rips filtration: scan all pairs by length and relabel
/// the absorbed component by hand.
pub fn naive_union_find_deaths(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((distance(&points[i], &points[j]), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut label: Vec<usize> = (0..n).collect();
    let mut deaths = Vec::new();
    for (len, i, j) in pairs {
        let (li, lj) = (label[i], label[j]);
        if li != lj {
            for l in label.iter_mut() {
                if *l == lj {
                    *l = li;
                }
            }
            deaths.push(len);
        }
    }
    deaths
}

/// Landscape values straight from the definition: at each node, sort all
/// tent heights and read off the k-th largest.
pub fn dense_landscape(points: &[(f64, f64)], nodes: &[f64], n_layers: usize) -> Vec<Vec<f64>> {
    let mut layers = vec![vec![0.0; nodes.len()]; n_layers];
    for (g, &t) in nodes.iter().enumerate() {
        let mut tents: Vec<f64> = points
            .iter()
            .map(|&(b, d)| (t - b).min(d - t).max(0.0))
            .collect();
        tents.sort_by(|x, y| y.total_cmp(x));
        for (k, layer) in layers.iter_mut().enumerate() {
            layer[g] = tents.get(k).copied().unwrap_or(0.0);
        }
    }
    layers
}
