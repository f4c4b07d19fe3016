//! Test-only oracles, independent of the library's hot paths.

#![allow(dead_code)]

use std::collections::HashMap;

use commtrack::{build_graph, Graph, Partition};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random graph with at most `max_edges` edge entries, integer weights in
/// 1..=3 and occasional self-loops.
pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize, max_edges: usize) -> Graph {
    let n = rng.gen_range(2..=max_nodes);
    let m = rng.gen_range(1..=max_edges);
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let u = rng.gen_range(0..n);
        let v = if rng.gen_bool(0.1) { u } else { rng.gen_range(0..n) };
        edges.push((format!("v{u}"), format!("v{v}"), rng.gen_range(1..=3) as f64));
    }
    build_graph(edges).unwrap()
}

pub fn random_partition(rng: &mut ChaCha8Rng, n: usize, max_labels: u64) -> Partition {
    let k = rng.gen_range(1..=max_labels);
    Partition::from_values(&(0..n).map(|_| rng.gen_range(0..k)).collect::<Vec<_>>())
}

/// Dense symmetric adjacency with `A[i][i] = 2 * loop weight`.
pub fn dense_adjacency(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for (u, v, w) in g.edges() {
        if u == v {
            a[u][u] += 2.0 * w;
        } else {
            a[u][v] += w;
            a[v][u] += w;
        }
    }
    a
}

/// Q = 1/2m Σ_ij [A_ij − k_i k_j / 2m] δ(c_i, c_j) over the dense matrix.
pub fn brute_modularity(g: &Graph, part: &Partition) -> f64 {
    let a = dense_adjacency(g);
    let n = a.len();
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let m2: f64 = k.iter().sum();
    if m2 == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if part.label(i) == part.label(j) {
                q += a[i][j] - k[i] * k[j] / m2;
            }
        }
    }
    q / m2
}

/// Mutual information from a dense joint-count table, natural log.
pub fn brute_mutual_information(a: &[u64], b: &[u64]) -> f64 {
    let index = |xs: &[u64]| {
        let mut ids: Vec<u64> = xs.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let map: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        (xs.iter().map(|x| map[x]).collect::<Vec<_>>(), ids.len())
    };
    let (ia, ka) = index(a);
    let (ib, kb) = index(b);
    let n = a.len() as f64;
    let mut joint = vec![vec![0.0; kb]; ka];
    for (&x, &y) in ia.iter().zip(&ib) {
        joint[x][y] += 1.0;
    }
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum::<f64>() / n).collect();
    let pb: Vec<f64> = (0..kb).map(|j| joint.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let pij = joint[i][j] / n;
            if pij > 0.0 {
                mi += pij * (pij / (pa[i] * pb[j])).ln();
            }
        }
    }
    mi
}

pub fn brute_entropy(a: &[u64]) -> f64 {
    let mut counts: HashMap<u64, f64> = HashMap::new();
    for &x in a {
        *counts.entry(x).or_insert(0.0) += 1.0;
    }
    let n = a.len() as f64;
    let mut keys: Vec<_> = counts.keys().copied().collect();
    keys.sort_unstable();
    keys.iter().map(|k| counts[k] / n).map(|p| -p * p.ln()).sum()
}

pub fn values(part: &Partition) -> Vec<u64> {
    part.assignment().iter().map(|l| l.value()).collect()
}

/// Every set partition of `0..n` as restricted growth strings.
pub fn all_set_partitions(n: usize) -> Vec<Vec<u64>> {
    fn rec(prefix: &mut Vec<u64>, max: u64, n: usize, out: &mut Vec<Vec<u64>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for c in 0..=max + 1 {
            prefix.push(c);
            rec(prefix, max.max(c), n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return vec![vec![]];
    }
    let mut prefix = vec![0];
    rec(&mut prefix, 0, n, &mut out);
    out
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
