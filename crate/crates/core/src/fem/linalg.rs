//! Skyline (variable-band) symmetric LDLᵀ with reverse Cuthill–McKee ordering.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Reverse Cuthill–McKee permutation of an undirected graph given by
/// adjacency lists. Returns `order[new] = old`. Ties break by degree, then index.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |v: usize| adj[v].len();
    while order.len() < n {
        // Start each component from a pseudo-peripheral node.
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree(v), v))
            .expect("unvisited node");
        let start = pseudo_peripheral(adj, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree(w), w));
            next.dedup();
            for w in next {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    level[start] = 0;
    let mut q = VecDeque::from([start]);
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                q.push_back(w);
            }
        }
    }
    level
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize) -> usize {
    let mut v = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let lv = bfs_levels(adj, v);
        let far = lv
            .iter()
            .copied()
            .filter(|&l| l != usize::MAX)
            .max()
            .unwrap_or(0);
        if far <= ecc && v != seed {
            break;
        }
        ecc = far;
        let cand = (0..adj.len())
            .filter(|&w| lv[w] == far)
            .min_by_key(|&w| (adj[w].len(), w))
            .unwrap_or(v);
        if cand == v {
            break;
        }
        v = cand;
    }
    v
}

/// Symmetric matrix in skyline storage: column `j` holds rows `first[j]..=j`.
#[derive(Debug, Clone)]
pub struct Skyline {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
    factored: bool,
}

impl Skyline {
    /// Allocates the profile from the set of coupled index pairs.
    pub fn with_profile(n: usize, first: Vec<usize>) -> Self {
        assert_eq!(first.len(), n);
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for (j, &f) in first.iter().enumerate() {
            assert!(f <= j);
            offset.push(offset[j] + (j - f + 1));
        }
        let len = offset[n];
        Skyline {
            first,
            offset,
            data: vec![0.0; len],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Stored entries, a measure of factorization cost.
    pub fn profile_len(&self) -> usize {
        self.data.len()
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
        self.factored = false;
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        (r >= self.first[c]).then(|| self.offset[c] + (r - self.first[c]))
    }

    /// Adds `v` to `(i, j)` (and implicitly `(j, i)`). The entry must lie in the profile.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside skyline profile");
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// In-place `LDLᵀ`; column `j` ends up holding `U = Lᵀ` above and `D` on the diagonal.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.dim();
        let scale = (0..n).map(|j| self.get(j, j).abs()).fold(0.0, f64::max);
        for j in 0..n {
            let fj = self.first[j];
            let oj = self.offset[j];
            // g_ij = k_ij − Σ_r u_ri g_rj, for i in fj..j
            for i in fj + 1..j {
                let fi = self.first[i];
                let m = fi.max(fj);
                if m < i {
                    let oi = self.offset[i];
                    let a = &self.data[oi + (m - fi)..oi + (i - fi)];
                    let b = &self.data[oj + (m - fj)..oj + (i - fj)];
                    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    self.data[oj + (i - fj)] -= dot;
                }
            }
            let mut d = self.data[oj + (j - fj)];
            for r in fj..j {
                let g = self.data[oj + (r - fj)];
                let dr = self.data[self.offset[r] + (r - self.first[r])];
                let u = g / dr;
                d -= u * g;
                self.data[oj + (r - fj)] = u;
            }
            if !(d.abs() > 1e-14 * scale) || !d.is_finite() {
                return Err(Error::SingularTensor { det: d });
            }
            self.data[oj + (j - fj)] = d;
        }
        self.factored = true;
        Ok(())
    }

    /// Solves with the factored matrix, overwriting `b`.
    pub fn solve(&self, b: &mut [f64]) {
        assert!(self.factored, "matrix must be factored first");
        let n = self.dim();
        // Uᵀ y = b
        for j in 0..n {
            let fj = self.first[j];
            let oj = self.offset[j];
            let col = &self.data[oj..oj + (j - fj)];
            let s: f64 = col.iter().zip(&b[fj..j]).map(|(u, y)| u * y).sum();
            b[j] -= s;
        }
        for j in 0..n {
            b[j] /= self.data[self.offset[j] + (j - self.first[j])];
        }
        // U x = z
        for j in (0..n).rev() {
            let fj = self.first[j];
            let oj = self.offset[j];
            let xj = b[j];
            for (r, u) in (fj..j).zip(&self.data[oj..oj + (j - fj)]) {
                b[r] -= u * xj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rcm_reduces_bandwidth_of_a_path() {
        // Path 0-5-1-4-2-3 scrambled.
        let edges = [(0, 5), (5, 1), (1, 4), (4, 2), (2, 3)];
        let mut adj = vec![Vec::new(); 6];
        for (a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let order = reverse_cuthill_mckee(&adj);
        let mut pos = [0; 6];
        for (new, &old) in order.iter().enumerate() {
            pos[old] = new;
        }
        let bw = edges
            .iter()
            .map(|&(a, b)| pos[a].abs_diff(pos[b]))
            .max()
            .unwrap();
        assert_eq!(bw, 1);
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn ldlt_solves_indefinite_symmetric_system() {
        let dense = [
            [4.0, 1.0, 0.0, 0.0],
            [1.0, -3.0, 2.0, 0.0],
            [0.0, 2.0, 5.0, 1.0],
            [0.0, 0.0, 1.0, 2.0],
        ];
        let mut k = Skyline::with_profile(4, vec![0, 0, 1, 2]);
        for i in 0..4 {
            for j in i..4 {
                if dense[i][j] != 0.0 {
                    k.add(i, j, dense[i][j]);
                }
            }
        }
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut b: Vec<f64> = (0..4)
            .map(|i| (0..4).map(|j| dense[i][j] * x[j]).sum())
            .collect();
        k.factor().unwrap();
        k.solve(&mut b);
        for (a, e) in b.iter().zip(x) {
            assert!((a - e).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut k = Skyline::with_profile(2, vec![0, 0]);
        k.add(0, 0, 1.0);
        k.add(0, 1, 1.0);
        k.add(1, 1, 1.0);
        assert!(k.factor().is_err());
    }
}
