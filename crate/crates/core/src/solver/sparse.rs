// SPDX-License-Identifier: Apache-2.0

//! Symmetric positive definite sparse solve: reverse Cuthill-McKee ordering
//! followed by an envelope (profile) Cholesky factorization.

use std::collections::VecDeque;

/// Symmetric matrix in compressed sparse row form, both triangles stored,
/// column indices sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricCsr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SymmetricCsr {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    /// Each off-diagonal entry must be supplied for both triangles.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SymmetricCsr { n, row_ptr, col_idx, values }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }
}

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SymmetricCsr) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = a
                .row(u)
                .map(|(j, _)| j)
                .filter(|&j| j != u && !visited[j])
                .collect();
            next.sort_by_key(|&j| (degree[j], j));
            for j in next {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorError {
    /// Non-positive pivot at the given (permuted) row.
    NotPositiveDefinite { row: usize, pivot: f64 },
}

/// Lower-triangular envelope factor `P A P^T = L L^T`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    perm: Vec<usize>,
    /// First stored column of each row of L.
    first: Vec<usize>,
    /// Offset of row i's first stored entry in `data`.
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SymmetricCsr) -> Result<Self, FactorError> {
        let n = a.n;
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            first[new] = a
                .row(old)
                .map(|(j, _)| inv[j])
                .filter(|&j| j <= new)
                .min()
                .unwrap_or(new);
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let jn = inv[j];
                if jn <= new {
                    data[start[new] + jn - first[new]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = data[start[i] + j - fi];
                let ri = start[i] + k0 - fi;
                let rj = start[j] + k0 - fj;
                for k in 0..(j - k0) {
                    s -= data[ri + k] * data[rj + k];
                }
                let ljj = data[start[j] + j - fj];
                data[start[i] + j - fi] = s / ljj;
            }
            let row = &data[start[i]..start[i] + (i - fi)];
            let diag = data[start[i] + i - fi] - row.iter().map(|v| v * v).sum::<f64>();
            if !(diag > 0.0) {
                return Err(FactorError::NotPositiveDefinite { row: i, pivot: diag });
            }
            data[start[i] + i - fi] = diag.sqrt();
        }
        Ok(EnvelopeCholesky { n, perm, first, start, data })
    }

    pub fn stored_entries(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // Forward: L y = Pb.
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i] + (i - fi)];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / self.data[self.start[i] + i - fi];
        }
        // Backward: L^T x = y, column-oriented over the row storage.
        for i in (0..n).rev() {
            let fi = self.first[i];
            y[i] /= self.data[self.start[i] + i - fi];
            let xi = y[i];
            let row = &self.data[self.start[i]..self.start[i] + (i - fi)];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
