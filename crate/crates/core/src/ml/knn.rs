// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::Prediction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

/// Standardized training rows and their labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnModel {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    /// Indices of the k nearest rows, ordered by (distance, row index).
    pub fn neighbours(&self, z: &[f64], k: usize) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> =
            self.rows.iter().enumerate().map(|(i, r)| (sq_dist(r, z), i)).collect();
        let k = k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, z: &[f64], k: usize) -> Prediction {
        let nn = self.neighbours(z, k);
        let pos = nn.iter().filter(|&&i| self.labels[i] == 1).count();
        // a split vote is flagged
        Prediction { label: (2 * pos >= nn.len()) as u8, score: pos as f64 / nn.len() as f64 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> KnnModel {
        KnnModel {
            rows: vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]],
            labels: vec![1, 1, 0, 0],
        }
    }

    #[test]
    fn k1_exact_row() {
        let m = model();
        for (r, &l) in m.rows.iter().zip(&m.labels) {
            let p = m.predict(r, 1);
            assert_eq!(p.label, l);
            assert_eq!(p.score, l as f64);
        }
    }

    #[test]
    fn k3_two_thirds() {
        let p = model().predict(&[0.9], 3);
        assert_eq!(p.label, 1);
        assert!((p.score - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn k2_tie_flags() {
        let p = model().predict(&[1.6], 2);
        assert_eq!((p.label, p.score), (1, 0.5));
    }

    #[test]
    fn equal_distance_prefers_lower_index() {
        let m = KnnModel { rows: vec![vec![1.0], vec![-1.0], vec![1.0]], labels: vec![0, 1, 1] };
        assert_eq!(m.neighbours(&[0.0], 2), vec![0, 1]);
        assert_eq!(m.neighbours(&[0.0], 5), vec![0, 1, 2]);
    }
}
