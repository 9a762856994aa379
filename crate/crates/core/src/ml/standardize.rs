// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::MlError;

/// Per-column z-scoring fitted on training rows (population std).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, MlError> {
        let first = rows.first().ok_or(MlError::EmptyDataset)?.as_ref();
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(MlError::DimensionMismatch { expected: d, found: r.len() });
            }
            for j in 0..d {
                mean[j] += r[j];
                lo[j] = lo[j].min(r[j]);
                hi[j] = hi[j].max(r[j]);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for (j, &x) in r.as_ref().iter().enumerate() {
                var[j] += (x - mean[j]).powi(2);
            }
        }
        let mut std = vec![1.0; d];
        for j in 0..d {
            // a constant column keeps its exact value as the mean so it maps to 0
            if lo[j] == hi[j] {
                mean[j] = lo[j];
            } else {
                let s = (var[j] / n).sqrt();
                std[j] = if s > 0.0 { s } else { 1.0 };
            }
        }
        Ok(Standardizer { mean, std })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, fv: &[f64]) -> Result<Vec<f64>, MlError> {
        if fv.len() != self.dimension() {
            return Err(MlError::DimensionMismatch { expected: self.dimension(), found: fv.len() });
        }
        Ok(fv.iter().zip(self.mean.iter().zip(&self.std)).map(|(x, (m, s))| (x - m) / s).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rows() {
        let s = Standardizer::fit(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(s.mean, vec![1.0]);
        assert_eq!(s.std, vec![1.0]);
        assert_eq!(s.apply(&[2.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn constant_column_passes_through() {
        let rows = vec![vec![0.1, 3.0], vec![0.1, 5.0], vec![0.1, 4.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.std[0], 1.0);
        for r in &rows {
            assert_eq!(s.apply(r).unwrap()[0], 0.0);
        }
    }

    #[test]
    fn training_columns_are_centred_and_scaled() {
        let rows: Vec<Vec<f64>> =
            (0..37).map(|i| vec![(i as f64 * 0.37).sin() * 1e3, i as f64 * 1e-6 + 7.0]).collect();
        let s = Standardizer::fit(&rows).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r).unwrap()).collect();
        for j in 0..2 {
            let m = z.iter().map(|r| r[j]).sum::<f64>() / z.len() as f64;
            let v = z.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / z.len() as f64;
            assert!(m.abs() <= 1e-9, "mean {m}");
            assert!((v.sqrt() - 1.0).abs() <= 1e-9, "std {}", v.sqrt());
        }
    }

    #[test]
    fn errors() {
        assert_eq!(Standardizer::fit::<Vec<f64>>(&[]), Err(MlError::EmptyDataset));
        let s = Standardizer::fit(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(s.apply(&[1.0]), Err(MlError::DimensionMismatch { expected: 2, found: 1 })));
    }
}
