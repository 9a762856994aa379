// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::features::DatasetRow;

/// Test size and positive count for a stratified split of `n` rows with
/// `n_pos` positives: the test set gets floor(n * fraction) rows (at least
/// one, leaving at least one for training) and the nearest whole share of
/// positives.
pub fn split_sizes(n: usize, n_pos: usize, test_fraction: f64) -> Result<(usize, usize), EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::InvalidFraction(test_fraction));
    }
    if n < 2 {
        return Err(EvalError::EmptyDataset(n));
    }
    let n_test = ((n as f64 * test_fraction).floor() as usize).clamp(1, n - 1);
    let n_neg = n - n_pos;
    // half-up rounding of n_pos * n_test / n in integers
    let ideal = (2 * n_pos * n_test + n) / (2 * n);
    let test_pos = ideal.clamp(n_test.saturating_sub(n_neg), n_pos.min(n_test));
    Ok((n_test, test_pos))
}

/// Row indices of a stratified (on any-positive) train/test split, each in
/// ascending order.
pub fn split_indices(
    rows: &[DatasetRow],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| rows[i].any_positive());
    let (n_test, test_pos) = split_sizes(rows.len(), pos.len(), test_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut in_test = vec![false; rows.len()];
    for &i in pos.iter().take(test_pos).chain(neg.iter().take(n_test - test_pos)) {
        in_test[i] = true;
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| in_test[i]);
    Ok((train, test))
}

pub fn split_dataset(
    rows: &[DatasetRow],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<DatasetRow>, Vec<DatasetRow>), EvalError> {
    let (train, test) = split_indices(rows, test_fraction, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| rows[i].clone()).collect();
    Ok((pick(&train), pick(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{WindowClass, WindowId};

    pub(crate) fn rows(n: usize, positives: &[usize]) -> Vec<DatasetRow> {
        (0..n)
            .map(|i| DatasetRow {
                design_id: "d1".into(),
                window: WindowId { row: i / 10, col: i % 10 },
                class: WindowClass::Continuous,
                features: vec![i as f64],
                label_ir: positives.contains(&i) as u8,
                label_em: 0,
            })
            .collect()
    }

    #[test]
    fn hundred_rows_ten_positive() {
        let pos: Vec<usize> = (0..10).map(|i| i * 7).collect();
        let d = rows(100, &pos);
        let (train, test) = split_dataset(&d, 0.2, 3).unwrap();
        assert_eq!(test.len(), 20);
        assert_eq!(train.len(), 80);
        assert_eq!(test.iter().filter(|r| r.any_positive()).count(), 2);
    }

    #[test]
    fn same_seed_same_split() {
        let d = rows(57, &[1, 5, 9, 30]);
        assert_eq!(split_indices(&d, 0.3, 8).unwrap(), split_indices(&d, 0.3, 8).unwrap());
        assert_ne!(split_indices(&d, 0.3, 8).unwrap(), split_indices(&d, 0.3, 9).unwrap());
    }

    #[test]
    fn three_rows_half() {
        let d = rows(3, &[0]);
        let (train, test) = split_dataset(&d, 0.5, 1).unwrap();
        assert_eq!((test.len(), train.len()), (1, 2));
    }

    #[test]
    fn bad_inputs() {
        assert_eq!(split_dataset(&rows(1, &[]), 0.2, 0).unwrap_err().code(), "EMPTY_DATASET");
        assert_eq!(split_dataset(&[], 0.2, 0).unwrap_err().code(), "EMPTY_DATASET");
        assert!(matches!(split_dataset(&rows(10, &[]), 1.0, 0), Err(EvalError::InvalidFraction(_))));
        assert!(matches!(split_dataset(&rows(10, &[]), 0.0, 0), Err(EvalError::InvalidFraction(_))));
    }

    #[test]
    fn fraction_near_one_keeps_a_training_row() {
        let (n_test, _) = split_sizes(4, 0, 0.99).unwrap();
        assert_eq!(n_test, 3);
    }
}
