// SPDX-License-Identifier: Apache-2.0

mod common;

use fastpi::design::{generate_design, parse_design, serialize_design, validate_design, GeneratorConfig};
use fastpi::eval::split_indices;
use fastpi::features::{extract_features, tile_windows, DatasetRow, GridMeta, WindowClass, WindowId};
use fastpi::ml::{
    gradient_check, train_matrix, ForestParams, Hyperparameters, MlpModel, MlpParams, ModelKind, ModelSpec, Parameters,
    Target,
};
use fastpi::features::DatasetClass;
use fastpi::solver::solve_dc;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config(side: f64) -> GeneratorConfig {
    GeneratorConfig { die_width: side, die_height: side, ..GeneratorConfig::default() }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let mut labels: Vec<u8> = rows.iter().map(|r| (r[0] + 0.5 * rng.gen_range(-1.0..1.0) > 0.0) as u8).collect();
    labels[0] = 0;
    labels[1] = 1;
    (rows, labels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generated_designs_round_trip(seed in any::<u64>(), side in prop::sample::select(vec![40.0, 60.0, 80.0])) {
        let d = generate_design(&small_config(side), seed).unwrap();
        prop_assert_eq!(validate_design(&d), vec![]);
        let text = serialize_design(&d);
        let back = parse_design(&text).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(serialize_design(&back), text);
    }

    #[test]
    fn translation_by_pitches_keeps_continuous_features(seed in any::<u64>(), kx in -2i32..=2, ky in -2i32..=2) {
        let cfg = small_config(80.0);
        let d = generate_design(&cfg, seed).unwrap();
        let moved = d.translated(kx as f64 * cfg.c4_pitch, ky as f64 * cfg.c4_pitch);
        let (meta, moved_meta) = (GridMeta::new(&d), GridMeta::new(&moved));
        let mut checked = 0;
        for (w, mw) in tile_windows(&d).iter().zip(&tile_windows(&moved)) {
            prop_assert_eq!(w.id, mw.id);
            prop_assert_eq!(w.class, mw.class);
            if w.class == WindowClass::Continuous {
                prop_assert_eq!(extract_features(&d, w, &meta).unwrap(), extract_features(&moved, mw, &moved_meta).unwrap());
                checked += 1;
            }
        }
        prop_assert!(checked > 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_matches_dense_and_conserves_current(seed in any::<u64>()) {
        let (grid, loads) = common::random_grid(seed, 200);
        let r = solve_dc(&grid, &loads).unwrap();
        let dense = common::dense_voltages(&grid, &loads);
        prop_assert!(common::max_elementwise_relative(&r.node_voltages, &dense) <= 1e-8);
        let sourced: f64 = r.source_currents.iter().sum();
        let total: f64 = loads.iter().sum();
        prop_assert!((sourced - total).abs() <= 1e-9 * total.max(f64::MIN_POSITIVE));
        prop_assert!(r.residual <= 1e-9);
    }

    #[test]
    fn raising_one_load_never_lowers_a_drop(seed in any::<u64>(), extra in 1e-6f64..1e-2, pick in any::<prop::sample::Index>()) {
        let (grid, loads) = common::random_grid(seed, 120);
        prop_assume!(!loads.is_empty());
        let base = solve_dc(&grid, &loads).unwrap();
        let mut more = loads.clone();
        more[pick.index(loads.len())] += extra;
        let up = solve_dc(&grid, &more).unwrap();
        for (a, b) in base.node_drops.iter().zip(&up.node_drops) {
            prop_assert!(b >= a, "drop fell from {} to {}", a, b);
        }
    }

    #[test]
    fn drops_superpose(seed in any::<u64>(), split_seed in any::<u64>()) {
        let (grid, loads) = common::random_grid(seed, 120);
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
        let l1: Vec<f64> = loads.iter().map(|l| l * rng.gen_range(0.0..1.0)).collect();
        let l2: Vec<f64> = loads.iter().zip(&l1).map(|(l, a)| l - a).collect();
        let (r, r1, r2) = (solve_dc(&grid, &loads).unwrap(), solve_dc(&grid, &l1).unwrap(), solve_dc(&grid, &l2).unwrap());
        let sum: Vec<f64> = r1.node_drops.iter().zip(&r2.node_drops).map(|(a, b)| a + b).collect();
        prop_assert!(common::max_scaled_error(&sum, &r.node_drops) <= 1e-9);
    }

    #[test]
    fn split_is_a_stratified_partition(
        labels in prop::collection::vec(any::<bool>(), 2..300),
        fraction in 0.01f64..0.99,
        seed in any::<u64>(),
    ) {
        let rows: Vec<DatasetRow> = labels
            .iter()
            .enumerate()
            .map(|(i, &p)| DatasetRow {
                design_id: "p".into(),
                window: WindowId { row: i / 20, col: i % 20 },
                class: WindowClass::Continuous,
                features: vec![i as f64],
                label_ir: (p && i % 2 == 0) as u8,
                label_em: (p && i % 2 == 1) as u8,
            })
            .collect();
        let n = rows.len();
        let (train, test) = split_indices(&rows, fraction, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(!train.is_empty() && !test.is_empty());
        let n_pos = labels.iter().filter(|&&p| p).count() as f64;
        let test_pos = test.iter().filter(|&&i| labels[i]).count() as f64;
        let ideal = n_pos * test.len() as f64 / n as f64;
        prop_assert!((test_pos - ideal).abs() <= 1.0, "{} positives in test, ideal {}", test_pos, ideal);
        let again = split_indices(&rows, fraction, seed).unwrap();
        prop_assert_eq!(again, (train, test));
    }

    #[test]
    fn knn_neighbours_ignore_column_shifts(
        seed in any::<u64>(),
        n in 4usize..40,
        d in 1usize..5,
        shift in -1e3f64..1e3,
        k in 1usize..6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, labels) = random_matrix(&mut rng, n, d);
        let col = rng.gen_range(0..d);
        let query: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let shifted = |r: &[f64]| -> Vec<f64> {
            let mut r = r.to_vec();
            r[col] += shift;
            r
        };
        let mut spec = ModelSpec::new(ModelKind::Knn, Target::Ir, DatasetClass::Continuous, 0);
        spec.hyperparameters = Hyperparameters::Knn(fastpi::ml::KnnParams { k });
        let a = train_matrix(&spec, &rows, &labels).unwrap();
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| shifted(r)).collect();
        let b = train_matrix(&spec, &moved, &labels).unwrap();
        let (Parameters::Knn(ka), Parameters::Knn(kb)) = (&a.parameters, &b.parameters) else {
            panic!("knn spec trained another kind");
        };
        let za = a.standardizer.apply(&query).unwrap();
        let zb = b.standardizer.apply(&shifted(&query)).unwrap();
        prop_assert_eq!(ka.neighbours(&za, k), kb.neighbours(&zb, k));
    }

    #[test]
    fn forest_votes_are_bounded(seed in any::<u64>(), half in 0usize..8, depth in prop::option::of(1usize..6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, labels) = random_matrix(&mut rng, 60, 3);
        let mut spec = ModelSpec::new(ModelKind::Forest, Target::Ir, DatasetClass::Continuous, seed);
        spec.hyperparameters = Hyperparameters::Forest(ForestParams {
            n_trees: 2 * half + 1,
            max_depth: depth,
            ..ForestParams::default()
        });
        let m = train_matrix(&spec, &rows, &labels).unwrap();
        for _ in 0..50 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let p = m.predict(&q).unwrap();
            prop_assert!((0.0..=1.0).contains(&p.score));
            prop_assert_eq!(p.label, (p.score > 0.5) as u8);
        }
    }

    #[test]
    fn mlp_gradients_match_finite_differences(
        seed in any::<u64>(),
        d in 1usize..10,
        hidden in 1usize..9,
        batch in 1usize..17,
        pos_weight in 0.2f64..5.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = MlpModel::init(d, hidden, &mut rng);
        let xs: Vec<Vec<f64>> = (0..batch).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let ys: Vec<u8> = (0..batch).map(|_| rng.gen_range(0..2)).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        prop_assert!(gradient_check(&m, &refs, &ys, [1.0, pos_weight]) < 1e-5);
    }
}

#[test]
fn heavier_positive_weight_never_flags_fewer() {
    for seed in 0..6u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (rows, labels) = random_matrix(&mut rng, 120, 4);
        let validation: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let mut last = 0;
        for scale in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let mut spec = ModelSpec::new(ModelKind::Mlp, Target::Ir, DatasetClass::Continuous, seed);
            spec.hyperparameters = Hyperparameters::Mlp(MlpParams {
                hidden: 8,
                epochs: 40,
                positive_weight_scale: scale,
                ..MlpParams::default()
            });
            let m = train_matrix(&spec, &rows, &labels).unwrap();
            let flagged = validation.iter().filter(|q| m.predict(q).unwrap().label == 1).count();
            assert!(flagged >= last, "seed {seed}: scale {scale} flags {flagged}, less than {last}");
            last = flagged;
        }
    }
}
