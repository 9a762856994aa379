// SPDX-License-Identifier: Apache-2.0

//! Hotspot classifiers: k-nearest neighbours, a random forest and a one
//! hidden layer perceptron behind a shared train/predict/persist contract.

mod forest;
mod knn;
mod mlp;
mod standardize;

pub use forest::{fit_forest, ForestModel, ForestParams, TreeNode};
pub use knn::{KnnModel, KnnParams};
pub use mlp::{fit_mlp, gradient_check, MlpGrad, MlpModel, MlpParams};
pub use standardize::Standardizer;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{DatasetClass, DatasetRow, FEATURE_LAYOUT_VERSION};

pub const MODEL_FORMAT: &str = "fastpi-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MlError {
    #[error("EMPTY_DATASET: no rows")]
    EmptyDataset,
    #[error("SINGLE_CLASS_DATASET: every training label is {label}")]
    SingleClassDataset { label: u8 },
    #[error("DIMENSION_MISMATCH: expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("DIMENSION_MISMATCH: model is for {expected} windows, row {row} is {found}")]
    WindowClassMismatch { expected: DatasetClass, found: DatasetClass, row: usize },
    #[error("INVALID_HYPERPARAMETER: {0}")]
    InvalidHyperparameter(String),
    #[error("PARSE_ERROR: {0}")]
    Parse(String),
    #[error("VERSION_MISMATCH: {0}")]
    VersionMismatch(String),
}

impl MlError {
    pub fn code(&self) -> &'static str {
        match self {
            MlError::EmptyDataset => "EMPTY_DATASET",
            MlError::SingleClassDataset { .. } => "SINGLE_CLASS_DATASET",
            MlError::DimensionMismatch { .. } | MlError::WindowClassMismatch { .. } => "DIMENSION_MISMATCH",
            MlError::InvalidHyperparameter(_) => "INVALID_HYPERPARAMETER",
            MlError::Parse(_) => "PARSE_ERROR",
            MlError::VersionMismatch(_) => "VERSION_MISMATCH",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Knn,
    Forest,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Knn, ModelKind::Forest, ModelKind::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Forest => "forest",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown model kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Ir,
    Em,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Ir, Target::Em];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Ir => "ir",
            Target::Em => "em",
        }
    }

    pub fn label(self, row: &DatasetRow) -> u8 {
        match self {
            Target::Ir => row.label_ir,
            Target::Em => row.label_em,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Target::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| format!("unknown target `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hyperparameters {
    Knn(KnnParams),
    Forest(ForestParams),
    Mlp(MlpParams),
}

impl Hyperparameters {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Knn => Hyperparameters::Knn(KnnParams::default()),
            ModelKind::Forest => Hyperparameters::Forest(ForestParams::default()),
            ModelKind::Mlp => Hyperparameters::Mlp(MlpParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparameters::Knn(_) => ModelKind::Knn,
            Hyperparameters::Forest(_) => ModelKind::Forest,
            Hyperparameters::Mlp(_) => ModelKind::Mlp,
        }
    }

    fn check(&self) -> Result<(), MlError> {
        let bad = |m: &str| Err(MlError::InvalidHyperparameter(m.to_string()));
        match self {
            Hyperparameters::Knn(p) if p.k == 0 => bad("k must be >= 1"),
            Hyperparameters::Forest(p) if p.n_trees == 0 => bad("n_trees must be >= 1"),
            Hyperparameters::Forest(p) if p.max_features == Some(0) => bad("max_features must be >= 1"),
            Hyperparameters::Mlp(p) if p.hidden == 0 => bad("hidden must be >= 1"),
            Hyperparameters::Mlp(p) if p.batch_size == 0 => bad("batch_size must be >= 1"),
            Hyperparameters::Mlp(p) if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) => {
                bad("learning_rate must be finite and > 0")
            }
            Hyperparameters::Mlp(p) if !(p.positive_weight_scale > 0.0 && p.positive_weight_scale.is_finite()) => {
                bad("positive_weight_scale must be finite and > 0")
            }
            Hyperparameters::Mlp(p)
                if !((0.0..1.0).contains(&p.beta1) && (0.0..1.0).contains(&p.beta2) && p.epsilon > 0.0) =>
            {
                bad("Adam moments need beta1, beta2 in [0, 1) and epsilon > 0")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub target: Target,
    pub window_class: DatasetClass,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, target: Target, window_class: DatasetClass, seed: u64) -> Self {
        ModelSpec { kind, target, window_class, hyperparameters: Hyperparameters::default_for(kind), seed }
    }

    fn check(&self) -> Result<(), MlError> {
        if self.hyperparameters.kind() != self.kind {
            return Err(MlError::InvalidHyperparameter(format!(
                "{} hyperparameters given for a {} model",
                self.hyperparameters.kind(),
                self.kind
            )));
        }
        self.hyperparameters.check()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameters {
    Knn(KnnModel),
    Forest(ForestModel),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: u8,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub standardizer: Standardizer,
    pub parameters: Parameters,
}

/// Trains on raw feature rows and 0/1 labels.
pub fn train_matrix(spec: &ModelSpec, rows: &[Vec<f64>], labels: &[u8]) -> Result<TrainedModel, MlError> {
    spec.check()?;
    if rows.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    if rows.len() != labels.len() {
        return Err(MlError::DimensionMismatch { expected: rows.len(), found: labels.len() });
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(MlError::Parse(format!("label {l} is not 0 or 1")));
    }
    let standardizer = Standardizer::fit(rows)?;
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(MlError::SingleClassDataset { label: labels[0] });
    }
    let z: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.apply(r)).collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let parameters = match &spec.hyperparameters {
        Hyperparameters::Knn(_) => Parameters::Knn(KnnModel { rows: z, labels: labels.to_vec() }),
        Hyperparameters::Forest(p) => Parameters::Forest(fit_forest(&z, labels, p, &mut rng)),
        Hyperparameters::Mlp(p) => Parameters::Mlp(fit_mlp(&z, labels, p, &mut rng)),
    };
    Ok(TrainedModel { spec: spec.clone(), standardizer, parameters })
}

/// Trains on dataset rows; every row must belong to the spec's window class.
pub fn train(spec: &ModelSpec, rows: &[DatasetRow]) -> Result<TrainedModel, MlError> {
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.dataset_class() != spec.window_class) {
        return Err(MlError::WindowClassMismatch { expected: spec.window_class, found: r.dataset_class(), row: i });
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
    let y: Vec<u8> = rows.iter().map(|r| spec.target.label(r)).collect();
    train_matrix(spec, &x, &y)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    kind: ModelKind,
    feature_layout_version: u32,
    dimension: usize,
    spec: ModelSpec,
    standardizer: Standardizer,
    parameters: Parameters,
}

impl TrainedModel {
    pub fn dimension(&self) -> usize {
        self.standardizer.dimension()
    }

    pub fn predict(&self, fv: &[f64]) -> Result<Prediction, MlError> {
        let z = self.standardizer.apply(fv)?;
        Ok(match (&self.parameters, &self.spec.hyperparameters) {
            (Parameters::Knn(m), Hyperparameters::Knn(p)) => m.predict(&z, p.k),
            (Parameters::Forest(m), _) => m.predict(&z),
            (Parameters::Mlp(m), _) => m.predict(&z),
            (Parameters::Knn(m), _) => m.predict(&z, KnnParams::default().k),
        })
    }

    pub fn save(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            kind: self.spec.kind,
            feature_layout_version: FEATURE_LAYOUT_VERSION,
            dimension: self.dimension(),
            spec: self.spec.clone(),
            standardizer: self.standardizer.clone(),
            parameters: self.parameters.clone(),
        };
        let mut s = serde_json::to_string(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn load(text: &str) -> Result<Self, MlError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| MlError::Parse(e.to_string()))?;
        let obj = value.as_object().ok_or_else(|| MlError::Parse("model file is not a JSON object".into()))?;
        match obj.get("format").and_then(|v| v.as_str()) {
            Some(MODEL_FORMAT) => {}
            other => return Err(MlError::Parse(format!("unknown model format {other:?}"))),
        }
        for (key, want) in [("version", MODEL_VERSION), ("feature_layout_version", FEATURE_LAYOUT_VERSION)] {
            let got = obj.get(key).and_then(|v| v.as_u64());
            if got != Some(want as u64) {
                return Err(MlError::VersionMismatch(format!("{key} {got:?}, this build reads {want}")));
            }
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| MlError::Parse(e.to_string()))?;
        let model = TrainedModel { spec: file.spec, standardizer: file.standardizer, parameters: file.parameters };
        model.check_shapes(file.kind, file.dimension).map_err(MlError::Parse)?;
        Ok(model)
    }

    fn check_shapes(&self, kind: ModelKind, d: usize) -> Result<(), String> {
        self.spec.check().map_err(|e| e.to_string())?;
        if kind != self.spec.kind {
            return Err(format!("file kind {kind} disagrees with spec kind {}", self.spec.kind));
        }
        let s = &self.standardizer;
        if s.mean.len() != d || s.std.len() != d {
            return Err(format!("standardizer length does not match dimension {d}"));
        }
        if s.std.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err("standardizer std entries must be finite and > 0".into());
        }
        match (&self.parameters, kind) {
            (Parameters::Knn(m), ModelKind::Knn) => {
                if m.rows.is_empty() || m.rows.len() != m.labels.len() {
                    return Err("knn rows and labels must be non-empty and aligned".into());
                }
                if m.rows.iter().any(|r| r.len() != d) || m.labels.iter().any(|&l| l > 1) {
                    return Err("knn row length or label out of range".into());
                }
            }
            (Parameters::Forest(m), ModelKind::Forest) => {
                if m.trees.is_empty() {
                    return Err("forest has no trees".into());
                }
                m.trees.iter().try_for_each(|t| t.check(d))?;
            }
            (Parameters::Mlp(m), ModelKind::Mlp) => {
                let h = m.b1.len();
                if h == 0 || m.w1.len() != h || m.w2.len() != h || m.w1.iter().any(|r| r.len() != d) {
                    return Err("mlp weight shapes do not match".into());
                }
            }
            _ => return Err(format!("parameters do not belong to a {kind} model")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let y = x.iter().map(|r| (r[0] + 0.5 * r[1] > 0.3) as u8).collect();
        (x, y)
    }

    fn spec(kind: ModelKind) -> ModelSpec {
        let mut s = ModelSpec::new(kind, Target::Ir, DatasetClass::Continuous, 42);
        match &mut s.hyperparameters {
            Hyperparameters::Forest(p) => p.n_trees = 9,
            Hyperparameters::Mlp(p) => {
                p.hidden = 6;
                p.epochs = 20;
            }
            Hyperparameters::Knn(_) => {}
        }
        s
    }

    #[test]
    fn knn_stores_every_row() {
        let (x, y) = toy(1, 40, 3);
        let m = train_matrix(&spec(ModelKind::Knn), &x, &y).unwrap();
        let Parameters::Knn(k) = &m.parameters else { panic!() };
        assert_eq!(k.rows.len(), 40);
    }

    #[test]
    fn round_trip_all_kinds() {
        let (x, y) = toy(2, 60, 4);
        let (q, _) = toy(3, 100, 4);
        for kind in ModelKind::ALL {
            let m = train_matrix(&spec(kind), &x, &y).unwrap();
            let text = m.save();
            let back = TrainedModel::load(&text).unwrap();
            assert_eq!(back, m);
            for r in &q {
                assert_eq!(back.predict(r).unwrap(), m.predict(r).unwrap());
            }
            assert_eq!(back.save(), text);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = toy(4, 50, 3);
        for kind in ModelKind::ALL {
            let a = train_matrix(&spec(kind), &x, &y).unwrap().save();
            let b = train_matrix(&spec(kind), &x, &y).unwrap().save();
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn error_codes() {
        let (x, y) = toy(5, 30, 3);
        let s = spec(ModelKind::Knn);
        assert_eq!(train_matrix(&s, &[], &[]).unwrap_err().code(), "EMPTY_DATASET");
        assert_eq!(train_matrix(&s, &x, &vec![0; 30]).unwrap_err().code(), "SINGLE_CLASS_DATASET");
        let m = train_matrix(&s, &x, &y).unwrap();
        assert_eq!(m.predict(&[0.0; 4]).unwrap_err().code(), "DIMENSION_MISMATCH");
        let text = m.save();
        assert_eq!(TrainedModel::load(&text[..text.len() / 2]).unwrap_err().code(), "PARSE_ERROR");
        let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
        assert_eq!(TrainedModel::load(&bumped).unwrap_err().code(), "VERSION_MISMATCH");
        let mut bad = s.clone();
        bad.hyperparameters = Hyperparameters::Knn(KnnParams { k: 0 });
        assert_eq!(train_matrix(&bad, &x, &y).unwrap_err().code(), "INVALID_HYPERPARAMETER");
    }

    #[test]
    fn window_class_conflict() {
        let (x, y) = toy(6, 10, 3);
        let rows: Vec<DatasetRow> = x
            .into_iter()
            .zip(y)
            .map(|(features, l)| DatasetRow {
                design_id: "d0".into(),
                window: crate::features::WindowId { row: 0, col: 0 },
                class: crate::features::WindowClass::Corner,
                features,
                label_ir: l,
                label_em: 0,
            })
            .collect();
        let err = train(&spec(ModelKind::Knn), &rows).unwrap_err();
        assert_eq!(err.code(), "DIMENSION_MISMATCH");
    }
}
