// SPDX-License-Identifier: Apache-2.0

//! Analysis-window tiling, window feature vectors, and labelled datasets.

mod dataset;
mod extract;
mod window;

pub use dataset::{
    build_dataset, label_window, read_dataset, write_dataset, DatasetClass, DatasetHeader,
    DatasetRow, Datasets, FEATURE_LAYOUT_VERSION,
};
pub use extract::{extract_features, FeatureLayout, FeatureVector, GridMeta};
pub use window::{tile_windows, window_of_point, AnalysisWindow, WindowClass, WindowId};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("MISSING_BUMP_MATRIX: {0}")]
    MissingBumpMatrix(String),
    #[error("PARSE_ERROR: {0}")]
    Parse(String),
}

impl FeatureError {
    pub fn code(&self) -> &'static str {
        match self {
            FeatureError::MissingBumpMatrix(_) => "MISSING_BUMP_MATRIX",
            FeatureError::Parse(_) => "PARSE_ERROR",
        }
    }
}
