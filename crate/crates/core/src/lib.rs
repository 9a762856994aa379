// SPDX-License-Identifier: Apache-2.0

//! Window-level IR-drop and electromigration hotspot classification.
//!
//! The crate covers the whole flow: synthetic design generation, a DC
//! power-grid solver that produces ground-truth labels, window feature
//! extraction, three from-scratch classifiers, sign-off comparison reports
//! and a batch command line.

pub mod design;
pub mod solver;
pub mod features;
pub mod ml;
pub mod eval;
pub mod cli;
