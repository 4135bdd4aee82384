//! Design pattern instance detection over typed program graphs.
//!
//! The pipeline runs in decoupled stages, each of which can be driven
//! separately and exchanges plain file artifacts with its neighbors:
//!
//! 1. [`parse`] turns a Java-like source subset into an abstract semantics
//!    graph ([`asg`]), serialized via [`interchange`].
//! 2. [`microstructures`] detects a fixed catalog of elementary design
//!    fragments (inheritance, delegation, instantiation, and friends) as
//!    role-typed instances over the graph.
//! 3. [`sample`] proposes candidate role mappings for the supported design
//!    patterns using cheap structural sketches tuned for recall.
//! 4. [`frn`] normalizes the detected fragments around one candidate into a
//!    fixed-shape feature map whose cells are role identifiers drawn from a
//!    persistent [`registry`]; [`render`] makes the maps inspectable.
//! 5. [`dataset`] joins candidates with ground-truth labels, controls class
//!    balance, optionally augments by row permutation, and splits by project
//!    so that no project leaks between training and test.
//! 6. [`forest`] trains a random forest of categorical decision trees on
//!    flattened maps, and [`search`] tunes its hyperparameters under a trial
//!    budget; [`eval`] scores folds and reports the usual binary metrics.
//!
//! [`synth`] generates seeded synthetic corpora with planted pattern
//! instances, used to exercise the whole pipeline without shipping a corpus.

pub mod asg;
pub mod classify;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod frn;
pub mod interchange;
pub mod microstructures;
pub mod parse;
pub mod pattern;
pub mod registry;
pub mod render;
pub mod rng;
pub mod sample;
pub mod search;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
