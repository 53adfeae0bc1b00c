//! Differentially private clustering for well-separated instances.
//!
//! The crate is organized around one deterministic geometry kernel
//! ([`geometry`]) and calibrated noise primitives ([`mech`]). On top of those
//! sit the private pipelines: [`stable_kmeans`] and [`stable_kmedian`] for the
//! centralized model, [`local`] for simulated local-model protocols, and
//! [`sample_aggregate`] for the subsample-and-aggregate variant. [`stability`]
//! quantifies how "nice" an input is, and [`bench`] generates synthetic
//! instances and orchestrates experiment suites.

pub mod bench;
pub mod error;
pub mod geometry;
pub mod local;
pub mod mech;
pub mod sample_aggregate;
pub mod stability;
pub mod stable_kmeans;
pub mod stable_kmedian;

pub use error::Error;
pub use geometry::{CenterSet, CostObjective, Dataset, Partition};
pub use mech::{BudgetLedger, PrivacyParams};
