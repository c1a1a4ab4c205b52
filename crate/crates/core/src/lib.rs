//! Manifold learning for high-dimensional feature vectors.
//!
//! The crate loads feature matrices and per-sample annotations ([`dataset`]), embeds them
//! with seven algorithms (Laplacian Eigenmaps and LLE in [`spectral`], ISOMAP, classical
//! MDS and SMACOF in [`geodesic`], t-SNE in [`tsne`], PHATE in [`phate`]), scores the result
//! ([`quality`]) and draws it ([`plot`]). [`cli`] wires these into the `manifold` binary.
//!
//! All randomness flows from an explicit seed through [`rng::Rng`], and parallel loops only
//! split work by row, so results are identical for any thread count.

pub mod cli;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod fixtures;
pub mod geodesic;
pub mod linalg;
pub mod neighbors;
pub mod phate;
pub mod plot;
pub mod quality;
pub mod rng;
pub mod spectral;
pub mod tsne;
