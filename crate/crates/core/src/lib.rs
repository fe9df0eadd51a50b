//! Finite-graph laboratory for bond percolation two-point functions.
//!
//! The crate computes, on small vertex-transitive graphs, the two-point matrix
//! `B(v,w) = P(v ↔ w)`, its split `B = Σ_n B_n` by the size of the cluster of `v`, the
//! triangle diagram `Q = B³`, the PSD square roots `S_n = √B_n`, and checks the identity
//! `Q(v,w) = Σ_n ⟨S_n B 1_v, S_n B 1_w⟩` together with the almost-orthogonality of
//! translated vectors that turns a finite triangle into a vanishing open triangle.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases below
//! are what the command-line tool uses.

pub mod error;
pub mod exact;
pub mod graphs;
pub mod kernel;
pub mod lemma_lab;
pub mod matrix;
pub mod monte_carlo;
pub mod operators;
pub mod percolation;
pub mod scalar;

pub use error::{LabError, Result};
pub use exact::{ConfigurationCounts, EnumerationOptions, SizeResolvedFamily, TwoPointMatrix};
pub use graphs::{Automorphism, GraphFamily, TransitiveGraph, VertexVector};
pub use matrix::Matrix;
pub use monte_carlo::{MCEstimate, McOptions, RowSelection};
pub use operators::{EigenDecomposition, SpectralChain, SymmetricOperator};
pub use percolation::{EdgeConfiguration, PercolationModel};
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type TwoPointMatrix64 = TwoPointMatrix<f64>;
pub type SizeResolvedFamily64 = SizeResolvedFamily<f64>;
pub type SymmetricOperator64 = SymmetricOperator<f64>;
pub type SymmetricOperator32 = SymmetricOperator<f32>;
pub type SpectralChain64 = SpectralChain<f64>;
pub type VertexVector64 = VertexVector<f64>;
