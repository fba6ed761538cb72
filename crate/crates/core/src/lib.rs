//! Analysis toolkit for countably-piecewise-monotone Markov interval maps
//! and the infinite nonnegative transition matrices they generate.
//!
//! The crate is organized around a pipeline:
//!
//! * [`matrix`] — descriptors for countably-indexed nonnegative integer
//!   matrices (finite exceptional block + parametric tail rule), finite
//!   truncations, column norms, shortest-path structure.
//! * [`coeffs`] — exact big-integer path-count coefficient families
//!   (`m`, first-entrance `f`, last-exit `l`, taboo, taboo-set) together
//!   with a brute-force enumeration oracle and convolution identities.
//! * [`spectral`] — Perron value estimation via truncation schedules,
//!   growth-rate fits and guarded power-series evaluation.
//! * [`classify`] — the Vere-Jones classification (transient / null
//!   recurrent / weakly recurrent / strongly recurrent), both as a numeric
//!   Table-1 engine and as exact closed-form family backends.
//! * [`solve`] — eigenvalue equation `Mv = λv`: banded recurrence solver,
//!   truncated nonnegative solver, summability and subinvariance checks.
//! * [`maps`] — piecewise-affine interval maps with countable Markov
//!   partitions: transition-matrix extraction, window perturbations,
//!   constant-slope conjugacy construction, and a gallery of reference
//!   families.
//!
//! All coefficient arithmetic is exact (`num-bigint`); floating point is
//! confined to spectral estimates and map geometry, where tolerances are
//! explicit.

pub mod classify;
pub mod coeffs;
pub mod error;
pub mod index;
pub mod maps;
pub mod matrix;
pub mod solve;
pub mod spectral;

pub use classify::{Confidence, FamilyDescriptor, VereJonesClass, VereJonesVerdict};
pub use coeffs::{CoeffKind, CoeffTable};
pub use error::{Error, Result};
pub use index::IndexSet;
pub use matrix::{ColumnNorm, CountableMatrix, FiniteMatrix, RowFormula, Sequence, TailRule};
pub use maps::{ConstantSlopeMap, MarkovMapDescriptor};
pub use solve::LambdaSolution;
pub use spectral::{SeriesEval, SpectralSummary};
