//! Self-Reflective Risk-Aware Cognition (SRAC) over bag-of-words observations.
//!
//! The crate covers the full pipeline:
//!
//! - [`corpus`] — vocabularies, observations, labeled corpora, dataset
//!   splitting, and seeded synthetic-observation generators.
//! - [`lda`] — latent Dirichlet allocation with collapsed Gibbs training
//!   and per-observation activity-distribution inference.
//! - [`reflection`] — the interpretability indicator `I_I`, the
//!   generalizability indicator `I_G`, accuracy, and per-visual-word
//!   perplexity (`Pvwp`) via the left-to-right particle estimator.
//! - [`risk`] — risk matrices and the self-reflective risk-aware action
//!   selector that blends activity-independent and activity-dependent
//!   risk by `I_G`.
//! - [`experiments`] — scripted experiment protocols (exhaustive,
//!   non-exhaustive, overlap sweep, semi-exhaustive, decision simulation)
//!   with reproducible CSV/JSON reports.
//!
//! Every randomized operation is a pure function of its inputs and an
//! explicit 64-bit seed; see [`seeds`] for the derivation rule.

pub mod corpus;
pub mod experiments;
pub mod lda;
pub mod reflection;
pub mod risk;
pub mod seeds;
