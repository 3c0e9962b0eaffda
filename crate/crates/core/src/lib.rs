//! Analysis toolkit for free-association "body image" studies of robots.
//!
//! Participants rate how much they would like robotic assistance across twelve
//! settings, then type six words for each of ten robot images. This crate turns
//! those responses into:
//!
//! - normalized word tokens ([`normalize`]),
//! - per-robot mean embedding vectors and a k-nearest-neighbour graph with
//!   cliques and hierarchical clusters ([`embedding`], [`semantics`]),
//! - valence/arousal/dominance aggregates and their distance-matched baselines
//!   ([`affect`], [`semantics::human`]),
//! - random-intercept mixed models with likelihood-ratio tests ([`lme`]),
//! - CSV/DOT/SVG report bundles ([`report`]).
//!
//! [`synth`] generates datasets with planted effects for validation.

pub mod affect;
pub mod corpus;
pub mod embedding;
pub mod lme;
pub mod normalize;
pub mod report;
pub mod semantics;
pub mod synth;

/// Stable, machine-readable error identification shared by every module error.
pub trait ErrorCode {
    /// Identifier of the form `module.kind`, stable across releases.
    fn code(&self) -> &'static str;
}
