//! Locally repairable codes and their global-merge conversions.
//!
//! The crate builds optimal-distance (k, g, r, δ) LRCs, models stable
//! conversions that merge λ initial codewords into one final codeword,
//! accounts the read bandwidth of a conversion exactly, and checks that
//! bandwidth against the information-theoretic lower bound. Entropies of
//! linear views of a uniform message are computed exactly as matrix ranks,
//! which lets the structural inequalities behind the bound be checked on
//! concrete instances.

pub mod bounds;
pub mod conversion;
pub mod entropy;
pub mod error;
pub mod galois;
pub mod lrc;
mod search;

pub use bounds::{BoundCase, BoundReport, DownloadEntropies};
pub use conversion::{
    BandwidthReport, ConversionProcedure, ConvertiblePair, DownloadPlan, MergeSpec, NodeRole,
    NodeRoles,
};
pub use error::{Error, Result};
pub use galois::{Element, Field, FieldMatrix, FieldSpec};
pub use lrc::{Codeword, DistanceReport, LrcCode, LrcParams, NodeIndex, NodeKind};
pub use search::binomial;
