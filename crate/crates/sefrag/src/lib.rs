//! Fragmentation-based selective encryption.
//!
//! Byte streams (or bitmap images) are cut into 8x8 blocks, transformed into
//! a frequency-domain representation, and split into a small private fragment
//! plus larger public fragments. The private fragment is encrypted with a
//! full cipher; the public fragments are XOR-masked with hash-derived
//! keystreams, which makes them safe to park on untrusted storage while
//! keeping the whole scheme cheap. A statistical battery and a benchmark
//! harness measure the protection and the cost.

pub mod analysis;
pub mod bench;
pub mod bitpack;
pub mod blob;
pub mod bmp;
pub mod cipher;
pub mod container;
pub mod dct;
pub mod dispersion;
pub mod dwt;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod pipeline;
pub mod protect_dct;
pub mod protect_dwt;

pub use error::{Error, Result};
pub use model::{ByteMatrix, SchemeId, SecretKey};
