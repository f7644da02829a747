//! Versioned, auditable block store.
//!
//! Each version of a file is a persistent authenticated skip list over its
//! blocks; versions share unchanged nodes. A second list indexes the
//! versions, and a single digest over it lets a client audit any version by
//! random sampling.

pub mod adaptor;
pub mod audit;
pub mod error;
pub mod flexlist;
pub mod hash;
pub mod index2;
pub mod level;
pub mod node;
pub mod persist;
pub mod proof;
pub mod repo;
pub mod store;

pub use error::{Error, Result};
pub use hash::{Digest, HashAlg};
pub use node::{BlockRef, LeafPayload, Node, NodeBody, NodeId};
