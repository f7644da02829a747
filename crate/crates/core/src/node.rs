//! Skip-list vertices and the canonical byte encoding that feeds their digests.
//!
//! Encoding (all integers big-endian, `W` = digest width):
//!
//! ```text
//! internal: 0x00 | level:u64 | rank:u64 | below:W | present:u8 | after:W (zeros if absent)
//! leaf:     0x01 | level:u64 | rank:u64 | present:u8 | after:W | length:u64 | block:W
//! sentinel: 0x02 | level:u64 | rank:u64 | present:u8 | after:W
//! ```

use std::fmt;

use crate::hash::{Digest, HashAlg};

pub const DOMAIN_INTERNAL: u8 = 0x00;
pub const DOMAIN_LEAF: u8 = 0x01;
pub const DOMAIN_SENTINEL: u8 = 0x02;

/// Tower levels are capped so a runaway coin stream cannot overflow anything.
pub const MAX_LEVEL: u8 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Content address of a data block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockRef(pub Digest);

impl BlockRef {
    pub fn of(alg: HashAlg, content: &[u8]) -> Self {
        BlockRef(alg.hash(content))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafPayload {
    pub block: BlockRef,
    pub length: u64,
    /// Reserved for homomorphic tags. Not part of the digest.
    pub tag: Option<Vec<u8>>,
}

impl LeafPayload {
    pub fn new(block: BlockRef, length: u64) -> Self {
        LeafPayload {
            block,
            length,
            tag: None,
        }
    }

    pub fn for_block(alg: HashAlg, content: &[u8]) -> Self {
        Self::new(BlockRef::of(alg, content), content.len() as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeBody {
    Internal { below: NodeId },
    Leaf(LeafPayload),
    /// Boundary leaf carrying no data (length 0).
    Sentinel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub level: u8,
    pub rank: u64,
    pub after: Option<NodeId>,
    pub body: NodeBody,
    pub digest: Digest,
    /// Commit that created this record.
    pub version: u64,
}

impl Node {
    pub fn below(&self) -> Option<NodeId> {
        match self.body {
            NodeBody::Internal { below } => Some(below),
            _ => None,
        }
    }

    pub fn is_internal(&self) -> bool {
        matches!(self.body, NodeBody::Internal { .. })
    }

    pub fn leaf(&self) -> Option<&LeafPayload> {
        match &self.body {
            NodeBody::Leaf(p) => Some(p),
            _ => None,
        }
    }

    /// Bytes owned by this node itself: the block length for leaves, zero otherwise.
    pub fn own_length(&self) -> u64 {
        match &self.body {
            NodeBody::Leaf(p) => p.length,
            _ => 0,
        }
    }
}

/// Child material hashed into a node digest.
#[derive(Clone, Copy, Debug)]
pub enum Material<'a> {
    Internal {
        below: &'a Digest,
        after: Option<&'a Digest>,
    },
    Leaf {
        after: Option<&'a Digest>,
        length: u64,
        block: &'a Digest,
    },
    Sentinel {
        after: Option<&'a Digest>,
    },
}

/// Canonical encoding of a node, the exact input to [`node_digest`].
pub fn encode_node(alg: HashAlg, level: u8, rank: u64, material: Material<'_>) -> Vec<u8> {
    let w = alg.width();
    let mut out = Vec::with_capacity(1 + 16 + 2 * w + 9);
    let domain = match material {
        Material::Internal { .. } => DOMAIN_INTERNAL,
        Material::Leaf { .. } => DOMAIN_LEAF,
        Material::Sentinel { .. } => DOMAIN_SENTINEL,
    };
    out.push(domain);
    out.extend_from_slice(&(level as u64).to_be_bytes());
    out.extend_from_slice(&rank.to_be_bytes());
    let push_after = |out: &mut Vec<u8>, after: Option<&Digest>| match after {
        Some(d) => {
            out.push(1);
            out.extend_from_slice(d.as_bytes());
        }
        None => {
            out.push(0);
            out.extend(std::iter::repeat_n(0u8, w));
        }
    };
    match material {
        Material::Internal { below, after } => {
            out.extend_from_slice(below.as_bytes());
            push_after(&mut out, after);
        }
        Material::Leaf {
            after,
            length,
            block,
        } => {
            push_after(&mut out, after);
            out.extend_from_slice(&length.to_be_bytes());
            out.extend_from_slice(block.as_bytes());
        }
        Material::Sentinel { after } => push_after(&mut out, after),
    }
    out
}

pub fn node_digest(alg: HashAlg, level: u8, rank: u64, material: Material<'_>) -> Digest {
    alg.hash(&encode_node(alg, level, rank, material))
}
