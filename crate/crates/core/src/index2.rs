//! The version index: a second list whose leaves are version records.
//!
//! Each leaf has length 1, so the byte index of a record equals its version
//! number. The leaf's block digest is the record digest
//!
//! ```text
//! H(0x03 | version:u64 | root_digest | update_start:u64 | update_length:u64)
//! ```
//!
//! and the digest of the index root is the client's metadata.

use crate::error::{Error, Result};
use crate::flexlist::{self, SearchMode};
use crate::hash::{Digest, HashAlg};
use crate::level::{LevelDomain, LevelSource, Seed};
use crate::node::{BlockRef, LeafPayload, NodeId};
use crate::persist::pinsert;
use crate::proof::{fold, prove_path, PathProof};
use crate::store::{NodeArena, NodeSource, Staging};

pub const DOMAIN_RECORD: u8 = 0x03;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VersionRecord {
    pub version: u64,
    /// Data list root of this version.
    pub root: NodeId,
    pub root_digest: Digest,
    pub update_start: u64,
    pub update_length: u64,
}

impl VersionRecord {
    pub fn digest(&self, alg: HashAlg) -> Digest {
        record_digest(alg, self.version, &self.root_digest, self.update_start, self.update_length)
    }
}

pub fn record_digest(alg: HashAlg, version: u64, root_digest: &Digest, start: u64, length: u64) -> Digest {
    alg.hash_parts(&[
        &[DOMAIN_RECORD],
        &version.to_be_bytes(),
        root_digest.as_bytes(),
        &start.to_be_bytes(),
        &length.to_be_bytes(),
    ])
}

/// Leaf payload that stands for a record inside the index list.
pub fn record_payload(digest: Digest) -> LeafPayload {
    LeafPayload::new(BlockRef(digest), 1)
}

/// Level source for the index tower of the record appended at position `count`.
pub fn index_levels(seed: Seed, count: u64) -> LevelSource {
    LevelSource::at(seed, LevelDomain::Index, count)
}

#[derive(Clone, Debug)]
pub struct VersionIndex {
    seed: Seed,
    empty_root: NodeId,
    records: Vec<VersionRecord>,
    /// Index root after each append.
    roots: Vec<NodeId>,
}

impl VersionIndex {
    /// Creates an empty index, storing its sentinels in `store`.
    pub fn new(store: &mut NodeArena, seed: Seed) -> Result<Self> {
        let empty_root = flexlist::build_with_levels(store, &[], 0)?;
        Ok(VersionIndex {
            seed,
            empty_root,
            records: Vec::new(),
            roots: Vec::new(),
        })
    }

    /// Reassembles an index from persisted parts.
    pub fn restore(seed: Seed, empty_root: NodeId, records: Vec<VersionRecord>, roots: Vec<NodeId>) -> Result<Self> {
        if records.len() != roots.len() {
            return Err(Error::corrupt("index roots and records disagree"));
        }
        for (i, r) in records.iter().enumerate() {
            if r.version != i as u64 {
                return Err(Error::VersionOutOfOrder {
                    expected: i as u64,
                    got: r.version,
                });
            }
        }
        Ok(VersionIndex {
            seed,
            empty_root,
            records,
            roots,
        })
    }

    pub fn len(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn empty_root(&self) -> NodeId {
        self.empty_root
    }

    pub fn records(&self) -> &[VersionRecord] {
        &self.records
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn record(&self, v: u64) -> Result<&VersionRecord> {
        self.records.get(v as usize).ok_or(Error::NoSuchVersion(v))
    }

    pub fn latest(&self) -> Option<&VersionRecord> {
        self.records.last()
    }

    /// Current index root.
    pub fn root(&self) -> NodeId {
        self.roots.last().copied().unwrap_or(self.empty_root)
    }

    /// The client metadata: digest of the current index root.
    pub fn meta<S: NodeSource + ?Sized>(&self, src: &S) -> Result<Digest> {
        Ok(src.node(self.root())?.digest)
    }

    /// Appends `rec`, which must carry the next version number.
    pub fn append_version(&mut self, store: &mut NodeArena, rec: VersionRecord) -> Result<Digest> {
        let expected = self.len();
        if rec.version != expected {
            return Err(Error::VersionOutOfOrder {
                expected,
                got: rec.version,
            });
        }
        let alg = store.alg();
        let level = index_levels(self.seed, expected).peek();
        let root = self.root();
        let staged = {
            let mut st = Staging::new(&*store, rec.version);
            let new = pinsert(&mut st, root, expected, record_payload(rec.digest(alg)), level)?;
            st.finish(new)?
        };
        store.extend(staged.first, staged.nodes)?;
        self.roots.push(staged.root);
        self.records.push(rec);
        self.meta(store)
    }

    /// Membership proof of version `v` against the current index root.
    pub fn version_proof<S: NodeSource + ?Sized>(&self, src: &S, v: u64) -> Result<PathProof> {
        self.record(v)?;
        prove_path(src, self.root(), v, SearchMode::Containing)
    }

    /// Proof of the insertion frontier for the next append.
    pub fn append_proof<S: NodeSource + ?Sized>(&self, src: &S) -> Result<PathProof> {
        prove_path(src, self.root(), self.len(), SearchMode::Boundary)
    }
}

/// Record fields as carried inside a proof.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordClaim {
    pub version: u64,
    pub root_digest: Digest,
    pub update_start: u64,
    pub update_length: u64,
}

impl From<&VersionRecord> for RecordClaim {
    fn from(r: &VersionRecord) -> Self {
        RecordClaim {
            version: r.version,
            root_digest: r.root_digest,
            update_start: r.update_start,
            update_length: r.update_length,
        }
    }
}

impl RecordClaim {
    pub fn digest(&self, alg: HashAlg) -> Digest {
        record_digest(alg, self.version, &self.root_digest, self.update_start, self.update_length)
    }
}

/// Checks that `claim` sits at position `claim.version` of the index whose
/// root digest is `meta`. Returns the number of versions in that index.
pub fn verify_version(alg: HashAlg, meta: &Digest, claim: &RecordClaim, proof: &PathProof) -> Result<u64> {
    let proof = proof.clone().with_leaf(1, claim.digest(alg))?;
    let f = fold(alg, &proof)?;
    if f.root_digest != *meta {
        return Err(Error::ProofRejected("version record does not fold to the metadata".into()));
    }
    if f.offset != claim.version {
        return Err(Error::ProofRejected(format!(
            "record proven at position {}, claimed version {}",
            f.offset, claim.version
        )));
    }
    Ok(f.root_rank)
}
