//! Challenge, proof and verification for provable data possession over
//! any set of versions.
//!
//! A challenge names versions and a sample count `r`. Each version's record
//! in the index authenticates its update region, and the verifier draws `r`
//! byte indices inside that region itself, so the prover cannot pick which
//! blocks to show. An empty version list means "the latest version, whole
//! file".
//!
//! Proof file layout (integers are 8-byte big-endian, digests raw):
//!
//! ```text
//! "FXP1"
//! section: len | count | per version: version | root_digest | start | length | index path | root opening
//! section: len | count | per sampled index: data path
//! section: len | count | per sampled index: block length | block bytes
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};
use crate::flexlist::SearchMode;
use crate::hash::{Digest, HashAlg};
use crate::index2::{verify_version, RecordClaim, VersionIndex};
use crate::level::Seed;
use crate::node::{node_digest, BlockRef, Material, NodeBody, NodeId};
use crate::proof::{fold, prove_path, LeafMaterial, PathProof, Reader, Summary, Writer};
use crate::store::NodeSource;

pub const PROOF_MAGIC: &[u8; 4] = b"FXP1";
const CHALLENGE_TAG: &[u8] = b"flexvault/challenge";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    pub seed: Seed,
    /// Indices sampled per challenged version.
    pub count: u64,
    /// Versions to audit; empty means the latest version over the whole file.
    #[serde(default)]
    pub versions: Vec<u64>,
}

/// Draws `ch.count` byte indices uniformly from `[start, start + length)`.
/// The stream for each version is independent.
pub fn expand_challenge(ch: &Challenge, version: u64, region: (u64, u64)) -> Result<Vec<u64>> {
    let (start, length) = region;
    if length == 0 {
        return Err(Error::EmptyRegion);
    }
    start
        .checked_add(length)
        .ok_or_else(|| Error::DomainError("region end overflows".into()))?;
    // Reject draws from the incomplete top bucket so every index is equally likely.
    let zone = u64::MAX - (u64::MAX % length);
    let mut out = Vec::with_capacity(ch.count as usize);
    let mut counter = 0u64;
    while (out.len() as u64) < ch.count {
        let mut h = Sha256::new();
        h.update(CHALLENGE_TAG);
        h.update(ch.seed.0);
        h.update(version.to_be_bytes());
        h.update(counter.to_be_bytes());
        counter += 1;
        let x = u64::from_be_bytes(h.finalize()[..8].try_into().expect("8 bytes"));
        if x < zone {
            out.push(start + x % length);
        }
    }
    Ok(out)
}

/// Probability that `r` uniform samples hit at least one of a fraction `f`
/// of corrupted blocks.
pub fn detection_probability(f: f64, r: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::DomainError(format!("fraction {f} outside [0, 1]")));
    }
    Ok(1.0 - (1.0 - f).powf(r as f64))
}

/// The root node of a data list, opened so the verifier learns its rank
/// (the file length) from the authenticated root digest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RootOpening {
    Internal { level: u8, below: Summary, after: Option<Summary> },
    Sentinel { after: Option<Summary> },
}

impl RootOpening {
    pub fn of<S: NodeSource + ?Sized>(src: &S, root: NodeId) -> Result<Self> {
        let n = src.node(root)?;
        let sum = |id: NodeId| -> Result<Summary> {
            let (rank, digest) = src.summary(id)?;
            Ok(Summary { rank, digest })
        };
        let after = n.after.map(sum).transpose()?;
        match n.body {
            NodeBody::Internal { below } => Ok(RootOpening::Internal {
                level: n.level,
                below: sum(below)?,
                after,
            }),
            NodeBody::Sentinel => Ok(RootOpening::Sentinel { after }),
            NodeBody::Leaf(_) => Err(Error::corrupt("a data leaf cannot be a root")),
        }
    }

    /// `(rank, digest)` of the opened node.
    pub fn label(&self, alg: HashAlg) -> Result<(u64, Digest)> {
        let after_rank = |a: &Option<Summary>| a.map_or(0, |s| s.rank);
        match self {
            RootOpening::Internal { level, below, after } => {
                if *level == 0 || *level > crate::node::MAX_LEVEL {
                    return Err(Error::ProofRejected("root level out of range".into()));
                }
                let rank = below
                    .rank
                    .checked_add(after_rank(after))
                    .ok_or_else(|| Error::ProofRejected("rank overflow".into()))?;
                let m = Material::Internal {
                    below: &below.digest,
                    after: after.as_ref().map(|a| &a.digest),
                };
                Ok((rank, node_digest(alg, *level, rank, m)))
            }
            RootOpening::Sentinel { after } => {
                let rank = after_rank(after);
                let m = Material::Sentinel {
                    after: after.as_ref().map(|a| &a.digest),
                };
                Ok((rank, node_digest(alg, 0, rank, m)))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VersionPart {
    pub claim: RecordClaim,
    pub index_path: PathProof,
    pub opening: RootOpening,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditProof {
    pub versions: Vec<VersionPart>,
    /// One path per sampled index, versions in order.
    pub paths: Vec<PathProof>,
    /// Content of each sampled block, parallel to `paths`.
    pub blocks: Vec<Vec<u8>>,
}

fn region_for(ch: &Challenge, claim: &RecordClaim, total: u64) -> (u64, u64) {
    if ch.versions.is_empty() {
        (0, total)
    } else {
        (claim.update_start, claim.update_length)
    }
}

fn sample(ch: &Challenge, version: u64, region: (u64, u64)) -> Result<Vec<u64>> {
    if region.1 == 0 {
        // Nothing changed in this version; it contributes no samples.
        return Ok(Vec::new());
    }
    expand_challenge(ch, version, region)
}

/// Assembles the proof for `ch`. `fetch` returns block content by address.
pub fn prove<S, F>(src: &S, index: &VersionIndex, ch: &Challenge, mut fetch: F) -> Result<AuditProof>
where
    S: NodeSource + ?Sized,
    F: FnMut(&BlockRef, u64) -> Result<Vec<u8>>,
{
    let versions = if ch.versions.is_empty() {
        vec![index.latest().ok_or(Error::NoSuchVersion(0))?.version]
    } else {
        ch.versions.clone()
    };
    let mut proof = AuditProof {
        versions: Vec::new(),
        paths: Vec::new(),
        blocks: Vec::new(),
    };
    for v in versions {
        let rec = index.record(v)?;
        let claim = RecordClaim::from(rec);
        let total = src.summary(rec.root)?.0;
        for i in sample(ch, v, region_for(ch, &claim, total))? {
            let path = prove_path(src, rec.root, i, SearchMode::Containing)?;
            let leaf = crate::flexlist::descend(src, rec.root, i, SearchMode::Containing)?.leaf;
            let payload = src
                .node(leaf)?
                .leaf()
                .cloned()
                .ok_or_else(|| Error::corrupt("sampled index hit a sentinel"))?;
            proof.blocks.push(fetch(&payload.block, payload.length)?);
            proof.paths.push(path);
        }
        proof.versions.push(VersionPart {
            claim,
            index_path: index.version_proof(src, v)?,
            opening: RootOpening::of(src, rec.root)?,
        });
    }
    Ok(proof)
}

fn reject(msg: impl Into<String>) -> Error {
    Error::ProofRejected(msg.into())
}

/// Checks `proof` against the client metadata. `Ok(())` means accept.
pub fn verify(alg: HashAlg, meta: &Digest, ch: &Challenge, proof: &AuditProof) -> Result<()> {
    let expected_versions = if ch.versions.is_empty() { 1 } else { ch.versions.len() };
    if proof.versions.len() != expected_versions {
        return Err(reject(format!(
            "proof covers {} versions, challenge names {expected_versions}",
            proof.versions.len()
        )));
    }
    if proof.blocks.len() != proof.paths.len() {
        return Err(reject("block count does not match path count"));
    }
    let mut next = 0usize;
    for (i, part) in proof.versions.iter().enumerate() {
        let claim = &part.claim;
        if let Some(&v) = ch.versions.get(i) {
            if claim.version != v {
                return Err(reject(format!("challenge names version {v}, proof shows {}", claim.version)));
            }
        }
        let count = verify_version(alg, meta, claim, &part.index_path)?;
        if ch.versions.is_empty() && count != claim.version + 1 {
            return Err(reject(format!("version {} is not the latest of {count}", claim.version)));
        }
        let (total, root_digest) = part.opening.label(alg)?;
        if root_digest != claim.root_digest {
            return Err(reject("root opening does not match the version record"));
        }
        let region = region_for(ch, claim, total);
        if region.0.checked_add(region.1).is_none_or(|end| end > total) {
            return Err(reject("update region lies outside the version"));
        }
        for idx in sample(ch, claim.version, region)? {
            let (Some(path), Some(block)) = (proof.paths.get(next), proof.blocks.get(next)) else {
                return Err(reject("proof is missing sampled paths"));
            };
            next += 1;
            if block.is_empty() {
                return Err(reject("empty block"));
            }
            let path = path.clone().with_leaf(block.len() as u64, alg.hash(block))?;
            let f = fold(alg, &path)?;
            if f.root_digest != claim.root_digest {
                return Err(reject(format!("block for index {idx} does not fold to version {}", claim.version)));
            }
            if !f.contains(idx) {
                return Err(reject(format!("proven block does not contain index {idx}")));
            }
        }
    }
    if next != proof.paths.len() {
        return Err(reject("proof carries unrequested paths"));
    }
    Ok(())
}

impl AuditProof {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = PROOF_MAGIC.to_vec();
        let mut sec = Writer::default();
        sec.u64(self.versions.len() as u64);
        for part in &self.versions {
            let c = &part.claim;
            sec.u64(c.version);
            sec.digest(&c.root_digest);
            sec.u64(c.update_start);
            sec.u64(c.update_length);
            part.index_path.encode(&mut sec, LeafMaterial::External);
            encode_opening(&mut sec, &part.opening);
        }
        push_section(&mut out, sec);

        let mut sec = Writer::default();
        sec.u64(self.paths.len() as u64);
        for p in &self.paths {
            p.encode(&mut sec, LeafMaterial::External);
        }
        push_section(&mut out, sec);

        let mut sec = Writer::default();
        sec.u64(self.blocks.len() as u64);
        for b in &self.blocks {
            sec.bytes(b);
        }
        push_section(&mut out, sec);
        out
    }

    pub fn decode(alg: HashAlg, data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data, "proof file");
        if r.take(4)? != PROOF_MAGIC {
            return Err(Error::format("proof file", "bad magic"));
        }

        let mut s = Reader::new(r.bytes()?, "version section");
        let n = s.count(1)?;
        let mut versions = Vec::with_capacity(n);
        for _ in 0..n {
            let claim = RecordClaim {
                version: s.u64()?,
                root_digest: s.digest(alg)?,
                update_start: s.u64()?,
                update_length: s.u64()?,
            };
            let index_path = PathProof::decode(&mut s, alg, LeafMaterial::External)?;
            let opening = decode_opening(&mut s, alg)?;
            versions.push(VersionPart {
                claim,
                index_path,
                opening,
            });
        }
        s.finish()?;

        let mut s = Reader::new(r.bytes()?, "path section");
        let n = s.count(1)?;
        let mut paths = Vec::with_capacity(n);
        for _ in 0..n {
            paths.push(PathProof::decode(&mut s, alg, LeafMaterial::External)?);
        }
        s.finish()?;

        let mut s = Reader::new(r.bytes()?, "block section");
        let n = s.count(8)?;
        let mut blocks = Vec::with_capacity(n);
        for _ in 0..n {
            blocks.push(s.bytes()?.to_vec());
        }
        s.finish()?;
        r.finish()?;
        Ok(AuditProof { versions, paths, blocks })
    }
}

/// Decodes and verifies a proof file. Format errors count as rejection.
pub fn verify_bytes(alg: HashAlg, meta: &Digest, ch: &Challenge, data: &[u8]) -> Result<()> {
    let proof = AuditProof::decode(alg, data).map_err(|e| reject(e.to_string()))?;
    verify(alg, meta, ch, &proof)
}

fn push_section(out: &mut Vec<u8>, sec: Writer) {
    out.extend_from_slice(&(sec.buf.len() as u64).to_be_bytes());
    out.extend_from_slice(&sec.buf);
}

fn encode_opening(w: &mut Writer, o: &RootOpening) {
    let opt = |w: &mut Writer, a: &Option<Summary>| match a {
        Some(s) => {
            w.u8(1);
            w.u64(s.rank);
            w.digest(&s.digest);
        }
        None => w.u8(0),
    };
    match o {
        RootOpening::Internal { level, below, after } => {
            w.u8(0);
            w.u8(*level);
            w.u64(below.rank);
            w.digest(&below.digest);
            opt(w, after);
        }
        RootOpening::Sentinel { after } => {
            w.u8(1);
            opt(w, after);
        }
    }
}

fn decode_opening(r: &mut Reader<'_>, alg: HashAlg) -> Result<RootOpening> {
    let opt = |r: &mut Reader<'_>| -> Result<Option<Summary>> {
        if r.flag()? {
            Ok(Some(Summary {
                rank: r.u64()?,
                digest: r.digest(alg)?,
            }))
        } else {
            Ok(None)
        }
    };
    match r.u8()? {
        0 => {
            let level = r.u8()?;
            let below = Summary {
                rank: r.u64()?,
                digest: r.digest(alg)?,
            };
            Ok(RootOpening::Internal {
                level,
                below,
                after: opt(r)?,
            })
        }
        1 => Ok(RootOpening::Sentinel { after: opt(r)? }),
        k => Err(Error::format("root opening", format!("unknown kind {k}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(seed: &str, count: u64) -> Challenge {
        Challenge {
            seed: seed.parse().unwrap(),
            count,
            versions: vec![],
        }
    }

    #[test]
    fn single_byte_region() {
        assert_eq!(expand_challenge(&ch("77", 3), 0, (0, 1)).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn deterministic_and_in_range() {
        let c = ch("0102", 500);
        let a = expand_challenge(&c, 4, (100, 50)).unwrap();
        assert_eq!(a, expand_challenge(&c, 4, (100, 50)).unwrap());
        assert!(a.iter().all(|i| (100..150).contains(i)));
        assert_ne!(a, expand_challenge(&c, 5, (100, 50)).unwrap());
        assert!(matches!(expand_challenge(&c, 0, (3, 0)), Err(Error::EmptyRegion)));
    }

    #[test]
    fn detection_probabilities() {
        let p = detection_probability(0.10, 20).unwrap();
        assert!((p - 0.8784).abs() < 1e-3);
        let p = detection_probability(0.10, 43).unwrap();
        assert!((p - 0.9892).abs() < 1e-3);
        assert_eq!(detection_probability(0.3, 0).unwrap(), 0.0);
        assert!(detection_probability(1.5, 3).is_err());
        assert!(detection_probability(-0.1, 3).is_err());
    }

    #[test]
    fn challenge_json_round_trip() {
        let c = Challenge {
            seed: "abcdef".parse().unwrap(),
            count: 20,
            versions: vec![1, 3],
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"00000000000000abcdef\""));
        assert_eq!(serde_json::from_str::<Challenge>(&s).unwrap(), c);
    }
}
