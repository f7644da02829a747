//! Root-to-leaf path proofs and their binary encoding.
//!
//! A path proof lists, top-down, what a verifier needs to rebuild each node
//! digest on the way from a leaf back to the root: the node's level and the
//! `(rank, digest)` summary of the child the path did not take. Ranks of the
//! path nodes themselves are recomputed, never transmitted, so every byte of
//! a proof feeds some digest.

use crate::error::{Error, Result};
use crate::flexlist::{descend, Direction, SearchMode};
use crate::hash::{Digest, HashAlg};
use crate::node::{node_digest, Material, NodeBody, NodeId, MAX_LEVEL};
use crate::store::NodeSource;

/// `(rank, digest)` of a subtree the path does not enter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Summary {
    pub rank: u64,
    pub digest: Digest,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    /// Internal node, path continues below.
    Below { level: u8, after: Option<Summary> },
    /// Internal node, path continues after.
    After { level: u8, below: Summary },
    /// Leaf passed over; path continues after.
    PassLeaf { length: u64, block: Digest },
    /// Sentinel passed over; path continues after.
    PassSentinel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Terminal {
    Leaf { length: u64, block: Digest, after: Option<Summary> },
    Sentinel { after: Option<Summary> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathProof {
    pub steps: Vec<Step>,
    pub terminal: Terminal,
}

/// What a verified path reveals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Folded {
    pub root_rank: u64,
    pub root_digest: Digest,
    /// Byte offset of the terminal node.
    pub offset: u64,
    /// Length of the terminal node (0 for a sentinel).
    pub length: u64,
}

impl Folded {
    pub fn contains(&self, index: u64) -> bool {
        self.offset <= index && index - self.offset < self.length
    }
}

fn summary_of<S: NodeSource + ?Sized>(src: &S, id: NodeId) -> Result<Summary> {
    let (rank, digest) = src.summary(id)?;
    Ok(Summary { rank, digest })
}

/// Records the path `descend` takes towards `index`.
pub fn prove_path<S: NodeSource + ?Sized>(src: &S, root: NodeId, index: u64, mode: SearchMode) -> Result<PathProof> {
    let path = descend(src, root, index, mode)?;
    let mut steps = Vec::with_capacity(path.steps.len());
    for &(id, dir) in &path.steps {
        let n = src.node(id)?;
        let step = match (&n.body, dir) {
            (NodeBody::Internal { .. }, Direction::Below) => Step::Below {
                level: n.level,
                after: n.after.map(|a| summary_of(src, a)).transpose()?,
            },
            (NodeBody::Internal { below }, Direction::After) => Step::After {
                level: n.level,
                below: summary_of(src, *below)?,
            },
            (NodeBody::Leaf(p), Direction::After) => Step::PassLeaf {
                length: p.length,
                block: p.block.0,
            },
            (NodeBody::Sentinel, Direction::After) => Step::PassSentinel,
            _ => return Err(Error::corrupt(format!("{id} cannot move below"))),
        };
        steps.push(step);
    }
    let n = src.node(path.leaf)?;
    let after = n.after.map(|a| summary_of(src, a)).transpose()?;
    let terminal = match &n.body {
        NodeBody::Leaf(p) => Terminal::Leaf {
            length: p.length,
            block: p.block.0,
            after,
        },
        NodeBody::Sentinel => Terminal::Sentinel { after },
        NodeBody::Internal { .. } => return Err(Error::corrupt("path ended on an internal node")),
    };
    Ok(PathProof { steps, terminal })
}

fn reject(msg: impl Into<String>) -> Error {
    Error::ProofRejected(msg.into())
}

fn add(a: u64, b: u64) -> Result<u64> {
    a.checked_add(b).ok_or_else(|| reject("rank overflow"))
}

fn check_level(level: u8) -> Result<()> {
    if level == 0 || level > MAX_LEVEL {
        return Err(reject(format!("internal level {level} out of range")));
    }
    Ok(())
}

fn check_width(alg: HashAlg, d: &Digest) -> Result<()> {
    if d.len() != alg.width() {
        return Err(reject("digest width does not match the hash function"));
    }
    Ok(())
}

/// Recomputes the root digest and the terminal's position from a path proof.
pub fn fold(alg: HashAlg, proof: &PathProof) -> Result<Folded> {
    let (mut rank, mut digest, length) = match &proof.terminal {
        Terminal::Leaf { length, block, after } => {
            if *length == 0 {
                return Err(reject("zero-length leaf"));
            }
            check_width(alg, block)?;
            let rank = add(*length, after.map_or(0, |a| a.rank))?;
            let material = Material::Leaf {
                after: after.as_ref().map(|a| &a.digest),
                length: *length,
                block,
            };
            (rank, node_digest(alg, 0, rank, material), *length)
        }
        Terminal::Sentinel { after } => {
            let rank = after.map_or(0, |a| a.rank);
            let material = Material::Sentinel {
                after: after.as_ref().map(|a| &a.digest),
            };
            (rank, node_digest(alg, 0, rank, material), 0)
        }
    };
    let mut offset = 0u64;
    let mut child_level = 0u8;
    for step in proof.steps.iter().rev() {
        let child = Summary { rank, digest };
        let (level, r, d) = match step {
            Step::Below { level, after } => {
                check_level(*level)?;
                if *level <= child_level {
                    return Err(reject("below link does not descend"));
                }
                let r = add(child.rank, after.map_or(0, |a| a.rank))?;
                let m = Material::Internal {
                    below: &child.digest,
                    after: after.as_ref().map(|a| &a.digest),
                };
                (*level, r, node_digest(alg, *level, r, m))
            }
            Step::After { level, below } => {
                check_level(*level)?;
                if *level < child_level {
                    return Err(reject("after link climbs"));
                }
                offset = add(offset, below.rank)?;
                let r = add(below.rank, child.rank)?;
                let m = Material::Internal {
                    below: &below.digest,
                    after: Some(&child.digest),
                };
                (*level, r, node_digest(alg, *level, r, m))
            }
            Step::PassLeaf { length, block } => {
                if *length == 0 || child_level != 0 {
                    return Err(reject("malformed leaf step"));
                }
                check_width(alg, block)?;
                offset = add(offset, *length)?;
                let r = add(*length, child.rank)?;
                let m = Material::Leaf {
                    after: Some(&child.digest),
                    length: *length,
                    block,
                };
                (0, r, node_digest(alg, 0, r, m))
            }
            Step::PassSentinel => {
                if child_level != 0 {
                    return Err(reject("malformed sentinel step"));
                }
                let m = Material::Sentinel {
                    after: Some(&child.digest),
                };
                (0, child.rank, node_digest(alg, 0, child.rank, m))
            }
        };
        rank = r;
        digest = d;
        child_level = level;
    }
    Ok(Folded {
        root_rank: rank,
        root_digest: digest,
        offset,
        length,
    })
}

/// Big-endian writer for proof files.
#[derive(Default)]
pub struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn digest(&mut self, d: &Digest) {
        self.buf.extend_from_slice(d.as_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
    }

    fn summary(&mut self, s: &Summary) {
        self.u64(s.rank);
        self.digest(&s.digest);
    }

    fn opt_summary(&mut self, s: &Option<Summary>) {
        match s {
            Some(s) => {
                self.u8(1);
                self.summary(s);
            }
            None => self.u8(0),
        }
    }
}

/// Strict reader: every read is bounds-checked and callers must end with [`Reader::finish`].
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    fn err(&self, detail: impl Into<String>) -> Error {
        Error::format(self.what, format!("{} at byte {}", detail.into(), self.pos))
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_be_bytes(b.try_into().expect("8 bytes")))
    }

    /// A count of items that each need at least `min_item` bytes.
    pub fn count(&mut self, min_item: usize) -> Result<usize> {
        let n = self.u64()?;
        let left = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(min_item.max(1) as u64) > left {
            return Err(self.err(format!("count {n} exceeds the remaining input")));
        }
        Ok(n as usize)
    }

    pub fn digest(&mut self, alg: HashAlg) -> Result<Digest> {
        let b = self.take(alg.width())?;
        Ok(Digest::from_slice(b).expect("digest width"))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.count(1)?;
        self.take(n)
    }

    pub fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(self.err(format!("bad presence byte {b:#04x}"))),
        }
    }

    fn summary(&mut self, alg: HashAlg) -> Result<Summary> {
        let rank = self.u64()?;
        let digest = self.digest(alg)?;
        Ok(Summary { rank, digest })
    }

    fn opt_summary(&mut self, alg: HashAlg) -> Result<Option<Summary>> {
        if self.flag()? {
            Ok(Some(self.summary(alg)?))
        } else {
            Ok(None)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn finish(self) -> Result<()> {
        if !self.is_empty() {
            return Err(self.err("trailing bytes"));
        }
        Ok(())
    }
}

const STEP_BELOW: u8 = 0;
const STEP_AFTER: u8 = 1;
const STEP_PASS_LEAF: u8 = 2;
const STEP_PASS_SENTINEL: u8 = 3;
const TERM_LEAF: u8 = 0;
const TERM_SENTINEL: u8 = 1;

/// Whether a terminal leaf's length and block digest travel with the path
/// or are supplied from elsewhere (the block bytes, a version record).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafMaterial {
    Inline,
    External,
}

impl PathProof {
    pub fn encode(&self, w: &mut Writer, material: LeafMaterial) {
        w.u64(self.steps.len() as u64);
        for s in &self.steps {
            match s {
                Step::Below { level, after } => {
                    w.u8(STEP_BELOW);
                    w.u8(*level);
                    w.opt_summary(after);
                }
                Step::After { level, below } => {
                    w.u8(STEP_AFTER);
                    w.u8(*level);
                    w.summary(below);
                }
                Step::PassLeaf { length, block } => {
                    w.u8(STEP_PASS_LEAF);
                    w.u64(*length);
                    w.digest(block);
                }
                Step::PassSentinel => w.u8(STEP_PASS_SENTINEL),
            }
        }
        match &self.terminal {
            Terminal::Leaf { length, block, after } => {
                w.u8(TERM_LEAF);
                if material == LeafMaterial::Inline {
                    w.u64(*length);
                    w.digest(block);
                }
                w.opt_summary(after);
            }
            Terminal::Sentinel { after } => {
                w.u8(TERM_SENTINEL);
                w.opt_summary(after);
            }
        }
    }

    /// Decodes a path. With external leaf material the terminal leaf comes
    /// back with length 0 and a zero digest for the caller to fill in.
    pub fn decode(r: &mut Reader<'_>, alg: HashAlg, material: LeafMaterial) -> Result<PathProof> {
        let n = r.count(1)?;
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            let step = match r.u8()? {
                STEP_BELOW => Step::Below {
                    level: r.u8()?,
                    after: r.opt_summary(alg)?,
                },
                STEP_AFTER => Step::After {
                    level: r.u8()?,
                    below: r.summary(alg)?,
                },
                STEP_PASS_LEAF => Step::PassLeaf {
                    length: r.u64()?,
                    block: r.digest(alg)?,
                },
                STEP_PASS_SENTINEL => Step::PassSentinel,
                k => return Err(Error::format("proof", format!("unknown step kind {k}"))),
            };
            steps.push(step);
        }
        let terminal = match r.u8()? {
            TERM_LEAF => {
                let (length, block) = match material {
                    LeafMaterial::Inline => (r.u64()?, r.digest(alg)?),
                    LeafMaterial::External => (0, alg.zero()),
                };
                Terminal::Leaf {
                    length,
                    block,
                    after: r.opt_summary(alg)?,
                }
            }
            TERM_SENTINEL => Terminal::Sentinel {
                after: r.opt_summary(alg)?,
            },
            k => return Err(Error::format("proof", format!("unknown terminal kind {k}"))),
        };
        Ok(PathProof { steps, terminal })
    }

    /// Fills in external terminal material.
    pub fn with_leaf(mut self, len: u64, digest: Digest) -> Result<PathProof> {
        match &mut self.terminal {
            Terminal::Leaf { length, block, .. } => {
                *length = len;
                *block = digest;
                Ok(self)
            }
            Terminal::Sentinel { .. } => Err(reject("expected a leaf, found a sentinel")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flexlist::build_with_levels;
    use crate::node::LeafPayload;
    use crate::store::NodeArena;

    fn sample() -> (NodeArena, NodeId, Vec<u64>) {
        let alg = HashAlg::Sha1;
        let mut a = NodeArena::new(alg);
        let lens = [3u64, 9, 1, 4, 7, 2, 8, 5];
        let levels = [0u8, 2, 1, 0, 3, 0, 1, 2];
        let blocks: Vec<_> = lens
            .iter()
            .zip(levels)
            .enumerate()
            .map(|(i, (l, h))| (LeafPayload::for_block(alg, &vec![i as u8; *l as usize]), h))
            .collect();
        let root = build_with_levels(&mut a, &blocks, 0).unwrap();
        (a, root, lens.to_vec())
    }

    #[test]
    fn every_index_folds_to_root() {
        let (a, root, lens) = sample();
        let total: u64 = lens.iter().sum();
        let rd = a.node(root).unwrap().digest;
        for i in 0..total {
            let p = prove_path(&a, root, i, SearchMode::Containing).unwrap();
            let f = fold(HashAlg::Sha1, &p).unwrap();
            assert_eq!(f.root_digest, rd);
            assert_eq!(f.root_rank, total);
            assert!(f.contains(i));
        }
        for i in 0..=total {
            let p = prove_path(&a, root, i, SearchMode::Boundary).unwrap();
            let f = fold(HashAlg::Sha1, &p).unwrap();
            assert_eq!(f.root_digest, rd);
            assert!(f.offset + f.length >= i && (f.offset < i || i == 0));
        }
    }

    #[test]
    fn boundary_path_ends_before_index() {
        let (a, root, lens) = sample();
        let mut start = 0;
        for l in &lens {
            let p = prove_path(&a, root, start, SearchMode::Boundary).unwrap();
            let f = fold(HashAlg::Sha1, &p).unwrap();
            assert_eq!(f.offset + f.length, start);
            start += l;
        }
    }

    #[test]
    fn codec_round_trip() {
        let (a, root, _) = sample();
        for material in [LeafMaterial::Inline, LeafMaterial::External] {
            for i in [0u64, 5, 20, 38] {
                let p = prove_path(&a, root, i, SearchMode::Containing).unwrap();
                let mut w = Writer::default();
                p.encode(&mut w, material);
                let mut r = Reader::new(&w.buf, "proof");
                let q = PathProof::decode(&mut r, HashAlg::Sha1, material).unwrap();
                r.finish().unwrap();
                match material {
                    LeafMaterial::Inline => assert_eq!(p, q),
                    LeafMaterial::External => {
                        let Terminal::Leaf { length, block, .. } = p.terminal else { panic!() };
                        assert_eq!(p, q.with_leaf(length, block).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn tampered_sibling_changes_root() {
        let (a, root, _) = sample();
        let rd = a.node(root).unwrap().digest;
        let mut p = prove_path(&a, root, 20, SearchMode::Containing).unwrap();
        for s in p.steps.iter_mut() {
            if let Step::After { below, .. } = s {
                below.rank += 1;
                break;
            }
        }
        assert_ne!(fold(HashAlg::Sha1, &p).unwrap().root_digest, rd);
    }
}
