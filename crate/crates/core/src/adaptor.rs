//! Client-side machinery: byte-range diffs, their translation into block
//! operations, and a partial list rebuilt from path proofs on which the
//! client replays a commit to predict the server's new metadata.
//!
//! Diff file records (indices and lengths in decimal, payload bytes raw and
//! optionally followed by one newline):
//!
//! ```text
//! I <index> <len>\n<bytes>
//! D <index> <len>\n
//! R <index> <dlen> <ilen>\n<bytes>
//! ```
//!
//! Indices refer to the original file, as in a patch.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::flexlist::{compute_label, SearchMode};
use crate::hash::{Digest, HashAlg};
use crate::index2::{index_levels, record_digest, record_payload, verify_version, RecordClaim, VersionIndex};
use crate::level::{LevelDomain, LevelSource, Seed};
use crate::node::{BlockRef, LeafPayload, Node, NodeBody, NodeId};
use crate::persist::{apply_in, pinsert, BlockOp};
use crate::proof::{fold, prove_path, LeafMaterial, PathProof, Reader, Step, Summary, Terminal, Writer};
use crate::store::{NodeSource, Staging};

/// Inputs above this size are refused by [`byte_diff`].
pub const MAX_DIFF_INPUT: usize = 16 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiffEntry {
    Insert { at: u64, bytes: Vec<u8> },
    Delete { at: u64, len: u64 },
    Replace { at: u64, len: u64, bytes: Vec<u8> },
}

impl DiffEntry {
    pub fn at(&self) -> u64 {
        match self {
            DiffEntry::Insert { at, .. } | DiffEntry::Delete { at, .. } | DiffEntry::Replace { at, .. } => *at,
        }
    }

    pub fn deleted(&self) -> u64 {
        match self {
            DiffEntry::Insert { .. } => 0,
            DiffEntry::Delete { len, .. } | DiffEntry::Replace { len, .. } => *len,
        }
    }

    pub fn inserted(&self) -> &[u8] {
        match self {
            DiffEntry::Insert { bytes, .. } | DiffEntry::Replace { bytes, .. } => bytes,
            DiffEntry::Delete { .. } => &[],
        }
    }

    /// End of the original range this entry consumes.
    pub fn end(&self) -> u64 {
        self.at() + self.deleted()
    }
}

/// Checks ordering, overlap and bounds against a file of `len` bytes.
pub fn validate(diffs: &[DiffEntry], len: u64) -> Result<()> {
    let mut prev: Option<&DiffEntry> = None;
    for d in diffs {
        let empty = match d {
            DiffEntry::Insert { bytes, .. } => bytes.is_empty(),
            DiffEntry::Delete { len, .. } => *len == 0,
            DiffEntry::Replace { len, bytes, .. } => *len == 0 || bytes.is_empty(),
        };
        if empty {
            return Err(Error::DiffOutOfRange(format!("empty entry at {}", d.at())));
        }
        if d.at().checked_add(d.deleted()).is_none_or(|e| e > len) {
            return Err(Error::DiffOutOfRange(format!("entry at {} runs past the end ({len})", d.at())));
        }
        if let Some(p) = prev {
            // Two entries may touch, but not share a position where either inserts.
            if d.at() < p.end() || (d.at() == p.at() && p.end() == p.at()) {
                return Err(Error::OverlappingDiffs(d.at()));
            }
        }
        prev = Some(d);
    }
    Ok(())
}

/// Byte-level application: the reference semantics of a diff.
pub fn apply_diffs(data: &[u8], diffs: &[DiffEntry]) -> Result<Vec<u8>> {
    validate(diffs, data.len() as u64)?;
    let mut out = Vec::with_capacity(data.len());
    let mut pos = 0usize;
    for d in diffs {
        let at = d.at() as usize;
        out.extend_from_slice(&data[pos..at]);
        out.extend_from_slice(d.inserted());
        pos = at + d.deleted() as usize;
    }
    out.extend_from_slice(&data[pos..]);
    Ok(out)
}

pub fn parse_diff(input: &[u8]) -> Result<Vec<DiffEntry>> {
    let mut out = Vec::new();
    let mut pos = 0usize;
    let bad = |detail: String| Error::format("diff", detail);
    while pos < input.len() {
        let nl = input[pos..]
            .iter()
            .position(|b| *b == b'\n')
            .map(|i| pos + i)
            .ok_or_else(|| bad(format!("unterminated header at byte {pos}")))?;
        let header = std::str::from_utf8(&input[pos..nl]).map_err(|_| bad(format!("header at byte {pos} is not text")))?;
        pos = nl + 1;
        let mut parts = header.split_ascii_whitespace();
        let kind = parts.next().ok_or_else(|| bad(format!("empty header before byte {pos}")))?;
        let nums: Vec<u64> = parts
            .map(|p| p.parse::<u64>().map_err(|_| bad(format!("bad number {p:?}"))))
            .collect::<Result<_>>()?;
        let mut payload = |n: u64| -> Result<Vec<u8>> {
            let n = usize::try_from(n).map_err(|_| bad("payload too large".into()))?;
            if input.len() - pos < n {
                return Err(bad(format!("payload truncated at byte {pos}")));
            }
            let b = input[pos..pos + n].to_vec();
            pos += n;
            if input.get(pos) == Some(&b'\n') {
                pos += 1;
            }
            Ok(b)
        };
        let entry = match (kind, nums.as_slice()) {
            ("I", [at, len]) => DiffEntry::Insert {
                at: *at,
                bytes: payload(*len)?,
            },
            ("D", [at, len]) => DiffEntry::Delete { at: *at, len: *len },
            ("R", [at, dlen, ilen]) => DiffEntry::Replace {
                at: *at,
                len: *dlen,
                bytes: payload(*ilen)?,
            },
            _ => return Err(bad(format!("unrecognised record {header:?}"))),
        };
        out.push(entry);
    }
    Ok(out)
}

pub fn write_diff(diffs: &[DiffEntry]) -> Vec<u8> {
    let mut out = Vec::new();
    for d in diffs {
        match d {
            DiffEntry::Insert { at, bytes } => {
                out.extend_from_slice(format!("I {at} {}\n", bytes.len()).as_bytes());
                out.extend_from_slice(bytes);
                out.push(b'\n');
            }
            DiffEntry::Delete { at, len } => out.extend_from_slice(format!("D {at} {len}\n").as_bytes()),
            DiffEntry::Replace { at, len, bytes } => {
                out.extend_from_slice(format!("R {at} {len} {}\n", bytes.len()).as_bytes());
                out.extend_from_slice(bytes);
                out.push(b'\n');
            }
        }
    }
    out
}

/// Byte-granular diff from `old` to `new` (Myers, with a time budget after
/// which the result stays correct but may be less tight).
pub fn byte_diff(old: &[u8], new: &[u8]) -> Result<Vec<DiffEntry>> {
    if old.len() > MAX_DIFF_INPUT || new.len() > MAX_DIFF_INPUT {
        return Err(Error::DomainError(format!("diff inputs are capped at {MAX_DIFF_INPUT} bytes")));
    }
    let deadline = Instant::now() + Duration::from_secs(30);
    let ops = similar::capture_diff_slices_deadline(similar::Algorithm::Myers, old, new, Some(deadline));
    let mut out: Vec<DiffEntry> = Vec::new();
    for op in ops {
        let (at, del, ins) = match op {
            similar::DiffOp::Equal { .. } => continue,
            similar::DiffOp::Delete { old_index, old_len, .. } => (old_index, old_len, 0..0),
            similar::DiffOp::Insert {
                old_index,
                new_index,
                new_len,
            } => (old_index, 0, new_index..new_index + new_len),
            similar::DiffOp::Replace {
                old_index,
                old_len,
                new_index,
                new_len,
            } => (old_index, old_len, new_index..new_index + new_len),
        };
        let (at, del) = (at as u64, del as u64);
        let bytes = &new[ins];
        // Adjacent edits fold into one replace so the entries never share a position.
        if let Some(last) = out.last_mut() {
            if last.end() == at {
                let mut merged = last.inserted().to_vec();
                merged.extend_from_slice(bytes);
                let len = last.deleted() + del;
                *last = entry(last.at(), len, merged);
                continue;
            }
        }
        out.push(entry(at, del, bytes.to_vec()));
    }
    Ok(out)
}

fn entry(at: u64, len: u64, bytes: Vec<u8>) -> DiffEntry {
    match (len, bytes.is_empty()) {
        (0, _) => DiffEntry::Insert { at, bytes },
        (_, true) => DiffEntry::Delete { at, len },
        _ => DiffEntry::Replace { at, len, bytes },
    }
}

/// Splits rewritten content: up to twice the block size stays one block,
/// anything larger is cut into block-size pieces.
pub fn chunk_content(data: &[u8], block_size: usize) -> Vec<&[u8]> {
    if data.is_empty() {
        return Vec::new();
    }
    if data.len() <= 2 * block_size {
        return vec![data];
    }
    data.chunks(block_size).collect()
}

/// Result of translating a diff.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Translation {
    pub ops: Vec<BlockOp>,
    /// Tight bounding span of the edits in the new version, `(start, length)`.
    pub region: (u64, u64),
    /// Runs of original blocks rewritten together, inclusive. `None` marks
    /// inserts into an empty file.
    pub clusters: Vec<Option<(usize, usize)>>,
}

fn touched(d: &DiffEntry, starts: &[u64], total: u64) -> Option<(usize, usize)> {
    let n = starts.len();
    if n == 0 {
        return None;
    }
    let containing = |p: u64| starts.partition_point(|s| *s <= p) - 1;
    match d {
        DiffEntry::Insert { at, .. } if *at == total => Some((n - 1, n - 1)),
        DiffEntry::Insert { at, .. } => {
            let b = containing(*at);
            Some((b, b))
        }
        _ => Some((containing(d.at()), containing(d.end() - 1))),
    }
}

/// Translates `diffs` against the current block layout (`lengths` of each
/// block) into block operations. `block` fetches the content of block `i`.
pub fn diff_to_ops<F>(diffs: &[DiffEntry], lengths: &[u64], block_size: usize, mut block: F) -> Result<Translation>
where
    F: FnMut(usize) -> Result<Vec<u8>>,
{
    assert!(block_size >= 1, "block size must be positive");
    let mut starts = Vec::with_capacity(lengths.len());
    let mut total = 0u64;
    for l in lengths {
        starts.push(total);
        total += l;
    }
    validate(diffs, total)?;

    // Group entries whose touched block ranges overlap.
    type Group<'a> = (Option<(usize, usize)>, Vec<&'a DiffEntry>);
    let mut groups: Vec<Group> = Vec::new();
    for d in diffs {
        let t = touched(d, &starts, total);
        match (groups.last_mut(), t) {
            (Some((Some(r), members)), Some((lo, hi))) if lo <= r.1 => {
                r.1 = r.1.max(hi);
                members.push(d);
            }
            (Some((None, members)), None) => members.push(d),
            _ => groups.push((t, vec![d])),
        }
    }

    let mut ops = Vec::new();
    let mut shift: i128 = 0;
    let mut lo_mark: Option<u64> = None;
    let mut hi_mark = 0u64;
    let mut mark = |s: u64, e: u64| {
        lo_mark = Some(lo_mark.map_or(s, |m| m.min(s)));
        hi_mark = hi_mark.max(e);
    };
    let mut clusters = Vec::new();
    for (range, members) in &groups {
        let (base, old_blocks): (u64, Vec<Vec<u8>>) = match range {
            Some((lo, hi)) => (starts[*lo], (*lo..=*hi).map(&mut block).collect::<Result<_>>()?),
            None => (0, Vec::new()),
        };
        for (i, b) in old_blocks.iter().enumerate() {
            let expect = lengths[range.expect("blocks imply a range").0 + i];
            if b.len() as u64 != expect {
                return Err(Error::corrupt(format!("block content has {} bytes, layout says {expect}", b.len())));
            }
        }
        let old: Vec<u8> = old_blocks.concat();
        let local: Vec<DiffEntry> = members
            .iter()
            .map(|d| match d {
                DiffEntry::Insert { at, bytes } => DiffEntry::Insert {
                    at: at - base,
                    bytes: bytes.clone(),
                },
                DiffEntry::Delete { at, len } => DiffEntry::Delete { at: at - base, len: *len },
                DiffEntry::Replace { at, len, bytes } => DiffEntry::Replace {
                    at: at - base,
                    len: *len,
                    bytes: bytes.clone(),
                },
            })
            .collect();
        let new = apply_diffs(&old, &local)?;
        let chunks = chunk_content(&new, block_size);

        let mut cur = (base as i128 + shift) as u64;
        let m = old_blocks.len();
        let k = chunks.len();
        for (chunk, old_block) in chunks.iter().zip(&old_blocks) {
            if *chunk != old_block.as_slice() {
                ops.push(BlockOp::Modify {
                    offset: cur,
                    data: chunk.to_vec(),
                });
                mark(cur, cur + chunk.len() as u64);
            }
            cur += chunk.len() as u64;
        }
        for _ in k.min(m)..m {
            ops.push(BlockOp::Remove { offset: cur });
            mark(cur, cur);
        }
        for chunk in chunks.iter().skip(m) {
            ops.push(BlockOp::Insert {
                offset: cur,
                data: chunk.to_vec(),
            });
            mark(cur, cur + chunk.len() as u64);
            cur += chunk.len() as u64;
        }
        shift += new.len() as i128 - old.len() as i128;
        clusters.push(*range);
    }
    let region = match lo_mark {
        Some(lo) => (lo, hi_mark - lo),
        None => (0, 0),
    };
    Ok(Translation { ops, region, clusters })
}

/// Block-level application of operations to a block sequence: the
/// reference the translation is checked against.
pub fn apply_ops_to_blocks(blocks: &mut Vec<Vec<u8>>, ops: &[BlockOp]) -> Result<()> {
    let locate = |blocks: &[Vec<u8>], offset: u64, allow_end: bool| -> Result<usize> {
        let mut pos = 0u64;
        for (i, b) in blocks.iter().enumerate() {
            if pos == offset {
                return Ok(i);
            }
            pos += b.len() as u64;
            if pos > offset {
                return Err(Error::NotBlockAligned(offset));
            }
        }
        if allow_end && pos == offset {
            return Ok(blocks.len());
        }
        Err(Error::IndexOutOfRange { index: offset, len: pos })
    };
    for op in ops {
        match op {
            BlockOp::Modify { offset, data } => {
                let i = locate(blocks, *offset, false)?;
                blocks[i] = data.clone();
            }
            BlockOp::Insert { offset, data } => {
                let i = locate(blocks, *offset, true)?;
                blocks.insert(i, data.clone());
            }
            BlockOp::Remove { offset } => {
                let i = locate(blocks, *offset, false)?;
                blocks.remove(i);
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
enum Entry {
    Full(Node),
    Stub { rank: u64, digest: Digest },
}

/// A data list known only along proven paths. Subtrees off those paths are
/// opaque stubs carrying their `(rank, digest)`.
#[derive(Clone, Debug)]
pub struct PartialFlexList {
    alg: HashAlg,
    entries: Vec<Entry>,
    by_digest: HashMap<Digest, NodeId>,
    root: NodeId,
}

impl PartialFlexList {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn root_digest(&self) -> Digest {
        self.summary(self.root).expect("root present").1
    }

    /// Nodes known in full.
    pub fn covered(&self) -> usize {
        self.entries.iter().filter(|e| matches!(e, Entry::Full(_))).count()
    }

    fn stub(&mut self, s: &Summary) -> NodeId {
        if let Some(id) = self.by_digest.get(&s.digest) {
            return *id;
        }
        let id = NodeId(self.entries.len() as u64);
        self.entries.push(Entry::Stub {
            rank: s.rank,
            digest: s.digest,
        });
        self.by_digest.insert(s.digest, id);
        id
    }

    fn full(&mut self, level: u8, after: Option<NodeId>, body: NodeBody) -> Result<NodeId> {
        let mut node = Node {
            level,
            rank: 0,
            after,
            body,
            digest: self.alg.zero(),
            version: 0,
        };
        let (rank, digest) = compute_label(self, &node)?;
        node.rank = rank;
        node.digest = digest;
        let id = match self.by_digest.get(&digest) {
            Some(id) => {
                self.entries[id.0 as usize] = Entry::Full(node);
                *id
            }
            None => {
                let id = NodeId(self.entries.len() as u64);
                self.entries.push(Entry::Full(node));
                self.by_digest.insert(digest, id);
                id
            }
        };
        Ok(id)
    }

    fn add_path(&mut self, path: &PathProof) -> Result<NodeId> {
        let mut cur = match &path.terminal {
            Terminal::Leaf { length, block, after } => {
                let after = after.as_ref().map(|a| self.stub(a));
                let payload = LeafPayload::new(BlockRef(*block), *length);
                self.full(0, after, NodeBody::Leaf(payload))?
            }
            Terminal::Sentinel { after } => {
                let after = after.as_ref().map(|a| self.stub(a));
                self.full(0, after, NodeBody::Sentinel)?
            }
        };
        for step in path.steps.iter().rev() {
            cur = match step {
                Step::Below { level, after } => {
                    let after = after.as_ref().map(|a| self.stub(a));
                    self.full(*level, after, NodeBody::Internal { below: cur })?
                }
                Step::After { level, below } => {
                    let below = self.stub(below);
                    self.full(*level, Some(cur), NodeBody::Internal { below })?
                }
                Step::PassLeaf { length, block } => {
                    let payload = LeafPayload::new(BlockRef(*block), *length);
                    self.full(0, Some(cur), NodeBody::Leaf(payload))?
                }
                Step::PassSentinel => self.full(0, Some(cur), NodeBody::Sentinel)?,
            };
        }
        Ok(cur)
    }
}

impl NodeSource for PartialFlexList {
    fn alg(&self) -> HashAlg {
        self.alg
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        match self.entries.get(id.0 as usize) {
            Some(Entry::Full(n)) => Ok(n),
            Some(Entry::Stub { .. }) => Err(Error::PathNotCovered(id)),
            None => Err(Error::corrupt(format!("dangling link to {id}"))),
        }
    }

    fn summary(&self, id: NodeId) -> Result<(u64, Digest)> {
        match self.entries.get(id.0 as usize) {
            Some(Entry::Full(n)) => Ok((n.rank, n.digest)),
            Some(Entry::Stub { rank, digest }) => Ok((*rank, *digest)),
            None => Err(Error::corrupt(format!("dangling link to {id}"))),
        }
    }

    fn id_bound(&self) -> u64 {
        self.entries.len() as u64
    }
}

/// Rebuilds the proven part of a list. Every path must fold to `root_digest`.
pub fn partial_from_proof(alg: HashAlg, root_digest: &Digest, paths: &[PathProof]) -> Result<PartialFlexList> {
    let mut p = PartialFlexList {
        alg,
        entries: Vec::new(),
        by_digest: HashMap::new(),
        root: NodeId(0),
    };
    if paths.is_empty() {
        return Err(Error::ProofRejected("no paths to rebuild from".into()));
    }
    for path in paths {
        if fold(alg, path)?.root_digest != *root_digest {
            return Err(Error::ProofRejected("path does not fold to the expected root".into()));
        }
        p.root = p.add_path(path)?;
    }
    Ok(p)
}

/// Replays `ops` on the partial list and returns the new root digest and
/// the advanced level stream.
pub fn apply_ops_partial(
    partial: &PartialFlexList,
    ops: &[BlockOp],
    levels: LevelSource,
) -> Result<(Digest, LevelSource)> {
    let mut st = Staging::new(partial, 0);
    let mut levels = levels;
    let root = apply_in(&mut st, partial.root, ops, &mut levels)?;
    Ok((st.summary(root)?.1, levels))
}

/// Everything the server sends so the client can check a commit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateProof {
    pub latest: RecordClaim,
    /// Membership of `latest` in the current index.
    pub index_path: PathProof,
    /// Data paths covering every block the operations touch.
    pub paths: Vec<PathProof>,
    /// Index frontier for the next append.
    pub append_path: PathProof,
}

/// Offsets whose paths cover a translation's operations: the containing
/// paths of each rewritten run plus one neighbour on each side, and the
/// boundary paths at both ends of the run.
pub fn coverage_queries(lengths: &[u64], clusters: &[Option<(usize, usize)>]) -> Vec<(u64, SearchMode)> {
    let n = lengths.len();
    let mut starts = Vec::with_capacity(n + 1);
    let mut total = 0;
    for l in lengths {
        starts.push(total);
        total += l;
    }
    starts.push(total);
    let mut out = Vec::new();
    for c in clusters {
        match c {
            None => out.push((0, SearchMode::Boundary)),
            Some((lo, hi)) => {
                for &s in &starts[lo.saturating_sub(1)..=(hi + 1).min(n - 1)] {
                    out.push((s, SearchMode::Containing));
                }
                out.push((starts[*lo], SearchMode::Boundary));
                out.push((starts[hi + 1], SearchMode::Boundary));
            }
        }
    }
    out.sort_by_key(|(o, m)| (*o, *m == SearchMode::Boundary));
    out.dedup();
    out
}

/// Server side: assembles the update proof for `queries` on the latest version.
pub fn update_proof<S: NodeSource + ?Sized>(
    src: &S,
    index: &VersionIndex,
    queries: &[(u64, SearchMode)],
) -> Result<UpdateProof> {
    let rec = index.latest().ok_or(Error::NoSuchVersion(0))?;
    let mut paths = Vec::with_capacity(queries.len());
    for (offset, mode) in queries {
        paths.push(prove_path(src, rec.root, *offset, *mode)?);
    }
    if paths.is_empty() {
        paths.push(prove_path(src, rec.root, 0, SearchMode::Boundary)?);
    }
    Ok(UpdateProof {
        latest: RecordClaim::from(rec),
        index_path: index.version_proof(src, rec.version)?,
        paths,
        append_path: index.append_proof(src)?,
    })
}

/// The client's constant-size state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClientState {
    pub meta: Digest,
    pub seed: Seed,
    /// Data-level draws consumed so far.
    pub level_counter: u64,
}

/// Client side of a commit: checks the update proof against the current
/// metadata, replays `ops` on the partial list and appends the resulting
/// version record to a partial copy of the index. Returns the state the
/// client should hold once the server confirms the commit.
pub fn client_commit(
    alg: HashAlg,
    state: &ClientState,
    proof: &UpdateProof,
    ops: &[BlockOp],
    region: (u64, u64),
) -> Result<ClientState> {
    let count = verify_version(alg, &state.meta, &proof.latest, &proof.index_path)?;
    if count != proof.latest.version + 1 {
        return Err(Error::ProofRejected("update proof is not for the latest version".into()));
    }
    let partial = partial_from_proof(alg, &proof.latest.root_digest, &proof.paths)?;
    let levels = LevelSource::at(state.seed, LevelDomain::Data, state.level_counter);
    let (new_root, levels) = apply_ops_partial(&partial, ops, levels)?;

    let index = partial_from_proof(alg, &state.meta, std::slice::from_ref(&proof.append_path))?;
    if index.summary(index.root())?.0 != count {
        return Err(Error::ProofRejected("index length does not match the version count".into()));
    }
    let digest = record_digest(alg, count, &new_root, region.0, region.1);
    let mut st = Staging::new(&index, 0);
    let level = index_levels(state.seed, count).peek();
    let root = pinsert(&mut st, index.root(), count, record_payload(digest), level)?;
    Ok(ClientState {
        meta: st.summary(root)?.1,
        seed: state.seed,
        level_counter: levels.counter,
    })
}

impl UpdateProof {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        let c = &self.latest;
        w.u64(c.version);
        w.digest(&c.root_digest);
        w.u64(c.update_start);
        w.u64(c.update_length);
        self.index_path.encode(&mut w, LeafMaterial::External);
        w.u64(self.paths.len() as u64);
        for p in &self.paths {
            p.encode(&mut w, LeafMaterial::Inline);
        }
        self.append_path.encode(&mut w, LeafMaterial::Inline);
        w.buf
    }

    pub fn decode(alg: HashAlg, data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data, "update proof");
        let latest = RecordClaim {
            version: r.u64()?,
            root_digest: r.digest(alg)?,
            update_start: r.u64()?,
            update_length: r.u64()?,
        };
        let index_path = PathProof::decode(&mut r, alg, LeafMaterial::External)?;
        let n = r.count(1)?;
        let paths = (0..n)
            .map(|_| PathProof::decode(&mut r, alg, LeafMaterial::Inline))
            .collect::<Result<_>>()?;
        let append_path = PathProof::decode(&mut r, alg, LeafMaterial::Inline)?;
        r.finish()?;
        Ok(UpdateProof {
            latest,
            index_path,
            paths,
            append_path,
        })
    }
}
