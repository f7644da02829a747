//! On-disk repository.
//!
//! ```text
//! config          TOML: hash function, block size, level seed
//! meta            hex digest of the version index root
//! versions.log    one line per version (see `LogLine`)
//! nodes/seg-N.bin append-only node records, checksummed
//! blocks/ab/cdef… block content named by its digest
//! lock            present while a writer holds the repository
//! ```
//!
//! A commit writes blocks first, then node records, then the log line and
//! finally the meta file, each synced before the next step. Node records
//! beyond the count named by the last log line belong to an interrupted
//! commit and are dropped when a writer opens the repository.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::adaptor::{self, DiffEntry, Translation, UpdateProof};
use crate::audit::{self, AuditProof, Challenge};
use crate::error::{Error, Result};
use crate::flexlist::{self, compute_label};
use crate::hash::{Digest, HashAlg};
use crate::index2::{record_payload, VersionIndex, VersionRecord};
use crate::level::{LevelDomain, LevelSource, Seed};
use crate::node::{BlockRef, LeafPayload, Node, NodeBody, NodeId};
use crate::persist;
use crate::store::{NodeArena, NodeSource};

pub const DEFAULT_BLOCK_SIZE: usize = 2048;
const SEGMENT_LIMIT: u64 = 1 << 20;
const EMPTY_INDEX_KEY: &str = "empty-index";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    pub hash: HashAlg,
    pub block_size: usize,
    pub seed: Seed,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            hash: HashAlg::Sha1,
            block_size: DEFAULT_BLOCK_SIZE,
            seed: Seed::default(),
        }
    }
}

/// Per-version bookkeeping persisted in `versions.log`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct LogLine {
    record: VersionRecord,
    index_root: NodeId,
    /// Data level draws consumed after this version.
    level_counter: u64,
    /// Node records in the store after this version.
    node_count: u64,
}

impl LogLine {
    fn render(&self) -> String {
        let r = &self.record;
        format!(
            "{} {} {} {} {} {} {} {}\n",
            r.version,
            r.root.0,
            r.root_digest,
            r.update_start,
            r.update_length,
            self.index_root.0,
            self.level_counter,
            self.node_count
        )
    }

    fn parse(line: &str) -> Result<Self> {
        let bad = || Error::format("version log", format!("bad line {line:?}"));
        let f: Vec<&str> = line.split_ascii_whitespace().collect();
        if f.len() != 8 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad());
        Ok(LogLine {
            record: VersionRecord {
                version: num(f[0])?,
                root: NodeId(num(f[1])?),
                root_digest: Digest::from_hex(f[2]).ok_or_else(bad)?,
                update_start: num(f[3])?,
                update_length: num(f[4])?,
            },
            index_root: NodeId(num(f[5])?),
            level_counter: num(f[6])?,
            node_count: num(f[7])?,
        })
    }
}

/// Outcome of a commit, for reporting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommitReport {
    pub version: u64,
    pub meta: Digest,
    pub ops: usize,
    pub created_nodes: usize,
    /// Nodes of the new version inherited from earlier versions.
    pub shared_nodes: usize,
    pub blocks_added: usize,
    pub region: (u64, u64),
}

/// One block of a version as seen by the adaptor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayoutEntry {
    pub block: BlockRef,
    pub length: u64,
    pub level: u8,
    pub created_in: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TamperScope {
    /// Blocks written by the chosen version inside its update region.
    VersionDelta,
    /// Every block of the chosen version.
    All,
}

struct Lock {
    path: PathBuf,
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub struct Repository {
    root: PathBuf,
    config: Config,
    arena: NodeArena,
    index: VersionIndex,
    lines: Vec<LogLine>,
    _lock: Option<Lock>,
}

fn sync_dir(path: &Path) -> Result<()> {
    // Directory sync is best effort; not every platform allows opening directories.
    if let Ok(d) = File::open(path) {
        let _ = d.sync_all();
    }
    Ok(())
}

fn write_atomic(path: &Path, data: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(data)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        sync_dir(parent)?;
    }
    Ok(())
}

fn checksum(data: &[u8]) -> [u8; 8] {
    Sha256::digest(data)[..8].try_into().expect("8 bytes")
}

const KIND_INTERNAL: u8 = 0;
const KIND_LEAF: u8 = 1;
const KIND_SENTINEL: u8 = 2;

/// Node record: `len:u32 | id | version | level:u8 | rank | kind:u8 | after
/// flag+id | body | digest | checksum:8`, where the checksum covers every
/// preceding byte of the record after the length.
fn encode_record(id: NodeId, n: &Node) -> Vec<u8> {
    let mut b = Vec::with_capacity(96);
    b.extend_from_slice(&id.0.to_be_bytes());
    b.extend_from_slice(&n.version.to_be_bytes());
    b.push(n.level);
    b.extend_from_slice(&n.rank.to_be_bytes());
    match &n.body {
        NodeBody::Internal { .. } => b.push(KIND_INTERNAL),
        NodeBody::Leaf(_) => b.push(KIND_LEAF),
        NodeBody::Sentinel => b.push(KIND_SENTINEL),
    }
    match n.after {
        Some(a) => {
            b.push(1);
            b.extend_from_slice(&a.0.to_be_bytes());
        }
        None => b.push(0),
    }
    match &n.body {
        NodeBody::Internal { below } => b.extend_from_slice(&below.0.to_be_bytes()),
        NodeBody::Leaf(p) => {
            b.extend_from_slice(&p.length.to_be_bytes());
            b.extend_from_slice(p.block.0.as_bytes());
            match &p.tag {
                Some(t) => {
                    b.push(1);
                    b.extend_from_slice(&(t.len() as u64).to_be_bytes());
                    b.extend_from_slice(t);
                }
                None => b.push(0),
            }
        }
        NodeBody::Sentinel => {}
    }
    b.extend_from_slice(n.digest.as_bytes());
    let c = checksum(&b);
    b.extend_from_slice(&c);
    let mut out = (b.len() as u32).to_be_bytes().to_vec();
    out.extend_from_slice(&b);
    out
}

fn decode_record(alg: HashAlg, rec: &[u8]) -> Result<(NodeId, Node)> {
    let bad = |d: &str| Error::format("node record", d.to_string());
    if rec.len() < 8 {
        return Err(bad("too short"));
    }
    let (body, sum) = rec.split_at(rec.len() - 8);
    if checksum(body) != sum {
        return Err(bad("checksum mismatch"));
    }
    let mut r = crate::proof::Reader::new(body, "node record");
    let id = NodeId(r.u64()?);
    let version = r.u64()?;
    let level = r.u8()?;
    let rank = r.u64()?;
    let kind = r.u8()?;
    let after = if r.flag()? { Some(NodeId(r.u64()?)) } else { None };
    let nbody = match kind {
        KIND_INTERNAL => NodeBody::Internal { below: NodeId(r.u64()?) },
        KIND_LEAF => {
            let length = r.u64()?;
            let block = BlockRef(r.digest(alg)?);
            let tag = if r.flag()? {
                let n = r.u64()? as usize;
                Some(r.take(n)?.to_vec())
            } else {
                None
            };
            NodeBody::Leaf(LeafPayload { block, length, tag })
        }
        KIND_SENTINEL => NodeBody::Sentinel,
        _ => return Err(bad("unknown kind")),
    };
    let digest = r.digest(alg)?;
    r.finish()?;
    Ok((
        id,
        Node {
            level,
            rank,
            after,
            body: nbody,
            digest,
            version,
        },
    ))
}

impl Repository {
    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn alg(&self) -> HashAlg {
        self.config.hash
    }

    pub fn arena(&self) -> &NodeArena {
        &self.arena
    }

    pub fn index(&self) -> &VersionIndex {
        &self.index
    }

    pub fn meta(&self) -> Result<Digest> {
        self.index.meta(&self.arena)
    }

    pub fn versions(&self) -> &[VersionRecord] {
        self.index.records()
    }

    pub fn latest(&self) -> &VersionRecord {
        self.index.latest().expect("a repository always has version 0")
    }

    /// Data-level draws consumed so far.
    pub fn level_counter(&self) -> u64 {
        self.lines.last().map_or(0, |l| l.level_counter)
    }

    /// Creates a repository at `path` and commits `data` as version 0.
    pub fn init(path: &Path, config: Config, data: &[u8]) -> Result<Repository> {
        if config.block_size == 0 {
            return Err(Error::DomainError("block size must be positive".into()));
        }
        if path.exists() && (!path.is_dir() || fs::read_dir(path)?.next().is_some()) {
            return Err(Error::PathExists(path.display().to_string()));
        }
        fs::create_dir_all(path.join("nodes"))?;
        fs::create_dir_all(path.join("blocks"))?;
        let lock = Self::acquire(path)?;
        let toml = toml::to_string(&config).map_err(|e| Error::format("config", e.to_string()))?;
        write_atomic(&path.join("config"), toml.as_bytes())?;

        let alg = config.hash;
        let seed = config.seed;
        let mut arena = NodeArena::new(alg);
        let mut index = VersionIndex::new(&mut arena, config.seed)?;
        let mut repo_blocks = Vec::new();
        for chunk in flexlist::split_blocks(data, config.block_size) {
            repo_blocks.push(LeafPayload::for_block(alg, chunk));
        }
        let (root, levels) = flexlist::build(
            &mut arena,
            &repo_blocks,
            LevelSource::new(config.seed, LevelDomain::Data),
            0,
        )?;
        let mut repo = Repository {
            root: path.to_path_buf(),
            config,
            arena,
            index: VersionIndex::restore(seed, NodeId(0), Vec::new(), Vec::new())?,
            lines: Vec::new(),
            _lock: Some(lock),
        };
        for chunk in flexlist::split_blocks(data, repo.config.block_size) {
            repo.put_block(chunk)?;
        }
        let root_digest = repo.arena.node(root)?.digest;
        let rec = VersionRecord {
            version: 0,
            root,
            root_digest,
            update_start: 0,
            update_length: data.len() as u64,
        };
        index.append_version(&mut repo.arena, rec.clone())?;
        repo.index = index;
        let header = format!("{EMPTY_INDEX_KEY} {}\n", repo.index.empty_root().0);
        write_atomic(&path.join("versions.log"), header.as_bytes())?;
        repo.append_nodes(0)?;
        repo.finish_version(rec, levels.counter)?;
        Ok(repo)
    }

    fn acquire(path: &Path) -> Result<Lock> {
        let lp = path.join("lock");
        match OpenOptions::new().write(true).create_new(true).open(&lp) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Lock { path: lp })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(lp.display().to_string())),
            Err(e) => Err(e.into()),
        }
    }

    /// Opens for reading. Any number of readers may coexist with one writer.
    pub fn open(path: &Path) -> Result<Repository> {
        Self::load(path, None)
    }

    /// Opens for committing; fails if another writer holds the lock.
    pub fn open_writer(path: &Path) -> Result<Repository> {
        let lock = Self::acquire(path)?;
        Self::load(path, Some(lock))
    }

    fn load(path: &Path, lock: Option<Lock>) -> Result<Repository> {
        if !path.join("config").is_file() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} is not a repository", path.display()),
            )));
        }
        let text = fs::read_to_string(path.join("config"))?;
        let config: Config = toml::from_str(&text).map_err(|e| Error::format("config", e.to_string()))?;
        let alg = config.hash;

        let log = fs::read_to_string(path.join("versions.log"))?;
        let mut log_lines = log.lines();
        let header = log_lines.next().ok_or_else(|| Error::format("version log", "missing header"))?;
        let empty_root = header
            .strip_prefix(EMPTY_INDEX_KEY)
            .and_then(|s| s.trim().parse::<u64>().ok())
            .map(NodeId)
            .ok_or_else(|| Error::format("version log", "bad header"))?;
        let lines: Vec<LogLine> = log_lines.filter(|l| !l.trim().is_empty()).map(LogLine::parse).collect::<Result<_>>()?;
        let node_count = lines.last().map_or(0, |l| l.node_count);

        let nodes = Self::read_segments(path, alg, node_count, lock.is_some())?;
        let arena = NodeArena::from_nodes(alg, nodes);
        let index = VersionIndex::restore(
            config.seed,
            empty_root,
            lines.iter().map(|l| l.record.clone()).collect(),
            lines.iter().map(|l| l.index_root).collect(),
        )?;
        if lines.is_empty() {
            return Err(Error::format("version log", "no versions"));
        }
        Ok(Repository {
            root: path.to_path_buf(),
            config,
            arena,
            index,
            lines,
            _lock: lock,
        })
    }

    fn segment_paths(path: &Path) -> Result<Vec<PathBuf>> {
        let mut segs: Vec<PathBuf> = fs::read_dir(path.join("nodes"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "bin"))
            .collect();
        segs.sort();
        Ok(segs)
    }

    /// Loads the first `count` node records; with `repair`, trims records
    /// left behind by an interrupted commit.
    fn read_segments(path: &Path, alg: HashAlg, count: u64, repair: bool) -> Result<Vec<Node>> {
        let mut nodes = Vec::with_capacity(count as usize);
        for seg in Self::segment_paths(path)? {
            let mut data = Vec::new();
            File::open(&seg)?.read_to_end(&mut data)?;
            let mut pos = 0usize;
            while pos < data.len() {
                if nodes.len() as u64 == count {
                    break;
                }
                if data.len() - pos < 4 {
                    return Err(Error::format("node segment", format!("{}: truncated record", seg.display())));
                }
                let len = u32::from_be_bytes(data[pos..pos + 4].try_into().expect("4 bytes")) as usize;
                let rec = data
                    .get(pos + 4..pos + 4 + len)
                    .ok_or_else(|| Error::format("node segment", format!("{}: truncated record", seg.display())))?;
                let (id, node) = decode_record(alg, rec)
                    .map_err(|e| Error::format("node segment", format!("{} at byte {pos}: {e}", seg.display())))?;
                if id.0 != nodes.len() as u64 {
                    return Err(Error::format("node segment", format!("expected record {}, found {id}", nodes.len())));
                }
                nodes.push(node);
                pos += 4 + len;
            }
            if pos < data.len() && repair {
                let f = OpenOptions::new().write(true).open(&seg)?;
                f.set_len(pos as u64)?;
                f.sync_all()?;
            }
        }
        if (nodes.len() as u64) < count {
            return Err(Error::format("node segment", format!("{} records, log expects {count}", nodes.len())));
        }
        Ok(nodes)
    }

    fn append_nodes(&mut self, from: usize) -> Result<()> {
        let nodes = &self.arena.nodes()[from..];
        if nodes.is_empty() {
            return Ok(());
        }
        let segs = Self::segment_paths(&self.root)?;
        let (mut seg, mut size) = match segs.last() {
            Some(p) => (p.clone(), fs::metadata(p)?.len()),
            None => (self.root.join("nodes/seg-000000.bin"), 0),
        };
        let mut file = OpenOptions::new().create(true).append(true).open(&seg)?;
        for (i, n) in nodes.iter().enumerate() {
            let rec = encode_record(NodeId((from + i) as u64), n);
            if size > 0 && size + rec.len() as u64 > SEGMENT_LIMIT {
                file.sync_all()?;
                let next = Self::segment_paths(&self.root)?.len();
                seg = self.root.join(format!("nodes/seg-{next:06}.bin"));
                file = OpenOptions::new().create(true).append(true).open(&seg)?;
                size = 0;
            }
            file.write_all(&rec)?;
            size += rec.len() as u64;
        }
        file.sync_all()?;
        sync_dir(&self.root.join("nodes"))
    }

    fn finish_version(&mut self, rec: VersionRecord, level_counter: u64) -> Result<()> {
        let line = LogLine {
            record: rec,
            index_root: self.index.root(),
            level_counter,
            node_count: self.arena.len() as u64,
        };
        let mut f = OpenOptions::new().append(true).open(self.root.join("versions.log"))?;
        f.write_all(line.render().as_bytes())?;
        f.sync_all()?;
        self.lines.push(line);
        let meta = format!("{}\n", self.meta()?);
        write_atomic(&self.root.join("meta"), meta.as_bytes())
    }

    fn block_path(&self, b: &BlockRef) -> PathBuf {
        let hex = b.0.to_hex();
        self.root.join("blocks").join(&hex[..2]).join(&hex[2..])
    }

    /// Stores a block unless identical content is already present. Returns
    /// whether a new file was written.
    fn put_block(&self, data: &[u8]) -> Result<bool> {
        let b = BlockRef::of(self.alg(), data);
        let p = self.block_path(&b);
        if p.exists() {
            return Ok(false);
        }
        fs::create_dir_all(p.parent().expect("fan-out directory"))?;
        write_atomic(&p, data)?;
        Ok(true)
    }

    /// Reads and checks a block.
    pub fn read_block(&self, b: &BlockRef, length: u64) -> Result<Vec<u8>> {
        let p = self.block_path(b);
        let data = match fs::read(&p) {
            Ok(d) => d,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingBlock(b.0.to_hex())),
            Err(e) => return Err(e.into()),
        };
        if data.len() as u64 != length || BlockRef::of(self.alg(), &data) != *b {
            return Err(Error::corrupt(format!("block {} does not match its address", b.0)));
        }
        Ok(data)
    }

    pub fn layout(&self, v: u64) -> Result<Vec<LayoutEntry>> {
        let rec = self.index.record(v)?;
        let mut out = Vec::new();
        for e in flexlist::blocks(&self.arena, rec.root)? {
            let created_in = self.arena.node(e.leaf)?.version;
            out.push(LayoutEntry {
                block: e.payload.block,
                length: e.payload.length,
                level: e.level,
                created_in,
            });
        }
        Ok(out)
    }

    pub fn checkout(&self, v: u64) -> Result<Vec<u8>> {
        let rec = self.index.record(v)?;
        persist::materialize(&self.arena, rec.root, |b, len| self.read_block(b, len))
    }

    /// Translates a diff against the latest version.
    pub fn translate(&self, diffs: &[DiffEntry]) -> Result<(Translation, Vec<u64>)> {
        let layout = self.layout(self.latest().version)?;
        let lengths: Vec<u64> = layout.iter().map(|e| e.length).collect();
        let t = adaptor::diff_to_ops(diffs, &lengths, self.config.block_size, |i| {
            self.read_block(&layout[i].block, layout[i].length)
        })?;
        Ok((t, lengths))
    }

    /// Proof the client needs to check a commit of `t` against its metadata.
    pub fn update_proof(&self, t: &Translation, lengths: &[u64]) -> Result<UpdateProof> {
        let queries = adaptor::coverage_queries(lengths, &t.clusters);
        adaptor::update_proof(&self.arena, &self.index, &queries)
    }

    pub fn commit(&mut self, diffs: &[DiffEntry]) -> Result<CommitReport> {
        let (t, _) = self.translate(diffs)?;
        self.commit_translation(&t)
    }

    /// Applies a translated diff as the next version.
    pub fn commit_translation(&mut self, t: &Translation) -> Result<CommitReport> {
        if self._lock.is_none() {
            return Err(Error::Locked("repository was opened read-only".into()));
        }
        if t.ops.is_empty() {
            return Err(Error::EmptyCommit);
        }
        let version = self.index.len();
        let prev = self.latest().clone();
        let levels = LevelSource::at(self.config.seed, LevelDomain::Data, self.level_counter());
        let res = persist::apply_ops(&self.arena, prev.root, &t.ops, levels, version)?;

        let mut blocks_added = 0;
        for op in &t.ops {
            if let Some(data) = op.data() {
                if self.put_block(data)? {
                    blocks_added += 1;
                }
            }
        }
        let from = self.arena.len();
        let created = res.created_nodes();
        self.arena.extend(res.staged.first, res.staged.nodes)?;
        let stats = flexlist::walk_in_order(&self.arena, res.root, |_, _, _| Ok(()))?;
        let rec = VersionRecord {
            version,
            root: res.root,
            root_digest: self.arena.node(res.root)?.digest,
            update_start: t.region.0,
            update_length: t.region.1,
        };
        let meta = self.index.append_version(&mut self.arena, rec.clone())?;
        self.append_nodes(from)?;
        self.finish_version(rec, res.levels.counter)?;
        Ok(CommitReport {
            version,
            meta,
            ops: t.ops.len(),
            created_nodes: created,
            shared_nodes: stats - created,
            blocks_added,
            region: t.region,
        })
    }

    /// Builds the audit proof. With `substitute_missing`, absent blocks are
    /// replaced by zeros so the proof can still be emitted (and will fail).
    pub fn prove(&self, ch: &Challenge, substitute_missing: bool) -> Result<(AuditProof, usize)> {
        let mut missing = 0;
        let proof = audit::prove(&self.arena, &self.index, ch, |b, len| match self.read_block(b, len) {
            Ok(d) => Ok(d),
            Err(Error::MissingBlock(_)) | Err(Error::StructureCorrupt(_)) if substitute_missing => {
                missing += 1;
                Ok(vec![0; len as usize])
            }
            Err(e) => Err(e),
        })?;
        Ok((proof, missing))
    }

    pub fn verify(&self, ch: &Challenge, proof: &[u8]) -> Result<()> {
        audit::verify_bytes(self.alg(), &self.meta()?, ch, proof)
    }

    /// Deletes a fraction of block files (test support). Returns the deleted addresses.
    pub fn tamper(&self, fraction: f64, scope: TamperScope, version: Option<u64>, seed: u64) -> Result<Vec<BlockRef>> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::DomainError(format!("fraction {fraction} outside [0, 1]")));
        }
        let v = version.unwrap_or(self.latest().version);
        let rec = self.index.record(v)?;
        let mut candidates: Vec<BlockRef> = Vec::new();
        let mut seen = HashSet::new();
        for e in flexlist::blocks(&self.arena, rec.root)? {
            let created = self.arena.node(e.leaf)?.version;
            let end = e.start + e.payload.length;
            let in_region = e.start < rec.update_start + rec.update_length && end > rec.update_start;
            let pick = match scope {
                TamperScope::All => true,
                TamperScope::VersionDelta => created == v && in_region,
            };
            if pick && seen.insert(e.payload.block) {
                candidates.push(e.payload.block);
            }
        }
        let n = (fraction * candidates.len() as f64).round() as usize;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        candidates.shuffle(&mut rng);
        candidates.truncate(n);
        for b in &candidates {
            match fs::remove_file(self.block_path(b)) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(candidates)
    }

    /// Full integrity sweep. Returns one line per violation.
    pub fn fsck(&self) -> Result<Vec<String>> {
        let mut problems = Vec::new();
        let alg = self.alg();
        for (i, n) in self.arena.nodes().iter().enumerate() {
            let id = NodeId(i as u64);
            let children = n.after.into_iter().chain(n.below());
            if let Some(c) = children.clone().find(|c| c.0 >= id.0) {
                problems.push(format!("{id} links forward to {c}"));
                continue;
            }
            match compute_label(&self.arena, n) {
                Ok((rank, digest)) => {
                    if rank != n.rank {
                        problems.push(format!("{id}: rank {} but children give {rank}", n.rank));
                    }
                    if digest != n.digest {
                        problems.push(format!("{id}: digest does not match children"));
                    }
                }
                Err(e) => problems.push(format!("{id}: {e}")),
            }
        }
        let mut referenced = HashSet::new();
        let mut prev_counter = None;
        for (line, rec) in self.lines.iter().zip(self.index.records()) {
            let v = rec.version;
            match self.arena.node(rec.root) {
                Ok(n) if n.digest == rec.root_digest => {}
                Ok(_) => problems.push(format!("version {v}: root digest differs from the log")),
                Err(e) => problems.push(format!("version {v}: {e}")),
            }
            match flexlist::check_structure(&self.arena, rec.root) {
                Ok(stats) => {
                    if rec.update_start + rec.update_length > stats.total {
                        problems.push(format!("version {v}: update region past the end"));
                    }
                }
                Err(e) => problems.push(format!("version {v}: {e}")),
            }
            if line.record != *rec {
                problems.push(format!("version {v}: log line and index disagree"));
            }
            if prev_counter.is_some_and(|p| line.level_counter < p) {
                problems.push(format!("version {v}: level counter went backwards"));
            }
            prev_counter = Some(line.level_counter);
            if let Ok(blocks) = flexlist::blocks(&self.arena, rec.root) {
                for e in blocks {
                    referenced.insert((e.payload.block, e.payload.length));
                }
            }
        }
        // Every index leaf must carry the digest of the record at its position.
        match flexlist::blocks(&self.arena, self.index.root()) {
            Ok(leaves) => {
                if leaves.len() != self.index.records().len() {
                    problems.push("index length differs from the version log".into());
                }
                for (e, rec) in leaves.iter().zip(self.index.records()) {
                    if e.payload != record_payload(rec.digest(alg)) {
                        problems.push(format!("index leaf {} does not match version {}", e.start, rec.version));
                    }
                }
            }
            Err(e) => problems.push(format!("index: {e}")),
        }
        match fs::read_to_string(self.root.join("meta")) {
            Ok(s) if Digest::from_hex(&s) == Some(self.meta()?) => {}
            Ok(_) => problems.push("meta file does not match the index root".into()),
            Err(e) => problems.push(format!("meta: {e}")),
        }
        for (b, len) in &referenced {
            match self.read_block(b, *len) {
                Ok(_) => {}
                Err(e) => problems.push(e.to_string()),
            }
        }
        // Stray or misnamed block files would break content addressing.
        for fan in fs::read_dir(self.root.join("blocks"))? {
            let fan = fan?.path();
            if !fan.is_dir() {
                continue;
            }
            for f in fs::read_dir(&fan)? {
                let p = f?.path();
                if p.extension().is_some_and(|x| x == "tmp") {
                    continue;
                }
                let name = format!(
                    "{}{}",
                    fan.file_name().unwrap_or_default().to_string_lossy(),
                    p.file_name().unwrap_or_default().to_string_lossy()
                );
                let data = fs::read(&p)?;
                if alg.hash(&data).to_hex() != name {
                    problems.push(format!("block file {} does not match its name", p.display()));
                }
            }
        }
        Ok(problems)
    }
}
