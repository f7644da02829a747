//! Reference model shared by the integration tests: a plain vector of
//! `(content, level)` pairs whose digest comes from a fresh bottom-up build.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;

use flexvault::flexlist::build_with_levels;
use flexvault::level::LevelSource;
use flexvault::persist::BlockOp;
use flexvault::store::{NodeArena, NodeSource};
use flexvault::{BlockRef, Digest, HashAlg, LeafPayload, Result};

#[derive(Clone, Debug, Default)]
pub struct Model {
    pub blocks: Vec<(Vec<u8>, u8)>,
}

impl Model {
    pub fn new(blocks: Vec<(Vec<u8>, u8)>) -> Self {
        Model { blocks }
    }

    pub fn starts(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.blocks.len() + 1);
        let mut pos = 0;
        for (b, _) in &self.blocks {
            out.push(pos);
            pos += b.len() as u64;
        }
        out.push(pos);
        out
    }

    fn index_at(&self, offset: u64) -> usize {
        self.starts()
            .iter()
            .position(|&s| s == offset)
            .unwrap_or_else(|| panic!("model: {offset} is not a block boundary"))
    }

    /// Mirrors one operation. Inserts draw their level from `levels`.
    pub fn apply(&mut self, op: &BlockOp, levels: &mut LevelSource) {
        match op {
            BlockOp::Modify { offset, data } => {
                let i = self.index_at(*offset);
                self.blocks[i].0 = data.clone();
            }
            BlockOp::Insert { offset, data } => {
                let i = self.index_at(*offset);
                self.blocks.insert(i, (data.clone(), levels.draw()));
            }
            BlockOp::Remove { offset } => {
                let i = self.index_at(*offset);
                self.blocks.remove(i);
            }
        }
    }

    pub fn root(&self, alg: HashAlg) -> (u64, Digest) {
        let mut store = NodeArena::new(alg);
        let with: Vec<_> = self
            .blocks
            .iter()
            .map(|(b, l)| (LeafPayload::for_block(alg, b), *l))
            .collect();
        let root = build_with_levels(&mut store, &with, 0).unwrap();
        store.summary(root).unwrap()
    }

    pub fn content(&self) -> Vec<u8> {
        self.blocks.iter().flat_map(|(b, _)| b.iter().copied()).collect()
    }
}

/// Random valid batch against `model`, with offsets in the layout current
/// at each step. Keeps at most `max_blocks` blocks.
pub fn random_ops<R: Rng>(rng: &mut R, model: &Model, max_ops: usize, max_blocks: usize) -> Vec<BlockOp> {
    let mut scratch = model.clone();
    let mut levels = LevelSource::new(Default::default(), flexvault::level::LevelDomain::Data);
    let mut ops = Vec::new();
    for _ in 0..rng.gen_range(1..=max_ops) {
        let n = scratch.blocks.len();
        let starts = scratch.starts();
        let data: Vec<u8> = (0..rng.gen_range(1..=8)).map(|_| rng.gen_range(b'a'..=b'd')).collect();
        let kind = if n == 0 {
            1
        } else if n >= max_blocks {
            if rng.gen_bool(0.5) {
                0
            } else {
                2
            }
        } else {
            rng.gen_range(0..3)
        };
        let op = match kind {
            0 => BlockOp::Modify {
                offset: starts[rng.gen_range(0..n)],
                data,
            },
            1 => BlockOp::Insert {
                offset: starts[rng.gen_range(0..=n)],
                data,
            },
            _ => BlockOp::Remove {
                offset: starts[rng.gen_range(0..n)],
            },
        };
        scratch.apply(&op, &mut levels);
        ops.push(op);
    }
    ops
}

/// In-memory content-addressed block store.
#[derive(Default)]
pub struct Blocks(pub HashMap<BlockRef, Vec<u8>>);

impl Blocks {
    pub fn put(&mut self, alg: HashAlg, data: &[u8]) {
        self.0.insert(BlockRef::of(alg, data), data.to_vec());
    }

    pub fn put_ops(&mut self, alg: HashAlg, ops: &[BlockOp]) {
        for op in ops {
            if let Some(d) = op.data() {
                self.put(alg, d);
            }
        }
    }

    pub fn fetch(&self, b: &BlockRef, _len: u64) -> Result<Vec<u8>> {
        Ok(self.0[b].clone())
    }
}

/// Random valid diff against a file of `len` bytes.
pub fn random_diffs<R: Rng>(rng: &mut R, len: u64, max_entries: usize, max_insert: usize) -> Vec<flexvault::adaptor::DiffEntry> {
    use flexvault::adaptor::DiffEntry;
    let mut out = Vec::new();
    let mut min = 0u64;
    let entries = rng.gen_range(1..=max_entries);
    while out.len() < entries && min <= len {
        let at = if rng.gen_bool(0.3) { min } else { rng.gen_range(min..=len) };
        let room = len - at;
        let bytes: Vec<u8> = (0..rng.gen_range(1..=max_insert.max(1))).map(|_| rng.gen()).collect();
        let kind = if room == 0 { 0 } else { rng.gen_range(0..3) };
        let take = if room == 0 { 0 } else { rng.gen_range(1..=room.min(3 * max_insert as u64 + 1)) };
        let d = match kind {
            0 => DiffEntry::Insert { at, bytes },
            1 => DiffEntry::Delete { at, len: take },
            _ => DiffEntry::Replace { at, len: take, bytes },
        };
        min = if d.deleted() == 0 { at + 1 } else { d.end() };
        out.push(d);
    }
    out
}
