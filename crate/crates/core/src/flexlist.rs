//! FlexList mechanics: rank arithmetic, byte-indexed search, canonical
//! construction and digest recomputation.
//!
//! Every block owns a tower of height `h` drawn from the level stream. The
//! list behaves as a binary tree: a node at level `l` of tower `t` has an
//! after link only when the next tower of height `>= l` has height exactly
//! `l`, and towers keep an internal node at level `l` only when that node has
//! an after link. Links therefore may drop levels. A left sentinel tower
//! anchors the root at the current maximum level and a zero-length right
//! sentinel leaf closes the level-0 chain.
//!
//! The rank of a node is the number of data bytes reachable through it, so
//! search walks down by comparing the remaining index against below ranks.

use crate::error::{Error, Result};
use crate::hash::Digest;
use crate::level::LevelSource;
use crate::node::{node_digest, LeafPayload, Material, Node, NodeBody, NodeId, MAX_LEVEL};
use crate::store::{NodeSource, NodeStore, Staging};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Below,
    After,
}

/// How a traversal treats a byte index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SearchMode {
    /// Find the leaf whose span contains the byte.
    Containing,
    /// Find the last leaf that starts strictly before the index: the node
    /// frontier that an insertion at this position has to relink.
    Boundary,
}

impl SearchMode {
    pub fn goes_below(self, index: u64, below_rank: u64) -> bool {
        match self {
            SearchMode::Containing => index < below_rank,
            SearchMode::Boundary => index <= below_rank,
        }
    }

    pub fn passes_leaf(self, index: u64, length: u64) -> bool {
        match self {
            SearchMode::Containing => index >= length,
            SearchMode::Boundary => index > length,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchPath {
    /// Nodes left behind on the way down, with the link taken out of each.
    pub steps: Vec<(NodeId, Direction)>,
    pub leaf: NodeId,
    /// Offset of the index within `leaf`.
    pub residual: u64,
}

impl SearchPath {
    pub fn len(&self) -> usize {
        self.steps.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.steps.iter().map(|(id, _)| *id).chain(std::iter::once(self.leaf))
    }
}

/// Splits `data` into `block_size` pieces; the last piece may be shorter.
pub fn split_blocks(data: &[u8], block_size: usize) -> Vec<&[u8]> {
    assert!(block_size >= 1, "block size must be positive");
    data.chunks(block_size).collect()
}

pub fn total_len<S: NodeSource + ?Sized>(src: &S, root: NodeId) -> Result<u64> {
    Ok(src.summary(root)?.0)
}

/// Walks from `root` towards `index` under `mode`. No range check.
pub fn descend<S: NodeSource + ?Sized>(
    src: &S,
    root: NodeId,
    index: u64,
    mode: SearchMode,
) -> Result<SearchPath> {
    let mut steps = Vec::new();
    let mut cur = root;
    let mut idx = index;
    loop {
        let node = src.node(cur)?;
        let (skip, dir) = match node.body {
            NodeBody::Internal { below } => {
                let (below_rank, _) = src.summary(below)?;
                if mode.goes_below(idx, below_rank) {
                    steps.push((cur, Direction::Below));
                    cur = below;
                    continue;
                }
                (below_rank, Direction::After)
            }
            _ => {
                let len = node.own_length();
                if !mode.passes_leaf(idx, len) {
                    return Ok(SearchPath {
                        steps,
                        leaf: cur,
                        residual: idx,
                    });
                }
                (len, Direction::After)
            }
        };
        let after = node
            .after
            .ok_or_else(|| Error::corrupt(format!("index runs past the end at {cur}")))?;
        steps.push((cur, dir));
        idx -= skip;
        cur = after;
    }
}

/// Finds the leaf holding byte `index`.
pub fn search<S: NodeSource + ?Sized>(src: &S, root: NodeId, index: u64) -> Result<SearchPath> {
    let len = total_len(src, root)?;
    if index >= len {
        return Err(Error::IndexOutOfRange { index, len });
    }
    let path = descend(src, root, index, SearchMode::Containing)?;
    let leaf = src.node(path.leaf)?;
    if path.residual >= leaf.own_length() {
        return Err(Error::corrupt(format!("search ended outside leaf {}", path.leaf)));
    }
    Ok(path)
}

/// Recomputes `(rank, digest)` of `node` from its current children.
pub fn compute_label<S: NodeSource + ?Sized>(src: &S, node: &Node) -> Result<(u64, Digest)> {
    let alg = src.alg();
    let after = node.after.map(|a| src.summary(a)).transpose()?;
    let after_rank = after.map_or(0, |a| a.0);
    let after_digest = after.map(|a| a.1);
    let overflow = || Error::corrupt("rank overflow");
    match &node.body {
        NodeBody::Internal { below } => {
            let (below_rank, below_digest) = src.summary(*below)?;
            let rank = below_rank.checked_add(after_rank).ok_or_else(overflow)?;
            let material = Material::Internal {
                below: &below_digest,
                after: after_digest.as_ref(),
            };
            Ok((rank, node_digest(alg, node.level, rank, material)))
        }
        NodeBody::Leaf(p) => {
            let rank = p.length.checked_add(after_rank).ok_or_else(overflow)?;
            let material = Material::Leaf {
                after: after_digest.as_ref(),
                length: p.length,
                block: &p.block.0,
            };
            Ok((rank, node_digest(alg, node.level, rank, material)))
        }
        NodeBody::Sentinel => {
            let material = Material::Sentinel {
                after: after_digest.as_ref(),
            };
            Ok((after_rank, node_digest(alg, node.level, after_rank, material)))
        }
    }
}

/// Pops `stack` (deepest entries last) and refreshes each staged node's
/// rank and digest from its children.
pub fn recompute_path<S: NodeSource + ?Sized>(
    staging: &mut Staging<'_, S>,
    stack: &mut Vec<NodeId>,
) -> Result<()> {
    while let Some(id) = stack.pop() {
        let node = staging.node(id)?.clone();
        let (rank, digest) = compute_label(staging, &node)?;
        let n = staging.get_mut(id)?;
        n.rank = rank;
        n.digest = digest;
    }
    Ok(())
}

/// Creates a finished node in `store`, labelling it from its children.
pub(crate) fn make_node<S: NodeStore + ?Sized>(
    store: &mut S,
    level: u8,
    after: Option<NodeId>,
    body: NodeBody,
    version: u64,
) -> Result<NodeId> {
    let mut node = Node {
        level,
        rank: 0,
        after,
        body,
        digest: store.alg().zero(),
        version,
    };
    let (rank, digest) = compute_label(store, &node)?;
    node.rank = rank;
    node.digest = digest;
    Ok(store.insert(node))
}

/// Builds the canonical list for `blocks`, where each block carries its tower level.
pub fn build_with_levels<S: NodeStore + ?Sized>(
    store: &mut S,
    blocks: &[(LeafPayload, u8)],
    version: u64,
) -> Result<NodeId> {
    if blocks.iter().any(|(p, _)| p.length == 0) {
        return Err(Error::BlockTooSmall);
    }
    if let Some((_, l)) = blocks.iter().find(|(_, l)| *l > MAX_LEVEL) {
        return Err(Error::DomainError(format!("level {l} exceeds the cap")));
    }
    let top = blocks.iter().map(|(_, l)| *l).max().unwrap_or(0);
    // Tower 0 is the left sentinel, towers 1..=n the blocks, n+1 the right sentinel.
    let n = blocks.len();
    let height = |t: usize| -> u8 {
        if t == 0 {
            top
        } else if t == n + 1 {
            0
        } else {
            blocks[t - 1].1
        }
    };
    let mut next_at_least: Vec<Option<usize>> = vec![None; top as usize + 1];
    let mut entry: Vec<Option<NodeId>> = vec![None; n + 2];
    for t in (0..n + 2).rev() {
        let h = height(t);
        let link_at = |l: u8, next: &[Option<usize>], entry: &[Option<NodeId>]| {
            next[l as usize]
                .filter(|&u| height(u) == l)
                .and_then(|u| entry[u])
        };
        let leaf_after = link_at(0, &next_at_least, &entry);
        let body = if t == 0 || t == n + 1 {
            NodeBody::Sentinel
        } else {
            NodeBody::Leaf(blocks[t - 1].0.clone())
        };
        let mut cur = make_node(store, 0, leaf_after, body, version)?;
        for l in 1..=h {
            if let Some(after) = link_at(l, &next_at_least, &entry) {
                cur = make_node(store, l, Some(after), NodeBody::Internal { below: cur }, version)?;
            }
        }
        entry[t] = Some(cur);
        for slot in next_at_least.iter_mut().take(h as usize + 1) {
            *slot = Some(t);
        }
    }
    Ok(entry[0].expect("left sentinel built"))
}

/// Builds the canonical list, drawing one level per block from `src`.
pub fn build<S: NodeStore + ?Sized>(
    store: &mut S,
    blocks: &[LeafPayload],
    src: LevelSource,
    version: u64,
) -> Result<(NodeId, LevelSource)> {
    let mut src = src;
    let with_levels: Vec<(LeafPayload, u8)> = blocks.iter().map(|b| (b.clone(), src.draw())).collect();
    let root = build_with_levels(store, &with_levels, version)?;
    Ok((root, src))
}

/// One data block as seen from a version: its leaf and tower height.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockEntry {
    pub leaf: NodeId,
    pub payload: LeafPayload,
    pub level: u8,
    /// Byte offset of the block within the version.
    pub start: u64,
}

/// Lists the blocks of a version in order. Tower heights are recovered from
/// the level of the node whose after link enters each tower.
pub fn blocks<S: NodeSource + ?Sized>(src: &S, root: NodeId) -> Result<Vec<BlockEntry>> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    walk_in_order(src, root, |id, node, tower_height| {
        if let NodeBody::Leaf(p) = &node.body {
            out.push(BlockEntry {
                leaf: id,
                payload: p.clone(),
                level: tower_height,
                start: offset,
            });
            offset += p.length;
        }
        Ok(())
    })?;
    Ok(out)
}

/// In-order traversal (below subtree before after subtree), which visits
/// leaves in data order. The callback also receives the height of the tower
/// the node belongs to. Returns the number of nodes visited.
pub fn walk_in_order<S, F>(src: &S, root: NodeId, mut visit: F) -> Result<usize>
where
    S: NodeSource + ?Sized,
    F: FnMut(NodeId, &Node, u8) -> Result<()>,
{
    let root_level = src.node(root)?.level;
    let mut stack = vec![(root, root_level)];
    let mut visited = 0;
    while let Some((id, tower)) = stack.pop() {
        let node = src.node(id)?;
        visited += 1;
        visit(id, node, tower)?;
        if let Some(after) = node.after {
            stack.push((after, node.level));
        }
        if let Some(below) = node.below() {
            stack.push((below, tower));
        }
    }
    Ok(visited)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StructureStats {
    pub nodes: usize,
    pub leaves: usize,
    pub height: u8,
    pub total: u64,
}

/// Full sweep: rank law, digest binding and link-level discipline for every
/// node reachable from `root`.
pub fn check_structure<S: NodeSource + ?Sized>(src: &S, root: NodeId) -> Result<StructureStats> {
    let mut stats = StructureStats::default();
    walk_in_order(src, root, |id, node, _| {
        stats.nodes += 1;
        stats.height = stats.height.max(node.level);
        let (rank, digest) = compute_label(src, node)?;
        if rank != node.rank {
            return Err(Error::corrupt(format!("{id}: rank {} but children give {rank}", node.rank)));
        }
        if digest != node.digest {
            return Err(Error::corrupt(format!("{id}: stored digest does not match children")));
        }
        match &node.body {
            NodeBody::Internal { below } => {
                if node.level == 0 || src.node(*below)?.level >= node.level {
                    return Err(Error::corrupt(format!("{id}: below link does not descend")));
                }
            }
            NodeBody::Leaf(p) => {
                stats.leaves += 1;
                if p.length == 0 || node.level != 0 {
                    return Err(Error::corrupt(format!("{id}: malformed leaf")));
                }
            }
            NodeBody::Sentinel => {
                if node.level != 0 {
                    return Err(Error::corrupt(format!("{id}: sentinel above level 0")));
                }
            }
        }
        if let Some(after) = node.after {
            if src.node(after)?.level > node.level {
                return Err(Error::corrupt(format!("{id}: after link climbs")));
            }
        }
        Ok(())
    })?;
    stats.total = src.summary(root)?.0;
    Ok(stats)
}
