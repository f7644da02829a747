//! Persistent updates by path copying.
//!
//! An update never touches an existing record. It walks from the root to the
//! affected leaf and rebuilds that path bottom-up inside a [`Staging`]
//! overlay: each new node points at the rebuilt child it came through and
//! shares every other child with the previous version. Insertions and
//! removals additionally relink the frontier (the last node at each level
//! left of the edit) so the result is exactly the list a fresh build over
//! the same blocks and tower levels would produce.

use crate::error::{Error, Result};
use crate::flexlist::{self, descend, make_node, Direction, SearchMode, SearchPath};
use crate::level::LevelSource;
use crate::node::{BlockRef, LeafPayload, Node, NodeBody, NodeId};
use crate::store::{NodeSource, NodeStore, StagedNodes, Staging};

/// One block-level edit. Offsets are byte positions in the layout produced
/// by all preceding operations of the same batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BlockOp {
    /// Replace the block starting at `offset`.
    Modify { offset: u64, data: Vec<u8> },
    /// Insert a block so that it starts at `offset`.
    Insert { offset: u64, data: Vec<u8> },
    /// Remove the block starting at `offset`.
    Remove { offset: u64 },
}

impl BlockOp {
    pub fn offset(&self) -> u64 {
        match self {
            BlockOp::Modify { offset, .. } | BlockOp::Insert { offset, .. } | BlockOp::Remove { offset } => *offset,
        }
    }

    pub fn data(&self) -> Option<&[u8]> {
        match self {
            BlockOp::Modify { data, .. } | BlockOp::Insert { data, .. } => Some(data),
            BlockOp::Remove { .. } => None,
        }
    }
}

fn relabel<S: NodeStore + ?Sized>(store: &mut S, mut node: Node) -> Result<NodeId> {
    let (rank, digest) = flexlist::compute_label(store, &node)?;
    node.rank = rank;
    node.digest = digest;
    Ok(store.insert(node))
}

/// Rebuilds `path` bottom-up. Frontier nodes at levels `0..new_after.len()`
/// get the after link given there; an internal frontier node whose entry is
/// `None` disappears and missing ones are created where the path crosses
/// their level. `leaf` replaces the payload of the final leaf.
fn rebuild<S: NodeSource + ?Sized>(
    st: &mut Staging<'_, S>,
    path: &SearchPath,
    new_after: &[Option<NodeId>],
    leaf: Option<LeafPayload>,
) -> Result<NodeId> {
    let version = st.version();
    let edited = |l: u8| (l as usize) < new_after.len();
    let mut node = st.node(path.leaf)?.clone();
    if edited(0) {
        node.after = new_after[0];
    }
    if let Some(p) = leaf {
        if !matches!(node.body, NodeBody::Leaf(_)) {
            return Err(Error::corrupt("payload replacement on a sentinel"));
        }
        node.body = NodeBody::Leaf(p);
    }
    let mut r = relabel(st, node)?;
    let mut below_level = 0u8;

    let create_between = |st: &mut Staging<'_, S>, r: &mut NodeId, lo: u8, hi: u8| -> Result<()> {
        for m in lo.saturating_add(1)..=hi {
            if !edited(m) || m == 0 {
                continue;
            }
            if let Some(a) = new_after[m as usize] {
                *r = make_node(st, m, Some(a), NodeBody::Internal { below: *r }, version)?;
            }
        }
        Ok(())
    };

    for &(id, dir) in path.steps.iter().rev() {
        let old = st.node(id)?.clone();
        let l = old.level;
        match dir {
            Direction::Below => {
                create_between(st, &mut r, below_level, l - 1)?;
                if edited(l) {
                    if let Some(a) = new_after[l as usize] {
                        r = make_node(st, l, Some(a), NodeBody::Internal { below: r }, version)?;
                    }
                } else {
                    let mut n = old;
                    n.body = NodeBody::Internal { below: r };
                    r = relabel(st, n)?;
                }
            }
            Direction::After => {
                if l > below_level {
                    create_between(st, &mut r, below_level, l)?;
                }
                let mut n = old;
                n.after = Some(r);
                r = relabel(st, n)?;
            }
        }
        below_level = l;
    }
    // Levels above the current root belong to the left sentinel tower.
    let top = new_after.len().saturating_sub(1) as u8;
    if top > below_level {
        create_between(st, &mut r, below_level, top)?;
    }
    Ok(r)
}

/// Copies the path to the block holding byte `offset` and swaps its payload.
pub fn pmodify<S: NodeSource + ?Sized>(
    st: &mut Staging<'_, S>,
    root: NodeId,
    offset: u64,
    payload: LeafPayload,
) -> Result<NodeId> {
    if payload.length == 0 {
        return Err(Error::BlockTooSmall);
    }
    let path = flexlist::search(st, root, offset)?;
    if path.residual != 0 {
        return Err(Error::NotBlockAligned(offset));
    }
    rebuild(st, &path, &[], Some(payload))
}

/// Inserts a block of tower height `level` so that it starts at `offset`,
/// which must be a block boundary or the total length.
pub fn pinsert<S: NodeSource + ?Sized>(
    st: &mut Staging<'_, S>,
    root: NodeId,
    offset: u64,
    payload: LeafPayload,
    level: u8,
) -> Result<NodeId> {
    if payload.length == 0 {
        return Err(Error::BlockTooSmall);
    }
    if level > crate::node::MAX_LEVEL {
        return Err(Error::DomainError(format!("level {level} exceeds the cap")));
    }
    let len = flexlist::total_len(st, root)?;
    if offset > len {
        return Err(Error::IndexOutOfRange { index: offset, len });
    }
    let path = descend(st, root, offset, SearchMode::Boundary)?;
    if path.residual != st.node(path.leaf)?.own_length() {
        return Err(Error::NotBlockAligned(offset));
    }

    // The new tower takes over the after links of the frontier at and below its height.
    let mut stolen: Vec<Option<NodeId>> = vec![None; level as usize + 1];
    stolen[0] = st.node(path.leaf)?.after;
    for &(id, dir) in &path.steps {
        let n = st.node(id)?;
        if dir == Direction::Below && n.level <= level {
            stolen[n.level as usize] = n.after;
        }
    }
    let version = st.version();
    let mut entry = make_node(st, 0, stolen[0], NodeBody::Leaf(payload), version)?;
    for (l, after) in stolen.iter().enumerate().skip(1) {
        if let Some(a) = after {
            entry = make_node(st, l as u8, Some(*a), NodeBody::Internal { below: entry }, version)?;
        }
    }

    let mut new_after = vec![None; level as usize + 1];
    new_after[level as usize] = Some(entry);
    rebuild(st, &path, &new_after, None)
}

/// Removes the block starting at `offset`. Other towers keep their heights.
pub fn premove<S: NodeSource + ?Sized>(st: &mut Staging<'_, S>, root: NodeId, offset: u64) -> Result<NodeId> {
    let hit = flexlist::search(st, root, offset)?;
    if hit.residual != 0 {
        return Err(Error::NotBlockAligned(offset));
    }
    // The last after move enters the doomed tower; everything after it stays inside.
    let last_after = hit
        .steps
        .iter()
        .rposition(|(_, d)| *d == Direction::After)
        .ok_or_else(|| Error::corrupt("search never left the left sentinel"))?;
    let height = st.node(hit.steps[last_after].0)?.level;
    let mut tower_after: Vec<Option<NodeId>> = vec![None; height as usize + 1];
    for id in hit.nodes().skip(last_after + 1) {
        let n = st.node(id)?;
        tower_after[n.level as usize] = n.after;
    }
    let path = descend(st, root, offset, SearchMode::Boundary)?;
    rebuild(st, &path, &tower_after, None)
}

/// New records for one version, in the order they must be appended.
#[derive(Debug)]
pub struct CommitResult {
    pub version: u64,
    pub old_root: NodeId,
    pub root: NodeId,
    pub staged: StagedNodes,
    /// Level stream position after the batch.
    pub levels: LevelSource,
}

impl CommitResult {
    pub fn created_nodes(&self) -> usize {
        self.staged.nodes.len()
    }
}

/// Runs `ops` in order inside an open staging session and returns the new root.
pub fn apply_in<S: NodeSource + ?Sized>(
    st: &mut Staging<'_, S>,
    root: NodeId,
    ops: &[BlockOp],
    levels: &mut LevelSource,
) -> Result<NodeId> {
    let alg = st.alg();
    let mut cur = root;
    for op in ops {
        cur = match op {
            BlockOp::Modify { offset, data } => pmodify(st, cur, *offset, LeafPayload::for_block(alg, data))?,
            BlockOp::Insert { offset, data } => {
                let level = levels.draw();
                pinsert(st, cur, *offset, LeafPayload::for_block(alg, data), level)?
            }
            BlockOp::Remove { offset } => premove(st, cur, *offset)?,
        };
    }
    Ok(cur)
}

/// Applies `ops` on top of `root` as one new version. Inserted blocks draw
/// their tower heights from `levels`.
pub fn apply_ops<S: NodeSource + ?Sized>(
    base: &S,
    root: NodeId,
    ops: &[BlockOp],
    levels: LevelSource,
    version: u64,
) -> Result<CommitResult> {
    let mut st = Staging::new(base, version);
    let mut levels = levels;
    let cur = apply_in(&mut st, root, ops, &mut levels)?;
    let staged = st.finish(cur)?;
    Ok(CommitResult {
        version,
        old_root: root,
        root: staged.root,
        staged,
        levels,
    })
}

/// Concatenates the blocks of a version, reading content through `fetch`.
pub fn materialize<S, F>(src: &S, root: NodeId, mut fetch: F) -> Result<Vec<u8>>
where
    S: NodeSource + ?Sized,
    F: FnMut(&BlockRef, u64) -> Result<Vec<u8>>,
{
    let mut out = Vec::with_capacity(flexlist::total_len(src, root)? as usize);
    flexlist::walk_in_order(src, root, |_, node, _| {
        if let NodeBody::Leaf(p) = &node.body {
            let data = fetch(&p.block, p.length)?;
            if data.len() as u64 != p.length {
                return Err(Error::MissingBlock(p.block.0.to_hex()));
            }
            out.extend_from_slice(&data);
        }
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flexlist::{blocks, build_with_levels, check_structure};
    use crate::hash::HashAlg;
    use crate::store::NodeArena;

    const ALG: HashAlg = HashAlg::Sha1;

    fn pay(tag: u8, len: usize) -> LeafPayload {
        LeafPayload::for_block(ALG, &vec![tag; len])
    }

    fn fresh(blocks: &[(LeafPayload, u8)]) -> (NodeArena, NodeId) {
        let mut a = NodeArena::new(ALG);
        let r = build_with_levels(&mut a, blocks, 0).unwrap();
        (a, r)
    }

    fn canonical_digest(blocks: &[(LeafPayload, u8)]) -> crate::hash::Digest {
        let (a, r) = fresh(blocks);
        a.node(r).unwrap().digest
    }

    fn commit(arena: &mut NodeArena, res: CommitResult) -> NodeId {
        arena.extend(res.staged.first, res.staged.nodes).unwrap();
        res.root
    }

    fn offset_of(blocks: &[(LeafPayload, u8)], k: usize) -> u64 {
        blocks[..k].iter().map(|(p, _)| p.length).sum()
    }

    // The 90-byte list of the search example: blocks of 15, 20, 20, 20 and 15
    // bytes with towers 0, 1, 3, 0, 1.
    fn worked_list() -> Vec<(LeafPayload, u8)> {
        vec![(pay(1, 15), 0), (pay(2, 20), 1), (pay(3, 20), 3), (pay(4, 20), 0), (pay(5, 15), 1)]
    }

    fn new_nodes(arena: &NodeArena, old: NodeId, new: NodeId) -> usize {
        let mut old_ids = std::collections::HashSet::new();
        flexlist::walk_in_order(arena, old, |id, _, _| {
            old_ids.insert(id);
            Ok(())
        })
        .unwrap();
        let mut fresh_count = 0;
        flexlist::walk_in_order(arena, new, |id, _, _| {
            fresh_count += usize::from(!old_ids.contains(&id));
            Ok(())
        })
        .unwrap();
        fresh_count
    }

    #[test]
    fn worked_insert_at_55_then_remove_gives_the_original_back() {
        let base = worked_list();
        let (mut arena, root) = fresh(&base);
        let src = LevelSource::new(Default::default(), crate::level::LevelDomain::Data);
        let mut st = Staging::new(&arena, 1);
        let ins = pinsert(&mut st, root, 55, pay(9, 5), 2).unwrap();
        let staged = st.finish(ins).unwrap();
        let created = staged.nodes.len();
        arena.extend(staged.first, staged.nodes).unwrap();
        let ins = staged.root;
        let mut expect = base.clone();
        expect.insert(3, (pay(9, 5), 2));
        assert_eq!(arena.node(ins).unwrap().digest, canonical_digest(&expect));
        assert_eq!(arena.node(ins).unwrap().rank, 95);
        // Everything the new version reaches that is not new is shared.
        assert_eq!(new_nodes(&arena, root, ins), created);
        let at: Vec<u64> = blocks(&arena, ins).unwrap().iter().map(|b| b.start).collect();
        assert_eq!(at, vec![0, 15, 35, 55, 60, 80]);

        let res = apply_ops(&arena, ins, &[BlockOp::Remove { offset: 55 }], src, 2).unwrap();
        let rem = commit(&mut arena, res);
        assert_eq!(arena.node(rem).unwrap().digest, arena.node(root).unwrap().digest);
    }

    #[test]
    fn worked_remove_at_35() {
        let base = worked_list();
        let (mut arena, root) = fresh(&base);
        let src = LevelSource::new(Default::default(), crate::level::LevelDomain::Data);
        let res = apply_ops(&arena, root, &[BlockOp::Remove { offset: 35 }], src, 1).unwrap();
        let created = res.created_nodes();
        let new = commit(&mut arena, res);
        let mut expect = base.clone();
        expect.remove(2);
        assert_eq!(arena.node(new).unwrap().digest, canonical_digest(&expect));
        assert_eq!(arena.node(new).unwrap().rank, 70);
        assert_eq!(new_nodes(&arena, root, new), created);
        assert_eq!(arena.node(root).unwrap().digest, canonical_digest(&base));
    }

    #[test]
    fn worked_modify_at_55_with_a_longer_block() {
        let base = worked_list();
        let (mut arena, root) = fresh(&base);
        let path_len = flexlist::search(&arena, root, 55).unwrap().len();
        let src = LevelSource::new(Default::default(), crate::level::LevelDomain::Data);
        let res = apply_ops(&arena, root, &[BlockOp::Modify { offset: 55, data: vec![7; 15] }], src, 1).unwrap();
        assert_eq!(res.created_nodes(), path_len);
        let new = commit(&mut arena, res);
        assert_eq!(arena.node(new).unwrap().rank, 85);
        let mut expect = base.clone();
        expect[3].0 = LeafPayload::for_block(ALG, &[7; 15]);
        assert_eq!(arena.node(new).unwrap().digest, canonical_digest(&expect));
    }

    #[test]
    fn insert_matches_fresh_build_at_every_position_and_level() {
        let base: Vec<(LeafPayload, u8)> = vec![(pay(1, 3), 1), (pay(2, 5), 0), (pay(3, 2), 3), (pay(4, 4), 0), (pay(5, 6), 2)];
        for k in 0..=base.len() {
            for level in 0..=5u8 {
                let (arena, root) = fresh(&base);
                let mut st = Staging::new(&arena, 1);
                let new = pinsert(&mut st, root, offset_of(&base, k), pay(9, 7), level).unwrap();
                let mut expect = base.clone();
                expect.insert(k, (pay(9, 7), level));
                check_structure(&st, new).unwrap();
                assert_eq!(st.node(new).unwrap().digest, canonical_digest(&expect), "k {k} level {level}");
            }
        }
    }

    #[test]
    fn remove_matches_fresh_build() {
        let base: Vec<(LeafPayload, u8)> =
            vec![(pay(1, 3), 1), (pay(2, 5), 0), (pay(3, 2), 3), (pay(4, 4), 0), (pay(5, 6), 2), (pay(6, 1), 3)];
        for k in 0..base.len() {
            let (arena, root) = fresh(&base);
            let mut st = Staging::new(&arena, 1);
            let new = premove(&mut st, root, offset_of(&base, k)).unwrap();
            let mut expect = base.clone();
            expect.remove(k);
            check_structure(&st, new).unwrap();
            assert_eq!(st.node(new).unwrap().digest, canonical_digest(&expect), "k {k}");
        }
    }

    #[test]
    fn remove_last_block_gives_empty_list() {
        let base = vec![(pay(1, 3), 4)];
        let (arena, root) = fresh(&base);
        let mut st = Staging::new(&arena, 1);
        let new = premove(&mut st, root, 0).unwrap();
        assert_eq!(st.node(new).unwrap().digest, canonical_digest(&[]));
    }

    #[test]
    fn insert_into_empty() {
        for level in 0..4 {
            let (arena, root) = fresh(&[]);
            let mut st = Staging::new(&arena, 1);
            let new = pinsert(&mut st, root, 0, pay(1, 4), level).unwrap();
            assert_eq!(st.node(new).unwrap().digest, canonical_digest(&[(pay(1, 4), level)]));
        }
    }

    #[test]
    fn modify_copies_only_the_path() {
        let base: Vec<(LeafPayload, u8)> = (0..32).map(|i| (pay(i, 4), (i % 5) % 3)).collect();
        let (arena, root) = fresh(&base);
        let path_len = flexlist::search(&arena, root, 40).unwrap().len();
        let res = apply_ops(
            &arena,
            root,
            &[BlockOp::Modify { offset: 40, data: vec![99; 4] }],
            LevelSource::new(Default::default(), crate::level::LevelDomain::Data),
            1,
        )
        .unwrap();
        assert_eq!(res.created_nodes(), path_len);
        let mut expect = base.clone();
        expect[10].0 = pay(99, 4);
        let mut arena = arena;
        let new = commit(&mut arena, res);
        assert_eq!(arena.node(new).unwrap().digest, canonical_digest(&expect));
        // The old version is untouched.
        assert_eq!(arena.node(root).unwrap().digest, canonical_digest(&base));
        check_structure(&arena, root).unwrap();
    }

    #[test]
    fn misaligned_and_out_of_range() {
        let base = vec![(pay(1, 4), 0), (pay(2, 4), 1)];
        let (arena, root) = fresh(&base);
        let mut st = Staging::new(&arena, 1);
        assert!(matches!(pinsert(&mut st, root, 2, pay(3, 1), 0), Err(Error::NotBlockAligned(2))));
        assert!(matches!(pinsert(&mut st, root, 9, pay(3, 1), 0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(premove(&mut st, root, 5), Err(Error::NotBlockAligned(5))));
        assert!(matches!(premove(&mut st, root, 8), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(pmodify(&mut st, root, 1, pay(3, 1)), Err(Error::NotBlockAligned(1))));
        assert!(pinsert(&mut st, root, 8, pay(3, 1), 0).is_ok());
    }

    #[test]
    fn insert_then_remove_restores_digest() {
        let base: Vec<(LeafPayload, u8)> = (0..20).map(|i| (pay(i, 3), [0, 2, 1, 0, 4][i as usize % 5])).collect();
        let (arena, root) = fresh(&base);
        for k in [0usize, 7, 20] {
            for level in [0u8, 2, 6] {
                let mut st = Staging::new(&arena, 1);
                let off = offset_of(&base, k);
                let a = pinsert(&mut st, root, off, pay(200, 5), level).unwrap();
                let b = premove(&mut st, a, off).unwrap();
                assert_eq!(st.node(b).unwrap().digest, arena.node(root).unwrap().digest);
            }
        }
    }

    #[test]
    fn materialize_concatenates() {
        let contents: Vec<Vec<u8>> = vec![b"abc".to_vec(), b"defg".to_vec(), b"h".to_vec()];
        let base: Vec<(LeafPayload, u8)> = contents
            .iter()
            .zip([1u8, 0, 2])
            .map(|(c, l)| (LeafPayload::for_block(ALG, c), l))
            .collect();
        let (arena, root) = fresh(&base);
        let out = materialize(&arena, root, |b, _| {
            Ok(contents.iter().find(|c| BlockRef::of(ALG, c) == *b).unwrap().clone())
        })
        .unwrap();
        assert_eq!(out, b"abcdefgh");
        assert_eq!(blocks(&arena, root).unwrap().iter().map(|b| b.level).collect::<Vec<_>>(), vec![1, 0, 2]);
    }
}
