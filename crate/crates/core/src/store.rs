//! Node storage: the write-once arena of finalized records and the staging
//! overlay where a commit builds its version copies.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::hash::{Digest, HashAlg};
use crate::node::{Node, NodeBody, NodeId};

/// Read access to a node graph.
pub trait NodeSource {
    fn alg(&self) -> HashAlg;

    /// The full record. Sources that only know a node's digest (partial
    /// lists rebuilt from proofs) return [`Error::PathNotCovered`].
    fn node(&self, id: NodeId) -> Result<&Node>;

    /// `(rank, digest)` of a node; available even for opaque nodes.
    fn summary(&self, id: NodeId) -> Result<(u64, Digest)> {
        let n = self.node(id)?;
        Ok((n.rank, n.digest))
    }

    /// Smallest id this source will never hand out for an existing node.
    fn id_bound(&self) -> u64;
}

/// A node graph that accepts new records.
pub trait NodeStore: NodeSource {
    fn insert(&mut self, node: Node) -> NodeId;
}

/// In-memory, append-only node records. Ids are dense indices.
#[derive(Clone, Debug)]
pub struct NodeArena {
    alg: HashAlg,
    nodes: Vec<Node>,
}

impl NodeArena {
    pub fn new(alg: HashAlg) -> Self {
        NodeArena {
            alg,
            nodes: Vec::new(),
        }
    }

    pub fn from_nodes(alg: HashAlg, nodes: Vec<Node>) -> Self {
        NodeArena { alg, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Appends records produced by [`Staging::finish`]. Their ids must
    /// continue the arena's numbering.
    pub fn extend(&mut self, first: NodeId, nodes: Vec<Node>) -> Result<()> {
        if first.0 != self.nodes.len() as u64 {
            return Err(Error::corrupt(format!(
                "staged records start at {first}, arena ends at {}",
                self.nodes.len()
            )));
        }
        self.nodes.extend(nodes);
        Ok(())
    }
}

impl NodeSource for NodeArena {
    fn alg(&self) -> HashAlg {
        self.alg
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes
            .get(id.0 as usize)
            .ok_or_else(|| Error::corrupt(format!("dangling link to {id}")))
    }

    fn id_bound(&self) -> u64 {
        self.nodes.len() as u64
    }
}

impl NodeStore for NodeArena {
    fn insert(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() as u64 - 1)
    }
}

/// Mutable overlay above a finalized source. Staged nodes receive ids past
/// the base's bound; [`Staging::finish`] keeps the ones reachable from the
/// final root and renumbers them densely, children first.
pub struct Staging<'a, S: NodeSource + ?Sized> {
    base: &'a S,
    first: u64,
    staged: Vec<Option<Node>>,
    version: u64,
}

/// Output of a staging session, ready to append to the arena.
#[derive(Debug)]
pub struct StagedNodes {
    pub first: NodeId,
    pub nodes: Vec<Node>,
    /// Final root id after renumbering (may be a base node if nothing changed).
    pub root: NodeId,
}

impl<'a, S: NodeSource + ?Sized> Staging<'a, S> {
    pub fn new(base: &'a S, version: u64) -> Self {
        Staging {
            base,
            first: base.id_bound(),
            staged: Vec::new(),
            version,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn base(&self) -> &'a S {
        self.base
    }

    pub fn is_staged(&self, id: NodeId) -> bool {
        id.0 >= self.first && ((id.0 - self.first) as usize) < self.staged.len()
    }

    /// Number of live staged records.
    pub fn live(&self) -> usize {
        self.staged.iter().filter(|n| n.is_some()).count()
    }

    pub(crate) fn alloc(&mut self, node: Node) -> NodeId {
        self.staged.push(Some(node));
        NodeId(self.first + self.staged.len() as u64 - 1)
    }

    pub(crate) fn get_mut(&mut self, id: NodeId) -> Result<&mut Node> {
        if !self.is_staged(id) {
            return Err(Error::corrupt(format!("{id} is finalized and cannot change")));
        }
        self.staged[(id.0 - self.first) as usize]
            .as_mut()
            .ok_or_else(|| Error::corrupt(format!("{id} was discarded")))
    }

    /// Copy of `id` stamped with the staging version.
    pub fn copy_of(&mut self, id: NodeId) -> Result<NodeId> {
        let mut n = self.node(id)?.clone();
        n.version = self.version;
        Ok(self.alloc(n))
    }

    pub fn finish(self, root: NodeId) -> Result<StagedNodes> {
        let first = self.first;
        let mut map: HashMap<NodeId, NodeId> = HashMap::new();
        let mut out: Vec<Node> = Vec::new();
        if self.is_staged(root) {
            // Iterative post-order over staged nodes only.
            let mut stack = vec![(root, false)];
            while let Some((id, expanded)) = stack.pop() {
                if map.contains_key(&id) {
                    continue;
                }
                let node = self.node(id)?;
                if !expanded {
                    stack.push((id, true));
                    for child in node.after.into_iter().chain(node.below()) {
                        if self.is_staged(child) && !map.contains_key(&child) {
                            stack.push((child, false));
                        }
                    }
                    continue;
                }
                let mut n = node.clone();
                let remap = |c: NodeId| map.get(&c).copied().unwrap_or(c);
                n.after = n.after.map(remap);
                if let NodeBody::Internal { below } = &mut n.body {
                    *below = remap(*below);
                }
                let new_id = NodeId(first + out.len() as u64);
                out.push(n);
                map.insert(id, new_id);
            }
        }
        let root = map.get(&root).copied().unwrap_or(root);
        Ok(StagedNodes {
            first: NodeId(first),
            nodes: out,
            root,
        })
    }
}

impl<S: NodeSource + ?Sized> NodeSource for Staging<'_, S> {
    fn alg(&self) -> HashAlg {
        self.base.alg()
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        if id.0 >= self.first {
            return self
                .staged
                .get((id.0 - self.first) as usize)
                .and_then(|n| n.as_ref())
                .ok_or_else(|| Error::corrupt(format!("dangling link to staged {id}")));
        }
        self.base.node(id)
    }

    fn summary(&self, id: NodeId) -> Result<(u64, Digest)> {
        if id.0 >= self.first {
            let n = self.node(id)?;
            return Ok((n.rank, n.digest));
        }
        self.base.summary(id)
    }

    fn id_bound(&self) -> u64 {
        self.first + self.staged.len() as u64
    }
}

impl<S: NodeSource + ?Sized> NodeStore for Staging<'_, S> {
    fn insert(&mut self, mut node: Node) -> NodeId {
        node.version = self.version;
        self.alloc(node)
    }
}
