//! Shortest dependency paths between mention heads and the binary merge trees
//! the tree LSTM runs over.

use crate::corpus::{Instance, Token};
use crate::error::{Error, Result};

/// Undirected path through a dependency tree, split at its topmost node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepPath {
    /// Token indices from the first endpoint up to the top node and down to the second.
    pub nodes: Vec<usize>,
    /// Token index of the topmost node (lowest common ancestor).
    pub lca: usize,
    /// Position of `lca` inside `nodes`.
    pub lca_pos: usize,
    /// Both endpoints are the same token.
    pub degenerate: bool,
}

impl DepPath {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Endpoint `a` up to and including the top node.
    pub fn left_arm(&self) -> &[usize] {
        &self.nodes[..=self.lca_pos]
    }

    /// Top node down to endpoint `b`, top node included.
    pub fn right_arm(&self) -> &[usize] {
        &self.nodes[self.lca_pos..]
    }
}

fn ancestors(tokens: &[Token], start: usize) -> Vec<usize> {
    let mut chain = vec![start];
    let mut cur = start;
    while let Some(p) = tokens[cur].parent() {
        chain.push(p);
        cur = p;
        if chain.len() > tokens.len() {
            break;
        }
    }
    chain
}

/// Shortest path between tokens `a` and `b`, ignoring edge direction.
pub fn shortest_path(tokens: &[Token], a: usize, b: usize) -> Result<DepPath> {
    let n = tokens.len();
    if a >= n || b >= n {
        return Err(Error::invalid(format!(
            "path endpoints ({a}, {b}) out of range for {n} tokens"
        )));
    }
    let up_a = ancestors(tokens, a);
    let up_b = ancestors(tokens, b);
    let mut depth_in_a = vec![usize::MAX; n];
    for (d, &t) in up_a.iter().enumerate() {
        depth_in_a[t] = d;
    }
    let (j, lca) = up_b
        .iter()
        .enumerate()
        .find(|(_, &t)| depth_in_a[t] != usize::MAX)
        .map(|(j, &t)| (j, t))
        .ok_or_else(|| Error::invalid("tokens are not in one dependency tree"))?;
    let i = depth_in_a[lca];
    let mut nodes: Vec<usize> = up_a[..=i].to_vec();
    nodes.extend(up_b[..j].iter().rev());
    Ok(DepPath {
        nodes,
        lca,
        lca_pos: i,
        degenerate: a == b,
    })
}

/// Path between the two mention head words of an instance.
pub fn instance_path(inst: &Instance) -> Result<DepPath> {
    shortest_path(&inst.tokens, inst.m1.head_word, inst.m2.head_word)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeNode {
    Leaf {
        /// Position along the path; leaves appear in path order.
        path_pos: usize,
        token: usize,
        mention_head: bool,
    },
    Merge {
        left: usize,
        right: usize,
    },
}

/// Binary tree over a dependency path. Children always precede their parent
/// and the root is the last node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathMergeTree {
    pub nodes: Vec<MergeNode>,
}

impl PathMergeTree {
    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, MergeNode::Leaf { .. }))
            .count()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    /// Leaf node ids in path order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut leaves: Vec<(usize, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| match n {
                MergeNode::Leaf { path_pos, .. } => Some((*path_pos, id)),
                MergeNode::Merge { .. } => None,
            })
            .collect();
        leaves.sort_unstable();
        leaves.into_iter().map(|(_, id)| id).collect()
    }

    pub fn children(&self, id: usize) -> Vec<usize> {
        match self.nodes[id] {
            MergeNode::Leaf { .. } => Vec::new(),
            MergeNode::Merge { left, right } => vec![left, right],
        }
    }

    /// Smallest and largest sentence token index covered by a node.
    pub fn token_span(&self, id: usize) -> (usize, usize) {
        match self.nodes[id] {
            MergeNode::Leaf { token, .. } => (token, token),
            MergeNode::Merge { left, right } => {
                let (a, b) = self.token_span(left);
                let (c, d) = self.token_span(right);
                (a.min(c), b.max(d))
            }
        }
    }

    /// Sentence token indices of the leaves under a node, left to right.
    pub fn leaf_tokens(&self, id: usize) -> Vec<usize> {
        match self.nodes[id] {
            MergeNode::Leaf { token, .. } => vec![token],
            MergeNode::Merge { left, right } => {
                let mut v = self.leaf_tokens(left);
                v.extend(self.leaf_tokens(right));
                v
            }
        }
    }
}

/// Folds each arm of the path from its mention toward the top node, then
/// merges the two arm tops at the root. The top node is consumed by the left
/// arm, so it appears exactly once.
pub fn build_merge_tree(path: &DepPath) -> PathMergeTree {
    assert!(!path.is_empty(), "merge tree needs a non-empty path");
    let last = path.len() - 1;
    let mut nodes: Vec<MergeNode> = path
        .nodes
        .iter()
        .enumerate()
        .map(|(pos, &token)| MergeNode::Leaf {
            path_pos: pos,
            token,
            mention_head: pos == 0 || pos == last,
        })
        .collect();

    let mut fold = |positions: &mut dyn Iterator<Item = usize>| -> Option<usize> {
        let mut acc = positions.next()?;
        for pos in positions {
            nodes.push(MergeNode::Merge {
                left: acc,
                right: pos,
            });
            acc = nodes.len() - 1;
        }
        Some(acc)
    };
    let left_top = fold(&mut (0..=path.lca_pos)).expect("left arm holds the top node");
    let right_top = fold(&mut ((path.lca_pos + 1)..=last).rev());

    if let Some(right_top) = right_top {
        nodes.push(MergeNode::Merge {
            left: left_top,
            right: right_top,
        });
    }
    // Leaves were emitted first, so when the left arm ends in a merge the root
    // is already last. A bare single leaf is its own root.
    PathMergeTree { nodes }
}
