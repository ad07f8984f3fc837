//! Ordered-tree edit distance over skeleton trees.
//!
//! `tree_edit_distance` implements the Zhang-Shasha dynamic program with unit
//! costs (insert = delete = relabel = 1, relabel = 0 on equal labels).
//! `ted_bruteforce` is an independent exhaustive implementation of the same
//! edit model, capped at small trees, used to cross-check the main algorithm.
//!
//! Memory bound is O(|t1|*|t2|): one (|t1|+1) x (|t2|+1) forest table reused
//! across keyroot pairs plus the |t1| x |t2| tree-distance table.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::skeleton::{SkeletonNode, SkeletonTree};

/// Unit-cost edit distance between two ordered labeled trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EditDistance(pub usize);

impl fmt::Display for EditDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TedError {
    #[error("tree edit distance requires non-empty trees")]
    EmptyTree,
    #[error("brute-force oracle limited to {max} nodes, got {size}")]
    SizeLimit { size: usize, max: usize },
}

/// Maximum tree size accepted by [`ted_bruteforce`].
pub const BRUTEFORCE_MAX_NODES: usize = 8;

/// Postorder representation of an ordered labeled tree.
///
/// `lld[i]` is the postorder index of the leftmost leaf descendant of node
/// `i`; keyroots are exactly the nodes with no left sibling on their path to
/// the root, sorted ascending, with the root always last.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PostorderTree {
    labels: Vec<String>,
    lld: Vec<usize>,
    keyroots: Vec<usize>,
}

impl PostorderTree {
    pub fn from_node(root: &SkeletonNode) -> Self {
        let mut labels = Vec::new();
        let mut lld = Vec::new();
        fn walk(node: &SkeletonNode, labels: &mut Vec<String>, lld: &mut Vec<usize>) -> usize {
            let mut first_child_lld = None;
            for c in &node.children {
                let ci = walk(c, labels, lld);
                if first_child_lld.is_none() {
                    first_child_lld = Some(lld[ci]);
                }
            }
            let idx = labels.len();
            labels.push(node.label.clone());
            lld.push(first_child_lld.unwrap_or(idx));
            idx
        }
        walk(root, &mut labels, &mut lld);

        // keyroot = highest-numbered node among those sharing a leftmost leaf
        let mut max_for_lld: HashMap<usize, usize> = HashMap::new();
        for (i, &l) in lld.iter().enumerate() {
            max_for_lld
                .entry(l)
                .and_modify(|m| *m = (*m).max(i))
                .or_insert(i);
        }
        let mut keyroots: Vec<usize> = max_for_lld.into_values().collect();
        keyroots.sort_unstable();

        PostorderTree {
            labels,
            lld,
            keyroots,
        }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn lld(&self) -> &[usize] {
        &self.lld
    }

    pub fn keyroots(&self) -> &[usize] {
        &self.keyroots
    }
}

impl From<&SkeletonTree> for PostorderTree {
    fn from(tree: &SkeletonTree) -> Self {
        PostorderTree::from_node(&tree.root)
    }
}

/// Exact Zhang-Shasha tree edit distance with unit costs.
pub fn tree_edit_distance(
    t1: &PostorderTree,
    t2: &PostorderTree,
) -> Result<EditDistance, TedError> {
    if t1.is_empty() || t2.is_empty() {
        return Err(TedError::EmptyTree);
    }
    let (n1, n2) = (t1.size(), t2.size());

    // intern labels over the combined alphabet so comparisons are integral
    fn intern<'a>(labels: &'a [String], ids: &mut HashMap<&'a str, u32>) -> Vec<u32> {
        labels
            .iter()
            .map(|l| {
                let next = ids.len() as u32;
                *ids.entry(l.as_str()).or_insert(next)
            })
            .collect()
    }
    let mut ids: HashMap<&str, u32> = HashMap::new();
    let l1 = intern(&t1.labels, &mut ids);
    let l2 = intern(&t2.labels, &mut ids);
    drop(ids);

    let mut treedist = vec![0usize; n1 * n2];
    let mut fdist = vec![0usize; (n1 + 1) * (n2 + 1)];
    let cols = n2 + 1;

    for &k1 in &t1.keyroots {
        for &k2 in &t2.keyroots {
            let ll1 = t1.lld[k1];
            let ll2 = t2.lld[k2];
            fdist[0] = 0;
            for i in ll1..=k1 {
                let fi = i - ll1 + 1;
                fdist[fi * cols] = fdist[(fi - 1) * cols] + 1;
            }
            for j in ll2..=k2 {
                let fj = j - ll2 + 1;
                fdist[fj] = fdist[fj - 1] + 1;
            }
            for i in ll1..=k1 {
                let fi = i - ll1 + 1;
                for j in ll2..=k2 {
                    let fj = j - ll2 + 1;
                    let del = fdist[(fi - 1) * cols + fj] + 1;
                    let ins = fdist[fi * cols + (fj - 1)] + 1;
                    if t1.lld[i] == ll1 && t2.lld[j] == ll2 {
                        let relabel = usize::from(l1[i] != l2[j]);
                        let sub = fdist[(fi - 1) * cols + (fj - 1)] + relabel;
                        let d = del.min(ins).min(sub);
                        fdist[fi * cols + fj] = d;
                        treedist[i * n2 + j] = d;
                    } else {
                        let pi = t1.lld[i] - ll1;
                        let pj = t2.lld[j] - ll2;
                        let sub = fdist[pi * cols + pj] + treedist[i * n2 + j];
                        fdist[fi * cols + fj] = del.min(ins).min(sub);
                    }
                }
            }
        }
    }

    Ok(EditDistance(treedist[(n1 - 1) * n2 + (n2 - 1)]))
}

/// Convenience wrapper over skeleton trees (which are never empty).
pub fn skeleton_distance(a: &SkeletonTree, b: &SkeletonTree) -> EditDistance {
    tree_edit_distance(&PostorderTree::from(a), &PostorderTree::from(b))
        .expect("skeleton trees are non-empty")
}

/// Exhaustive forest edit distance, independent of the Zhang-Shasha code
/// path. Exponential; refuses trees above [`BRUTEFORCE_MAX_NODES`].
pub fn ted_bruteforce(t1: &PostorderTree, t2: &PostorderTree) -> Result<EditDistance, TedError> {
    if t1.is_empty() || t2.is_empty() {
        return Err(TedError::EmptyTree);
    }
    for t in [t1, t2] {
        if t.size() > BRUTEFORCE_MAX_NODES {
            return Err(TedError::SizeLimit {
                size: t.size(),
                max: BRUTEFORCE_MAX_NODES,
            });
        }
    }

    // children of node i, left to right, recovered from postorder + lld
    fn children_of(t: &PostorderTree, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut j = i.wrapping_sub(1);
        while j != usize::MAX && j >= t.lld[i] {
            out.push(j);
            j = t.lld[j].wrapping_sub(1);
        }
        out.reverse();
        out
    }

    fn forest_size(t: &PostorderTree, forest: &[usize]) -> usize {
        forest.iter().map(|&i| i - t.lld[i] + 1).sum()
    }

    fn dist(t1: &PostorderTree, f1: &[usize], t2: &PostorderTree, f2: &[usize]) -> usize {
        if f1.is_empty() {
            return forest_size(t2, f2);
        }
        if f2.is_empty() {
            return forest_size(t1, f1);
        }
        let v = *f1.last().unwrap();
        let w = *f2.last().unwrap();

        // delete v: v's children replace the rightmost tree of f1
        let mut f1_del = f1[..f1.len() - 1].to_vec();
        f1_del.extend(children_of(t1, v));
        let d_del = dist(t1, &f1_del, t2, f2) + 1;

        let mut f2_ins = f2[..f2.len() - 1].to_vec();
        f2_ins.extend(children_of(t2, w));
        let d_ins = dist(t1, f1, t2, &f2_ins) + 1;

        let relabel = usize::from(t1.labels[v] != t2.labels[w]);
        let d_match = dist(t1, &f1[..f1.len() - 1], t2, &f2[..f2.len() - 1])
            + dist(t1, &children_of(t1, v), t2, &children_of(t2, w))
            + relabel;

        d_del.min(d_ins).min(d_match)
    }

    let roots1 = [t1.size() - 1];
    let roots2 = [t2.size() - 1];
    Ok(EditDistance(dist(t1, &roots1, t2, &roots2)))
}

/// Turn a pool of distances into similarities via `1 - d / d_max`.
///
/// `d_max` is the maximum over the given pool. A degenerate pool whose
/// maximum is zero (all skeletons identical) maps every entry to 1.0. An
/// empty slice yields an empty vector.
pub fn normalize_distances(distances: &[EditDistance]) -> Vec<f64> {
    let d_max = distances.iter().map(|d| d.0).max().unwrap_or(0);
    distances
        .iter()
        .map(|d| normalized_similarity(*d, EditDistance(d_max)))
        .collect()
}

/// One entry of the normalization rule; `d_max = 0` maps to 1.0 and any
/// distance above `d_max` clamps to 0.0.
pub fn normalized_similarity(d: EditDistance, d_max: EditDistance) -> f64 {
    if d_max.0 == 0 {
        1.0
    } else {
        (1.0 - d.0 as f64 / d_max.0 as f64).clamp(0.0, 1.0)
    }
}
