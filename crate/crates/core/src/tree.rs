//! Rooted metric trees and their subtree decompositions.
//!
//! Vertices are `1..=m+1`, edges `1..=m`. Edge `e_j` joins `v_j` to its parent
//! `v_{p(j)}` with `j < p(j)`; the root `v_{m+1}` has the single edge `e_m`.
//! On edge `e_j` the coordinate runs from `x = 0` at `v_j` to `x = T_j` at `v_{p(j)}`.

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug)]
pub struct MetricTree<T> {
    parent: Vec<usize>,
    lengths: Vec<T>,
    children: Vec<Vec<usize>>,
}

/// Raw tree description as it appears on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub m: usize,
    pub parents: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl<T: Real> MetricTree<T> {
    /// Validates a parent map (`parents[j-1] = p(j)`) and edge lengths.
    pub fn new(parents: Vec<usize>, lengths: Vec<T>) -> Result<Self> {
        let m = parents.len();
        if m == 0 {
            return Err(Error::input("tree must have at least one edge"));
        }
        if lengths.len() != m {
            return Err(Error::input(format!(
                "expected {m} lengths, found {}",
                lengths.len()
            )));
        }
        for (i, &p) in parents.iter().enumerate() {
            if p == 0 || p > m + 1 {
                return Err(Error::input(format!(
                    "orphan vertex: edge e{} points to nonexistent parent v{p}",
                    i + 1
                )));
            }
        }
        // Cycle check before the ordering rule so that loops are reported as such.
        for start in 1..=m {
            let mut v = start;
            let mut steps = 0;
            while v != m + 1 {
                v = parents[v - 1];
                steps += 1;
                if steps > m + 1 || v == start {
                    return Err(Error::input(format!("cycle detected through v{start}")));
                }
            }
        }
        for (i, &p) in parents.iter().enumerate() {
            if p <= i + 1 {
                return Err(Error::input(format!(
                    "edge e{}: parent index {p} must exceed the child index",
                    i + 1
                )));
            }
        }
        for (i, &l) in lengths.iter().enumerate() {
            if !(l > T::zero()) || !l.is_finite() {
                return Err(Error::input(format!(
                    "edge e{}: non-positive length {}",
                    i + 1,
                    l
                )));
            }
        }
        let root_deg = parents.iter().filter(|&&p| p == m + 1).count();
        if root_deg != 1 {
            return Err(Error::input(format!(
                "root degree must be 1, found {root_deg}"
            )));
        }
        let mut children = vec![Vec::new(); m + 1];
        for (i, &p) in parents.iter().enumerate() {
            children[p - 1].push(i + 1);
        }
        Ok(Self { parent: parents, lengths, children })
    }

    pub fn from_spec(spec: &TreeSpec) -> Result<Self> {
        if spec.parents.len() != spec.m {
            return Err(Error::input(format!(
                "m = {} but {} parents listed",
                spec.m,
                spec.parents.len()
            )));
        }
        let lengths = spec
            .lengths
            .iter()
            .map(|&l| T::from_f64(l).ok_or_else(|| Error::input("length not representable")))
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec.parents.clone(), lengths)
    }

    pub fn to_spec(&self) -> TreeSpec {
        TreeSpec {
            m: self.m(),
            parents: self.parent.clone(),
            lengths: self.lengths.iter().map(|&l| to_f64(l)).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.m() + 1
    }

    pub fn vertex_count(&self) -> usize {
        self.m() + 1
    }

    pub fn parent(&self, j: usize) -> usize {
        self.parent[j - 1]
    }

    pub fn length(&self, j: usize) -> T {
        self.lengths[j - 1]
    }

    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    /// Edges whose lower end hangs below `v`.
    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v - 1]
    }

    /// Edges incident to `v`, in increasing index order.
    pub fn incident(&self, v: usize) -> Vec<usize> {
        let mut e: Vec<usize> = self.children(v).to_vec();
        if v <= self.m() {
            e.push(v);
        }
        e.sort_unstable();
        e
    }

    pub fn degree(&self, v: usize) -> usize {
        self.children(v).len() + usize::from(v <= self.m())
    }

    /// Endpoints `(x = 0 end, x = T end)` of an edge.
    pub fn ends(&self, j: usize) -> (usize, usize) {
        (j, self.parent(j))
    }

    pub fn total_length(&self) -> T {
        self.lengths.iter().fold(T::zero(), |a, &b| a + b)
    }

    /// ∂G, sorted; always includes the root.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (1..=self.vertex_count()).filter(|&v| self.degree(v) == 1).collect()
    }

    /// ∂G′ = ∂G without the root.
    pub fn leaves(&self) -> Vec<usize> {
        (1..=self.m()).filter(|&v| self.degree(v) == 1).collect()
    }

    pub fn internal_vertices(&self) -> Vec<usize> {
        (1..=self.vertex_count()).filter(|&v| self.degree(v) > 1).collect()
    }

    pub fn b(&self) -> usize {
        self.boundary_vertices().len()
    }

    pub fn full(&self) -> SubtreeView {
        SubtreeView::new(self, (1..=self.m()).collect())
    }

    /// Edges of the directed subtree g_v hanging below `v`.
    pub fn descendant_edges(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = self.children(v).to_vec();
        while let Some(e) = stack.pop() {
            out.push(e);
            stack.extend_from_slice(self.children(e));
        }
        out.sort_unstable();
        out
    }

    pub fn split_at_vertex(&self, u: usize) -> Result<Vec<SubtreeView>> {
        self.full().split_at(self, u)
    }

    pub fn decompose_at_parent(&self, k: usize) -> Result<SubtreeDecomposition> {
        SubtreeDecomposition::new(self, &self.full(), k)
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let s = serde_json::to_string(&self.to_spec()).expect("tree spec serializes");
        hex_digest(s.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// A connected edge subset of a tree, referring back to the parent tree by index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubtreeView {
    edges: Vec<usize>,
    mask: Vec<bool>,
    degree: Vec<usize>,
}

impl SubtreeView {
    pub fn new<T: Real>(tree: &MetricTree<T>, mut edges: Vec<usize>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut mask = vec![false; tree.m()];
        let mut degree = vec![0; tree.vertex_count()];
        for &e in &edges {
            mask[e - 1] = true;
            let (a, b) = tree.ends(e);
            degree[a - 1] += 1;
            degree[b - 1] += 1;
        }
        Self { edges, mask, degree }
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn contains(&self, e: usize) -> bool {
        self.mask.get(e.wrapping_sub(1)).copied().unwrap_or(false)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degree.get(v.wrapping_sub(1)).copied().unwrap_or(0)
    }

    pub fn has_vertex(&self, v: usize) -> bool {
        self.degree(v) > 0
    }

    pub fn incident<T: Real>(&self, tree: &MetricTree<T>, v: usize) -> Vec<usize> {
        tree.incident(v).into_iter().filter(|&e| self.contains(e)).collect()
    }

    pub fn vertices(&self) -> Vec<usize> {
        (1..=self.degree.len()).filter(|&v| self.degree(v) > 0).collect()
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (1..=self.degree.len()).filter(|&v| self.degree(v) == 1).collect()
    }

    pub fn internal_vertices(&self) -> Vec<usize> {
        (1..=self.degree.len()).filter(|&v| self.degree(v) > 1).collect()
    }

    pub fn boundary_count(&self) -> usize {
        self.degree.iter().filter(|&&d| d == 1).count()
    }

    pub fn total_length<T: Real>(&self, tree: &MetricTree<T>) -> T {
        self.edges.iter().fold(T::zero(), |a, &e| a + tree.length(e))
    }

    pub fn is_connected<T: Real>(&self, tree: &MetricTree<T>) -> bool {
        let Some(&first) = self.edges.first() else {
            return true;
        };
        let mut seen = vec![false; tree.m()];
        let mut stack = vec![first];
        seen[first - 1] = true;
        let mut count = 1;
        while let Some(e) = stack.pop() {
            let (a, b) = tree.ends(e);
            for v in [a, b] {
                for f in self.incident(tree, v) {
                    if !seen[f - 1] {
                        seen[f - 1] = true;
                        count += 1;
                        stack.push(f);
                    }
                }
            }
        }
        count == self.edges.len()
    }

    /// Component of the view minus `u` that contains edge `e` (which touches `u`).
    pub fn branch<T: Real>(&self, tree: &MetricTree<T>, u: usize, e: usize) -> Vec<usize> {
        let mut out = vec![e];
        let (a, b) = tree.ends(e);
        let mut stack = vec![(if a == u { b } else { a }, e)];
        while let Some((v, from)) = stack.pop() {
            for f in self.incident(tree, v) {
                if f != from {
                    out.push(f);
                    let (a, b) = tree.ends(f);
                    stack.push((if a == v { b } else { a }, f));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Splits at an internal vertex into one subtree per incident edge.
    pub fn split_at<T: Real>(&self, tree: &MetricTree<T>, u: usize) -> Result<Vec<SubtreeView>> {
        if self.degree(u) < 2 {
            return Err(Error::input(format!(
                "v{u} is not an internal vertex of the subtree"
            )));
        }
        Ok(self
            .incident(tree, u)
            .into_iter()
            .map(|e| SubtreeView::new(tree, self.branch(tree, u, e)))
            .collect())
    }
}

/// Decomposition of a (sub)tree at the parent `v_p` of a boundary vertex `v_k`.
#[derive(Clone, Debug)]
pub struct SubtreeDecomposition {
    pub k: usize,
    pub p: usize,
    /// The tree being decomposed.
    pub whole: SubtreeView,
    /// g_p: everything hanging below v_p.
    pub lower: SubtreeView,
    /// G_p: the rest.
    pub upper: SubtreeView,
    /// g_p* = g_p \ {e_k}.
    pub reduced: SubtreeView,
    pub b_p: usize,
    pub big_b_p: usize,
}

impl SubtreeDecomposition {
    /// `k` must be a boundary vertex of `whole` and the lower end of its edge.
    pub fn new<T: Real>(tree: &MetricTree<T>, whole: &SubtreeView, k: usize) -> Result<Self> {
        if k == 0 || k > tree.m() || !whole.contains(k) || whole.degree(k) != 1 {
            return Err(Error::input(format!("e{k} is not a boundary edge")));
        }
        let p = tree.parent(k);
        if p == tree.root() || whole.degree(p) < 2 {
            return Err(Error::input(format!("v{p} has no upper subtree")));
        }
        let lower_edges: Vec<usize> = tree
            .descendant_edges(p)
            .into_iter()
            .filter(|&e| whole.contains(e))
            .collect();
        let upper_edges: Vec<usize> = whole
            .edges()
            .iter()
            .copied()
            .filter(|e| !lower_edges.contains(e))
            .collect();
        if upper_edges.is_empty() {
            return Err(Error::input(format!("v{p} has no upper subtree")));
        }
        let reduced: Vec<usize> = lower_edges.iter().copied().filter(|&e| e != k).collect();
        let lower = SubtreeView::new(tree, lower_edges);
        let upper = SubtreeView::new(tree, upper_edges);
        let reduced = SubtreeView::new(tree, reduced);
        let b_p = lower.boundary_count();
        let big_b_p = upper.boundary_count();
        Ok(Self { k, p, whole: whole.clone(), lower, upper, reduced, b_p, big_b_p })
    }

    /// 𝒯 = length(G_p).
    pub fn upper_length<T: Real>(&self, tree: &MetricTree<T>) -> T {
        self.upper.total_length(tree)
    }
}
