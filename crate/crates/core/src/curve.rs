//! Nodal curves as genus-decorated dual multigraphs.
//!
//! Vertices are the irreducible components (each smooth, of genus `g_i`),
//! edges are the nodes. Parallel edges are allowed, loops are not. Vertices
//! and edges are stored in ascending id order and addressed internally by
//! their position in that order; a vertex subset is a `u64` bitmask.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest component count a [`CurveGraph`] accepts (subsets are `u64` masks).
pub const MAX_COMPONENTS: usize = 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Component {
    pub id: u32,
    pub genus: u32,
}

/// A node joining two distinct components, given by vertex positions with `ends.0 < ends.1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub id: u32,
    pub ends: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CurveGraph {
    components: Vec<Component>,
    nodes: Vec<Node>,
    valence: Vec<usize>,
    neighbors: Vec<u64>,
}

/// A non-empty set of components, with the nodes it induces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subcurve(u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CurveClass {
    pub compact_type: bool,
    pub stable: bool,
    pub semistable: bool,
    pub quasistable: bool,
    pub cycle_of_rationals: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveFile {
    vertices: Vec<VertexRecord>,
    edges: Vec<EdgeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexRecord {
    id: i64,
    genus: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    id: i64,
    ends: [i64; 2],
}

impl CurveGraph {
    /// Builds a curve from `(id, genus)` components and `(id, end, end)` nodes,
    /// where node ends are component ids.
    pub fn new(components: Vec<(u32, u32)>, nodes: Vec<(u32, u32, u32)>) -> Result<Self> {
        let bad = |msg: String| Error::InvalidCurve(msg);
        if components.is_empty() {
            return Err(bad("a curve needs at least one component".into()));
        }
        if components.len() > MAX_COMPONENTS {
            return Err(bad(format!(
                "{} components exceed the supported maximum of {MAX_COMPONENTS}",
                components.len()
            )));
        }
        let mut components: Vec<Component> = components
            .into_iter()
            .map(|(id, genus)| Component { id, genus })
            .collect();
        components.sort_by_key(|c| c.id);
        for pair in components.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(bad(format!("duplicate vertex id {}", pair[0].id)));
            }
        }
        if let Some(c) = components.iter().find(|c| c.id == 0) {
            return Err(bad(format!("vertex id {} is not positive", c.id)));
        }

        let index_of = |id: u32| components.binary_search_by_key(&id, |c| c.id).ok();
        let mut nodes_out = Vec::with_capacity(nodes.len());
        let mut seen_ids = BTreeSet::new();
        for (id, a, b) in nodes {
            if id == 0 {
                return Err(bad("edge id 0 is not positive".into()));
            }
            if !seen_ids.insert(id) {
                return Err(bad(format!("duplicate edge id {id}")));
            }
            let ia = index_of(a)
                .ok_or_else(|| bad(format!("edge {id} refers to unknown vertex {a}")))?;
            let ib = index_of(b)
                .ok_or_else(|| bad(format!("edge {id} refers to unknown vertex {b}")))?;
            if ia == ib {
                return Err(bad(format!(
                    "edge {id} is a loop at vertex {a}; components must be smooth"
                )));
            }
            nodes_out.push(Node {
                id,
                ends: (ia.min(ib), ia.max(ib)),
            });
        }
        nodes_out.sort_by_key(|n| n.id);

        let mut valence = vec![0; components.len()];
        let mut neighbors = vec![0u64; components.len()];
        for n in &nodes_out {
            valence[n.ends.0] += 1;
            valence[n.ends.1] += 1;
            neighbors[n.ends.0] |= 1 << n.ends.1;
            neighbors[n.ends.1] |= 1 << n.ends.0;
        }
        let curve = CurveGraph {
            components,
            nodes: nodes_out,
            valence,
            neighbors,
        };
        if !curve.is_connected_mask(curve.full_mask()) {
            return Err(bad("dual graph is not connected".into()));
        }
        Ok(curve)
    }

    /// Convenience constructor: component `i` gets id `i + 1`, node `j` gets id `j + 1`,
    /// and node ends are zero-based component positions.
    pub fn from_genera(genera: &[u32], nodes: &[(usize, usize)]) -> Result<Self> {
        let components = genera
            .iter()
            .enumerate()
            .map(|(i, &g)| (i as u32 + 1, g))
            .collect();
        let nodes = nodes
            .iter()
            .enumerate()
            .map(|(j, &(a, b))| (j as u32 + 1, a as u32 + 1, b as u32 + 1))
            .collect();
        Self::new(components, nodes)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CurveFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("curve: {e}")))?;
        let positive = |what: &str, v: i64| -> Result<u32> {
            if v <= 0 || v > u32::MAX as i64 {
                Err(Error::InvalidCurve(format!(
                    "{what} {v} must be a positive integer"
                )))
            } else {
                Ok(v as u32)
            }
        };
        let mut components = Vec::with_capacity(file.vertices.len());
        for v in &file.vertices {
            let id = positive("vertex id", v.id)?;
            if v.genus < 0 || v.genus > u32::MAX as i64 {
                return Err(Error::InvalidCurve(format!(
                    "vertex {id} has invalid genus {}",
                    v.genus
                )));
            }
            components.push((id, v.genus as u32));
        }
        let mut nodes = Vec::with_capacity(file.edges.len());
        for e in &file.edges {
            let id = positive("edge id", e.id)?;
            let a = positive("edge end", e.ends[0])?;
            let b = positive("edge end", e.ends[1])?;
            nodes.push((id, a, b));
        }
        Self::new(components, nodes)
    }

    /// Canonical JSON: vertices and edges sorted by id, fixed key order.
    pub fn to_json(&self) -> String {
        let file = CurveFile {
            vertices: self
                .components
                .iter()
                .map(|c| VertexRecord {
                    id: c.id as i64,
                    genus: c.genus as i64,
                })
                .collect(),
            edges: self
                .nodes
                .iter()
                .map(|n| EdgeRecord {
                    id: n.id as i64,
                    ends: [
                        self.components[n.ends.0].id as i64,
                        self.components[n.ends.1].id as i64,
                    ],
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("curve serializes")
    }

    /// Graphviz rendering with labels `C_i (g=g_i)` and `p_j`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph curve {\n");
        for c in &self.components {
            let _ = writeln!(out, "  v{} [label=\"C_{} (g={})\"];", c.id, c.id, c.genus);
        }
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "  v{} -- v{} [label=\"p_{}\"];",
                self.components[n.ends.0].id, self.components[n.ends.1].id, n.id
            );
        }
        out.push_str("}\n");
        out
    }

    /// Number of components, γ.
    pub fn gamma(&self) -> usize {
        self.components.len()
    }

    /// Number of nodes, δ.
    pub fn delta(&self) -> usize {
        self.nodes.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn genus(&self, i: usize) -> u32 {
        self.components[i].genus
    }

    pub fn genera(&self) -> Vec<u32> {
        self.components.iter().map(|c| c.genus).collect()
    }

    pub fn vertex_id(&self, i: usize) -> u32 {
        self.components[i].id
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.components.binary_search_by_key(&id, |c| c.id).ok()
    }

    /// Number of nodes on component `i`, δ_i.
    pub fn valence(&self, i: usize) -> usize {
        self.valence[i]
    }

    pub fn neighbors(&self, i: usize) -> u64 {
        self.neighbors[i]
    }

    pub fn full_mask(&self) -> u64 {
        if self.gamma() == 64 {
            u64::MAX
        } else {
            (1u64 << self.gamma()) - 1
        }
    }

    /// p_a(C) = Σg_i + δ − γ + 1.
    pub fn arithmetic_genus(&self) -> i64 {
        self.subset_genus(self.full_mask())
    }

    /// χ(O_C) = 1 − p_a(C).
    pub fn euler_characteristic(&self) -> i64 {
        1 - self.arithmetic_genus()
    }

    /// First Betti number of the dual graph.
    pub fn betti_number(&self) -> i64 {
        self.delta() as i64 - self.gamma() as i64 + 1
    }

    pub fn is_compact_type(&self) -> bool {
        self.betti_number() == 0
    }

    /// Nodes with both ends in `mask`.
    pub fn internal_nodes(&self, mask: u64) -> usize {
        self.nodes
            .iter()
            .filter(|n| mask >> n.ends.0 & 1 == 1 && mask >> n.ends.1 & 1 == 1)
            .count()
    }

    /// Nodes with exactly one end in `mask`.
    pub fn boundary_nodes(&self, mask: u64) -> usize {
        self.nodes
            .iter()
            .filter(|n| (mask >> n.ends.0 & 1) != (mask >> n.ends.1 & 1))
            .count()
    }

    /// 1 − χ(O_B) for the subcurve with components `mask`, connected or not.
    pub fn subset_genus(&self, mask: u64) -> i64 {
        let genus_sum: i64 = members(mask).map(|i| self.genus(i) as i64).sum();
        genus_sum + self.internal_nodes(mask) as i64 - mask.count_ones() as i64 + 1
    }

    pub fn is_connected_mask(&self, mask: u64) -> bool {
        if mask == 0 {
            return false;
        }
        let start = mask.trailing_zeros() as usize;
        let mut reached = 1u64 << start;
        let mut frontier = reached;
        while frontier != 0 {
            let mut next = 0u64;
            for i in members(frontier) {
                next |= self.neighbors[i] & mask;
            }
            frontier = next & !reached;
            reached |= next;
        }
        reached == mask
    }

    /// Splits `mask` into the vertex sets of its connected pieces, ordered by lowest member.
    pub fn connected_pieces(&self, mask: u64) -> Vec<u64> {
        let mut pieces = Vec::new();
        let mut rest = mask;
        while rest != 0 {
            let start = rest.trailing_zeros() as usize;
            let mut piece = 1u64 << start;
            let mut frontier = piece;
            while frontier != 0 {
                let mut next = 0u64;
                for i in members(frontier) {
                    next |= self.neighbors[i] & mask;
                }
                frontier = next & !piece;
                piece |= next;
            }
            pieces.push(piece);
            rest &= !piece;
        }
        pieces
    }

    pub fn classify(&self) -> CurveClass {
        let pa = self.arithmetic_genus();
        let rational: Vec<usize> = (0..self.gamma()).filter(|&i| self.genus(i) == 0).collect();
        let stable = pa >= 2 && rational.iter().all(|&i| self.valence(i) >= 3);
        let semistable = pa >= 2 && rational.iter().all(|&i| self.valence(i) >= 2);
        let exceptional = self.exceptional_mask();
        let quasistable =
            semistable && members(exceptional).all(|i| self.neighbors[i] & exceptional == 0);
        let cycle_of_rationals = self.gamma() >= 2
            && self.delta() == self.gamma()
            && rational.len() == self.gamma()
            && (0..self.gamma()).all(|i| self.valence(i) == 2);
        CurveClass {
            compact_type: self.is_compact_type(),
            stable,
            semistable,
            quasistable,
            cycle_of_rationals,
        }
    }

    /// Rational components meeting the rest of the curve in exactly two nodes.
    pub fn exceptional_mask(&self) -> u64 {
        (0..self.gamma())
            .filter(|&i| self.genus(i) == 0 && self.valence(i) == 2)
            .fold(0, |m, i| m | 1 << i)
    }

    /// Every non-empty proper subcurve with connected dual graph, by ascending bitmask.
    pub fn proper_connected_subcurves(&self) -> Vec<Subcurve> {
        if self.gamma() < 2 {
            return Vec::new();
        }
        let full = self.full_mask();
        (1..full)
            .filter(|&m| self.is_connected_mask(m))
            .map(Subcurve)
            .collect()
    }

    /// Every non-empty proper subcurve, by ascending bitmask.
    pub fn proper_subcurves(&self) -> impl Iterator<Item = Subcurve> {
        let full = if self.gamma() < 2 {
            1
        } else {
            self.full_mask()
        };
        (1..full).map(Subcurve)
    }

    /// Shortest-path distance in edges from `source` to every vertex.
    pub fn bfs_depths(&self, source: usize) -> Vec<usize> {
        let mut depth = vec![usize::MAX; self.gamma()];
        depth[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for v in members(self.neighbors[u]) {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        depth
    }
}

/// Positions of the set bits of `mask`, ascending.
pub fn members(mask: u64) -> impl Iterator<Item = usize> {
    let mut rest = mask;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(i)
        }
    })
}

impl Subcurve {
    pub fn new(curve: &CurveGraph, mask: u64) -> Result<Self> {
        if mask == 0 {
            return Err(Error::InvalidSubcurve("empty component set".into()));
        }
        if mask & !curve.full_mask() != 0 {
            return Err(Error::InvalidSubcurve(format!(
                "mask {mask:#b} names components outside the curve"
            )));
        }
        Ok(Subcurve(mask))
    }

    pub fn from_ids(curve: &CurveGraph, ids: &[u32]) -> Result<Self> {
        let mut mask = 0u64;
        for &id in ids {
            let i = curve.index_of(id).ok_or(Error::UnknownVertex(id))?;
            mask |= 1 << i;
        }
        Self::new(curve, mask)
    }

    pub fn whole(curve: &CurveGraph) -> Self {
        Subcurve(curve.full_mask())
    }

    pub fn single(i: usize) -> Self {
        Subcurve(1 << i)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        members(self.0)
    }

    pub fn is_proper(self, curve: &CurveGraph) -> bool {
        self.0 != curve.full_mask()
    }

    /// The complementary curve B^c, absent when B = C.
    pub fn complement(self, curve: &CurveGraph) -> Option<Subcurve> {
        let rest = curve.full_mask() & !self.0;
        (rest != 0).then_some(Subcurve(rest))
    }

    pub fn ids(self, curve: &CurveGraph) -> Vec<u32> {
        self.members().map(|i| curve.vertex_id(i)).collect()
    }

    /// p_a(B); see [`CurveGraph::subset_genus`].
    pub fn genus(self, curve: &CurveGraph) -> i64 {
        curve.subset_genus(self.0)
    }

    /// δ_B.
    pub fn boundary(self, curve: &CurveGraph) -> usize {
        curve.boundary_nodes(self.0)
    }

    /// N(B).
    pub fn internal(self, curve: &CurveGraph) -> usize {
        curve.internal_nodes(self.0)
    }

    pub fn is_connected(self, curve: &CurveGraph) -> bool {
        curve.is_connected_mask(self.0)
    }
}
