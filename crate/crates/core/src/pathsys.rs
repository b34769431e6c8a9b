//! Marking, minimal-path tree, orientation and the subcurve family {A_j}.
//!
//! Two nodes are parallel when they join the same pair of components. The
//! marking keeps the lowest-id node of each parallel class; the marked graph
//! is simple. A breadth-first tree of the marked graph rooted at the base
//! component gives one minimal path per component (its tree path to the
//! base), and each tree node `p_j` cuts off the subcurve `A_j` of components
//! whose path crosses it.

use num_traits::{One, Zero};
use serde::Serialize;

use crate::curve::{members, CurveGraph, Subcurve};
use crate::error::{Error, Result};
use crate::polarization::{delta_structure_with, LambdaVector, Polarization};
use crate::rational::{half, int, Rational};
use crate::sheaf::SheafDatum;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSystem {
    base: usize,
    /// Representative (marked) node of each node's parallel class.
    class_of: Vec<usize>,
    marking: Vec<usize>,
    tree_edges: Vec<usize>,
    parent: Vec<Option<(usize, usize)>>,
    depth: Vec<usize>,
    /// (predecessor, successor) for every node.
    orientation: Vec<(usize, usize)>,
    /// Components below each vertex in the tree, itself included.
    subtree: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AjEntry {
    /// Position of the marked node p_j.
    pub node: usize,
    /// A_j; `None` when p_j is not on any minimal path.
    pub subcurve: Option<Subcurve>,
    pub boundary: usize,
    pub delta: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AjFamily {
    pub entries: Vec<AjEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Star2Condition {
    pub edge_id: u32,
    pub satisfied: bool,
}

impl PathSystem {
    /// Builds the path system rooted at the component with id `base_id`.
    pub fn build(curve: &CurveGraph, base_id: u32) -> Result<Self> {
        let base = curve
            .index_of(base_id)
            .ok_or(Error::UnknownVertex(base_id))?;
        Ok(Self::build_at(curve, base))
    }

    /// Builds the path system rooted at component position `base`.
    pub fn build_at(curve: &CurveGraph, base: usize) -> Self {
        let gamma = curve.gamma();
        let nodes = curve.nodes();
        assert!(base < gamma, "base {base} out of range");

        let mut class_of = Vec::with_capacity(nodes.len());
        let mut marking = Vec::new();
        let mut marked_between = std::collections::HashMap::new();
        for (j, n) in nodes.iter().enumerate() {
            let rep = *marked_between.entry(n.ends).or_insert_with(|| {
                marking.push(j);
                j
            });
            class_of.push(rep);
        }

        // The marked graph has the same adjacency as the full one.
        let depth = curve.bfs_depths(base);
        let mut parent = vec![None; gamma];
        let mut tree_edges = Vec::new();
        for v in 0..gamma {
            if v == base {
                continue;
            }
            let closer = members(curve.neighbors(v))
                .find(|&u| depth[u] + 1 == depth[v])
                .expect("connected curve has a BFS parent");
            let key = (v.min(closer), v.max(closer));
            let edge = marked_between[&key];
            parent[v] = Some((closer, edge));
            tree_edges.push(edge);
        }
        tree_edges.sort_unstable();

        let orientation = nodes
            .iter()
            .map(|n| {
                let (x, y) = n.ends;
                if depth[x] > depth[y] || (depth[x] == depth[y] && x < y) {
                    (x, y)
                } else {
                    (y, x)
                }
            })
            .collect();

        let mut order: Vec<usize> = (0..gamma).collect();
        order.sort_by_key(|&v| std::cmp::Reverse(depth[v]));
        let mut subtree: Vec<u64> = (0..gamma).map(|v| 1u64 << v).collect();
        for &v in &order {
            if let Some((p, _)) = parent[v] {
                subtree[p] |= subtree[v];
            }
        }

        PathSystem {
            base,
            class_of,
            marking,
            tree_edges,
            parent,
            depth,
            orientation,
            subtree,
        }
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn marking(&self) -> &[usize] {
        &self.marking
    }

    /// M′: marked nodes lying on some minimal path.
    pub fn tree_edges(&self) -> &[usize] {
        &self.tree_edges
    }

    pub fn is_tree_edge(&self, j: usize) -> bool {
        self.tree_edges.binary_search(&j).is_ok()
    }

    pub fn class_of(&self, j: usize) -> usize {
        self.class_of[j]
    }

    pub fn parent(&self, v: usize) -> Option<(usize, usize)> {
        self.parent[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    /// (predecessor, successor) of node `j`.
    pub fn orientation(&self, j: usize) -> (usize, usize) {
        self.orientation[j]
    }

    /// Nodes of the minimal path from `v` to the base, starting at `v`.
    pub fn path(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.depth[v]);
        let mut cur = v;
        while let Some((p, edge)) = self.parent[cur] {
            out.push(edge);
            cur = p;
        }
        out
    }

    /// Components on the minimal path from `v` to the base, starting at `v`.
    pub fn path_vertices(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut cur = v;
        while let Some((p, _)) = self.parent[cur] {
            out.push(p);
            cur = p;
        }
        out
    }

    /// A_j for a marked node: components whose minimal path uses `j`.
    pub fn far_side(&self, curve: &CurveGraph, j: usize) -> Option<Subcurve> {
        if !self.is_tree_edge(j) {
            return None;
        }
        let (pred, _) = self.orientation[j];
        Some(Subcurve::new(curve, self.subtree[pred]).expect("subtree is non-empty"))
    }

    /// Checks the structural properties of a set of minimal paths: one marked node per
    /// parallel class, a spanning tree with consistent depths, minimal path lengths,
    /// suffix closure, and class-consistent orientation.
    pub fn check_structure(&self, curve: &CurveGraph) -> Result<()> {
        let fail = |m: String| Err(Error::PathIdentity(m));
        let nodes = curve.nodes();
        let mut pairs = std::collections::BTreeSet::new();
        for &m in &self.marking {
            if !pairs.insert(nodes[m].ends) {
                return fail(format!("two marked nodes join the same components ({m})"));
            }
        }
        for (j, n) in nodes.iter().enumerate() {
            if nodes[self.class_of[j]].ends != n.ends {
                return fail(format!("node {j} assigned to a foreign class"));
            }
            if self.orientation[j] != self.orientation[self.class_of[j]] {
                return fail(format!("node {j} oriented against its class"));
            }
        }
        if self.tree_edges.len() + 1 != curve.gamma() {
            return fail("tree does not span the curve".into());
        }
        let shortest = curve.bfs_depths(self.base);
        for (v, &depth) in shortest.iter().enumerate() {
            let path = self.path(v);
            if path.len() != depth || self.depth[v] != depth {
                return fail(format!("path from component {v} is not minimal"));
            }
            if let Some((p, _)) = self.parent[v] {
                if self.depth[v] != self.depth[p] + 1 {
                    return fail(format!("depth of {v} is not one more than its parent's"));
                }
            }
            let vertices = self.path_vertices(v);
            for (k, &u) in vertices.iter().enumerate() {
                if self.path(u) != path[k..] {
                    return fail(format!("path of {u} is not a suffix of the path of {v}"));
                }
            }
        }
        for &j in &self.tree_edges {
            let (pred, succ) = self.orientation[j];
            if self.parent[pred] != Some((succ, j)) {
                return fail(format!("tree node {j} is not oriented child before parent"));
            }
        }
        Ok(())
    }
}

impl AjFamily {
    pub fn new(curve: &CurveGraph, w: &Polarization, ps: &PathSystem) -> Result<Self> {
        let lambda = LambdaVector::new(curve, w)?;
        let full = curve.full_mask();
        let entries = ps
            .marking
            .iter()
            .map(|&j| match ps.far_side(curve, j) {
                Some(a) => {
                    assert!(
                        a.is_connected(curve) && a.mask() != full,
                        "A_j must be a proper connected subcurve"
                    );
                    assert!(
                        curve.is_connected_mask(full & !a.mask()),
                        "complement of A_j must be connected"
                    );
                    AjEntry {
                        node: j,
                        subcurve: Some(a),
                        boundary: a.boundary(curve),
                        delta: Some(delta_structure_with(&lambda, curve, a)),
                    }
                }
                None => AjEntry {
                    node: j,
                    subcurve: None,
                    boundary: 0,
                    delta: None,
                },
            })
            .collect();
        Ok(AjFamily { entries })
    }

    /// (⋆⋆)_{A_j}: (δ_{A_j} − 1)/2 < Δ_w(O_{A_j}) < (δ_{A_j} + 1)/2, for each non-empty A_j.
    pub fn star2_conditions(&self, curve: &CurveGraph) -> Vec<Star2Condition> {
        self.entries
            .iter()
            .filter_map(|e| {
                let delta = e.delta.as_ref()?;
                let b = int(e.boundary as i64);
                let lower = (&b - Rational::one()) * half();
                let upper = (&b + Rational::one()) * half();
                Some(Star2Condition {
                    edge_id: curve.nodes()[e.node].id,
                    satisfied: &lower < delta && delta < &upper,
                })
            })
            .collect()
    }

    pub fn all_star2_hold(&self) -> bool {
        self.entries.iter().all(|e| match &e.delta {
            None => true,
            Some(delta) => {
                let b = int(e.boundary as i64);
                let twice = delta * int(2);
                b.clone() - Rational::one() < twice && twice < b + Rational::one()
            }
        })
    }

    pub fn entry(&self, node: usize) -> Option<&AjEntry> {
        self.entries.iter().find(|e| e.node == node)
    }
}

/// (a_j, b_j): the branch residuals at the predecessor and successor ends of node `j`.
pub fn oriented_residuals(ps: &PathSystem, e: &SheafDatum, j: usize) -> (i64, i64) {
    let (pred, succ) = ps.orientation(j);
    let s = e.stalk_free()[j] as i64;
    (e.ranks()[pred] as i64 - s, e.ranks()[succ] as i64 - s)
}

/// Δ_w(E) assembled from the path system:
/// Σ_{j∈M′} [a_j(½(1−δ_{A_j}) + Δ_w(O_{A_j})) + b_j(½(1+δ_{A_j}) − Δ_w(O_{A_j}))] + ½Σ_{j∉M′}(a_j + b_j).
pub fn delta_decomposed(
    curve: &CurveGraph,
    ps: &PathSystem,
    fam: &AjFamily,
    e: &SheafDatum,
) -> Rational {
    // Each tree term is ½(a+b) + ½δ_{A_j}(b−a) + Δ_w(O_{A_j})(a−b); the first two parts are integers over 2.
    let mut twice_integral = 0i64;
    let mut total = Rational::zero();
    for j in 0..curve.delta() {
        let (a, b) = oriented_residuals(ps, e, j);
        twice_integral += a + b;
        if !ps.is_tree_edge(j) {
            continue;
        }
        let entry = fam.entry(j).expect("tree node has an A_j entry");
        let delta = entry.delta.as_ref().expect("tree node has a non-empty A_j");
        twice_integral += entry.boundary as i64 * (b - a);
        if a != b {
            total += delta * int(a - b);
        }
    }
    total + int(twice_integral) * half()
}

/// Checks that b_j − a_j is constant on parallel classes and that
/// Σ_{p_j on γ_i} (b_j − a_j) = r_base − r_i for every component i.
pub fn verify_path_identities(curve: &CurveGraph, ps: &PathSystem, e: &SheafDatum) -> Result<()> {
    for j in 0..curve.delta() {
        let rep = ps.class_of(j);
        let (a, b) = oriented_residuals(ps, e, j);
        let (ar, br) = oriented_residuals(ps, e, rep);
        if b - a != br - ar {
            return Err(Error::PathIdentity(format!(
                "parallel nodes {} and {} have b - a = {} and {}",
                curve.nodes()[j].id,
                curve.nodes()[rep].id,
                b - a,
                br - ar
            )));
        }
    }
    let r_base = e.ranks()[ps.base()] as i64;
    for i in 0..curve.gamma() {
        let telescoped: i64 = ps
            .path(i)
            .into_iter()
            .map(|j| {
                let (a, b) = oriented_residuals(ps, e, j);
                b - a
            })
            .sum();
        let expected = r_base - e.ranks()[i] as i64;
        if telescoped != expected {
            return Err(Error::PathIdentity(format!(
                "path from component {}: sum of b - a is {telescoped}, r_base - r_i is {expected}",
                curve.vertex_id(i)
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn banana(edges: usize) -> CurveGraph {
        CurveGraph::from_genera(&[0, 0], &vec![(0, 1); edges]).unwrap()
    }

    /// Triangle with node p_i opposite component C_i.
    fn triangle() -> CurveGraph {
        CurveGraph::from_genera(&[0, 0, 0], &[(1, 2), (0, 2), (0, 1)]).unwrap()
    }

    #[test]
    fn banana_with_base_c2() {
        let c = banana(3);
        let ps = PathSystem::build(&c, 2).unwrap();
        assert_eq!(ps.marking(), &[0]);
        assert_eq!(ps.tree_edges(), &[0]);
        assert_eq!(ps.path(0), vec![0]);
        assert!(ps.path(1).is_empty());
        ps.check_structure(&c).unwrap();

        let w = Polarization::from_ratios(&[(1, 3), (2, 3)]).unwrap();
        let fam = AjFamily::new(&c, &w, &ps).unwrap();
        assert_eq!(fam.entries.len(), 1);
        assert_eq!(fam.entries[0].subcurve, Some(Subcurve::single(0)));
        assert_eq!(fam.entries[0].boundary, 3);
        // Nodes p_2, p_3 are unmarked, so A_2 = A_3 = ∅.
        assert!(fam.entry(1).is_none() && fam.entry(2).is_none());
    }

    #[test]
    fn triangle_with_base_c3() {
        let c = triangle();
        let ps = PathSystem::build(&c, 3).unwrap();
        assert_eq!(ps.marking(), &[0, 1, 2]);
        assert_eq!(ps.path(0), vec![1]); // γ_1 runs along p_2
        assert_eq!(ps.path(1), vec![0]); // γ_2 runs along p_1
        assert!(ps.path(2).is_empty());
        ps.check_structure(&c).unwrap();

        let w = Polarization::from_ratios(&[(1, 3), (1, 3), (1, 3)]).unwrap();
        let fam = AjFamily::new(&c, &w, &ps).unwrap();
        let a1 = fam.entry(0).unwrap();
        let a2 = fam.entry(1).unwrap();
        let a3 = fam.entry(2).unwrap();
        assert_eq!(a1.subcurve, Some(Subcurve::single(1)));
        assert_eq!(a2.subcurve, Some(Subcurve::single(0)));
        assert_eq!(a3.subcurve, None);
        assert_eq!((a1.boundary, a2.boundary), (2, 2));
        assert_eq!(a1.delta, Some(int(1)));
        assert!(fam.star2_conditions(&c).iter().all(|s| s.satisfied));
    }

    #[test]
    fn tree_curves_use_every_node() {
        let c =
            CurveGraph::from_genera(&[1, 0, 2, 0, 1], &[(0, 1), (1, 2), (1, 3), (3, 4)]).unwrap();
        let w = Polarization::from_ratios(&[(1, 5); 5]).unwrap();
        for base in 0..c.gamma() {
            let ps = PathSystem::build_at(&c, base);
            assert_eq!(ps.tree_edges(), &[0, 1, 2, 3]);
            let fam = AjFamily::new(&c, &w, &ps).unwrap();
            assert!(fam.entries.iter().all(|e| e.boundary == 1));
        }
    }

    #[test]
    fn unknown_base() {
        assert_eq!(
            PathSystem::build(&triangle(), 9),
            Err(Error::UnknownVertex(9))
        );
    }

    #[test]
    fn decomposition_on_example() {
        let c = CurveGraph::from_genera(&[2, 2], &[(0, 1)]).unwrap();
        let w = Polarization::from_ratios(&[(1, 6), (5, 6)]).unwrap();
        let ps = PathSystem::build(&c, 2).unwrap();
        let fam = AjFamily::new(&c, &w, &ps).unwrap();
        let e = SheafDatum::new(&c, vec![1, 0], vec![0, 0], vec![0]).unwrap();
        assert_eq!(delta_decomposed(&c, &ps, &fam, &e), ratio(-1, 2));
        let lf = SheafDatum::structure_sheaf(&c);
        assert_eq!(delta_decomposed(&c, &ps, &fam, &lf), Rational::zero());
    }

    #[test]
    fn path_identity_examples() {
        let c = CurveGraph::from_genera(&[2, 2], &[(0, 1)]).unwrap();
        let ps = PathSystem::build(&c, 2).unwrap();
        let e = SheafDatum::new(&c, vec![1, 0], vec![0, 0], vec![0]).unwrap();
        let (a, b) = oriented_residuals(&ps, &e, 0);
        assert_eq!(b - a, -1);
        verify_path_identities(&c, &ps, &e).unwrap();

        let tri = triangle();
        let e = SheafDatum::new(&tri, vec![2, 2, 2], vec![0; 3], vec![1, 2, 0]).unwrap();
        let ps = PathSystem::build_at(&tri, 2);
        for j in 0..3 {
            let (a, b) = oriented_residuals(&ps, &e, j);
            assert_eq!(a, b);
        }

        let b4 = banana(4);
        let e = SheafDatum::new(&b4, vec![3, 1], vec![0, 0], vec![1, 0, 1, 0]).unwrap();
        let ps = PathSystem::build_at(&b4, 1);
        let diffs: Vec<i64> = (0..4)
            .map(|j| {
                let (a, b) = oriented_residuals(&ps, &e, j);
                b - a
            })
            .collect();
        assert!(diffs.iter().all(|&d| d == diffs[0]));
        verify_path_identities(&b4, &ps, &e).unwrap();
    }

    #[test]
    fn bfs_tie_break_takes_smallest_parent() {
        // Square 0-1-3-2-0 with base 0: vertex 3 has two depth-1 neighbours, 1 and 2.
        let c = CurveGraph::from_genera(&[0, 0, 0, 0], &[(0, 1), (1, 3), (3, 2), (2, 0)]).unwrap();
        let ps = PathSystem::build_at(&c, 0);
        assert_eq!(ps.parent(3), Some((1, 1)));
        assert!(!ps.is_tree_edge(2));
        ps.check_structure(&c).unwrap();
    }
}
