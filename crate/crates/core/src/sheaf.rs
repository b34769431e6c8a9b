//! Combinatorial data of depth-one sheaves and the Δ_w invariant.
//!
//! At a node `p_j` joining components `i₁, i₂` the stalk of a depth-one sheaf
//! splits into a free part of rank `s_j` and branch parts of ranks
//! `a_{j,i} = r_i − s_j`. A [`SheafDatum`] keeps exactly these numbers together
//! with the degrees of the restrictions `E_i` modulo torsion. Whether a given
//! datum is realized by an actual sheaf is not checked; every formula here
//! only reads the numbers.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::curve::{CurveGraph, Subcurve};
use crate::error::{Error, Result};
use crate::polarization::{check_len, LambdaVector, Polarization};
use crate::rational::{self, int, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SheafDatum {
    ranks: Vec<u32>,
    degrees: Vec<i64>,
    stalk_free: Vec<u32>,
    support: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SheafSlopeReport {
    #[serde(with = "rational::serde_str")]
    pub wrank: Rational,
    pub chi: i64,
    #[serde(with = "rational::serde_str")]
    pub wdeg: Rational,
    #[serde(with = "rational::serde_str_opt")]
    pub wslope: Option<Rational>,
}

/// Δ_w(E_B) and wdeg(E_B) for a subcurve B.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Restriction {
    pub delta: Rational,
    pub wdeg: Rational,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SheafFile {
    ranks: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    degrees: Option<Vec<i64>>,
    stalk_free: Vec<i64>,
}

impl SheafDatum {
    /// Validates ranks (per component), degrees (per component) and free stalk ranks
    /// (per node, in edge-id order) against `curve`.
    pub fn new(
        curve: &CurveGraph,
        ranks: Vec<u32>,
        degrees: Vec<i64>,
        stalk_free: Vec<u32>,
    ) -> Result<Self> {
        check_len(curve, "ranks", ranks.len())?;
        check_len(curve, "degrees", degrees.len())?;
        if stalk_free.len() != curve.delta() {
            return Err(Error::DimensionMismatch {
                what: "stalk_free entries",
                expected: curve.delta(),
                got: stalk_free.len(),
            });
        }
        if ranks.iter().all(|&r| r == 0) {
            return Err(Error::InvalidSheaf("all ranks are zero".into()));
        }
        for (i, (&r, &d)) in ranks.iter().zip(&degrees).enumerate() {
            if r == 0 && d != 0 {
                return Err(Error::InvalidSheaf(format!(
                    "component {} has rank 0 but degree {d}",
                    curve.vertex_id(i)
                )));
            }
        }
        for (node, &s) in curve.nodes().iter().zip(&stalk_free) {
            let (i1, i2) = node.ends;
            let cap = ranks[i1].min(ranks[i2]);
            if s > cap {
                return Err(Error::InvalidSheaf(format!(
                    "node {}: free rank {s} exceeds min(r_{}, r_{}) = {cap}",
                    node.id,
                    curve.vertex_id(i1),
                    curve.vertex_id(i2)
                )));
            }
        }
        let support = ranks
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > 0)
            .fold(0u64, |m, (i, _)| m | 1 << i);
        Ok(SheafDatum {
            ranks,
            degrees,
            stalk_free,
            support,
        })
    }

    /// Degrees zero and the largest admissible free rank at every node.
    pub fn with_maximal_free_part(curve: &CurveGraph, ranks: Vec<u32>) -> Result<Self> {
        check_len(curve, "ranks", ranks.len())?;
        let stalk_free = curve
            .nodes()
            .iter()
            .map(|n| ranks[n.ends.0].min(ranks[n.ends.1]))
            .collect();
        let degrees = vec![0; ranks.len()];
        Self::new(curve, ranks, degrees, stalk_free)
    }

    /// The structure sheaf O_C.
    pub fn structure_sheaf(curve: &CurveGraph) -> Self {
        Self::with_maximal_free_part(curve, vec![1; curve.gamma()]).expect("O_C is valid")
    }

    /// The structure sheaf O_B of a subcurve, viewed as a sheaf on C.
    pub fn structure_sheaf_of(curve: &CurveGraph, b: Subcurve) -> Self {
        let ranks = (0..curve.gamma()).map(|i| b.contains(i) as u32).collect();
        Self::with_maximal_free_part(curve, ranks).expect("O_B is valid")
    }

    pub fn from_json(curve: &CurveGraph, text: &str) -> Result<Self> {
        let file: SheafFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("sheaf: {e}")))?;
        let non_negative = |what: &str, v: i64| -> Result<u32> {
            u32::try_from(v)
                .map_err(|_| Error::InvalidSheaf(format!("{what} {v} is negative or too large")))
        };
        let ranks = file
            .ranks
            .iter()
            .map(|&r| non_negative("rank", r))
            .collect::<Result<Vec<_>>>()?;
        let stalk_free = file
            .stalk_free
            .iter()
            .map(|&s| non_negative("free rank", s))
            .collect::<Result<Vec<_>>>()?;
        let degrees = file.degrees.unwrap_or_else(|| vec![0; ranks.len()]);
        Self::new(curve, ranks, degrees, stalk_free)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SheafFile {
            ranks: self.ranks.iter().map(|&r| r as i64).collect(),
            degrees: Some(self.degrees.clone()),
            stalk_free: self.stalk_free.iter().map(|&s| s as i64).collect(),
        })
        .expect("sheaf serializes")
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn degrees(&self) -> &[i64] {
        &self.degrees
    }

    pub fn stalk_free(&self) -> &[u32] {
        &self.stalk_free
    }

    /// Components where the rank is positive.
    pub fn support(&self) -> u64 {
        self.support
    }

    /// a_{j,i} = r_i − s_j for the endpoint `i` of node `j`.
    pub fn branch_residual(&self, curve: &CurveGraph, j: usize, i: usize) -> u32 {
        let (i1, i2) = curve.nodes()[j].ends;
        assert!(
            i == i1 || i == i2,
            "component {i} is not an end of node {j}"
        );
        self.ranks[i] - self.stalk_free[j]
    }

    /// t_j = a_{j,i₁} + a_{j,i₂}.
    pub fn residual_rank(&self, curve: &CurveGraph, j: usize) -> u32 {
        let (i1, i2) = curve.nodes()[j].ends;
        self.ranks[i1] + self.ranks[i2] - 2 * self.stalk_free[j]
    }

    pub fn is_locally_free(&self, curve: &CurveGraph) -> bool {
        self.support == curve.full_mask()
            && (0..curve.delta()).all(|j| self.residual_rank(curve, j) == 0)
    }

    pub fn wrank(&self, w: &Polarization) -> Rational {
        self.ranks
            .iter()
            .zip(w.weights())
            .fold(Rational::zero(), |acc, (&r, wi)| acc + wi * int(r as i64))
    }

    /// χ(E) = Σ_i (d_i + r_i(1 − g_i)) − Σ_j s_j.
    pub fn chi(&self, curve: &CurveGraph) -> i64 {
        let components: i64 = (0..curve.gamma())
            .map(|i| self.degrees[i] + self.ranks[i] as i64 * (1 - curve.genus(i) as i64))
            .sum();
        components - self.stalk_free.iter().map(|&s| s as i64).sum::<i64>()
    }

    pub fn slope_report(&self, curve: &CurveGraph, w: &Polarization) -> SheafSlopeReport {
        let wrank = self.wrank(w);
        let chi = self.chi(curve);
        let wdeg = int(chi) - &wrank * int(curve.euler_characteristic());
        let wslope = (!wrank.is_zero()).then(|| int(chi) / &wrank);
        SheafSlopeReport {
            wrank,
            chi,
            wdeg,
            wslope,
        }
    }

    /// Δ_w(E) = Σ_i r_i λ_i − Σ_j s_j.
    pub fn delta_general(&self, curve: &CurveGraph, w: &Polarization) -> Rational {
        let lambda = LambdaVector::new(curve, w).expect("dimensions checked at construction");
        self.delta_general_with(&lambda)
    }

    pub(crate) fn delta_general_with(&self, lambda: &LambdaVector) -> Rational {
        let weighted = self
            .ranks
            .iter()
            .zip(&lambda.values)
            .fold(Rational::zero(), |acc, (&r, l)| acc + l * int(r as i64));
        weighted - int(self.stalk_free.iter().map(|&s| s as i64).sum())
    }

    /// Δ_w(E) = Σ_i r_i(λ_i − δ_i/2) + ½Σ_j t_j, computed from residual ranks.
    pub fn delta_residual(&self, curve: &CurveGraph, w: &Polarization) -> Rational {
        let lambda = LambdaVector::new(curve, w).expect("dimensions checked at construction");
        self.delta_residual_with(curve, &lambda)
    }

    pub(crate) fn delta_residual_with(
        &self,
        curve: &CurveGraph,
        lambda: &LambdaVector,
    ) -> Rational {
        let by_component = (0..curve.gamma()).fold(Rational::zero(), |acc, i| {
            let shifted = &lambda.values[i] - rational::ratio(curve.valence(i) as i64, 2);
            acc + shifted * int(self.ranks[i] as i64)
        });
        let residual: i64 = (0..curve.delta())
            .map(|j| self.residual_rank(curve, j) as i64)
            .sum();
        by_component + rational::ratio(residual, 2)
    }

    /// Δ_w(E_B) = Σ_{i∈B} r_i λ_i − Σ_{j internal to B} s_j, with wdeg(E_B) = Δ_w(E_B) + Σ_{i∈B} d_i.
    pub fn restrict(
        &self,
        curve: &CurveGraph,
        w: &Polarization,
        b: Subcurve,
    ) -> Result<Restriction> {
        if b.is_empty() {
            return Err(Error::InvalidSubcurve("empty component set".into()));
        }
        let lambda = LambdaVector::new(curve, w)?;
        Ok(self.restrict_with(curve, &lambda, b))
    }

    pub(crate) fn restrict_with(
        &self,
        curve: &CurveGraph,
        lambda: &LambdaVector,
        b: Subcurve,
    ) -> Restriction {
        let weighted = b.members().fold(Rational::zero(), |acc, i| {
            acc + &lambda.values[i] * int(self.ranks[i] as i64)
        });
        let internal: i64 = curve
            .nodes()
            .iter()
            .zip(&self.stalk_free)
            .filter(|(n, _)| b.contains(n.ends.0) && b.contains(n.ends.1))
            .map(|(_, &s)| s as i64)
            .sum();
        let delta = weighted - int(internal);
        let degree: i64 = b.members().map(|i| self.degrees[i]).sum();
        let wdeg = &delta + int(degree);
        Restriction { delta, wdeg }
    }

    /// E ⊗ L for a line bundle of multidegree `l`: d_i ↦ d_i + r_i·l_i.
    pub fn tensor_by_multidegree(&self, l: &[i64]) -> Result<SheafDatum> {
        if l.len() != self.ranks.len() {
            return Err(Error::DimensionMismatch {
                what: "multidegree entries",
                expected: self.ranks.len(),
                got: l.len(),
            });
        }
        let degrees = self
            .degrees
            .iter()
            .zip(&self.ranks)
            .zip(l)
            .map(|((&d, &r), &li)| d + r as i64 * li)
            .collect();
        Ok(SheafDatum {
            degrees,
            ..self.clone()
        })
    }
}

/// Whether a value certifies that a datum breaks goodness: Δ < 0, or Δ = 0 off the locally free locus.
pub fn violates_goodness(delta: &Rational, locally_free: bool) -> bool {
    delta.is_negative() || (delta.is_zero() && !locally_free)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn two_genus_two() -> CurveGraph {
        CurveGraph::from_genera(&[2, 2], &[(0, 1)]).unwrap()
    }

    fn w_sixth() -> Polarization {
        Polarization::from_ratios(&[(1, 6), (5, 6)]).unwrap()
    }

    #[test]
    fn validation_examples() {
        let c = two_genus_two();
        assert!(SheafDatum::new(&c, vec![1, 1], vec![0, 0], vec![1]).is_ok());
        let err = SheafDatum::new(&c, vec![1, 0], vec![0, 0], vec![1]).unwrap_err();
        assert!(matches!(err, Error::InvalidSheaf(ref m) if m.contains("exceeds")));
        assert!(SheafDatum::new(&c, vec![1, 1], vec![0, 0], vec![0]).is_ok());
        assert!(SheafDatum::new(&c, vec![0, 0], vec![0, 0], vec![0]).is_err());
        assert!(SheafDatum::new(&c, vec![1, 0], vec![0, 3], vec![0]).is_err());
        assert!(SheafDatum::new(&c, vec![1, 1], vec![0, 0], vec![]).is_err());
        assert!(SheafDatum::from_json(&c, r#"{"ranks":[1,-1],"stalk_free":[0]}"#).is_err());
    }

    #[test]
    fn support_may_be_disconnected() {
        let path = CurveGraph::from_genera(&[0, 0, 0], &[(0, 1), (1, 2)]).unwrap();
        let e = SheafDatum::new(&path, vec![1, 0, 2], vec![0, 0, 0], vec![0, 0]).unwrap();
        assert_eq!(e.support(), 0b101);
    }

    #[test]
    fn local_freeness() {
        let c = two_genus_two();
        let lb = SheafDatum::new(&c, vec![1, 1], vec![0, 0], vec![1]).unwrap();
        assert!(lb.is_locally_free(&c));
        let pushed = SheafDatum::new(&c, vec![1, 1], vec![0, 0], vec![0]).unwrap();
        assert!(!pushed.is_locally_free(&c));
        assert_eq!(pushed.residual_rank(&c, 0), 2);
        let tri = CurveGraph::from_genera(&[0, 0, 0], &[(1, 2), (0, 2), (0, 1)]).unwrap();
        let rank2 = SheafDatum::new(&tri, vec![2, 2, 2], vec![0; 3], vec![2, 2, 2]).unwrap();
        assert!(rank2.is_locally_free(&tri));
    }

    #[test]
    fn slope_report_examples() {
        let c = two_genus_two();
        let w = w_sixth();
        let oc = SheafDatum::structure_sheaf(&c);
        let report = oc.slope_report(&c, &w);
        assert_eq!(report.wdeg, Rational::zero());
        assert_eq!(report.wslope, Some(int(c.euler_characteristic())));

        let oc1 = SheafDatum::new(&c, vec![1, 0], vec![0, 0], vec![0]).unwrap();
        let report = oc1.slope_report(&c, &w);
        assert_eq!(report.wdeg, ratio(-1, 2));
        assert_eq!(report.wrank, ratio(1, 6));
        assert_eq!(report.chi, -1);
    }

    #[test]
    fn tensor_shifts_chi_and_wdeg_equally() {
        let c = two_genus_two();
        let w = w_sixth();
        let e = SheafDatum::new(&c, vec![2, 3], vec![1, -1], vec![1]).unwrap();
        let l = [1, 1];
        let t = e.tensor_by_multidegree(&l).unwrap();
        assert_eq!(t.degrees(), &[3, 2]);
        let before = e.slope_report(&c, &w);
        let after = t.slope_report(&c, &w);
        assert_eq!(after.chi - before.chi, 5);
        assert_eq!(after.wdeg - before.wdeg, int(5));
        assert_eq!(e.tensor_by_multidegree(&[0, 0]).unwrap(), e);
        assert!(e.tensor_by_multidegree(&[1]).is_err());
    }

    #[test]
    fn delta_examples() {
        let c = two_genus_two();
        let w = w_sixth();
        let lf = SheafDatum::new(&c, vec![3, 3], vec![2, -7], vec![3]).unwrap();
        assert_eq!(lf.delta_general(&c, &w), Rational::zero());
        let oc1 = SheafDatum::new(&c, vec![1, 0], vec![0, 0], vec![0]).unwrap();
        assert_eq!(oc1.delta_general(&c, &w), ratio(-1, 2));
        assert_eq!(oc1.delta_residual(&c, &w), ratio(-1, 2));
        let pushed = SheafDatum::new(&c, vec![1, 1], vec![0, 0], vec![0]).unwrap();
        assert_eq!(pushed.delta_general(&c, &w), int(1));
        assert_eq!(pushed.delta_residual(&c, &w), int(1));
    }

    #[test]
    fn equal_rank_delta_is_half_residual() {
        let tri = CurveGraph::from_genera(&[1, 0, 2], &[(1, 2), (0, 2), (0, 1), (0, 1)]).unwrap();
        let w = Polarization::from_ratios(&[(1, 5), (2, 5), (2, 5)]).unwrap();
        let e = SheafDatum::new(&tri, vec![3, 3, 3], vec![0; 3], vec![3, 1, 2, 0]).unwrap();
        let half_t: i64 = (0..tri.delta())
            .map(|j| e.residual_rank(&tri, j) as i64)
            .sum();
        assert_eq!(e.delta_residual(&tri, &w), ratio(half_t, 2));
        assert_eq!(e.delta_general(&tri, &w), ratio(half_t, 2));
    }

    #[test]
    fn restriction_examples() {
        let tri = CurveGraph::from_genera(&[1, 0, 2], &[(1, 2), (0, 2), (0, 1)]).unwrap();
        let w = Polarization::from_ratios(&[(1, 5), (2, 5), (2, 5)]).unwrap();
        let e = SheafDatum::new(&tri, vec![2, 1, 1], vec![1, 0, 4], vec![1, 0, 1]).unwrap();
        let whole = e.restrict(&tri, &w, Subcurve::whole(&tri)).unwrap();
        assert_eq!(whole.delta, e.delta_general(&tri, &w));

        let b = Subcurve::new(&tri, 0b011).unwrap();
        let bc = b.complement(&tri).unwrap();
        let boundary_s: i64 = tri
            .nodes()
            .iter()
            .zip(e.stalk_free())
            .filter(|(n, _)| b.contains(n.ends.0) != b.contains(n.ends.1))
            .map(|(_, &s)| s as i64)
            .sum();
        let lhs = e.restrict(&tri, &w, b).unwrap().delta + e.restrict(&tri, &w, bc).unwrap().delta;
        assert_eq!(lhs, e.delta_general(&tri, &w) + int(boundary_s));

        let r = e.restrict(&tri, &w, b).unwrap();
        assert_eq!(r.wdeg - r.delta, int(1));
    }

    #[test]
    fn locally_free_restriction_scales_structure_sheaf() {
        let tri = CurveGraph::from_genera(&[1, 0, 2], &[(1, 2), (0, 2), (0, 1)]).unwrap();
        let w = Polarization::from_ratios(&[(1, 5), (2, 5), (2, 5)]).unwrap();
        let e = SheafDatum::new(&tri, vec![4, 4, 4], vec![0; 3], vec![4, 4, 4]).unwrap();
        for b in tri.proper_subcurves() {
            let ob = crate::polarization::delta_structure(&tri, &w, b).unwrap();
            assert_eq!(e.restrict(&tri, &w, b).unwrap().delta, ob * int(4));
        }
    }

    #[test]
    fn json_round_trip() {
        let c = two_genus_two();
        let e = SheafDatum::from_json(&c, r#"{"ranks":[1,1],"stalk_free":[0]}"#).unwrap();
        assert_eq!(e.degrees(), &[0, 0]);
        let text = e.to_json();
        assert_eq!(SheafDatum::from_json(&c, &text).unwrap(), e);
    }
}
