//! Goodness verdicts for polarizations and the O_C-stability probe.
//!
//! A polarization `w` is good when Δ_w(E) ≥ 0 for every depth-one sheaf `E`,
//! with equality exactly on locally free sheaves. Goodness is certified by the
//! (⋆⋆) conditions of some path system and refuted by an explicit datum with a
//! negative (or vanishing, non locally free) Δ. Between those the search only
//! produces bounded evidence.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::curve::CurveGraph;
use crate::error::{Error, Result};
use crate::pathsys::{AjFamily, PathSystem};
use crate::polarization::{LambdaVector, Polarization};
use crate::rational::{self, int, Rational};
use crate::sheaf::{violates_goodness, SheafDatum};
use crate::stability::oc_stability;

/// Largest number of rank vectors `witness_search` will walk, (R+1)^γ.
pub const MAX_RANK_VECTORS: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GoodnessStatus {
    GoodCertified,
    NotGood,
    EvidenceGood,
}

impl GoodnessStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GoodnessStatus::GoodCertified => "GoodCertified",
            GoodnessStatus::NotGood => "NotGood",
            GoodnessStatus::EvidenceGood => "EvidenceGood",
        }
    }
}

impl std::fmt::Display for GoodnessStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for GoodnessStatus {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// A datum refuting goodness together with its Δ_w.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub datum: SheafDatum,
    pub delta: Rational,
}

impl Serialize for Witness {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Witness", 4)?;
        st.serialize_field("ranks", self.datum.ranks())?;
        st.serialize_field("degrees", self.datum.degrees())?;
        st.serialize_field("stalk_free", self.datum.stalk_free())?;
        st.serialize_field("delta", &rational::format(&self.delta))?;
        st.end()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct GoodnessVerdict {
    pub status: GoodnessStatus,
    /// Id of a base component whose (⋆⋆) conditions all hold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub searched_rank_bound: Option<u32>,
}

/// Everything a bounded rank search saw.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankSearch {
    /// First witness in enumeration order.
    pub witness: Option<Witness>,
    /// Smallest Δ_w over the non locally free data visited (s_j = min of endpoint ranks).
    pub min_delta: Option<Rational>,
    pub vectors_checked: u64,
}

/// The first base component (by id order) whose path system satisfies (⋆⋆)_{A_j}
/// for every non-empty A_j.
pub fn sufficient_check(curve: &CurveGraph, w: &Polarization) -> Result<Option<u32>> {
    w.check_curve(curve)?;
    for base in 0..curve.gamma() {
        let ps = PathSystem::build_at(curve, base);
        if AjFamily::new(curve, w, &ps)?.all_star2_hold() {
            return Ok(Some(curve.vertex_id(base)));
        }
    }
    Ok(None)
}

/// Searches rank vectors r ∈ {0..max_rank}^γ \ {0}, ascending by max entry and then
/// lexicographically, with s_j = min(r_{i₁}, r_{i₂}) and degrees zero.
pub fn witness_search(
    curve: &CurveGraph,
    w: &Polarization,
    max_rank: u32,
) -> Result<Option<Witness>> {
    Ok(search_ranks(curve, w, max_rank)?.witness)
}

/// The same walk as [`witness_search`], also reporting the smallest Δ seen.
pub fn search_ranks(curve: &CurveGraph, w: &Polarization, max_rank: u32) -> Result<RankSearch> {
    let lambda = LambdaVector::new(curve, w)?;
    if max_rank == 0 {
        return Err(Error::Unsupported("max_rank must be positive".into()));
    }
    let total = (max_rank as u64 + 1)
        .checked_pow(curve.gamma() as u32)
        .filter(|&t| t <= MAX_RANK_VECTORS)
        .ok_or_else(|| {
            Error::Unsupported(format!(
                "{}^{} rank vectors exceed the search limit of {MAX_RANK_VECTORS}",
                max_rank + 1,
                curve.gamma()
            ))
        })?;
    let evaluator = Evaluator::new(curve, &lambda);
    let side = max_rank as u64 + 1;
    let gamma = curve.gamma();
    let chunks = total.div_ceil(CHUNK);
    let found = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let begin = c * CHUNK;
            let end = (begin + CHUNK).min(total);
            let mut r = digits(begin, side, gamma);
            let mut acc = ChunkResult::default();
            for n in begin..end {
                if n > begin {
                    increment(&mut r, max_rank);
                }
                let level = *r.iter().max().expect("γ ≥ 1");
                if level == 0 || r.iter().all(|&x| x == level) {
                    continue;
                }
                let value = evaluator.eval(&r);
                if value.sign() <= 0 && acc.first_witness.is_none_or(|k| (level, n) < k) {
                    acc.first_witness = Some((level, n));
                }
                if acc.min.as_ref().is_none_or(|m| !m.le(&value)) {
                    acc.min = Some(value);
                }
            }
            acc
        })
        .reduce(ChunkResult::default, ChunkResult::merge);
    let witness = found.first_witness.map(|(_, n)| {
        let r = digits(n, side, gamma);
        let datum = SheafDatum::with_maximal_free_part(curve, r).expect("search data is valid");
        let delta = datum.delta_general_with(&lambda);
        debug_assert!(violates_goodness(&delta, datum.is_locally_free(curve)));
        Witness { datum, delta }
    });
    Ok(RankSearch {
        witness,
        min_delta: found.min.map(|b| evaluator.unscale(b)),
        vectors_checked: total - 1,
    })
}

/// Rank vectors handled by one parallel task.
const CHUNK: u64 = 1 << 12;

/// Next vector in lexicographic order, entries bounded by `max`.
fn increment(r: &mut [u32], max: u32) {
    for slot in r.iter_mut().rev() {
        if *slot < max {
            *slot += 1;
            return;
        }
        *slot = 0;
    }
}

fn digits(mut n: u64, side: u64, len: usize) -> Vec<u32> {
    let mut r = vec![0u32; len];
    for slot in r.iter_mut().rev() {
        *slot = (n % side) as u32;
        n /= side;
    }
    r
}

/// Δ scaled by the common denominator of λ; machine integers when they fit.
#[derive(Clone, Debug)]
enum Scaled {
    Small(i128),
    Big(BigInt),
}

impl Scaled {
    fn sign(&self) -> i32 {
        match self {
            Scaled::Small(v) => v.signum() as i32,
            Scaled::Big(v) => {
                if v.is_negative() {
                    -1
                } else if v.is_zero() {
                    0
                } else {
                    1
                }
            }
        }
    }

    fn to_big(&self) -> BigInt {
        match self {
            Scaled::Small(v) => BigInt::from(*v),
            Scaled::Big(v) => v.clone(),
        }
    }

    fn le(&self, other: &Scaled) -> bool {
        match (self, other) {
            (Scaled::Small(a), Scaled::Small(b)) => a <= b,
            _ => self.to_big() <= other.to_big(),
        }
    }
}

/// Running minimum and the first witness, keyed by (max entry, lexicographic index).
#[derive(Default)]
struct ChunkResult {
    min: Option<Scaled>,
    first_witness: Option<(u32, u64)>,
}

impl ChunkResult {
    fn merge(self, other: ChunkResult) -> ChunkResult {
        let min = match (self.min, other.min) {
            (Some(a), Some(b)) => Some(if a.le(&b) { a } else { b }),
            (a, b) => a.or(b),
        };
        let first_witness = match (self.first_witness, other.first_witness) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        ChunkResult { min, first_witness }
    }
}

struct Evaluator {
    denominator: BigInt,
    small: Option<(Vec<i128>, i128)>,
    big: Vec<BigInt>,
    ends: Vec<(usize, usize)>,
}

impl Evaluator {
    fn new(curve: &CurveGraph, lambda: &LambdaVector) -> Self {
        let denominator = rational::common_denominator(&lambda.values);
        let big: Vec<BigInt> = lambda
            .values
            .iter()
            .map(|l| (l * Rational::from_integer(denominator.clone())).to_integer())
            .collect();
        let small = big
            .iter()
            .map(|b| b.to_i128().filter(|v| v.unsigned_abs() < 1 << 80))
            .collect::<Option<Vec<_>>>()
            .zip(denominator.to_i128().filter(|v| *v < 1 << 80));
        Evaluator {
            denominator,
            small,
            big,
            ends: curve.nodes().iter().map(|n| n.ends).collect(),
        }
    }

    /// (Σ r_i λ_i − Σ_j min(r_{i₁}, r_{i₂})) times the common denominator.
    fn eval(&self, r: &[u32]) -> Scaled {
        let free: i64 = self.ends.iter().map(|&(a, b)| r[a].min(r[b]) as i64).sum();
        if let Some((lam, den)) = &self.small {
            let mut acc: i128 = 0;
            let mut ok = true;
            for (&ri, &li) in r.iter().zip(lam) {
                match (ri as i128)
                    .checked_mul(li)
                    .and_then(|x| acc.checked_add(x))
                {
                    Some(v) => acc = v,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                if let Some(v) = den
                    .checked_mul(free as i128)
                    .and_then(|f| acc.checked_sub(f))
                {
                    return Scaled::Small(v);
                }
            }
        }
        let acc: BigInt = r
            .iter()
            .zip(&self.big)
            .map(|(&ri, li)| li * BigInt::from(ri))
            .sum();
        Scaled::Big(acc - &self.denominator * BigInt::from(free))
    }

    fn unscale(&self, v: Scaled) -> Rational {
        Rational::new(v.to_big(), self.denominator.clone())
    }
}

/// The necessity witness for an O_C that is not w-stable: O_B when Δ_w(O_B) ≤ 0,
/// O_{B^c} when Δ_w(O_B) ≥ δ_B, with maximal free parts.
fn necessity_witness(curve: &CurveGraph, w: &Polarization) -> Result<Option<Witness>> {
    let verdict = oc_stability(curve, w)?;
    let Some(fail) = verdict.failing_subcurve else {
        return Ok(None);
    };
    let b = if fail.value.is_positive() {
        fail.subcurve
            .complement(curve)
            .expect("failing subcurve is proper")
    } else {
        fail.subcurve
    };
    let datum = SheafDatum::structure_sheaf_of(curve, b);
    let delta = datum.delta_general(curve, w);
    assert!(
        violates_goodness(&delta, datum.is_locally_free(curve)),
        "necessity witness has Δ = {delta} on {}",
        curve.to_json()
    );
    Ok(Some(Witness { datum, delta }))
}

pub fn default_max_rank(curve: &CurveGraph) -> u32 {
    2 * curve.gamma() as u32
}

/// Unstable O_C gives NotGood with a subcurve witness; otherwise a (⋆⋆) certificate gives
/// GoodCertified, a search witness gives NotGood, and an empty search gives EvidenceGood.
pub fn decide(curve: &CurveGraph, w: &Polarization, max_rank: u32) -> Result<GoodnessVerdict> {
    Ok(decide_with_search(curve, w, max_rank)?.0)
}

/// [`decide`] plus the rank search it ran, if any.
pub fn decide_with_search(
    curve: &CurveGraph,
    w: &Polarization,
    max_rank: u32,
) -> Result<(GoodnessVerdict, Option<RankSearch>)> {
    if max_rank == 0 {
        return Err(Error::Unsupported("max_rank must be positive".into()));
    }
    if let Some(witness) = necessity_witness(curve, w)? {
        return Ok((
            GoodnessVerdict {
                status: GoodnessStatus::NotGood,
                certificate: None,
                witness: Some(witness),
                searched_rank_bound: None,
            },
            None,
        ));
    }
    if let Some(base) = sufficient_check(curve, w)? {
        return Ok((
            GoodnessVerdict {
                status: GoodnessStatus::GoodCertified,
                certificate: Some(base),
                witness: None,
                searched_rank_bound: None,
            },
            None,
        ));
    }
    let search = search_ranks(curve, w, max_rank)?;
    let verdict = match &search.witness {
        Some(witness) => GoodnessVerdict {
            status: GoodnessStatus::NotGood,
            certificate: None,
            witness: Some(witness.clone()),
            searched_rank_bound: None,
        },
        None => GoodnessVerdict {
            status: GoodnessStatus::EvidenceGood,
            certificate: None,
            witness: None,
            searched_rank_bound: Some(max_rank),
        },
    };
    Ok((verdict, Some(search)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProbeOutcome {
    Consistent,
    /// O_C is w-stable but w is not good.
    CounterexampleCandidate,
    /// O_C is not w-stable yet no refutation was produced.
    InternalInconsistency,
}

impl ProbeOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeOutcome::Consistent => "CONSISTENT",
            ProbeOutcome::CounterexampleCandidate => "DISCREPANCY: stable but not good",
            ProbeOutcome::InternalInconsistency => "DISCREPANCY: unstable but not refuted",
        }
    }

    pub fn is_discrepancy(self) -> bool {
        self != ProbeOutcome::Consistent
    }
}

impl Serialize for ProbeOutcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct ProbeReport {
    pub stable: bool,
    pub semistable: bool,
    pub verdict: GoodnessVerdict,
    pub outcome: ProbeOutcome,
}

/// Compares O_C-stability with the goodness verdict.
pub fn conjecture_probe(
    curve: &CurveGraph,
    w: &Polarization,
    max_rank: u32,
) -> Result<ProbeReport> {
    let stability = oc_stability(curve, w)?;
    let verdict = decide(curve, w, max_rank)?;
    Ok(probe_from_parts(
        stability.stable,
        stability.semistable,
        verdict,
    ))
}

pub(crate) fn probe_from_parts(
    stable: bool,
    semistable: bool,
    verdict: GoodnessVerdict,
) -> ProbeReport {
    let not_good = verdict.status == GoodnessStatus::NotGood;
    let outcome = match (stable, not_good) {
        (true, true) => ProbeOutcome::CounterexampleCandidate,
        (false, false) => ProbeOutcome::InternalInconsistency,
        _ => ProbeOutcome::Consistent,
    };
    ProbeReport {
        stable,
        semistable,
        verdict,
        outcome,
    }
}

/// Minimum of Δ_w over every admissible choice of free ranks for fixed `ranks`.
/// Exponential in δ; meant for cross-checking small instances.
pub fn min_delta_over_free_ranks(
    curve: &CurveGraph,
    w: &Polarization,
    ranks: &[u32],
) -> Result<Rational> {
    let lambda = LambdaVector::new(curve, w)?;
    let caps: Vec<u32> = curve
        .nodes()
        .iter()
        .map(|n| ranks[n.ends.0].min(ranks[n.ends.1]))
        .collect();
    let mut s = vec![0u32; caps.len()];
    let mut best: Option<Rational> = None;
    loop {
        let datum = SheafDatum::new(curve, ranks.to_vec(), vec![0; ranks.len()], s.clone())?;
        let d = datum.delta_general_with(&lambda);
        if best.as_ref().is_none_or(|b| &d < b) {
            best = Some(d);
        }
        let Some(pos) = (0..s.len()).find(|&k| s[k] < caps[k]) else {
            break;
        };
        s[pos] += 1;
        s[..pos].iter_mut().for_each(|x| *x = 0);
    }
    Ok(best.unwrap_or_else(|| int(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn two_genus_two() -> CurveGraph {
        CurveGraph::from_genera(&[2, 2], &[(0, 1)]).unwrap()
    }

    #[test]
    fn example_is_not_good() {
        let c = two_genus_two();
        let w = Polarization::from_ratios(&[(1, 6), (5, 6)]).unwrap();
        assert_eq!(sufficient_check(&c, &w).unwrap(), None);
        let wit = witness_search(&c, &w, 1).unwrap().unwrap();
        assert_eq!(wit.datum.ranks(), &[1, 0]);
        assert_eq!(wit.delta, ratio(-1, 2));
        let v = decide(&c, &w, 4).unwrap();
        assert_eq!(v.status, GoodnessStatus::NotGood);
        assert_eq!(v.witness.unwrap().datum.ranks(), &[1, 0]);
    }

    #[test]
    fn canonical_is_certified() {
        let c =
            CurveGraph::from_genera(&[1, 0, 2], &[(0, 1), (1, 2), (0, 1), (1, 2), (0, 2)]).unwrap();
        let eta = Polarization::canonical(&c).unwrap();
        assert!(sufficient_check(&c, &eta).unwrap().is_some());
        assert_eq!(
            decide(&c, &eta, 3).unwrap().status,
            GoodnessStatus::GoodCertified
        );
    }

    #[test]
    fn rational_tree_has_no_witness() {
        let c = CurveGraph::from_genera(&[0, 0, 0], &[(0, 1), (1, 2)]).unwrap();
        for w in crate::polarization::GridPolarizations::new(3, 7) {
            assert!(witness_search(&c, &w, 3).unwrap().is_none());
        }
    }

    #[test]
    fn elliptic_tail_always_refuted() {
        let c = CurveGraph::from_genera(&[1, 0], &[(0, 1)]).unwrap();
        for w in crate::polarization::GridPolarizations::new(2, 9) {
            assert!(witness_search(&c, &w, 1).unwrap().is_some());
            let v = decide(&c, &w, 2).unwrap();
            assert_eq!(v.status, GoodnessStatus::NotGood);
        }
    }

    #[test]
    fn enumeration_order_prefers_small_entries() {
        assert_eq!(digits(5, 3, 2), vec![1, 2]);
        let c = CurveGraph::from_genera(&[2, 2], &[(0, 1)]).unwrap();
        let w = Polarization::from_ratios(&[(1, 6), (5, 6)]).unwrap();
        let s = search_ranks(&c, &w, 3).unwrap();
        assert_eq!(s.vectors_checked, 15);
        // r = (3, 0): 3·(−1/2).
        assert_eq!(s.min_delta, Some(ratio(-3, 2)));
    }

    #[test]
    fn minimal_free_rank_is_optimal() {
        let c = CurveGraph::from_genera(&[0, 1, 0], &[(0, 1), (0, 1), (1, 2), (0, 2)]).unwrap();
        let w = Polarization::from_ratios(&[(1, 4), (1, 2), (1, 4)]).unwrap();
        let r = vec![2, 1, 3];
        let min = min_delta_over_free_ranks(&c, &w, &r).unwrap();
        let datum = SheafDatum::with_maximal_free_part(&c, r).unwrap();
        assert_eq!(datum.delta_general(&c, &w), min);
    }

    #[test]
    fn probe_flags() {
        let c = two_genus_two();
        let w = Polarization::from_ratios(&[(1, 2), (1, 2)]).unwrap();
        let p = conjecture_probe(&c, &w, 2).unwrap();
        assert!(p.stable && p.outcome == ProbeOutcome::Consistent);
        let fake = GoodnessVerdict {
            status: GoodnessStatus::EvidenceGood,
            certificate: None,
            witness: None,
            searched_rank_bound: Some(1),
        };
        assert_eq!(
            probe_from_parts(false, true, fake).outcome,
            ProbeOutcome::InternalInconsistency
        );
    }
}
