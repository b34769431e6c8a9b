//! Balanced line bundles on quasistable curves.

use num_traits::Signed;
use serde::Serialize;

use crate::curve::{CurveGraph, Subcurve};
use crate::error::{Error, Result};
use crate::goodness::{decide, default_max_rank, GoodnessStatus};
use crate::polarization::{check_len, Polarization};
use crate::rational::{self, int, Rational};
use crate::stability::oc_stability;

/// Largest component count for which the balance checks walk all proper subcurves.
pub const BALANCED_MAX_COMPONENTS: usize = 24;

/// Multidegree (d_1, …, d_γ) of a line bundle L.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultidegreeBundle {
    degrees: Vec<i64>,
    total: i64,
}

impl MultidegreeBundle {
    pub fn new(curve: &CurveGraph, degrees: Vec<i64>) -> Result<Self> {
        check_len(curve, "degrees", degrees.len())?;
        let total = degrees.iter().sum();
        Ok(MultidegreeBundle { degrees, total })
    }

    pub fn degrees(&self) -> &[i64] {
        &self.degrees
    }

    pub fn total(&self) -> i64 {
        self.total
    }

    pub fn is_ample(&self) -> bool {
        self.degrees.iter().all(|&d| d >= 1)
    }

    /// deg_B(L).
    pub fn degree_on(&self, b: Subcurve) -> i64 {
        b.members().map(|i| self.degrees[i]).sum()
    }

    /// w_L, defined for ample L.
    pub fn polarization(&self, curve: &CurveGraph) -> Result<Polarization> {
        Polarization::from_multidegree(curve, &self.degrees)
    }
}

/// deg_B(ω_C) = 2p_a(B) − 2 + δ_B.
pub fn omega_degree(curve: &CurveGraph, b: Subcurve) -> Result<i64> {
    if b.is_empty() {
        return Err(Error::InvalidSubcurve("empty component set".into()));
    }
    Ok(2 * b.genus(curve) - 2 + b.boundary(curve) as i64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// deg_E(L) ≠ 1 on an exceptional component.
    ExceptionalDegree,
    /// |deg_B(L) − m_B| > δ_B/2.
    Bound,
    /// |deg_B(L) − m_B| = δ_B/2 where strictness is required.
    StrictBound,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BalanceViolation {
    /// Component ids of B.
    pub subcurve: Vec<u32>,
    pub kind: ViolationKind,
    /// deg_B(L) − (d/(2p_a − 2))·deg_B(ω_C), or deg_E(L) for exceptional components.
    #[serde(with = "rational::serde_str")]
    pub deviation: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BalanceReport {
    pub balanced: bool,
    pub strict: bool,
    pub violations: Vec<BalanceViolation>,
}

/// Checks deg_E(L) = 1 on exceptional components and
/// |deg_B(L) − (d/(2p_a − 2))·deg_B(ω_C)| ≤ δ_B/2 on every proper subcurve B.
/// Strictness is required on B unless every node of B ∩ B^c lies on an exceptional component.
pub fn balance_report(curve: &CurveGraph, l: &MultidegreeBundle) -> Result<BalanceReport> {
    check_len(curve, "degrees", l.degrees.len())?;
    let pa = curve.arithmetic_genus();
    if pa < 2 {
        return Err(Error::Unsupported(format!(
            "balance needs p_a >= 2, curve has p_a = {pa}"
        )));
    }
    if !curve.classify().quasistable {
        return Err(Error::Unsupported(
            "balance needs a quasistable curve".into(),
        ));
    }
    if curve.gamma() > BALANCED_MAX_COMPONENTS {
        return Err(Error::Unsupported(format!(
            "{} components exceed the {BALANCED_MAX_COMPONENTS} supported by subcurve enumeration",
            curve.gamma()
        )));
    }
    let exceptional = curve.exceptional_mask();
    let mut violations = Vec::new();
    for i in crate::curve::members(exceptional) {
        if l.degrees[i] != 1 {
            violations.push(BalanceViolation {
                subcurve: vec![curve.vertex_id(i)],
                kind: ViolationKind::ExceptionalDegree,
                deviation: int(l.degrees[i]),
            });
        }
    }
    let slope = Rational::new(l.total.into(), (2 * pa - 2).into());
    for b in curve.proper_subcurves() {
        let deviation = int(l.degree_on(b)) - &slope * int(omega_degree(curve, b)?);
        let size = deviation.abs() * int(2);
        let boundary = int(b.boundary(curve) as i64);
        let kind = if size > boundary {
            Some(ViolationKind::Bound)
        } else if size == boundary && !boundary_is_exceptional(curve, b, exceptional) {
            Some(ViolationKind::StrictBound)
        } else {
            None
        };
        if let Some(kind) = kind {
            violations.push(BalanceViolation {
                subcurve: b.ids(curve),
                kind,
                deviation,
            });
        }
    }
    let balanced = violations
        .iter()
        .all(|v| v.kind == ViolationKind::StrictBound);
    let strict = violations.is_empty();
    Ok(BalanceReport {
        balanced,
        strict,
        violations,
    })
}

fn boundary_is_exceptional(curve: &CurveGraph, b: Subcurve, exceptional: u64) -> bool {
    curve
        .nodes()
        .iter()
        .filter(|n| b.contains(n.ends.0) != b.contains(n.ends.1))
        .all(|n| exceptional >> n.ends.0 & 1 == 1 || exceptional >> n.ends.1 & 1 == 1)
}

pub fn is_balanced(curve: &CurveGraph, l: &MultidegreeBundle) -> Result<bool> {
    Ok(balance_report(curve, l)?.balanced)
}

pub fn is_strictly_balanced(curve: &CurveGraph, l: &MultidegreeBundle) -> Result<bool> {
    Ok(balance_report(curve, l)?.strict)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BridgeReport {
    pub applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strictly_balanced: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oc_stable: Option<bool>,
    /// Goodness of w_L, computed on compact-type curves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goodness: Option<GoodnessStatus>,
    /// Whether every computed verdict agrees with strict balance.
    pub consistent: bool,
}

impl BridgeReport {
    fn inapplicable(reason: String) -> Self {
        BridgeReport {
            applicable: false,
            reason: Some(reason),
            strictly_balanced: None,
            oc_stable: None,
            goodness: None,
            consistent: true,
        }
    }
}

/// For ample L of degree p_a − 1 on a stable curve, compares strict balance with
/// w_L-stability of O_C, and on compact type also with goodness of w_L.
pub fn balanced_stability_bridge(
    curve: &CurveGraph,
    l: &MultidegreeBundle,
) -> Result<BridgeReport> {
    check_len(curve, "degrees", l.degrees.len())?;
    if !l.is_ample() {
        return Ok(BridgeReport::inapplicable(
            "multidegree is not ample".into(),
        ));
    }
    if !curve.classify().stable {
        return Ok(BridgeReport::inapplicable("curve is not stable".into()));
    }
    let pa = curve.arithmetic_genus();
    if l.total != pa - 1 {
        return Ok(BridgeReport::inapplicable(format!(
            "degree {} differs from p_a - 1 = {}",
            l.total,
            pa - 1
        )));
    }
    let strict = balance_report(curve, l)?.strict;
    let w = l.polarization(curve)?;
    let stable = oc_stability(curve, &w)?.stable;
    let goodness = if curve.is_compact_type() {
        Some(decide(curve, &w, default_max_rank(curve))?.status)
    } else {
        None
    };
    let consistent =
        strict == stable && goodness.is_none_or(|g| (g == GoodnessStatus::GoodCertified) == strict);
    Ok(BridgeReport {
        applicable: true,
        reason: None,
        strictly_balanced: Some(strict),
        oc_stable: Some(stable),
        goodness,
        consistent,
    })
}
