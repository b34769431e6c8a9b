//! Stability of O_C and of rank-one depth-one sheaves with respect to a polarization.

use num_traits::Signed;
use serde::Serialize;

use crate::curve::{CurveGraph, Subcurve};
use crate::error::{Error, Result};
use crate::polarization::{delta_structure_with, star_window, LambdaVector, Polarization};
use crate::rational::{int, Rational};
use crate::sheaf::SheafDatum;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailingSubcurve {
    pub subcurve: Subcurve,
    /// Δ_w(O_B) for `oc_stability`, wdeg(E_B) − wdeg(E)·wrank(E_B) for `rank1_stability`.
    pub value: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub semistable: bool,
    /// First subcurve, in ascending bitmask order, where the strict inequality fails.
    pub failing_subcurve: Option<FailingSubcurve>,
}

/// Verdict for O_C read off p_a alone, for reducible curves with p_a ≤ 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GenusShortcut {
    pub stable: bool,
    pub semistable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarCondition {
    pub subcurve: Subcurve,
    pub satisfied: bool,
}

/// O_C is w-stable iff 0 < Δ_w(O_B) < δ_B for every proper connected subcurve B,
/// and w-semistable iff the non-strict inequalities hold.
pub fn oc_stability(curve: &CurveGraph, w: &Polarization) -> Result<StabilityVerdict> {
    let lambda = LambdaVector::new(curve, w)?;
    let mut stable = true;
    let mut semistable = true;
    let mut failing_subcurve = None;
    for b in curve.proper_connected_subcurves() {
        let delta = delta_structure_with(&lambda, curve, b);
        let boundary = int(b.boundary(curve) as i64);
        if !delta.is_positive() || delta >= boundary {
            if stable {
                failing_subcurve = Some(FailingSubcurve {
                    subcurve: b,
                    value: delta.clone(),
                });
            }
            stable = false;
            if delta.is_negative() || delta > boundary {
                semistable = false;
            }
        }
    }
    if let Some(shortcut) = genus_shortcut(curve) {
        assert_eq!(
            (shortcut.stable, shortcut.semistable),
            (stable, semistable),
            "p_a shortcut disagrees with subcurve enumeration on {}",
            curve.to_json()
        );
    }
    Ok(StabilityVerdict {
        stable,
        semistable,
        failing_subcurve,
    })
}

/// For reducible curves: p_a = 0 gives a stable O_C for every w; p_a = 1 gives a
/// semistable O_C, stable exactly on cycles of rational curves. `None` otherwise.
pub fn genus_shortcut(curve: &CurveGraph) -> Option<GenusShortcut> {
    if curve.gamma() < 2 {
        return None;
    }
    match curve.arithmetic_genus() {
        0 => Some(GenusShortcut {
            stable: true,
            semistable: true,
        }),
        1 => Some(GenusShortcut {
            stable: curve.classify().cycle_of_rationals,
            semistable: true,
        }),
        _ => None,
    }
}

/// Evaluates (⋆)_B, the window (p_a(B)−1)/(p_a(C)−1) < Σ_{i∈B} w_i < (p_a(B)−1+δ_B)/(p_a(C)−1),
/// for every proper connected subcurve.
pub fn star_conditions(curve: &CurveGraph, w: &Polarization) -> Result<Vec<StarCondition>> {
    w.check_curve(curve)?;
    if curve.arithmetic_genus() <= 1 {
        return Err(Error::Unsupported(format!(
            "(⋆) conditions need p_a >= 2, curve has p_a = {}",
            curve.arithmetic_genus()
        )));
    }
    Ok(curve
        .proper_connected_subcurves()
        .into_iter()
        .map(|b| {
            let (lower, upper) = star_window(curve, b);
            let s = w.subcurve_weight(b);
            StarCondition {
                subcurve: b,
                satisfied: lower < s && s < upper,
            }
        })
        .collect())
}

/// Largest component count for which `rank1_stability` walks all 2^γ − 2 subcurves.
pub const RANK1_MAX_COMPONENTS: usize = 24;

/// A sheaf with r_i = 1 everywhere is w-stable iff wdeg(E_B) > wdeg(E)·wrank(E_B) for every
/// proper subcurve B (semistable with ≥).
pub fn rank1_stability(
    curve: &CurveGraph,
    w: &Polarization,
    e: &SheafDatum,
) -> Result<StabilityVerdict> {
    w.check_curve(curve)?;
    if let Some(i) = e.ranks().iter().position(|&r| r != 1) {
        return Err(Error::Unsupported(format!(
            "rank-one criterion needs r_i = 1 everywhere, component {} has rank {}",
            curve.vertex_id(i),
            e.ranks()[i]
        )));
    }
    if curve.gamma() > RANK1_MAX_COMPONENTS {
        return Err(Error::Unsupported(format!(
            "{} components exceed the {RANK1_MAX_COMPONENTS} supported by subcurve enumeration",
            curve.gamma()
        )));
    }
    let total_wdeg = e.slope_report(curve, w).wdeg;
    let mut stable = true;
    let mut semistable = true;
    let mut failing_subcurve = None;
    for b in curve.proper_subcurves() {
        let restricted = e.restrict(curve, w, b)?;
        let margin = restricted.wdeg - &total_wdeg * w.subcurve_weight(b);
        if !margin.is_positive() {
            if stable {
                failing_subcurve = Some(FailingSubcurve {
                    subcurve: b,
                    value: margin.clone(),
                });
            }
            stable = false;
            if margin.is_negative() {
                semistable = false;
            }
        }
    }
    Ok(StabilityVerdict {
        stable,
        semistable,
        failing_subcurve,
    })
}
