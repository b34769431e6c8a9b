//! Polarizations, the λ-vector, and the window of polarizations that make O_C stable.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::curve::{CurveGraph, Subcurve};
use crate::error::{Error, Result};
use crate::rational::{self, int, Rational};

/// Default bound on the common denominator used when searching for a point of the polytope.
pub const DEFAULT_WITNESS_DENOMINATOR: u32 = 24;

/// Weights `w_i ∈ (0, 1)` summing to 1, one per component in ascending id order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Polarization {
    weights: Vec<Rational>,
}

/// λ_i = 1 − g_i − w_i·χ(O_C) = Δ_w(O_{C_i}).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaVector {
    pub values: Vec<Rational>,
}

/// One strict window `lower < Σ_{i∈B} w_i < upper`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightWindow {
    pub subcurve: Subcurve,
    pub lower: Rational,
    pub upper: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilityPolytope {
    pub inequalities: Vec<WeightWindow>,
    pub nonempty_witness: Option<Polarization>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolarizationFile {
    #[serde(with = "rational::serde_str_vec")]
    weights: Vec<Rational>,
}

impl Polarization {
    pub fn new(weights: Vec<Rational>) -> Result<Self> {
        let bad = |m: String| Error::InvalidPolarization(m);
        if weights.is_empty() {
            return Err(bad("no weights".into()));
        }
        let total = rational::sum(&weights);
        if !total.is_one() {
            return Err(bad(format!(
                "weights sum to {}, not 1",
                rational::format(&total)
            )));
        }
        if weights.len() > 1 {
            for (i, w) in weights.iter().enumerate() {
                if !w.is_positive() || *w >= Rational::one() {
                    return Err(bad(format!(
                        "weight {} = {} is outside (0, 1)",
                        i + 1,
                        rational::format(w)
                    )));
                }
            }
        }
        Ok(Polarization { weights })
    }

    pub fn from_ratios(pairs: &[(i64, i64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(p, q)| rational::ratio(p, q)).collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolarizationFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("polarization: {e}")))?;
        Self::new(file.weights)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&PolarizationFile {
            weights: self.weights.clone(),
        })
        .expect("polarization serializes")
    }

    /// The polarization induced by a line bundle of multidegree `degrees`: w_i = d_i / Σd_j.
    pub fn from_multidegree(curve: &CurveGraph, degrees: &[i64]) -> Result<Self> {
        check_len(curve, "degrees", degrees.len())?;
        for (i, &d) in degrees.iter().enumerate() {
            if d <= 0 {
                return Err(Error::NonAmpleMultidegree {
                    vertex: curve.vertex_id(i),
                    degree: d,
                });
            }
        }
        let total: i64 = degrees.iter().sum();
        Self::new(degrees.iter().map(|&d| rational::ratio(d, total)).collect())
    }

    /// The polarization induced by the dualizing sheaf of a stable curve:
    /// η_i = (g_i − 1 + δ_i/2) / (p_a(C) − 1).
    pub fn canonical(curve: &CurveGraph) -> Result<Self> {
        if !curve.classify().stable {
            return Err(Error::CanonicalUndefined(format!(
                "curve is not stable (p_a = {})",
                curve.arithmetic_genus()
            )));
        }
        let denom = int(curve.arithmetic_genus() - 1);
        let weights = (0..curve.gamma())
            .map(|i| {
                (int(curve.genus(i) as i64 - 1) + rational::ratio(curve.valence(i) as i64, 2))
                    / &denom
            })
            .collect();
        Self::new(weights)
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn check_curve(&self, curve: &CurveGraph) -> Result<()> {
        check_len(curve, "weights", self.weights.len())
    }

    /// w-rank of O_B, i.e. Σ_{i∈B} w_i.
    pub fn subcurve_weight(&self, b: Subcurve) -> Rational {
        b.members()
            .fold(Rational::zero(), |acc, i| acc + &self.weights[i])
    }
}

pub(crate) fn check_len(curve: &CurveGraph, what: &'static str, got: usize) -> Result<()> {
    if got != curve.gamma() {
        return Err(Error::DimensionMismatch {
            what,
            expected: curve.gamma(),
            got,
        });
    }
    Ok(())
}

impl LambdaVector {
    pub fn new(curve: &CurveGraph, w: &Polarization) -> Result<Self> {
        w.check_curve(curve)?;
        let chi = int(curve.euler_characteristic());
        let values: Vec<Rational> = (0..curve.gamma())
            .map(|i| int(1 - curve.genus(i) as i64) - &w.weights[i] * &chi)
            .collect();
        debug_assert_eq!(rational::sum(&values), int(curve.delta() as i64));
        Ok(LambdaVector { values })
    }

    pub fn total(&self) -> Rational {
        rational::sum(&self.values)
    }

    /// Σ_{i∈B} λ_i.
    pub fn over(&self, b: Subcurve) -> Rational {
        b.members()
            .fold(Rational::zero(), |acc, i| acc + &self.values[i])
    }
}

pub fn lambda_vector(curve: &CurveGraph, w: &Polarization) -> Result<LambdaVector> {
    LambdaVector::new(curve, w)
}

/// Δ_w(O_B) = Σ_{i∈B} λ_i − N(B), which is also wdeg(O_B).
pub fn delta_structure(curve: &CurveGraph, w: &Polarization, b: Subcurve) -> Result<Rational> {
    if b.is_empty() {
        return Err(Error::InvalidSubcurve("empty component set".into()));
    }
    let lambda = LambdaVector::new(curve, w)?;
    Ok(delta_structure_with(&lambda, curve, b))
}

pub(crate) fn delta_structure_with(
    lambda: &LambdaVector,
    curve: &CurveGraph,
    b: Subcurve,
) -> Rational {
    lambda.over(b) - int(b.internal(curve) as i64)
}

/// The bounds of (⋆)_B: ((p_a(B) − 1)/(p_a(C) − 1), (p_a(B) − 1 + δ_B)/(p_a(C) − 1)).
pub fn star_window(curve: &CurveGraph, b: Subcurve) -> (Rational, Rational) {
    let denom = int(curve.arithmetic_genus() - 1);
    let pb = b.genus(curve);
    let lower = int(pb - 1) / &denom;
    let upper = int(pb - 1 + b.boundary(curve) as i64) / &denom;
    (lower, upper)
}

impl StabilityPolytope {
    pub fn new(curve: &CurveGraph) -> Result<Self> {
        Self::with_denominator(curve, DEFAULT_WITNESS_DENOMINATOR)
    }

    /// Builds the windows (⋆)_B over proper connected subcurves, keeping one of each
    /// complementary pair, and looks for an interior rational point.
    pub fn with_denominator(curve: &CurveGraph, max_denominator: u32) -> Result<Self> {
        if curve.arithmetic_genus() <= 1 {
            return Err(Error::Unsupported(format!(
                "stability polytope needs p_a >= 2, curve has p_a = {}",
                curve.arithmetic_genus()
            )));
        }
        let full = curve.full_mask();
        let inequalities: Vec<WeightWindow> = curve
            .proper_connected_subcurves()
            .into_iter()
            .filter(|b| {
                let rest = full & !b.mask();
                !(curve.is_connected_mask(rest) && rest < b.mask())
            })
            .map(|b| {
                let (lower, upper) = star_window(curve, b);
                WeightWindow {
                    subcurve: b,
                    lower,
                    upper,
                }
            })
            .collect();
        let mut polytope = StabilityPolytope {
            inequalities,
            nonempty_witness: None,
        };
        if curve.classify().stable {
            let eta = Polarization::canonical(curve)?;
            if polytope.contains(&eta) {
                polytope.nonempty_witness = Some(eta);
                return Ok(polytope);
            }
        }
        polytope.nonempty_witness =
            GridPolarizations::new(curve.gamma(), max_denominator).find(|w| polytope.contains(w));
        Ok(polytope)
    }

    /// Whether `w` satisfies every window strictly.
    pub fn contains(&self, w: &Polarization) -> bool {
        self.inequalities.iter().all(|ineq| {
            let s = w.subcurve_weight(ineq.subcurve);
            ineq.lower < s && s < ineq.upper
        })
    }
}

/// All polarizations with a common denominator `q ≤ max_denominator`, each listed once
/// (at its smallest denominator), ordered by `q` and then lexicographically by numerators.
#[derive(Clone, Debug)]
pub struct GridPolarizations {
    gamma: usize,
    max_denominator: u32,
    denominator: u32,
    parts: Option<Vec<u32>>,
}

impl GridPolarizations {
    pub fn new(gamma: usize, max_denominator: u32) -> Self {
        assert!(gamma >= 1, "a curve has at least one component");
        let first = gamma.max(1) as u32;
        GridPolarizations {
            gamma,
            max_denominator,
            denominator: first,
            parts: None,
        }
    }

    /// Advances `parts` to the next composition of `denominator` into positive parts.
    fn advance(&mut self) -> bool {
        let g = self.gamma;
        match self.parts.as_mut() {
            None => {
                if self.denominator > self.max_denominator {
                    return false;
                }
                let mut parts = vec![1; g];
                parts[g - 1] = self.denominator - (g as u32 - 1);
                self.parts = Some(parts);
                true
            }
            Some(parts) => {
                // Rightmost position whose suffix can give up one unit.
                for i in (0..g.saturating_sub(1)).rev() {
                    let suffix: u32 = parts[i + 1..].iter().sum();
                    if suffix > (g - 1 - i) as u32 {
                        parts[i] += 1;
                        for p in &mut parts[i + 1..g - 1] {
                            *p = 1;
                        }
                        parts[g - 1] = suffix - 1 - (g - 2 - i) as u32;
                        return true;
                    }
                }
                self.parts = None;
                self.denominator += 1;
                self.advance()
            }
        }
    }
}

impl Iterator for GridPolarizations {
    type Item = Polarization;

    fn next(&mut self) -> Option<Polarization> {
        while self.advance() {
            let parts = self.parts.as_ref().expect("advanced");
            let q = self.denominator;
            let g = parts.iter().fold(q, |acc, &p| num_integer::gcd(acc, p));
            if g != 1 {
                continue;
            }
            let weights = parts
                .iter()
                .map(|&p| Rational::new(BigInt::from(p), BigInt::from(q)))
                .collect();
            return Some(Polarization::new(weights).expect("grid point is a polarization"));
        }
        None
    }
}
