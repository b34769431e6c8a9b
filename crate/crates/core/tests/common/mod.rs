//! Reference computations written directly from the definitions, sharing no code
//! with the library beyond its public constructors.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use nodal::CurveGraph;

pub type Q = BigRational;

pub fn q(p: i64, d: i64) -> Q {
    Q::new(BigInt::from(p), BigInt::from(d))
}

/// Plain description of a curve: genera and node end pairs (0-based).
#[derive(Clone, Debug)]
pub struct RawCurve {
    pub genera: Vec<u32>,
    pub edges: Vec<(usize, usize)>,
}

impl RawCurve {
    pub fn of(c: &CurveGraph) -> Self {
        RawCurve {
            genera: c.genera(),
            edges: c.nodes().iter().map(|n| n.ends).collect(),
        }
    }

    pub fn build(&self) -> CurveGraph {
        CurveGraph::from_genera(&self.genera, &self.edges).unwrap()
    }

    pub fn gamma(&self) -> usize {
        self.genera.len()
    }

    pub fn valence(&self, i: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == i || b == i)
            .count()
    }

    pub fn pa(&self) -> i64 {
        self.genera.iter().map(|&g| g as i64).sum::<i64>() + self.edges.len() as i64
            - self.gamma() as i64
            + 1
    }

    pub fn inside(&self, set: &[bool]) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| set[a] && set[b])
            .count()
    }

    pub fn crossing(&self, set: &[bool]) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| set[a] != set[b])
            .count()
    }

    /// Depth-first search restricted to `set`.
    pub fn connected(&self, set: &[bool]) -> bool {
        let Some(start) = set.iter().position(|&x| x) else {
            return false;
        };
        let mut seen = vec![false; self.gamma()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for &(a, b) in &self.edges {
                for (x, y) in [(a, b), (b, a)] {
                    if x == u && set[y] && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        (0..self.gamma()).all(|i| !set[i] || seen[i])
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.gamma()
    }

    pub fn is_stable(&self) -> bool {
        self.pa() >= 2 && (0..self.gamma()).all(|i| self.genera[i] > 0 || self.valence(i) >= 3)
    }

    /// λ_i = 1 − g_i − w_i(1 − p_a).
    pub fn lambda(&self, w: &[Q]) -> Vec<Q> {
        let chi = BigInt::from(1 - self.pa());
        (0..self.gamma())
            .map(|i| {
                Q::from_integer(BigInt::from(1 - self.genera[i] as i64))
                    - &w[i] * Q::from_integer(chi.clone())
            })
            .collect()
    }

    /// Every proper non-empty subset as a membership vector, by ascending bitmask.
    pub fn proper_subsets(&self) -> Vec<Vec<bool>> {
        let n = self.gamma();
        (1u64..(1u64 << n) - 1)
            .map(|m| (0..n).map(|i| m >> i & 1 == 1).collect())
            .collect()
    }

    pub fn delta_oc(&self, lambda: &[Q], set: &[bool]) -> Q {
        let mut s = Q::zero();
        for i in 0..self.gamma() {
            if set[i] {
                s += &lambda[i];
            }
        }
        s - Q::from_integer(BigInt::from(self.inside(set) as i64))
    }

    /// O_C stable / semistable straight from the 0 < Δ(O_B) < δ_B windows.
    pub fn oc_stable(&self, w: &[Q]) -> (bool, bool) {
        let lambda = self.lambda(w);
        let mut stable = true;
        let mut semistable = true;
        for set in self.proper_subsets() {
            if !self.connected(&set) {
                continue;
            }
            let d = self.delta_oc(&lambda, &set);
            let b = Q::from_integer(BigInt::from(self.crossing(&set) as i64));
            if d <= Q::zero() || d >= b {
                stable = false;
            }
            if d < Q::zero() || d > b {
                semistable = false;
            }
        }
        (stable, semistable)
    }

    /// Σ r_i λ_i − Σ s_j.
    pub fn delta(&self, lambda: &[Q], ranks: &[u32], free: &[u32]) -> Q {
        let mut s = Q::zero();
        for (l, &r) in lambda.iter().zip(ranks) {
            s += l * Q::from_integer(BigInt::from(r));
        }
        s - Q::from_integer(BigInt::from(free.iter().map(|&x| x as i64).sum::<i64>()))
    }
}

/// A connected loopless multigraph with `gamma` vertices: a random spanning tree plus extra edges.
pub fn random_curve(
    rng: &mut impl Rng,
    max_gamma: usize,
    max_extra: usize,
    max_genus: u32,
) -> RawCurve {
    let gamma = rng.gen_range(1..=max_gamma);
    let genera = (0..gamma).map(|_| rng.gen_range(0..=max_genus)).collect();
    let mut edges = Vec::new();
    for v in 1..gamma {
        let u = rng.gen_range(0..v);
        edges.push((u, v));
    }
    if gamma >= 2 {
        for _ in 0..rng.gen_range(0..=max_extra) {
            let a = rng.gen_range(0..gamma);
            let mut b = rng.gen_range(0..gamma - 1);
            if b >= a {
                b += 1;
            }
            edges.push((a.min(b), a.max(b)));
        }
    }
    RawCurve { genera, edges }
}

/// Random positive weights with common denominator at most `max_den`, summing to 1.
pub fn random_weights(rng: &mut impl Rng, gamma: usize) -> Vec<Q> {
    let nums: Vec<i64> = (0..gamma).map(|_| rng.gen_range(1..=30)).collect();
    let total: i64 = nums.iter().sum();
    nums.iter().map(|&n| q(n, total)).collect()
}

pub fn sum(values: &[Q]) -> Q {
    values.iter().fold(Q::zero(), |a, b| a + b)
}

pub fn one() -> Q {
    Q::one()
}
