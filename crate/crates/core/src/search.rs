//! Curve and polarization corpora, and reproducible conjecture campaigns.
//!
//! Curves are enumerated as connected loopless multigraphs with genus labels.
//! Up to five components every isomorphism class appears exactly once, in the
//! form minimizing the edge multiplicity vector and then the genus vector over
//! all relabelings. Larger curves are enumerated as labelled graphs.
//!
//! Random choices use ChaCha8 seeded from a `u64`, so every campaign replays
//! bit for bit on any platform and under any thread schedule.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::curve::{CurveGraph, Subcurve};
use crate::error::{Error, Result};
use crate::goodness::{decide_with_search, probe_from_parts, GoodnessStatus, ProbeOutcome};
use crate::pathsys::{delta_decomposed, verify_path_identities, AjFamily, PathSystem};
use crate::polarization::{GridPolarizations, LambdaVector, Polarization};
use crate::rational::{self, half, int, Rational};
use crate::sheaf::{violates_goodness, SheafDatum};
use crate::stability::oc_stability;

/// Largest component count for which enumeration removes isomorphic duplicates.
pub const DEDUP_MAX_COMPONENTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exhaustive,
    /// This many polarizations per curve, drawn uniformly from the grid.
    Random(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFilter {
    All,
    CompactType,
    /// p_a ≤ 1.
    GenusAtMostOne,
    Stable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankBound {
    Fixed(u32),
    /// k·γ for a curve with γ components.
    PerComponent(u32),
}

impl RankBound {
    pub fn for_curve(self, curve: &CurveGraph) -> u32 {
        match self {
            RankBound::Fixed(r) => r,
            RankBound::PerComponent(k) => k * curve.gamma() as u32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CampaignConfig {
    pub max_vertices: usize,
    pub max_edges: usize,
    pub max_genus: u32,
    pub weight_denominator_bound: u32,
    pub max_rank: RankBound,
    pub seed: u64,
    pub mode: Mode,
    pub filter: CurveFilter,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            max_vertices: 3,
            max_edges: 3,
            max_genus: 1,
            weight_denominator_bound: 6,
            max_rank: RankBound::PerComponent(2),
            seed: 0,
            mode: Mode::Exhaustive,
            filter: CurveFilter::All,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        let rank_ok = match self.max_rank {
            RankBound::Fixed(r) | RankBound::PerComponent(r) => r >= 1,
        };
        let samples_ok = !matches!(self.mode, Mode::Random(0));
        if self.max_vertices == 0
            || self.max_edges == 0
            || self.weight_denominator_bound == 0
            || !rank_ok
            || !samples_ok
        {
            return Err(Error::Unsupported(
                "campaign bounds must all be at least 1".into(),
            ));
        }
        if self.max_vertices > crate::curve::MAX_COMPONENTS {
            return Err(Error::Unsupported(format!(
                "at most {} components are supported",
                crate::curve::MAX_COMPONENTS
            )));
        }
        Ok(())
    }

    fn accepts(&self, curve: &CurveGraph) -> bool {
        match self.filter {
            CurveFilter::All => true,
            CurveFilter::CompactType => curve.is_compact_type(),
            CurveFilter::GenusAtMostOne => curve.arithmetic_genus() <= 1,
            CurveFilter::Stable => curve.classify().stable,
        }
    }
}

/// All curves within the configured bounds that pass the filter, in a fixed order:
/// by γ, then δ, then the multiplicity vector, then the genus vector.
pub fn enumerate_curves(cfg: &CampaignConfig) -> Vec<CurveGraph> {
    let mut out = Vec::new();
    for gamma in 1..=cfg.max_vertices {
        let pairs = pair_list(gamma);
        let max_delta = if cfg.filter == CurveFilter::CompactType {
            (gamma - 1).min(cfg.max_edges)
        } else {
            cfg.max_edges
        };
        let perms = (gamma <= DEDUP_MAX_COMPONENTS).then(|| permutations(gamma));
        for delta in gamma - 1..=max_delta {
            let mut shapes: Vec<Vec<u32>> = Vec::new();
            let mut seen = BTreeSet::new();
            for_each_multiplicity(pairs.len(), delta, &mut |m| {
                if !connected(gamma, &pairs, m) {
                    return;
                }
                match &perms {
                    Some(perms) => {
                        let canon = perms
                            .iter()
                            .map(|p| permute_multiplicities(&pairs, m, p))
                            .min()
                            .expect("at least one permutation");
                        if seen.insert(canon.clone()) {
                            shapes.push(canon);
                        }
                    }
                    None => shapes.push(m.to_vec()),
                }
            });
            shapes.sort();
            for m in shapes {
                let automorphisms: Vec<&Vec<usize>> = match &perms {
                    Some(perms) => perms
                        .iter()
                        .filter(|p| permute_multiplicities(&pairs, &m, p) == m)
                        .collect(),
                    None => Vec::new(),
                };
                let edges: Vec<(usize, usize)> = pairs
                    .iter()
                    .zip(&m)
                    .flat_map(|(&pair, &k)| std::iter::repeat_n(pair, k as usize))
                    .collect();
                for_each_genus(gamma, cfg.max_genus, &mut |g| {
                    let minimal = automorphisms
                        .iter()
                        .all(|p| permute_genera(g, p).as_slice() >= g);
                    if !minimal {
                        return;
                    }
                    let curve =
                        CurveGraph::from_genera(g, &edges).expect("enumerated curve is valid");
                    if cfg.accepts(&curve) {
                        out.push(curve);
                    }
                });
            }
        }
    }
    out
}

fn pair_list(gamma: usize) -> Vec<(usize, usize)> {
    (0..gamma)
        .flat_map(|i| (i + 1..gamma).map(move |j| (i, j)))
        .collect()
}

fn pair_index(gamma: usize, i: usize, j: usize) -> usize {
    let (i, j) = (i.min(j), i.max(j));
    i * (2 * gamma - i - 1) / 2 + (j - i - 1)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Relabels vertex `v` as `p[v]`.
fn permute_multiplicities(pairs: &[(usize, usize)], m: &[u32], p: &[usize]) -> Vec<u32> {
    let gamma = p.len();
    let mut out = vec![0; m.len()];
    for (&(i, j), &k) in pairs.iter().zip(m) {
        out[pair_index(gamma, p[i], p[j])] = k;
    }
    out
}

fn permute_genera(g: &[u32], p: &[usize]) -> Vec<u32> {
    let mut out = vec![0; g.len()];
    for (v, &gv) in g.iter().enumerate() {
        out[p[v]] = gv;
    }
    out
}

/// Visits every vector of `slots` non-negative integers summing to `total`, lexicographically.
fn for_each_multiplicity(slots: usize, total: usize, f: &mut dyn FnMut(&[u32])) {
    fn go(buf: &mut Vec<u32>, slots: usize, left: usize, f: &mut dyn FnMut(&[u32])) {
        if buf.len() + 1 == slots {
            buf.push(left as u32);
            f(buf);
            buf.pop();
            return;
        }
        for k in 0..=left {
            buf.push(k as u32);
            go(buf, slots, left - k, f);
            buf.pop();
        }
    }
    if slots == 0 {
        if total == 0 {
            f(&[]);
        }
        return;
    }
    go(&mut Vec::with_capacity(slots), slots, total, f);
}

fn for_each_genus(gamma: usize, max_genus: u32, f: &mut dyn FnMut(&[u32])) {
    let mut g = vec![0u32; gamma];
    loop {
        f(&g);
        let Some(pos) = (0..gamma).rev().find(|&k| g[k] < max_genus) else {
            return;
        };
        g[pos] += 1;
        g[pos + 1..].iter_mut().for_each(|x| *x = 0);
    }
}

fn connected(gamma: usize, pairs: &[(usize, usize)], m: &[u32]) -> bool {
    let mut reached = 1u64;
    loop {
        let mut next = reached;
        for (&(i, j), &k) in pairs.iter().zip(m) {
            if k > 0 && (reached >> i & 1 == 1 || reached >> j & 1 == 1) {
                next |= 1 << i | 1 << j;
            }
        }
        if next == reached {
            return reached.count_ones() as usize == gamma;
        }
        reached = next;
    }
}

/// Grid polarizations for `curve`: all of them in exhaustive mode, or uniform draws
/// seeded from the config seed and the curve hash in random mode.
pub fn sample_polarizations(curve: &CurveGraph, cfg: &CampaignConfig) -> Vec<Polarization> {
    let grid: Vec<Polarization> =
        GridPolarizations::new(curve.gamma(), cfg.weight_denominator_bound).collect();
    match cfg.mode {
        Mode::Exhaustive => grid,
        Mode::Random(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(curve_hash_u64(curve));
            (0..n)
                .map(|_| grid.choose(&mut rng).expect("grid is non-empty").clone())
                .collect()
        }
    }
}

/// First 16 hex digits of the SHA-256 of the canonical curve JSON.
pub fn curve_hash(curve: &CurveGraph) -> String {
    hex::encode(&Sha256::digest(curve.to_json().as_bytes())[..8])
}

fn curve_hash_u64(curve: &CurveGraph) -> u64 {
    let digest = Sha256::digest(curve.to_json().as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// A random valid datum with ranks in 0..=max_rank, degrees in −3..=3 and free ranks
/// uniform below their caps.
pub fn random_datum(curve: &CurveGraph, rng: &mut impl Rng, max_rank: u32) -> SheafDatum {
    let ranks = loop {
        let r: Vec<u32> = (0..curve.gamma())
            .map(|_| rng.gen_range(0..=max_rank))
            .collect();
        if r.iter().any(|&x| x > 0) {
            break r;
        }
    };
    let degrees = ranks
        .iter()
        .map(|&r| if r == 0 { 0 } else { rng.gen_range(-3..=3) })
        .collect();
    let stalk_free = curve
        .nodes()
        .iter()
        .map(|n| rng.gen_range(0..=ranks[n.ends.0].min(ranks[n.ends.1])))
        .collect();
    SheafDatum::new(curve, ranks, degrees, stalk_free).expect("random datum is valid")
}

/// Checks the algebraic identities tying together every Δ formula on one instance.
/// Returns one message per failed identity.
pub fn identity_suite(
    curve: &CurveGraph,
    w: &Polarization,
    rng: &mut impl Rng,
    extra: Option<&SheafDatum>,
) -> Vec<String> {
    let mut failures = Vec::new();
    let lambda = match LambdaVector::new(curve, w) {
        Ok(l) => l,
        Err(e) => return vec![e.to_string()],
    };
    if lambda.total() != int(curve.delta() as i64) {
        failures.push(format!("sum of lambda is {}", lambda.total()));
    }
    let systems: Vec<(PathSystem, AjFamily)> = (0..curve.gamma())
        .map(|b| {
            let ps = PathSystem::build_at(curve, b);
            let fam = AjFamily::new(curve, w, &ps).expect("dimensions checked");
            (ps, fam)
        })
        .collect();
    for (ps, _) in &systems {
        if let Err(e) = ps.check_structure(curve) {
            failures.push(format!("base {}: {e}", curve.vertex_id(ps.base())));
        }
    }

    let mut data = vec![
        random_datum(curve, rng, 3),
        SheafDatum::structure_sheaf(curve),
    ];
    let r = rng.gen_range(1..=3);
    data.push(SheafDatum::with_maximal_free_part(curve, vec![r; curve.gamma()]).expect("valid"));
    let r = rng.gen_range(1..=3);
    let free: Vec<u32> = (0..curve.delta()).map(|_| rng.gen_range(0..=r)).collect();
    data.push(
        SheafDatum::new(curve, vec![r; curve.gamma()], vec![0; curve.gamma()], free)
            .expect("valid"),
    );
    data.extend(extra.cloned());

    for e in &data {
        let general = e.delta_general_with(&lambda);
        let residual = e.delta_residual_with(curve, &lambda);
        if general != residual {
            failures.push(format!(
                "{}: general {general} != residual {residual}",
                e.to_json()
            ));
        }
        for (ps, fam) in &systems {
            let decomposed = delta_decomposed(curve, ps, fam, e);
            if decomposed != general {
                failures.push(format!(
                    "{}: base {}: decomposed {decomposed} != general {general}",
                    e.to_json(),
                    curve.vertex_id(ps.base())
                ));
            }
            if let Err(err) = verify_path_identities(curve, ps, e) {
                failures.push(format!("{}: {err}", e.to_json()));
            }
        }
        let locally_free = e.is_locally_free(curve);
        if locally_free && !general.is_zero() {
            failures.push(format!(
                "{}: locally free with delta {general}",
                e.to_json()
            ));
        }
        if e.ranks().iter().all(|&x| x == e.ranks()[0]) {
            let t: i64 = (0..curve.delta())
                .map(|j| e.residual_rank(curve, j) as i64)
                .sum();
            if general != int(t) * half() || general.is_zero() != locally_free {
                failures.push(format!(
                    "{}: equal-rank delta {general}, residual sum {t}",
                    e.to_json()
                ));
            }
        }
        let l: Vec<i64> = (0..curve.gamma()).map(|_| rng.gen_range(-4..=4)).collect();
        let twisted = e.tensor_by_multidegree(&l).expect("length matches");
        if twisted.delta_general_with(&lambda) != general {
            failures.push(format!("{}: tensor by {l:?} changes delta", e.to_json()));
        }
        let pieces: Rational = curve
            .connected_pieces(e.support())
            .into_iter()
            .map(|m| restricted_delta(curve, &lambda, e, m))
            .sum();
        if pieces != general {
            failures.push(format!("{}: support pieces sum to {pieces}", e.to_json()));
        }
        if curve.gamma() >= 2 {
            let mask = rng.gen_range(1..curve.full_mask());
            let b = Subcurve::new(curve, mask).expect("non-empty");
            let bc = b.complement(curve).expect("proper");
            let boundary_free: i64 = curve
                .nodes()
                .iter()
                .zip(e.stalk_free())
                .filter(|(n, _)| b.contains(n.ends.0) != b.contains(n.ends.1))
                .map(|(_, &s)| s as i64)
                .sum();
            let lhs = restricted_delta(curve, &lambda, e, b.mask())
                + restricted_delta(curve, &lambda, e, bc.mask());
            if lhs != &general + int(boundary_free) {
                failures.push(format!(
                    "{}: restriction to {:?} is not additive",
                    e.to_json(),
                    b.ids(curve)
                ));
            }
            if locally_free {
                let r = e.ranks()[0] as i64;
                let ob = crate::polarization::delta_structure_with(&lambda, curve, b);
                if restricted_delta(curve, &lambda, e, b.mask()) != ob * int(r) {
                    failures.push(format!(
                        "{}: restriction to {:?} is not r·Δ(O_B)",
                        e.to_json(),
                        b.ids(curve)
                    ));
                }
            }
        }
    }
    failures
}

fn restricted_delta(
    curve: &CurveGraph,
    lambda: &LambdaVector,
    e: &SheafDatum,
    mask: u64,
) -> Rational {
    let b = Subcurve::new(curve, mask).expect("non-empty");
    e.restrict_with(curve, lambda, b).delta
}

/// One (curve, polarization) instance of a campaign.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceRecord {
    pub index: usize,
    pub curve: CurveGraph,
    pub curve_hash: String,
    pub polarization: Polarization,
    pub stable: bool,
    pub semistable: bool,
    pub status: GoodnessStatus,
    pub certificate: Option<u32>,
    pub witness_ranks: Option<Vec<u32>>,
    /// Smallest Δ_w seen on a non locally free datum, when known.
    pub delta_min: Option<Rational>,
    pub outcome: ProbeOutcome,
    pub identity_failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub index: usize,
    pub curve: serde_json::Value,
    pub weights: Vec<String>,
    pub stable: bool,
    pub status: GoodnessStatus,
    pub outcome: ProbeOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityFailure {
    pub index: usize,
    pub curve: serde_json::Value,
    pub weights: Vec<String>,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub curves: usize,
    pub instances_checked: usize,
    pub records: Vec<InstanceRecord>,
    pub discrepancies: Vec<Discrepancy>,
    pub identity_failures: Vec<IdentityFailure>,
    pub wall_time: Duration,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a CampaignConfig,
    curves: usize,
    instances_checked: usize,
    stable: usize,
    good_certified: usize,
    not_good: usize,
    evidence_good: usize,
    consistent: bool,
    discrepancies: &'a [Discrepancy],
    identity_failures: &'a [IdentityFailure],
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_ms: Option<u128>,
}

impl CampaignReport {
    /// No discrepancies and no identity failures.
    pub fn consistent(&self) -> bool {
        self.discrepancies.is_empty() && self.identity_failures.is_empty()
    }

    pub fn count(&self, status: GoodnessStatus) -> usize {
        self.records.iter().filter(|r| r.status == status).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "index,curve_hash,weights,stable,semistable,status,certificate,witness_ranks,delta_min,outcome\n",
        );
        for r in &self.records {
            let weights: Vec<String> = r
                .polarization
                .weights()
                .iter()
                .map(rational::format)
                .collect();
            let witness = r
                .witness_ranks
                .as_ref()
                .map(|w| w.iter().map(u32::to_string).collect::<Vec<_>>().join(" "))
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.index,
                r.curve_hash,
                weights.join(" "),
                r.stable,
                r.semistable,
                r.status,
                r.certificate.map(|c| c.to_string()).unwrap_or_default(),
                witness,
                r.delta_min
                    .as_ref()
                    .map(rational::format)
                    .unwrap_or_default(),
                r.outcome.as_str(),
            )
            .expect("writing to a String");
        }
        out
    }

    /// The JSON summary; `with_timing` adds the wall time, which varies between runs.
    pub fn summary_json(&self, with_timing: bool) -> String {
        let summary = Summary {
            config: &self.config,
            curves: self.curves,
            instances_checked: self.instances_checked,
            stable: self.records.iter().filter(|r| r.stable).count(),
            good_certified: self.count(GoodnessStatus::GoodCertified),
            not_good: self.count(GoodnessStatus::NotGood),
            evidence_good: self.count(GoodnessStatus::EvidenceGood),
            consistent: self.consistent(),
            discrepancies: &self.discrepancies,
            identity_failures: &self.identity_failures,
            wall_time_ms: with_timing.then_some(self.wall_time.as_millis()),
        };
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    }
}

/// Runs the conjecture probe and the identity suite on a single instance.
pub fn run_instance(
    index: usize,
    curve: &CurveGraph,
    w: &Polarization,
    max_rank: u32,
    identity_seed: u64,
) -> Result<InstanceRecord> {
    let stability = oc_stability(curve, w)?;
    let (verdict, search) = decide_with_search(curve, w, max_rank)?;
    let delta_min = match (&search, &verdict.witness) {
        (Some(s), _) => s.min_delta.clone(),
        (None, Some(wit)) => Some(wit.delta.clone()),
        (None, None) => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(identity_seed);
    rng.set_stream(index as u64);
    let mut identity_failures = identity_suite(
        curve,
        w,
        &mut rng,
        verdict.witness.as_ref().map(|wit| &wit.datum),
    );
    if let Some(wit) = &verdict.witness {
        let general = wit.datum.delta_general(curve, w);
        let residual = wit.datum.delta_residual(curve, w);
        if general != wit.delta
            || residual != wit.delta
            || !violates_goodness(&wit.delta, wit.datum.is_locally_free(curve))
        {
            identity_failures.push(format!(
                "witness {} does not re-verify",
                wit.datum.to_json()
            ));
        }
    }
    let probe = probe_from_parts(stability.stable, stability.semistable, verdict);
    Ok(InstanceRecord {
        index,
        curve: curve.clone(),
        curve_hash: curve_hash(curve),
        polarization: w.clone(),
        stable: probe.stable,
        semistable: probe.semistable,
        status: probe.verdict.status,
        certificate: probe.verdict.certificate,
        witness_ranks: probe.verdict.witness.map(|w| w.datum.ranks().to_vec()),
        delta_min,
        outcome: probe.outcome,
        identity_failures,
    })
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport> {
    cfg.validate()?;
    let start = Instant::now();
    let curves = enumerate_curves(cfg);
    let mut jobs: Vec<(usize, Polarization)> = Vec::new();
    for (k, curve) in curves.iter().enumerate() {
        jobs.extend(sample_polarizations(curve, cfg).into_iter().map(|w| (k, w)));
    }
    // Exhaustive campaigns do not depend on the seed.
    let identity_seed = match cfg.mode {
        Mode::Exhaustive => 0,
        Mode::Random(_) => cfg.seed,
    };
    let records = jobs
        .par_iter()
        .enumerate()
        .map(|(index, (k, w))| {
            let curve = &curves[*k];
            run_instance(
                index,
                curve,
                w,
                cfg.max_rank.for_curve(curve),
                identity_seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let weights = |w: &Polarization| w.weights().iter().map(rational::format).collect::<Vec<_>>();
    let curve_value = |c: &CurveGraph| serde_json::from_str(&c.to_json()).expect("curve JSON");
    let discrepancies = records
        .iter()
        .filter(|r| r.outcome.is_discrepancy())
        .map(|r| Discrepancy {
            index: r.index,
            curve: curve_value(&r.curve),
            weights: weights(&r.polarization),
            stable: r.stable,
            status: r.status,
            outcome: r.outcome,
        })
        .collect();
    let identity_failures = records
        .iter()
        .flat_map(|r| {
            r.identity_failures.iter().map(move |m| IdentityFailure {
                index: r.index,
                curve: curve_value(&r.curve),
                weights: weights(&r.polarization),
                message: m.clone(),
            })
        })
        .collect();
    Ok(CampaignReport {
        config: cfg.clone(),
        curves: curves.len(),
        instances_checked: records.len(),
        records,
        discrepancies,
        identity_failures,
        wall_time: start.elapsed(),
    })
}
