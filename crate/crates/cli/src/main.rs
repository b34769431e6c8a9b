use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use nodal::balanced::{balance_report, balanced_stability_bridge};
use nodal::goodness::{conjecture_probe, decide, default_max_rank, GoodnessStatus};
use nodal::pathsys::{AjFamily, PathSystem};
use nodal::polarization::{lambda_vector, star_window, DEFAULT_WITNESS_DENOMINATOR};
use nodal::rational::format as fmt;
use nodal::search::{run_campaign, CampaignConfig, CurveFilter, Mode, RankBound};
use nodal::stability::{oc_stability, star_conditions, StabilityVerdict};
use nodal::{CurveGraph, MultidegreeBundle, Polarization, SheafDatum, StabilityPolytope};

/// Subcurve tables are printed only up to this many components.
const TABLE_MAX_COMPONENTS: usize = 12;

#[derive(Parser)]
#[command(
    name = "nodal",
    version,
    about = "Stability and goodness of polarizations on nodal curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Invariants, λ-vector, subcurve table, stability and goodness of one polarized curve.
    Analyze {
        #[command(flatten)]
        input: PolarizedInput,
        #[arg(long)]
        max_rank: Option<u32>,
    },
    /// The canonical polarization of a stable curve.
    Canonical {
        #[arg(long)]
        curve: PathBuf,
    },
    /// w-stability of O_C and the (⋆) conditions.
    Stability {
        #[command(flatten)]
        input: PolarizedInput,
    },
    /// Goodness verdict for a polarization.
    Goodness {
        #[command(flatten)]
        input: PolarizedInput,
        #[arg(long)]
        max_rank: Option<u32>,
    },
    /// Compares O_C-stability with the goodness verdict.
    Conjecture {
        #[command(flatten)]
        input: PolarizedInput,
        #[arg(long)]
        max_rank: Option<u32>,
    },
    /// Balance of a line bundle given by its multidegree.
    Balanced {
        #[arg(long)]
        curve: PathBuf,
        /// Comma-separated degrees, one per component in id order.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        degrees: Vec<i64>,
    },
    /// Marking, minimal paths, orientation and the subcurves A_j.
    Paths {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        polarization: Option<PathBuf>,
        /// Base component id; the last component by default.
        #[arg(long)]
        base: Option<u32>,
    },
    /// The (⋆) windows cutting out the stability polytope, with an interior point.
    Polytope {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WITNESS_DENOMINATOR)]
        denominator: u32,
    },
    /// Exhaustive or random campaign comparing stability and goodness.
    SearchConjecture(SearchArgs),
    /// Renders a curve as Graphviz DOT or canonical JSON.
    ExportDot {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::Dot)]
        format: ExportFormat,
    },
    /// Parses an input file and prints its canonical form.
    Canonicalize {
        #[arg(long, required_unless_present = "polarization")]
        curve: Option<PathBuf>,
        #[arg(long)]
        polarization: Option<PathBuf>,
        /// Sheaf datum; needs --curve.
        #[arg(long, requires = "curve")]
        sheaf: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PolarizedInput {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    polarization: PathBuf,
    /// Base component id for path-system output; the last component by default.
    #[arg(long)]
    base: Option<u32>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 3)]
    max_vertices: usize,
    #[arg(long, default_value_t = 3)]
    max_edges: usize,
    #[arg(long, default_value_t = 1)]
    max_genus: u32,
    #[arg(long, default_value_t = 6)]
    denominator: u32,
    /// Fixed rank bound for the witness search.
    #[arg(long, conflicts_with = "rank_per_component")]
    max_rank: Option<u32>,
    /// Rank bound k·γ; the default is 2.
    #[arg(long)]
    rank_per_component: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random mode with this many polarizations per curve; exhaustive otherwise.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum, default_value_t = FilterArg::All)]
    filter: FilterArg,
    /// Also write the per-instance CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Dot,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    All,
    CompactType,
    GenusAtMostOne,
    Stable,
}

enum Outcome {
    Ok,
    Negative,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_curve(path: &Path) -> Result<CurveGraph> {
    CurveGraph::from_json(&read(path)?).with_context(|| path.display().to_string())
}

fn load_polarization(path: &Path, curve: &CurveGraph) -> Result<Polarization> {
    let w = Polarization::from_json(&read(path)?).with_context(|| path.display().to_string())?;
    w.check_curve(curve)?;
    Ok(w)
}

fn print(value: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("JSON value")
    );
}

fn verdict(negative: bool) -> Outcome {
    if negative {
        Outcome::Negative
    } else {
        Outcome::Ok
    }
}

fn base_index(curve: &CurveGraph, base: Option<u32>) -> Result<usize> {
    match base {
        None => Ok(curve.gamma() - 1),
        Some(id) => match curve.index_of(id) {
            Some(i) => Ok(i),
            None => bail!("unknown base component {id}"),
        },
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Analyze { input, max_rank } => analyze(&input, max_rank),
        Command::Canonical { curve } => {
            let curve = load_curve(&curve)?;
            let eta = Polarization::canonical(&curve)?;
            println!("{}", eta.to_json());
            Ok(Outcome::Ok)
        }
        Command::Stability { input } => {
            let curve = load_curve(&input.curve)?;
            let w = load_polarization(&input.polarization, &curve)?;
            let v = oc_stability(&curve, &w)?;
            let mut out = stability_json(&curve, &v);
            if curve.arithmetic_genus() >= 2 {
                let star: Vec<Value> = star_conditions(&curve, &w)?
                    .into_iter()
                    .map(|s| {
                        let (lower, upper) = star_window(&curve, s.subcurve);
                        json!({
                            "subcurve": s.subcurve.ids(&curve),
                            "lower": fmt(&lower),
                            "weight": fmt(&w.subcurve_weight(s.subcurve)),
                            "upper": fmt(&upper),
                            "satisfied": s.satisfied,
                        })
                    })
                    .collect();
                out["star_conditions"] = Value::Array(star);
            }
            print(&out);
            Ok(verdict(!v.stable))
        }
        Command::Goodness { input, max_rank } => {
            let curve = load_curve(&input.curve)?;
            let w = load_polarization(&input.polarization, &curve)?;
            let v = decide(
                &curve,
                &w,
                max_rank.unwrap_or_else(|| default_max_rank(&curve)),
            )?;
            print(&serde_json::to_value(&v)?);
            Ok(verdict(v.status == GoodnessStatus::NotGood))
        }
        Command::Conjecture { input, max_rank } => {
            let curve = load_curve(&input.curve)?;
            let w = load_polarization(&input.polarization, &curve)?;
            let p = conjecture_probe(
                &curve,
                &w,
                max_rank.unwrap_or_else(|| default_max_rank(&curve)),
            )?;
            print(&serde_json::to_value(&p)?);
            Ok(verdict(p.outcome.is_discrepancy()))
        }
        Command::Balanced { curve, degrees } => {
            let curve = load_curve(&curve)?;
            let l = MultidegreeBundle::new(&curve, degrees)?;
            let report = balance_report(&curve, &l)?;
            let bridge = balanced_stability_bridge(&curve, &l)?;
            let mut out = serde_json::to_value(&report)?;
            out["bridge"] = serde_json::to_value(&bridge)?;
            print(&out);
            Ok(verdict(!report.balanced || !bridge.consistent))
        }
        Command::Paths {
            curve,
            polarization,
            base,
        } => {
            let curve = load_curve(&curve)?;
            let w = polarization
                .map(|p| load_polarization(&p, &curve))
                .transpose()?;
            print(&paths_json(&curve, w.as_ref(), base_index(&curve, base)?)?);
            Ok(Outcome::Ok)
        }
        Command::Polytope { curve, denominator } => {
            let curve = load_curve(&curve)?;
            let p = StabilityPolytope::with_denominator(&curve, denominator)?;
            let windows: Vec<Value> = p
                .inequalities
                .iter()
                .map(|ineq| {
                    json!({
                        "subcurve": ineq.subcurve.ids(&curve),
                        "lower": fmt(&ineq.lower),
                        "upper": fmt(&ineq.upper),
                    })
                })
                .collect();
            let witness = p
                .nonempty_witness
                .as_ref()
                .map(|w| serde_json::from_str::<Value>(&w.to_json()))
                .transpose()?;
            print(&json!({ "inequalities": windows, "nonempty_witness": witness }));
            Ok(Outcome::Ok)
        }
        Command::SearchConjecture(args) => search(args),
        Command::ExportDot { curve, format } => {
            let curve = load_curve(&curve)?;
            match format {
                ExportFormat::Dot => print!("{}", curve.to_dot()),
                ExportFormat::Json => println!("{}", curve.to_json()),
            }
            Ok(Outcome::Ok)
        }
        Command::Canonicalize {
            curve,
            polarization,
            sheaf,
        } => {
            let curve = curve.map(|p| load_curve(&p)).transpose()?;
            match (&curve, polarization, sheaf) {
                (Some(c), _, Some(sheaf)) => {
                    let e = SheafDatum::from_json(c, &read(&sheaf)?)
                        .with_context(|| sheaf.display().to_string())?;
                    println!("{}", e.to_json());
                }
                (_, Some(p), None) => {
                    let w = Polarization::from_json(&read(&p)?)
                        .with_context(|| p.display().to_string())?;
                    if let Some(c) = &curve {
                        w.check_curve(c)?;
                    }
                    println!("{}", w.to_json());
                }
                (Some(c), None, None) => println!("{}", c.to_json()),
                (None, _, _) => bail!("a sheaf needs --curve, or give --polarization alone"),
            }
            Ok(Outcome::Ok)
        }
    }
}

fn stability_json(curve: &CurveGraph, v: &StabilityVerdict) -> Value {
    json!({
        "stable": v.stable,
        "semistable": v.semistable,
        "failing_subcurve": v.failing_subcurve.as_ref().map(|f| json!({
            "subcurve": f.subcurve.ids(curve),
            "delta": fmt(&f.value),
        })),
    })
}

fn analyze(input: &PolarizedInput, max_rank: Option<u32>) -> Result<Outcome> {
    let curve = load_curve(&input.curve)?;
    let w = load_polarization(&input.polarization, &curve)?;
    let base = base_index(&curve, input.base)?;
    let class = curve.classify();
    let lambda = lambda_vector(&curve, &w)?;
    let stability = oc_stability(&curve, &w)?;
    let goodness = decide(
        &curve,
        &w,
        max_rank.unwrap_or_else(|| default_max_rank(&curve)),
    )?;

    let table = if curve.gamma() <= TABLE_MAX_COMPONENTS {
        let rows: Vec<Value> = curve
            .proper_connected_subcurves()
            .into_iter()
            .map(|b| {
                let delta = lambda.over(b) - nodal::rational::int(b.internal(&curve) as i64);
                json!({
                    "subcurve": b.ids(&curve),
                    "p_a": b.genus(&curve),
                    "boundary": b.boundary(&curve),
                    "delta": fmt(&delta),
                })
            })
            .collect();
        Value::Array(rows)
    } else {
        json!(format!(
            "omitted: {} components exceed {TABLE_MAX_COMPONENTS}",
            curve.gamma()
        ))
    };

    let out = json!({
        "curve": serde_json::from_str::<Value>(&curve.to_json())?,
        "weights": w.weights().iter().map(fmt).collect::<Vec<_>>(),
        "p_a": curve.arithmetic_genus(),
        "chi": curve.euler_characteristic(),
        "classification": serde_json::to_value(class)?,
        "lambda": lambda.values.iter().map(fmt).collect::<Vec<_>>(),
        "subcurves": table,
        "stability": stability_json(&curve, &stability),
        "goodness": serde_json::to_value(&goodness)?,
        "paths": paths_json(&curve, Some(&w), base)?,
    });
    print(&out);
    Ok(verdict(
        !stability.stable || goodness.status == GoodnessStatus::NotGood,
    ))
}

fn paths_json(curve: &CurveGraph, w: Option<&Polarization>, base: usize) -> Result<Value> {
    let ps = PathSystem::build_at(curve, base);
    ps.check_structure(curve)?;
    let edge_ids =
        |edges: &[usize]| -> Vec<u32> { edges.iter().map(|&j| curve.nodes()[j].id).collect() };
    let paths: Vec<Value> = (0..curve.gamma())
        .map(|i| {
            json!({
                "component": curve.vertex_id(i),
                "nodes": edge_ids(&ps.path(i)),
            })
        })
        .collect();
    let orientation: Vec<Value> = (0..curve.delta())
        .map(|j| {
            let (pred, succ) = ps.orientation(j);
            json!({
                "node": curve.nodes()[j].id,
                "from": curve.vertex_id(pred),
                "to": curve.vertex_id(succ),
            })
        })
        .collect();
    let family: Vec<Value> = match w {
        Some(w) => {
            let fam = AjFamily::new(curve, w, &ps)?;
            let star2 = fam.star2_conditions(curve);
            fam.entries
                .iter()
                .map(|e| {
                    let id = curve.nodes()[e.node].id;
                    json!({
                        "node": id,
                        "subcurve": e.subcurve.map(|a| a.ids(curve)),
                        "boundary": e.boundary,
                        "delta": e.delta.as_ref().map(fmt),
                        "star2": star2.iter().find(|s| s.edge_id == id).map(|s| s.satisfied),
                    })
                })
                .collect()
        }
        None => ps
            .marking()
            .iter()
            .map(|&j| {
                json!({
                    "node": curve.nodes()[j].id,
                    "subcurve": ps.far_side(curve, j).map(|a| a.ids(curve)),
                })
            })
            .collect(),
    };
    Ok(json!({
        "base": curve.vertex_id(base),
        "marking": edge_ids(ps.marking()),
        "tree_nodes": edge_ids(ps.tree_edges()),
        "paths": paths,
        "orientation": orientation,
        "family": family,
    }))
}

fn search(args: SearchArgs) -> Result<Outcome> {
    let cfg = CampaignConfig {
        max_vertices: args.max_vertices,
        max_edges: args.max_edges,
        max_genus: args.max_genus,
        weight_denominator_bound: args.denominator,
        max_rank: match (args.max_rank, args.rank_per_component) {
            (Some(r), _) => RankBound::Fixed(r),
            (None, k) => RankBound::PerComponent(k.unwrap_or(2)),
        },
        seed: args.seed,
        mode: args.samples.map_or(Mode::Exhaustive, Mode::Random),
        filter: match args.filter {
            FilterArg::All => CurveFilter::All,
            FilterArg::CompactType => CurveFilter::CompactType,
            FilterArg::GenusAtMostOne => CurveFilter::GenusAtMostOne,
            FilterArg::Stable => CurveFilter::Stable,
        },
    };
    let report = run_campaign(&cfg)?;
    let csv = report.to_csv();
    if let Some(path) = &args.csv {
        fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
    }
    match args.format {
        ReportFormat::Json => println!("{}", report.summary_json(true)),
        ReportFormat::Csv => print!("{csv}"),
    }
    Ok(verdict(!report.consistent()))
}
