use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use geomonge::disintegration::{check_regularity, disintegrate, evolve_set, split_plan};
use geomonge::flow::{build_current, solve_transport_equation};
use geomonge::kantorovich::{certify_monotone, solve_kantorovich, TransportPlan, DEFAULT_MAX_CYCLE};
use geomonge::mcp::{mcp_contract_check, verify_density_bounds, verify_density_bounds_to_target, verify_tv_bound, McpParams};
use geomonge::monge::{assemble_monge_map, verify_cost_identity};
use geomonge::rays::rays_from_plan;
use geomonge::scenario::{export_report, run_scenario, Instance, Scenario};
use geomonge::space::{build_counterexample, build_segment, validate_structure, CounterexampleConfig};
use geomonge::{DiscreteMeasure, FiniteGeodesicSpace};

#[derive(Parser)]
#[command(name = "geomonge", version, about = "Monge transport along rays on finite geodesic spaces")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Seed for randomized fixtures.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Override the additivity tolerance of loaded spaces.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Space files: validation and generators.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Optimal plans and monotonicity certificates.
    #[command(subcommand)]
    Kanto(KantoCmd),
    /// Transport rays of a plan.
    #[command(subcommand)]
    Rays(RaysCmd),
    /// Disintegration along rays.
    #[command(subcommand)]
    Disint(DisintCmd),
    /// Monotone maps along rays.
    #[command(subcommand)]
    Monge(MongeCmd),
    /// Currents and the transport equation.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Measure-contraction checks.
    #[command(subcommand)]
    Mcp(McpCmd),
    /// Run a built-in scenario, or the full pipeline on given files.
    Run(RunArgs),
}

#[derive(Subcommand)]
enum SpaceCmd {
    Validate { space: PathBuf },
    #[command(subcommand)]
    Gen(GenCmd),
}

#[derive(Subcommand)]
enum GenCmd {
    Segment {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
    },
    Counterexample {
        #[arg(long, default_value_t = 64)]
        q_denom: usize,
        #[arg(long, default_value_t = 16)]
        strip_res: usize,
        /// Keep one circle copy per component.
        #[arg(long)]
        unglued: bool,
    },
}

#[derive(Subcommand)]
enum KantoCmd {
    Solve { space: PathBuf, mu: PathBuf, nu: PathBuf },
    Certify {
        space: PathBuf,
        plan: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_CYCLE)]
        max_cycle: usize,
    },
}

#[derive(Subcommand)]
enum RaysCmd {
    Build { space: PathBuf, plan: PathBuf },
}

#[derive(Subcommand)]
enum DisintCmd {
    Run { space: PathBuf, plan: PathBuf, mu: PathBuf },
    /// `A_t` for a JSON array of points `A`, on the rays of `plan`.
    Evolve {
        space: PathBuf,
        plan: PathBuf,
        set: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        t: Vec<f64>,
    },
    /// `levels.json`: array of `{ "space": {...}, "plan": {...}, "mu": [weights] }`.
    Regularity { levels: PathBuf },
}

#[derive(Subcommand)]
enum MongeCmd {
    Solve {
        space: PathBuf,
        mu: PathBuf,
        nu: PathBuf,
        /// Use this plan instead of solving for one.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FlowCmd {
    /// The current of `eta` disintegrated on the rays of `plan`.
    Current { space: PathBuf, plan: PathBuf, eta: PathBuf },
    Solve { space: PathBuf, mu: PathBuf, nu: PathBuf },
}

#[derive(Args)]
struct KN {
    #[arg(long = "K", allow_hyphen_values = true)]
    k: f64,
    #[arg(long = "N")]
    n: f64,
}

#[derive(Subcommand)]
enum McpCmd {
    Check {
        space: PathBuf,
        eta: PathBuf,
        #[command(flatten)]
        kn: KN,
        #[arg(long, default_value_t = 0)]
        xbar: usize,
        /// JSON array of points; all points when absent.
        #[arg(long)]
        set: Option<PathBuf>,
        #[arg(long, num_args = 1.., default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
        t: Vec<f64>,
    },
    Bounds {
        space: PathBuf,
        plan: PathBuf,
        q: PathBuf,
        #[command(flatten)]
        kn: KN,
        /// Check the single-target bound toward this point instead.
        #[arg(long)]
        target: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario name.
    #[arg(default_value = "intro-1d")]
    scenario: String,
    #[arg(long)]
    q_denom: Option<usize>,
    #[arg(long)]
    strip_res: Option<usize>,
    #[arg(long, requires_all = ["mu", "nu"])]
    space: Option<PathBuf>,
    #[arg(long)]
    mu: Option<PathBuf>,
    #[arg(long)]
    nu: Option<PathBuf>,
    #[arg(long)]
    no_flow: bool,
    #[arg(long)]
    no_mcp: bool,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_json(path: &Path) -> Result<Value> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_space(path: &Path, g: &Global) -> Result<FiniteGeodesicSpace> {
    let s = FiniteGeodesicSpace::from_json(&read_json(path)?)?;
    Ok(match g.tol {
        Some(t) => s.with_tol(t),
        None => s,
    })
}

fn load_measure(path: &Path, n: usize) -> Result<DiscreteMeasure> {
    Ok(DiscreteMeasure::from_csv(&read(path)?, n)?)
}

fn load_plan(path: &Path, n: usize) -> Result<TransportPlan> {
    Ok(TransportPlan::from_json(&read_json(path)?, n)?)
}

fn load_points(path: &Path) -> Result<Vec<usize>> {
    serde_json::from_value(read_json(path)?).with_context(|| format!("{} must be a JSON array of point indices", path.display()))
}

fn emit(g: &Global, body: &str) -> Result<()> {
    match &g.out {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => print_stdout(body),
    }
}

/// Prints to stdout, treating a closed pipe (`| head`) as success.
fn print_stdout(body: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{body}").and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit_json(g: &Global, v: &Value) -> Result<()> {
    emit(g, &serde_json::to_string_pretty(v)?)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("GEOMONGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| anyhow!("GEOMONGE_THREADS must be a positive integer, got {raw:?}"))?;
    if n <= 1 {
        geomonge::par::set_parallel(false);
    }
    #[cfg(feature = "parallel")]
    if n > 1 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.cmd {
        Cmd::Space(SpaceCmd::Validate { space }) => {
            let s = load_space(&space, g)?;
            let r = validate_structure(&s);
            emit_json(g, &json!({ "non_branching": r.non_branching(), "report": r }))
        }
        Cmd::Space(SpaceCmd::Gen(GenCmd::Segment { n, length })) => emit_json(g, &build_segment(n, length)?.to_json()),
        Cmd::Space(SpaceCmd::Gen(GenCmd::Counterexample { q_denom, strip_res, unglued })) => {
            let mut cfg = CounterexampleConfig::new(q_denom, strip_res);
            cfg.glued = !unglued;
            let ce = build_counterexample(&cfg)?;
            let mut v = ce.space.to_json();
            v["alpha"] = json!(ce.alpha());
            emit_json(g, &v)
        }
        Cmd::Kanto(KantoCmd::Solve { space, mu, nu }) => {
            let s = load_space(&space, g)?;
            let plan = solve_kantorovich(&s, &load_measure(&mu, s.n())?, &load_measure(&nu, s.n())?)?;
            emit_json(g, &plan.to_json())
        }
        Cmd::Kanto(KantoCmd::Certify { space, plan, max_cycle }) => {
            let s = load_space(&space, g)?;
            let cert = certify_monotone(&s, &load_plan(&plan, s.n())?, max_cycle)?;
            emit_json(g, &json!({ "passed": cert.passed(), "certificate": cert }))
        }
        Cmd::Rays(RaysCmd::Build { space, plan }) => {
            let s = load_space(&space, g)?;
            let rc = rays_from_plan(&s, &load_plan(&plan, s.n())?)?;
            emit_json(g, &rc.system.to_json())
        }
        Cmd::Disint(DisintCmd::Run { space, plan, mu }) => {
            let s = load_space(&space, g)?;
            let rs = rays_from_plan(&s, &load_plan(&plan, s.n())?)?.system;
            let fam = disintegrate(&load_measure(&mu, s.n())?, &rs)?;
            emit_json(g, &serde_json::to_value(&fam)?)
        }
        Cmd::Disint(DisintCmd::Evolve { space, plan, set, t }) => {
            let s = load_space(&space, g)?;
            let rs = rays_from_plan(&s, &load_plan(&plan, s.n())?)?.system;
            let a = load_points(&set)?;
            let rows: Vec<Value> = t.iter().map(|&t| json!({ "t": t, "evolved": evolve_set(&a, t, &rs) })).collect();
            emit_json(g, &Value::Array(rows))
        }
        Cmd::Disint(DisintCmd::Regularity { levels }) => {
            let v = read_json(&levels)?;
            let arr = v.as_array().ok_or_else(|| anyhow!("levels file must be a JSON array"))?;
            let mut fams = Vec::new();
            for (i, lv) in arr.iter().enumerate() {
                let s = FiniteGeodesicSpace::from_json(&lv["space"]).with_context(|| format!("level {i}"))?;
                let plan = TransportPlan::from_json(&lv["plan"], s.n())?;
                let w: Vec<f64> = serde_json::from_value(lv["mu"].clone()).with_context(|| format!("level {i}: mu"))?;
                let rs = rays_from_plan(&s, &plan)?.system;
                fams.push(disintegrate(&DiscreteMeasure::new(w)?, &rs)?);
            }
            emit_json(g, &serde_json::to_value(check_regularity(&fams)?)?)
        }
        Cmd::Monge(MongeCmd::Solve { space, mu, nu, plan }) => {
            let s = load_space(&space, g)?;
            let (mu, nu) = (load_measure(&mu, s.n())?, load_measure(&nu, s.n())?);
            let plan = match plan {
                Some(p) => load_plan(&p, s.n())?,
                None => solve_kantorovich(&s, &mu, &nu)?,
            };
            let rs = rays_from_plan(&s, &plan)?.system;
            let map = assemble_monge_map(&s, &rs, &mu, &nu, &plan)?;
            let ci = verify_cost_identity(&s, &rs, &map.plan, &mu, &nu)?;
            let mut v = map.to_json(None);
            v["cost_identity"] = serde_json::to_value(ci)?;
            emit_json(g, &v)
        }
        Cmd::Flow(FlowCmd::Current { space, plan, eta }) => {
            let s = load_space(&space, g)?;
            let rs = rays_from_plan(&s, &load_plan(&plan, s.n())?)?.system;
            let cur = build_current(&rs, &disintegrate(&load_measure(&eta, s.n())?, &rs)?)?;
            emit(g, &cur.to_csv())
        }
        Cmd::Flow(FlowCmd::Solve { space, mu, nu }) => {
            let s = load_space(&space, g)?;
            let (mu, nu) = (load_measure(&mu, s.n())?, load_measure(&nu, s.n())?);
            let plan = solve_kantorovich(&s, &mu, &nu)?;
            let rs = rays_from_plan(&s, &plan)?.system;
            let map = assemble_monge_map(&s, &rs, &mu, &nu, &plan)?;
            let (mf, nf) = split_plan(&rs, &map.plan)?.families(&rs);
            let sol = solve_transport_equation(&rs, &mf, &nf)?;
            emit_json(
                g,
                &json!({
                    "l1_norm": sol.l1_norm,
                    "cost": map.cost,
                    "stokes_defect": sol.stokes_defect,
                    "current": sol.current,
                }),
            )
        }
        Cmd::Mcp(McpCmd::Check { space, eta, kn, xbar, set, t }) => {
            let s = load_space(&space, g)?;
            let eta = load_measure(&eta, s.n())?;
            let a = match set {
                Some(p) => load_points(&p)?,
                None => (0..s.n()).collect(),
            };
            let r = mcp_contract_check(&s, &eta, xbar, &a, &t, McpParams::new(kn.k, kn.n)?)?;
            emit_json(g, &serde_json::to_value(r)?)
        }
        Cmd::Mcp(McpCmd::Bounds { space, plan, q, kn, target }) => {
            let s = load_space(&space, g)?;
            let rs = rays_from_plan(&s, &load_plan(&plan, s.n())?)?.system;
            let fam = disintegrate(&load_measure(&q, s.n())?, &rs)?;
            let p = McpParams::new(kn.k, kn.n)?;
            let v = match target {
                Some(x) => json!({ "target_bound": verify_density_bounds_to_target(&rs, &fam, p, x)? }),
                None => json!({
                    "density_bounds": verify_density_bounds(&rs, &fam, p)?,
                    "tv_bound": verify_tv_bound(&fam, &rs, p)?,
                }),
            };
            emit_json(g, &v)
        }
        Cmd::Run(args) => {
            let mut sc = match &args.space {
                Some(space) => {
                    let s = load_space(space, g)?;
                    let mu = load_measure(args.mu.as_ref().unwrap(), s.n())?;
                    let nu = load_measure(args.nu.as_ref().unwrap(), s.n())?;
                    Scenario::custom(&args.scenario, Instance { space: s, mu, nu })
                }
                None => Scenario::builtin(&args.scenario, g.seed)?,
            };
            sc.seed = g.seed;
            sc.q_denom = args.q_denom;
            sc.strip_res = args.strip_res;
            sc.stages.flow = !args.no_flow;
            sc.stages.mcp = !args.no_mcp;
            let report = run_scenario(&sc)?;
            match &g.out {
                Some(p) => {
                    for f in export_report(&report, p)? {
                        eprintln!("wrote {}", f.display());
                    }
                }
                None => print_stdout(&report.to_pretty())?,
            }
            if report.pass() {
                Ok(())
            } else {
                Err(anyhow!("scenario {} reported FAIL", sc.name))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match e.downcast_ref::<geomonge::Error>() {
                Some(core) => eprintln!("error[{}]: {e:#}", core.code()),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::FAILURE
        }
    }
}
