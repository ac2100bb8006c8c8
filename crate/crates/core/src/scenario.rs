//! Built-in experiments and the report they produce.
//!
//! A scenario fixes a space, two measures and a plan, then runs the stages
//! rays → disintegration → monge → flow (→ mcp) on it. Reports are
//! `serde_json` values with sorted keys plus CSV sidecars, so two runs with
//! the same seed serialize to identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::disintegration::{density_table, evolution_profile, split_plan};
use crate::error::{Error, Result};
use crate::flow::solve_transport_equation;
use crate::kantorovich::{certify_monotone, solve_kantorovich, vertex_couplings, TransportPlan, DEFAULT_MAX_CYCLE};
use crate::mcp::{mcp_contract_check, verify_density_bounds, verify_density_bounds_to_target, verify_tv_bound, McpParams};
use crate::measure::{difference, DiscreteMeasure};
use crate::monge::{assemble_monge_map, fix_common_mass, verify_cost_identity};
use crate::rays::{audit_construction, rays_from_plan};
use crate::rng::CounterRng;
use crate::space::counterexample::build_counterexample_space;
use crate::space::{build_segment, FiniteGeodesicSpace, DEFAULT_TOL};

pub const SCHEMA_VERSION: u32 = 1;

pub const BUILTIN_SCENARIOS: [&str; 6] = ["intro-1d", "counterexample", "identity", "mcp-segment", "random-tree", "blocks"];

/// Tolerance for the equalities the pipeline reports as PASS/FAIL.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Largest `Γ′` the cubic structure checks run on.
pub const AUDIT_LIMIT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stages {
    pub rays: bool,
    pub disint: bool,
    pub monge: bool,
    pub flow: bool,
    pub mcp: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages { rays: true, disint: true, monge: true, flow: true, mcp: true }
    }
}

/// A space with two measures of equal mass.
#[derive(Debug, Clone)]
pub struct Instance {
    pub space: FiniteGeodesicSpace,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stages: Stages,
    #[serde(default)]
    pub q_denom: Option<usize>,
    #[serde(default)]
    pub strip_res: Option<usize>,
    /// Used in place of a built-in when set.
    #[serde(skip)]
    pub instance: Option<Instance>,
}

impl Scenario {
    pub fn builtin(name: &str, seed: u64) -> Result<Self> {
        if !BUILTIN_SCENARIOS.contains(&name) {
            return Err(Error::InvalidInput(format!(
                "unknown scenario {name:?}; built-ins are {}",
                BUILTIN_SCENARIOS.join(", ")
            )));
        }
        Ok(Scenario { name: name.into(), seed, stages: Stages::default(), q_denom: None, strip_res: None, instance: None })
    }

    pub fn custom(name: &str, instance: Instance) -> Self {
        Scenario { name: name.into(), seed: 0, stages: Stages::default(), q_denom: None, strip_res: None, instance: Some(instance) }
    }
}

/// The JSON report plus plot-ready CSV sidecars keyed by file suffix.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub json: Value,
    pub sidecars: BTreeMap<String, String>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.json["pass"].as_bool().unwrap_or(false)
    }

    pub fn to_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.json).expect("report values are finite JSON")
    }
}

/// Writes `path` and, next to it, one `<stem>.<key>` file per sidecar.
pub fn export_report(report: &Report, path: &Path) -> Result<Vec<PathBuf>> {
    let mut out = vec![path.to_path_buf()];
    std::fs::write(path, report.to_pretty() + "\n")?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    for (key, body) in &report.sidecars {
        let p = path.with_file_name(format!("{stem}.{key}"));
        std::fs::write(&p, body)?;
        out.push(p);
    }
    Ok(out)
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name, source: Box::new(e) })
}

/// Integer masses `a` on `k_mu` atoms and a random composition of the same
/// total into `k_nu` atoms, both divided by the total.
fn rational_pair(rng: &mut CounterRng, k_mu: usize, k_nu: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a: Vec<u64> = (0..k_mu).map(|_| rng.range(1, 5) as u64).collect();
    let mut total: u64 = a.iter().sum();
    if total < k_nu as u64 {
        a.iter_mut().for_each(|x| *x *= k_nu as u64);
        total = a.iter().sum();
    }
    let mut cuts: Vec<u64> = rng
        .sample_distinct(total as usize - 1, k_nu - 1)
        .into_iter()
        .map(|c| c as u64 + 1)
        .collect();
    cuts.insert(0, 0);
    cuts.push(total);
    let b: Vec<u64> = cuts.windows(2).map(|w| w[1] - w[0]).collect();
    let t = total as f64;
    (a.iter().map(|&x| x as f64 / t).collect(), b.iter().map(|&x| x as f64 / t).collect())
}

fn atoms(n: usize, points: &[usize], w: &[f64]) -> Result<DiscreteMeasure> {
    let pairs: Vec<(usize, f64)> = points.iter().copied().zip(w.iter().copied()).collect();
    DiscreteMeasure::from_atoms(n, &pairs)
}

/// Three atoms on each half of a 20-point segment.
pub fn intro_1d_instance(seed: u64) -> Result<Instance> {
    let space = build_segment(20, 2.0)?;
    let mut rng = CounterRng::new(seed, 1);
    let left = rng.sample_distinct(10, 3);
    let right: Vec<usize> = rng.sample_distinct(10, 3).into_iter().map(|p| p + 10).collect();
    let (a, b) = rational_pair(&mut rng, 3, 3);
    Ok(Instance { mu: atoms(20, &left, &a)?, nu: atoms(20, &right, &b)?, space })
}

/// A random tree (or, one time in three, a path) on at most 12 points with
/// edge lengths in `{1/4, …, 2}` and rational measures on random supports.
/// `index` selects the draw within a seed's stream.
pub fn random_tree_instance(seed: u64, index: u64) -> Result<Instance> {
    let mut rng = CounterRng::new(seed, 1000 + index);
    let n = rng.range(3, 13);
    let path = rng.range(0, 3) == 0;
    let parent: Vec<Option<usize>> = (0..n)
        .map(|i| match i {
            0 => None,
            _ if path => Some(i - 1),
            _ => Some(rng.range(0, i)),
        })
        .collect();
    let lens: Vec<f64> = (0..n).map(|_| rng.range(1, 9) as f64 / 4.0).collect();
    let space = FiniteGeodesicSpace::from_tree(&parent, &lens, DEFAULT_TOL)?;
    let k_mu = rng.range(1, n.min(4) + 1);
    let k_nu = rng.range(1, n.min(4) + 1);
    let src = rng.sample_distinct(n, k_mu);
    let dst = rng.sample_distinct(n, k_nu);
    let (a, b) = rational_pair(&mut rng, k_mu, k_nu);
    Ok(Instance { mu: atoms(n, &src, &a)?, nu: atoms(n, &dst, &b)?, space })
}

/// Two overlapping blocks of uniform mass on a segment.
pub fn overlapping_blocks_instance(seed: u64, index: u64) -> Result<Instance> {
    let mut rng = CounterRng::new(seed, 5000 + index);
    let n = rng.range(8, 25);
    let len_a = rng.range(2, n / 2 + 1);
    let len_b = rng.range(2, n / 2 + 1);
    let start_a = rng.range(0, n - len_a);
    // Overlap at least one point.
    let lo = (start_a + 1).saturating_sub(len_b);
    let hi = (start_a + len_a).min(n - len_b);
    let start_b = rng.range(lo, hi + 1);
    let space = build_segment(n, (n - 1) as f64)?;
    let a: Vec<usize> = (start_a..start_a + len_a).collect();
    let b: Vec<usize> = (start_b..start_b + len_b).collect();
    Ok(Instance {
        mu: DiscreteMeasure::uniform_on(n, &a, 1.0)?,
        nu: DiscreteMeasure::uniform_on(n, &b, 1.0)?,
        space,
    })
}

/// Trapezoid weights of the length measure on `build_segment(n, 1)`.
pub fn lebesgue_segment(n: usize) -> Result<(FiniteGeodesicSpace, DiscreteMeasure)> {
    let s = build_segment(n, 1.0)?;
    let h = 1.0 / (n - 1) as f64;
    let w = (0..n).map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h }).collect();
    Ok((s, DiscreteMeasure::new(w)?))
}

fn plan_summary(space: &FiniteGeodesicSpace, plan: &TransportPlan) -> Result<Value> {
    let mut plan = plan.clone();
    let cost = plan.cost(space);
    let cert = certify_monotone(space, &plan, DEFAULT_MAX_CYCLE)?;
    Ok(json!({
        "cost": cost,
        "support_size": plan.support().len(),
        "certificate": {
            "max_cycle": cert.max_cycle,
            "bounded_pass": cert.bounded_pass,
            "all_lengths_pass": cert.all_lengths_pass,
            "optimality_certified": cert.optimality_certified,
            "violation_defect": cert.violation.as_ref().map(|v| v.1),
            "long_cycle_length": cert.long_cycle.as_ref().map(|v| v.0.len()),
            "long_cycle_defect": cert.long_cycle.as_ref().map(|v| v.1),
        },
    }))
}

/// Runs the enabled stages on `plan`. Returns the stage sections and
/// whether every checked identity held.
pub fn run_pipeline(inst: &Instance, plan: &TransportPlan, stages: Stages) -> Result<(Map<String, Value>, BTreeMap<String, String>, bool)> {
    let (space, mu, nu) = (&inst.space, &inst.mu, &inst.nu);
    let mut out = Map::new();
    let mut csv = BTreeMap::new();
    let mut pass = true;
    if !stages.rays {
        return Ok((out, csv, pass));
    }
    let rc = stage("rays", rays_from_plan(space, plan))?;
    let rs = &rc.system;
    let audit = stage("rays", audit_construction(space, plan, &rc, AUDIT_LIMIT))?;
    let max_iso = rs.rays.iter().map(|r| r.isometry_defect(space)).fold(0.0, f64::max);
    pass &= audit.violations() == 0 && max_iso <= space.tol();
    out.insert(
        "rays".into(),
        json!({
            "count": rs.rays.len(),
            "degenerate": rs.rays.iter().filter(|r| r.degenerate).count(),
            "t_points": rs.t_points.len(),
            "te_points": rs.te_points.len(),
            "gamma_prime": rc.gamma_prime.len(),
            "g_pairs": rc.g.len(),
            "isometry_defect": max_iso,
            "audit": audit,
            "audit_violations": audit.violations(),
        }),
    );

    if stages.disint {
        let split = stage("disint", split_plan(rs, plan))?;
        let (mf, nf) = split.families(rs);
        let mut ts: Vec<f64> = rs.rays.iter().flat_map(|r| r.params.iter().map(|p| p - r.params[0])).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let profile = evolution_profile(&mu.support(), mu, rs, &ts);
        csv.insert("profile.csv".into(), profile.to_csv());
        let mut table = String::from("weight,density\n");
        for (w, d) in density_table(&mf) {
            table.push_str(&format!("{w:?},{d:?}\n"));
        }
        csv.insert("density.csv".into(), table);
        let stay: f64 = split.stay.iter().map(|s| s.1).sum();
        out.insert(
            "disint".into(),
            json!({
                "m_mu": mf.m,
                "m_nu": nf.m,
                "stay_mass": stay,
                "max_atom": mf.max_atom(),
                "max_density": mf.max_density(),
                "reassembly_defect": mf.reassemble(rs).iter().zip(&split_source(&split, rs, space.n()))
                    .map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
                "profile_support": profile.support_count,
            }),
        );
    }

    if !stages.monge {
        return Ok((out, csv, pass));
    }
    let map = stage("monge", assemble_monge_map(space, rs, mu, nu, plan))?;
    let ci = stage("monge", verify_cost_identity(space, rs, plan, mu, nu))?;
    let ci_map = stage("monge", verify_cost_identity(space, rs, &map.plan, mu, nu))?;
    let plan_cost = crate::kantorovich::plan_cost(space, plan.entries());
    let cost_gap = (map.cost - plan_cost).abs();
    let fixed = stage("monge", fix_common_mass(space, rs, &map.plan))?;
    let fixed_cost = crate::kantorovich::plan_cost(space, fixed.entries());
    let common = mu.min(nu);
    let diag = fixed.diagonal_mass();
    let diag_defect = (0..space.n()).map(|p| (diag.weight(p) - common.weight(p)).abs()).fold(0.0, f64::max);
    pass &= ci.defect < IDENTITY_TOL && ci_map.defect < IDENTITY_TOL && cost_gap < IDENTITY_TOL && map.pushforward_defect < IDENTITY_TOL;
    out.insert(
        "monge".into(),
        json!({
            "map": map.to_json(None),
            "forward": map.forward,
            "pushforward_defect": map.pushforward_defect,
            "plan_cost": plan_cost,
            "cost_gap": cost_gap,
            "cost_identity": ci,
            "cost_identity_map": ci_map,
            "common_mass": {
                "cost_gap": (fixed_cost - map.cost).abs(),
                "diagonal_defect": diag_defect,
            },
        }),
    );

    if stages.flow {
        let split = stage("flow", split_plan(rs, &map.plan))?;
        let (mf, nf) = split.families(rs);
        let sol = stage("flow", solve_transport_equation(rs, &mf, &nf))?;
        let bd = sol.current.boundary();
        let target = difference(mu, nu);
        let global = bd.measure.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let l1_gap = (sol.l1_norm - map.cost).abs();
        pass &= global <= 1e-12 && sol.stokes_defect <= 1e-12 && l1_gap < IDENTITY_TOL;
        csv.insert("current.csv".into(), sol.current.to_csv());
        out.insert(
            "flow".into(),
            json!({
                "l1_norm": sol.l1_norm,
                "l1_cost_gap": l1_gap,
                "stokes_defect": sol.stokes_defect,
                "boundary_defect": global,
                "total_variation": bd.total_variation,
            }),
        );
    }
    Ok((out, csv, pass))
}

/// `μ` restricted to the plan's ray mass, as a per-point vector.
fn split_source(split: &crate::disintegration::PlanSplit, rs: &crate::rays::RaySystem, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for (r, ray) in rs.rays.iter().enumerate() {
        for (k, w) in split.source_weights(rs, r).into_iter().enumerate() {
            v[ray.points[k]] += w;
        }
    }
    v
}

fn base_report(sc: &Scenario) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("scenario".into(), json!(sc.name));
    m.insert("seed".into(), json!(sc.seed));
    m.insert("stages".into(), json!(sc.stages));
    m
}

fn oracle_section(inst: &Instance) -> Result<(TransportPlan, Value)> {
    let plan = stage("oracle", solve_kantorovich(&inst.space, &inst.mu, &inst.nu))?;
    let summary = stage("oracle", plan_summary(&inst.space, &plan))?;
    Ok((plan, summary))
}

fn finish(mut m: Map<String, Value>, sections: Map<String, Value>, pass: bool, sidecars: BTreeMap<String, String>) -> Report {
    m.extend(sections);
    m.insert("pass".into(), json!(pass));
    Report { json: Value::Object(m), sidecars }
}

fn standard(sc: &Scenario, inst: &Instance) -> Result<Report> {
    let (plan, summary) = oracle_section(inst)?;
    let (sections, csv, pass) = run_pipeline(inst, &plan, sc.stages)?;
    let mut m = base_report(sc);
    m.insert("oracle".into(), summary);
    Ok(finish(m, sections, pass, csv))
}

pub fn run_scenario(sc: &Scenario) -> Result<Report> {
    if let Some(inst) = &sc.instance {
        return standard(sc, inst);
    }
    match sc.name.as_str() {
        "intro-1d" => intro_1d(sc),
        "counterexample" => counterexample(sc),
        "identity" => {
            let space = build_segment(10, 1.0)?;
            let mu = DiscreteMeasure::new((0..10).map(|i| (i % 3 + 1) as f64 / 20.0).collect())?;
            let inst = Instance { space, nu: mu.clone(), mu };
            let mut r = standard(sc, &inst)?;
            let cost = r.json["oracle"]["cost"].as_f64().unwrap_or(f64::NAN);
            let l1 = r.json.pointer("/flow/l1_norm").and_then(Value::as_f64).unwrap_or(0.0);
            let ok = r.pass() && cost == 0.0 && l1 == 0.0;
            r.json["pass"] = json!(ok);
            Ok(r)
        }
        "mcp-segment" => mcp_segment(sc),
        "random-tree" => standard(sc, &random_tree_instance(sc.seed, 0)?),
        "blocks" => standard(sc, &overlapping_blocks_instance(sc.seed, 0)?),
        other => Err(Error::InvalidInput(format!("unknown scenario {other:?}"))),
    }
}

fn intro_1d(sc: &Scenario) -> Result<Report> {
    let inst = intro_1d_instance(sc.seed)?;
    let vertices = stage("oracle", vertex_couplings(&inst.mu, &inst.nu, 1 << 16))?;
    let costs: Vec<f64> = vertices.iter().map(|p| p.clone().cost(&inst.space)).collect();
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (plan, summary) = oracle_section(&inst)?;
    let (sections, csv, pipe) = run_pipeline(&inst, &plan, sc.stages)?;
    let spread = hi - lo;
    let mut m = base_report(sc);
    m.insert("oracle".into(), summary);
    m.insert(
        "vertex_couplings".into(),
        json!({ "count": costs.len(), "costs": costs, "spread": spread, "pass": spread <= IDENTITY_TOL }),
    );
    Ok(finish(m, sections, pipe && spread <= IDENTITY_TOL, csv))
}

fn counterexample(sc: &Scenario) -> Result<Report> {
    let q = sc.q_denom.unwrap_or(64);
    let res = sc.strip_res.unwrap_or(16);
    let ce = stage("space", build_counterexample_space(q, res))?;
    let space = &ce.space;
    let n = space.n();
    let src = ce.source_points();
    let w = 1.0 / src.len() as f64;
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for line in 0..q {
        for &k in &ce.source_levels {
            let x = ce.point(0, line, k);
            plus.push((x, ce.t_plus(line, k), w));
            minus.push((x, ce.t_minus(line, k), w));
        }
    }
    let t_plus = TransportPlan::from_entries(n, &plus)?;
    let t_minus = TransportPlan::from_entries(n, &minus)?;
    let sp = stage("plans", plan_summary(space, &t_plus))?;
    let sm = stage("plans", plan_summary(space, &t_minus))?;
    let ratio = sp["cost"].as_f64().unwrap() / sm["cost"].as_f64().unwrap();
    let ratio_pass = (ratio / 1.5 - 1.0).abs() <= 0.05;
    let bounded = sp["certificate"]["bounded_pass"] == json!(true) && sm["certificate"]["bounded_pass"] == json!(true);

    // The closure of T⁺ sees the long cycles a rational slope creates.
    let closure = match rays_from_plan(space, &t_plus) {
        Ok(rc) => json!({ "ok": true, "gamma_prime": rc.gamma_prime.len() }),
        Err(e) => json!({ "ok": false, "code": e.code(), "message": e.to_string() }),
    };

    let inst = Instance { space: space.clone(), mu: t_plus.left().clone(), nu: t_plus.right().clone() };
    let (oracle, osum) = oracle_section(&inst)?;
    let (sections, csv, pipe) = run_pipeline(&inst, &oracle, sc.stages)?;
    let mut m = base_report(sc);
    m.insert(
        "space".into(),
        json!({
            "n": n,
            "q_denom": q,
            "strip_res": res,
            "alpha": ce.alpha(),
            "alpha_num": ce.alpha_num,
        }),
    );
    m.insert(
        "plans".into(),
        json!({
            "t_plus": sp,
            "t_minus": sm,
            "ratio": ratio,
            "ratio_pass": ratio_pass,
            "t_plus_closure": closure,
        }),
    );
    m.insert("oracle".into(), osum);
    Ok(finish(m, sections, pipe && ratio_pass && bounded, csv))
}

fn mcp_segment(sc: &Scenario) -> Result<Report> {
    let n = 41;
    let (space, eta) = lebesgue_segment(n)?;
    let x_bar = 0;
    let params = McpParams::new(0.0, 1.0)?;
    let mu = eta.restricted(|p| p != x_bar);
    let nu = DiscreteMeasure::dirac(n, x_bar, mu.total())?;
    let inst = Instance { space: space.clone(), mu: mu.clone(), nu };
    let (plan, summary) = oracle_section(&inst)?;
    let (sections, csv, mut pass) = run_pipeline(&inst, &plan, sc.stages)?;
    let mut m = base_report(sc);
    m.insert("oracle".into(), summary);
    if sc.stages.mcp && sc.stages.rays {
        let all: Vec<usize> = (0..n).collect();
        let ts: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let contraction = stage("mcp", mcp_contract_check(&space, &eta, x_bar, &all, &ts, params))?;
        let rs = stage("mcp", rays_from_plan(&space, &plan))?.system;
        let fam = stage("mcp", crate::disintegration::disintegrate(&mu, &rs))?;
        let target = stage("mcp", verify_density_bounds_to_target(&rs, &fam, params, x_bar))?;
        let band = stage("mcp", verify_density_bounds(&rs, &fam, params))?;
        let tv = stage("mcp", verify_tv_bound(&fam, &rs, params))?;
        pass &= contraction.pass && target.pass && band.pass && tv.pass;
        m.insert(
            "mcp".into(),
            json!({
                "params": params,
                "contraction": { "pass": contraction.pass, "defects": contraction.defects.len(), "snapping_defect": contraction.snapping_defect },
                "target_bound": target,
                "density_bounds": band,
                "tv_bound": tv,
            }),
        );
    }
    Ok(finish(m, sections, pass, csv))
}
