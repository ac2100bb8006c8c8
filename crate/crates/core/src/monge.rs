//! Monotone rearrangement on each ray, glued into a transport map of the same
//! cost as the plan that generated the rays.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::disintegration::split_plan;
use crate::error::{Error, Result};
use crate::kantorovich::{plan_cost, TransportPlan, MASS_TOL};
use crate::measure::DiscreteMeasure;
use crate::par;
use crate::rays::RaySystem;
use crate::space::{FiniteGeodesicSpace, Point};

/// The monotone coupling of two atomic measures on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rearrangement {
    /// `(source index, target index, mass)` in increasing order of both.
    pub entries: Vec<(usize, usize, f64)>,
    /// No source atom is split between targets.
    pub is_pure_map: bool,
    /// Source mass not sent to the first target of its atom: zero exactly for
    /// a map.
    pub split_mass: f64,
    pub cost: f64,
}

impl Rearrangement {
    /// `T(s)` for each source index, when the atom is not split.
    pub fn map(&self, sources: usize) -> Vec<Option<usize>> {
        let mut out: Vec<Option<Option<usize>>> = vec![None; sources];
        for &(i, j, _) in &self.entries {
            out[i] = match out[i] {
                None => Some(Some(j)),
                Some(Some(k)) if k == j => Some(Some(j)),
                _ => Some(None),
            };
        }
        out.into_iter().map(Option::flatten).collect()
    }
}

/// `T(s) = sup{t : F(t) ≤ H(s)}` in coupling form: walk both cumulative
/// distributions and match mass in order.
pub fn monotone_rearrangement_1d(mu: (&[f64], &[f64]), nu: (&[f64], &[f64])) -> Result<Rearrangement> {
    let (sp, sw) = mu;
    let (tp, tw) = nu;
    if sp.len() != sw.len() || tp.len() != tw.len() {
        return Err(Error::InvalidInput("params and weights differ in length".into()));
    }
    if sp.windows(2).any(|w| w[0] > w[1]) || tp.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("params must be sorted".into()));
    }
    let (a, b): (f64, f64) = (sw.iter().sum(), tw.iter().sum());
    if (a - b).abs() > MASS_TOL * a.max(b).max(1.0) {
        return Err(Error::MassMismatch(a, b));
    }
    let eps = 1e-14 * a.max(1.0);
    let mut entries = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (mut ri, mut rj) = (sw.first().copied().unwrap_or(0.0), tw.first().copied().unwrap_or(0.0));
    while i < sw.len() && j < tw.len() {
        if ri <= eps {
            i += 1;
            ri = sw.get(i).copied().unwrap_or(0.0);
            continue;
        }
        if rj <= eps {
            j += 1;
            rj = tw.get(j).copied().unwrap_or(0.0);
            continue;
        }
        let m = ri.min(rj);
        entries.push((i, j, m));
        ri -= m;
        rj -= m;
    }
    let mut first_target: Vec<Option<usize>> = vec![None; sw.len()];
    let mut split_mass = 0.0;
    for &(i, j, m) in &entries {
        match first_target[i] {
            None => first_target[i] = Some(j),
            Some(k) if k != j => split_mass += m,
            _ => {}
        }
    }
    let cost = entries.iter().map(|&(i, j, m)| (tp[j] - sp[i]).abs() * m).sum();
    Ok(Rearrangement { is_pure_map: split_mass == 0.0, entries, split_mass, cost })
}

/// A transport map glued from per-ray rearrangements, with the coupling it
/// induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportMap {
    /// `x ↦ T(x)` for every source point whose mass goes to a single target.
    pub assignment: Vec<(Point, Point)>,
    /// The glued monotone coupling; `Some` exactly when some atom splits.
    pub fallback: Option<TransportPlan>,
    pub is_pure_map: bool,
    /// Source mass that a map would have to move elsewhere.
    pub split_mass: f64,
    /// The coupling `(I, T)♯μ` (or the fallback plan).
    pub plan: TransportPlan,
    pub cost: f64,
    /// `T(s) ≥ s` on every ray.
    pub forward: bool,
    /// Largest per-point deviation of the pushed-forward measure from `ν`.
    pub pushforward_defect: f64,
}

impl TransportMap {
    pub fn to_json(&self, identity_defect: Option<f64>) -> Value {
        json!({
            "assignment": self.assignment,
            "fallback": self.fallback.as_ref().map(TransportPlan::to_json),
            "cost": self.cost,
            "identity_defect": identity_defect,
            "is_pure_map": self.is_pure_map,
            "split_mass": self.split_mass,
        })
    }
}

/// Solves the 1D problem `μ_y → ν_y = (P₂)♯π_y` on each ray in ray
/// coordinates and glues the results; mass the plan leaves in place off `𝒯`
/// stays (the identity extension).
pub fn assemble_monge_map(
    space: &FiniteGeodesicSpace,
    rs: &RaySystem,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &TransportPlan,
) -> Result<TransportMap> {
    check_marginals(plan, mu, nu)?;
    let split = split_plan(rs, plan)?;
    let solved: Vec<Result<Rearrangement>> = par::map_range(rs.rays.len(), |r| {
        let params = &rs.rays[r].params;
        let s = split.source_weights(rs, r);
        let t = split.target_weights(rs, r);
        monotone_rearrangement_1d((params, &s), (params, &t))
    });
    let mut entries = Vec::new();
    let mut forward = true;
    for (r, sol) in solved.into_iter().enumerate() {
        let sol = sol?;
        let ray = &rs.rays[r];
        for &(i, j, m) in &sol.entries {
            if ray.params[j] < ray.params[i] - rs.tol {
                forward = false;
            }
            entries.push((ray.points[i], ray.points[j], m));
        }
    }
    entries.extend(split.stay.iter().map(|&(x, m)| (x, x, m)));
    let glued = TransportPlan::from_entries(space.n(), &entries)?.with_cost(space);

    let mut targets: Vec<Vec<(Point, f64)>> = vec![Vec::new(); space.n()];
    for &(x, y, m) in glued.entries() {
        targets[x].push((y, m));
    }
    let mut assignment = Vec::new();
    let mut split_mass = 0.0;
    for (x, t) in targets.iter().enumerate() {
        match t.len() {
            0 => {}
            1 => assignment.push((x, t[0].0)),
            _ => {
                let heaviest = t.iter().map(|e| e.1).fold(0.0, f64::max);
                split_mass += t.iter().map(|e| e.1).sum::<f64>() - heaviest;
            }
        }
    }
    let is_pure_map = assignment.len() == mu.support().len();
    let pushforward_defect = glued.marginal_defect(mu, nu);
    Ok(TransportMap {
        assignment,
        fallback: (!is_pure_map).then(|| glued.clone()),
        is_pure_map,
        split_mass,
        cost: glued.cached_cost().unwrap_or_else(|| plan_cost(space, glued.entries())),
        plan: glued,
        forward,
        pushforward_defect,
    })
}

fn check_marginals(plan: &TransportPlan, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    let scale = mu.total().max(1.0);
    let defect = plan.marginal_defect(mu, nu);
    if defect > MASS_TOL * scale {
        return Err(Error::MassMismatch(plan.total(), mu.total()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
}

/// `∫ dL dπ` against `Σ_y Σ_t t (ν_y − μ_y)(t)`, the second sum in ray
/// coordinates. Equal when mass only moves forward along rays.
pub fn verify_cost_identity(
    space: &FiniteGeodesicSpace,
    rs: &RaySystem,
    plan: &TransportPlan,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<CostIdentity> {
    check_marginals(plan, mu, nu)?;
    for &(x, y, _) in plan.entries() {
        if x != y && rs.rays_through(y).is_empty() {
            return Err(Error::ParamUndefined(y));
        }
    }
    let split = split_plan(rs, plan)?;
    let lhs = plan_cost(space, plan.entries());
    let mut rhs = 0.0;
    for (r, ray) in rs.rays.iter().enumerate() {
        for &(i, j, m) in &split.per_ray[r] {
            rhs += (ray.params[j] - ray.params[i]) * m;
        }
    }
    Ok(CostIdentity { lhs, rhs, defect: (lhs - rhs).abs() })
}

/// Rebuilds the plan so the diagonal carries `μ_y ∧ ν_y` on every ray: the
/// common part is subtracted, the remainders are coupled monotonically, and
/// the diagonal is added back.
pub fn fix_common_mass(space: &FiniteGeodesicSpace, rs: &RaySystem, plan: &TransportPlan) -> Result<TransportPlan> {
    let split = split_plan(rs, plan)?;
    let mut entries: Vec<(Point, Point, f64)> = split.stay.iter().map(|&(x, m)| (x, x, m)).collect();
    for (r, ray) in rs.rays.iter().enumerate() {
        let s = split.source_weights(rs, r);
        let t = split.target_weights(rs, r);
        let common: Vec<f64> = s.iter().zip(&t).map(|(a, b)| a.min(*b)).collect();
        let s_rest: Vec<f64> = s.iter().zip(&common).map(|(a, c)| a - c).collect();
        let t_rest: Vec<f64> = t.iter().zip(&common).map(|(a, c)| a - c).collect();
        let rest = monotone_rearrangement_1d((&ray.params, &s_rest), (&ray.params, &t_rest))?;
        for (k, &c) in common.iter().enumerate() {
            entries.push((ray.points[k], ray.points[k], c));
        }
        entries.extend(rest.entries.iter().map(|&(i, j, m)| (ray.points[i], ray.points[j], m)));
    }
    Ok(TransportPlan::from_entries(space.n(), &entries)?.with_cost(space))
}
