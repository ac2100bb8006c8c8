//! Measures disintegrated along rays, the evolution `A_t` of a set along rays,
//! and refinement diagnostics for the regularity assumptions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kantorovich::TransportPlan;
use crate::measure::DiscreteMeasure;
use crate::par;
use crate::rays::{Ray, RaySystem};
use crate::space::Point;

/// Lengths of the midpoint cells of a ray, clipped to its first and last
/// param. A single-point ray gets one cell of length 0.
pub fn cell_lengths(params: &[f64]) -> Vec<f64> {
    let k = params.len();
    if k < 2 {
        return vec![0.0; k];
    }
    (0..k)
        .map(|i| {
            let lo = if i == 0 { params[0] } else { 0.5 * (params[i - 1] + params[i]) };
            let hi = if i + 1 == k { params[k - 1] } else { 0.5 * (params[i] + params[i + 1]) };
            hi - lo
        })
        .collect()
}

/// `μ = Σ_y m(y) μ_y` with `μ_y` a probability on ray `y`, indexed like the
/// ray's point list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalFamily {
    /// Quotient measure, one entry per ray.
    pub m: Vec<f64>,
    pub conditionals: Vec<Vec<f64>>,
    /// `m(y) μ_y` as given, kept to avoid a round trip through division.
    pub masses: Vec<Vec<f64>>,
    /// Midpoint cell lengths per ray.
    pub cells: Vec<Vec<f64>>,
    /// `m(y) μ_y(cell) / |cell|`, infinite on a charged cell of length 0.
    pub densities: Option<Vec<Vec<f64>>>,
    /// `H(y, t_k) = μ_y((−∞, t_k))`, left-continuous, one entry per point.
    pub cumulative: Vec<Vec<f64>>,
    /// Mass on initial points `a(𝒯)` left out of the family.
    pub initial_mass: f64,
    /// Mass on final points `b(𝒯)` left out of the family.
    pub terminal_mass: f64,
}

impl ConditionalFamily {
    /// Builds the family from unnormalized per-ray weights.
    pub fn from_ray_weights(rs: &RaySystem, weights: Vec<Vec<f64>>) -> Self {
        let m: Vec<f64> = weights.iter().map(|w| w.iter().sum()).collect();
        let cells: Vec<Vec<f64>> = rs.rays.iter().map(|r| cell_lengths(&r.params)).collect();
        let conditionals: Vec<Vec<f64>> = weights
            .iter()
            .zip(&m)
            .map(|(w, &tot)| w.iter().map(|x| if tot > 0.0 { x / tot } else { 0.0 }).collect())
            .collect();
        let densities = weights
            .iter()
            .zip(&cells)
            .map(|(w, c)| {
                w.iter()
                    .zip(c)
                    .map(|(&x, &len)| if x == 0.0 { 0.0 } else if len > 0.0 { x / len } else { f64::INFINITY })
                    .collect()
            })
            .collect();
        let cumulative = conditionals
            .iter()
            .map(|c| {
                let mut acc = 0.0;
                c.iter()
                    .map(|x| {
                        let before = acc;
                        acc += x;
                        before
                    })
                    .collect()
            })
            .collect();
        Self {
            m,
            conditionals,
            masses: weights,
            cells,
            densities: Some(densities),
            cumulative,
            initial_mass: 0.0,
            terminal_mass: 0.0,
        }
    }

    pub fn ray_count(&self) -> usize {
        self.m.len()
    }

    /// `m(y) μ_y`, unnormalized.
    pub fn ray_weights(&self, ray: usize) -> Vec<f64> {
        self.masses[ray].clone()
    }

    pub fn total(&self) -> f64 {
        self.m.iter().sum()
    }

    /// `Σ_y m(y) μ_y` pushed back to the points of the space.
    pub fn reassemble(&self, rs: &RaySystem) -> Vec<f64> {
        let mut out = vec![0.0; rs.n];
        for (r, ray) in rs.rays.iter().enumerate() {
            for (k, &p) in ray.points.iter().enumerate() {
                out[p] += self.masses[r][k];
            }
        }
        out
    }

    /// Largest atom `m(y) μ_y({t})` over all rays.
    pub fn max_atom(&self) -> f64 {
        (0..self.ray_count())
            .flat_map(|r| self.ray_weights(r))
            .fold(0.0, f64::max)
    }

    /// Largest density over all cells.
    pub fn max_density(&self) -> f64 {
        self.densities.iter().flatten().flatten().copied().fold(0.0, f64::max)
    }
}

/// Disintegrates `mu` over the `R`-classes of `𝒯`.
///
/// Mass on initial and final points is not assigned to any ray and is
/// reported in the family; mass off `𝒯ₑ` is an error.
pub fn disintegrate(mu: &DiscreteMeasure, rs: &RaySystem) -> Result<ConditionalFamily> {
    let n = rs.n;
    let mut on_te = vec![false; n];
    for &p in &rs.te_points {
        on_te[p] = true;
    }
    let off: f64 = (0..n).filter(|&p| !on_te[p]).map(|p| mu.weight(p)).sum();
    if off > rs.tol * mu.total().max(1.0) {
        return Err(Error::MassOffRays { mass: off });
    }
    let weights = rs
        .rays
        .iter()
        .enumerate()
        .map(|(r, ray)| {
            ray.points
                .iter()
                .map(|&p| if rs.quotient.get(&p) == Some(&r) { mu.weight(p) } else { 0.0 })
                .collect()
        })
        .collect();
    let mut fam = ConditionalFamily::from_ray_weights(rs, weights);
    let mut initial = vec![false; n];
    let mut terminal = vec![false; n];
    for ray in &rs.rays {
        if let Some(p) = ray.initial.filter(|p| !rs.in_t(*p)) {
            initial[p] = true;
        }
        if let Some(p) = ray.terminal.filter(|p| !rs.in_t(*p)) {
            terminal[p] = true;
        }
    }
    fam.initial_mass = (0..n).filter(|&p| initial[p]).map(|p| mu.weight(p)).sum();
    fam.terminal_mass = (0..n).filter(|&p| terminal[p] && !initial[p]).map(|p| mu.weight(p)).sum();
    Ok(fam)
}

/// A plan cut along rays: per-ray couplings in ray-point indices, and the
/// diagonal mass off `𝒯` that stays put.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSplit {
    /// `(source index, target index, mass)` per ray.
    pub per_ray: Vec<Vec<(usize, usize, f64)>>,
    pub stay: Vec<(Point, f64)>,
}

impl PlanSplit {
    pub fn source_weights(&self, rs: &RaySystem, ray: usize) -> Vec<f64> {
        let mut w = vec![0.0; rs.rays[ray].len()];
        for &(i, _, m) in &self.per_ray[ray] {
            w[i] += m;
        }
        w
    }

    pub fn target_weights(&self, rs: &RaySystem, ray: usize) -> Vec<f64> {
        let mut w = vec![0.0; rs.rays[ray].len()];
        for &(_, j, m) in &self.per_ray[ray] {
            w[j] += m;
        }
        w
    }

    /// `(μ-family, ν-family)` of the split: `μ_y = (P₁)♯π_y`, `ν_y = (P₂)♯π_y`.
    pub fn families(&self, rs: &RaySystem) -> (ConditionalFamily, ConditionalFamily) {
        let src = (0..rs.rays.len()).map(|r| self.source_weights(rs, r)).collect();
        let tgt = (0..rs.rays.len()).map(|r| self.target_weights(rs, r)).collect();
        (ConditionalFamily::from_ray_weights(rs, src), ConditionalFamily::from_ray_weights(rs, tgt))
    }
}

/// Assigns every plan entry to the ray carrying it.
pub fn split_plan(rs: &RaySystem, plan: &TransportPlan) -> Result<PlanSplit> {
    let mut per_ray = vec![Vec::new(); rs.rays.len()];
    let mut stay = Vec::new();
    for &(x, y, m) in plan.entries() {
        match rs.ray_of_pair(x, y)? {
            Some(r) => {
                let ray = &rs.rays[r];
                per_ray[r].push((ray.position(x).unwrap(), ray.position(y).unwrap(), m));
            }
            None => stay.push((x, m)),
        }
    }
    Ok(PlanSplit { per_ray, stay })
}

/// `A_t`, plus how many shifted points left their ray or fell between params.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evolved {
    pub points: Vec<Point>,
    pub dropped: usize,
}

/// Half the smallest gap between consecutive params.
pub fn snap_tolerance(ray: &Ray) -> f64 {
    let gap = ray.params.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if gap.is_finite() {
        0.5 * gap
    } else {
        0.0
    }
}

/// Index of the param within `snap` of `target`, if any.
pub(crate) fn snap_index(params: &[f64], target: f64, snap: f64) -> Option<usize> {
    let i = params.partition_point(|&p| p < target);
    let mut best: Option<usize> = None;
    for j in [i.wrapping_sub(1), i] {
        if j < params.len() && (params[j] - target).abs() <= snap {
            match best {
                Some(b) if (params[b] - target).abs() <= (params[j] - target).abs() => {}
                _ => best = Some(j),
            }
        }
    }
    best
}

/// `A_t = g(g⁻¹(A) + (0, t))`: every point of `A` is moved by `t` along each
/// ray through it and snapped to the nearest param.
pub fn evolve_set(a: &[Point], t: f64, rs: &RaySystem) -> Evolved {
    let mut out = Vec::new();
    let mut dropped = 0;
    for &p in a {
        for r in rs.rays_through(p) {
            let ray = &rs.rays[r];
            let k = ray.position(p).unwrap();
            match snap_index(&ray.params, ray.params[k] + t, snap_tolerance(ray)) {
                Some(j) => out.push(ray.points[j]),
                None => dropped += 1,
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Evolved { points: out, dropped }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionProfile {
    pub ts: Vec<f64>,
    pub masses: Vec<f64>,
    pub support_count: usize,
}

impl EvolutionProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("ts,masses\n");
        for (t, m) in self.ts.iter().zip(&self.masses) {
            s.push_str(&format!("{t:?},{m:?}\n"));
        }
        s
    }
}

/// `t ↦ μ(A_t)` on the grid `ts`.
pub fn evolution_profile(a: &[Point], mu: &DiscreteMeasure, rs: &RaySystem, ts: &[f64]) -> EvolutionProfile {
    let masses: Vec<f64> = par::map_slice(ts, |&t| mu.mass_of(evolve_set(a, t, rs).points));
    let support_count = masses.iter().filter(|&&m| m > 0.0).count();
    EvolutionProfile { ts: ts.to_vec(), masses, support_count }
}

/// Diagnostics of one refinement level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub max_atom: f64,
    pub max_density: f64,
    pub initial_mass: f64,
    pub min_cell: f64,
}

/// Refinement-sequence reading of the non-degeneracy assumptions.
///
/// * atoms: the largest conditional atom must strictly decrease from the
///   first to the last level and never grow;
/// * densities: the largest density may grow by at most the square root of
///   the refinement ratio (an atom grows like the ratio itself);
/// * initial points: their mass must never grow and must decrease unless it
///   is already zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub levels: Vec<LevelDiagnostics>,
    pub atoms_decay: bool,
    pub densities_bounded: bool,
    pub initial_mass_vanishes: bool,
    pub pass: bool,
}

pub fn check_regularity(families: &[ConditionalFamily]) -> Result<RegularityReport> {
    if families.len() < 2 {
        return Err(Error::InvalidInput("regularity needs at least two refinement levels".into()));
    }
    let levels: Vec<LevelDiagnostics> = families
        .iter()
        .map(|f| LevelDiagnostics {
            max_atom: f.max_atom(),
            max_density: f.max_density(),
            initial_mass: f.initial_mass,
            min_cell: f.cells.iter().flatten().copied().filter(|&c| c > 0.0).fold(f64::INFINITY, f64::min),
        })
        .collect();
    let grow = |a: f64, b: f64| b > a * (1.0 + 1e-12);
    let steady = |v: &dyn Fn(&LevelDiagnostics) -> f64| levels.windows(2).all(|w| !grow(v(&w[0]), v(&w[1])));
    let (first, last) = (&levels[0], &levels[levels.len() - 1]);

    let atoms_decay = steady(&|l| l.max_atom) && last.max_atom < first.max_atom * (1.0 - 1e-12);
    let ratio = first.min_cell / last.min_cell;
    let densities_bounded = last.max_density.is_finite() && last.max_density <= first.max_density * ratio.max(1.0).sqrt();
    let initial_mass_vanishes =
        steady(&|l| l.initial_mass) && (last.initial_mass == 0.0 || last.initial_mass < first.initial_mass * (1.0 - 1e-12));
    Ok(RegularityReport {
        pass: atoms_decay && densities_bounded && initial_mass_vanishes,
        levels,
        atoms_decay,
        densities_bounded,
        initial_mass_vanishes,
    })
}

/// One level of an equintegrability test: `(base weight, density)` per cell,
/// the base weight being `m_n(y) × cell length`.
pub type DensityTable = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquiWitness {
    pub eps: f64,
    pub delta: f64,
    pub level: usize,
    pub cells: Vec<usize>,
    pub weight: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquiReport {
    pub pass: bool,
    /// Largest admissible δ from the grid, per ε.
    pub deltas: Vec<(f64, Option<f64>)>,
    /// Worst set found for the first ε that admits no δ.
    pub witness: Option<EquiWitness>,
}

/// Greedy extremal set of base weight `< delta`: cells by decreasing density,
/// each taken while it still fits.
fn worst_set(table: &DensityTable, delta: f64) -> (Vec<usize>, f64, f64) {
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table[b].1.total_cmp(&table[a].1).then(a.cmp(&b)));
    let (mut weight, mut mass, mut cells) = (0.0, 0.0, Vec::new());
    for i in order {
        let (w, r) = table[i];
        if r > 0.0 && weight + w < delta {
            weight += w;
            mass += w * r;
            cells.push(i);
        }
    }
    cells.sort_unstable();
    (cells, weight, mass)
}

/// For each ε, the largest δ in `delta_grid` such that on every level any set
/// of base weight `< δ` carries density mass `< ε`.
pub fn check_equintegrability(levels: &[DensityTable], eps_grid: &[f64], delta_grid: &[f64]) -> EquiReport {
    let mut deltas_sorted = delta_grid.to_vec();
    deltas_sorted.sort_by(|a, b| b.total_cmp(a));
    let mut deltas = Vec::new();
    let mut witness = None;
    for &eps in eps_grid {
        let mut found = None;
        let mut first_fail = None;
        for &delta in &deltas_sorted {
            let fail = levels.iter().enumerate().find_map(|(lv, t)| {
                let (cells, weight, mass) = worst_set(t, delta);
                (mass >= eps).then_some(EquiWitness { eps, delta, level: lv, cells, weight, mass })
            });
            match fail {
                None => {
                    found = Some(delta);
                    break;
                }
                Some(w) => first_fail = Some(w),
            }
        }
        if found.is_none() && witness.is_none() {
            witness = first_fail;
        }
        deltas.push((eps, found));
    }
    EquiReport { pass: deltas.iter().all(|d| d.1.is_some()), deltas, witness }
}

/// `(m(y) × cell length, density / m(y))` for every cell of a family: the
/// table `check_equintegrability` expects.
pub fn density_table(fam: &ConditionalFamily) -> DensityTable {
    let mut out = Vec::new();
    for r in 0..fam.ray_count() {
        for (k, &len) in fam.cells[r].iter().enumerate() {
            let w = fam.m[r] * len;
            let dens = if len > 0.0 { fam.conditionals[r][k] / len } else { 0.0 };
            out.push((w, dens));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rays::{build_g, build_ray_system};
    use crate::space::build_segment;
    use approx::assert_abs_diff_eq;

    fn unit_ray(n: usize) -> RaySystem {
        let s = build_segment(n, 1.0).unwrap();
        build_ray_system(&s, &build_g(&s, &[(0, n - 1)])).unwrap()
    }

    #[test]
    fn cells_are_clipped_midpoints() {
        let c = cell_lengths(&[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(c, vec![0.125, 0.25, 0.25, 0.25, 0.125]);
        assert_eq!(cell_lengths(&[3.0]), vec![0.0]);
    }

    #[test]
    fn uniform_on_interior() {
        let rs = unit_ray(5);
        let mu = DiscreteMeasure::uniform_on(5, &[1, 2, 3], 0.6).unwrap();
        let f = disintegrate(&mu, &rs).unwrap();
        assert_abs_diff_eq!(f.m[0], 0.6, epsilon = 1e-15);
        let third = 1.0 / 3.0;
        for (c, e) in f.conditionals[0].iter().zip([0.0, third, third, third, 0.0]) {
            assert_abs_diff_eq!(*c, e, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(f.densities.as_ref().unwrap()[0][2], 0.8, epsilon = 1e-12);
        assert_eq!(f.cumulative[0], vec![0.0, 0.0, third, 2.0 * third, 1.0]);
        let back = f.reassemble(&rs);
        for p in 0..5 {
            assert_abs_diff_eq!(back[p], mu.weight(p), epsilon = 1e-15);
        }
    }

    #[test]
    fn dirac_gives_single_spike() {
        let rs = unit_ray(5);
        let mu = DiscreteMeasure::dirac(5, 2, 1.0).unwrap();
        let f = disintegrate(&mu, &rs).unwrap();
        let d = &f.densities.as_ref().unwrap()[0];
        assert_eq!(d.iter().filter(|&&x| x > 0.0).count(), 1);
        assert_eq!(d[2], 4.0);
    }

    #[test]
    fn endpoint_mass_is_reported_and_off_mass_rejected() {
        let rs = unit_ray(5);
        let mu = DiscreteMeasure::from_atoms(5, &[(0, 0.25), (2, 0.5), (4, 0.25)]).unwrap();
        let f = disintegrate(&mu, &rs).unwrap();
        assert_eq!((f.initial_mass, f.terminal_mass, f.m[0]), (0.25, 0.25, 0.5));

        let s = build_segment(7, 1.0).unwrap();
        let rs = build_ray_system(&s, &build_g(&s, &[(0, 4)])).unwrap();
        let mu = DiscreteMeasure::dirac(7, 6, 1.0).unwrap();
        assert_eq!(disintegrate(&mu, &rs).unwrap_err().code(), "MASS_OFF_RAYS");
    }

    #[test]
    fn two_rays_quotient() {
        let s = build_segment(7, 6.0).unwrap();
        let rs = build_ray_system(&s, &build_g(&s, &[(0, 2), (4, 6)])).unwrap();
        let mu = DiscreteMeasure::from_atoms(7, &[(1, 0.3), (5, 0.7)]).unwrap();
        let f = disintegrate(&mu, &rs).unwrap();
        assert_eq!(f.m, vec![0.3, 0.7]);
    }

    #[test]
    fn grid_shift() {
        let rs = unit_ray(5);
        assert_eq!(evolve_set(&[0, 1], 0.25, &rs).points, vec![1, 2]);
        assert_eq!(evolve_set(&[0, 1], 0.0, &rs).points, vec![0, 1]);
        let e = evolve_set(&[0, 1], 1.5, &rs);
        assert!(e.points.is_empty());
        assert_eq!(e.dropped, 2);
    }

    #[test]
    fn profile_of_whole_ray_decays_linearly() {
        let rs = unit_ray(5);
        let mu = DiscreteMeasure::uniform_on(5, &[0, 1, 2, 3, 4], 1.0).unwrap();
        let ts = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25];
        let p = evolution_profile(&[0, 1, 2, 3, 4], &mu, &rs, &ts);
        let expected = [1.0, 0.8, 0.6, 0.4, 0.2, 0.0];
        for (m, e) in p.masses.iter().zip(expected) {
            assert_abs_diff_eq!(*m, e, epsilon = 1e-12);
        }
        assert_eq!(p.support_count, 5);
        assert!(p.to_csv().starts_with("ts,masses\n0.0,1.0\n"));
        let empty = evolution_profile(&[], &mu, &rs, &ts);
        assert!(empty.masses.iter().all(|&m| m == 0.0));
    }

    fn uniform_level(n: usize) -> ConditionalFamily {
        let rs = unit_ray(n);
        let all: Vec<Point> = (0..n).collect();
        disintegrate(&DiscreteMeasure::uniform_on(n, &all, 1.0).unwrap(), &rs).unwrap()
    }

    #[test]
    fn regularity_uniform_passes() {
        let fams: Vec<_> = [10, 20, 40, 80].iter().map(|&n| uniform_level(n)).collect();
        let r = check_regularity(&fams).unwrap();
        for (l, n) in r.levels.iter().zip([10.0, 20.0, 40.0, 80.0]) {
            assert_eq!(l.max_atom, 1.0 / n);
        }
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn regularity_dirac_fails() {
        let fams: Vec<_> = [11, 21, 41, 81]
            .iter()
            .map(|&n| disintegrate(&DiscreteMeasure::dirac(n, (n - 1) / 2, 1.0).unwrap(), &unit_ray(n)).unwrap())
            .collect();
        let r = check_regularity(&fams).unwrap();
        assert!(!r.atoms_decay && !r.densities_bounded && !r.pass);
        assert!(check_regularity(&fams[..1]).is_err());
    }

    #[test]
    fn equintegrability_cases() {
        let flat: Vec<DensityTable> = [10, 100].iter().map(|&n| vec![(1.0 / n as f64, 1.0); n]).collect();
        let r = check_equintegrability(&flat, &[0.1, 0.5], &[0.5, 0.1, 0.01]);
        assert!(r.pass);
        assert_eq!(r.deltas, vec![(0.1, Some(0.1)), (0.5, Some(0.5))]);

        let spikes: Vec<DensityTable> = [10usize, 100, 10_000]
            .iter()
            .map(|&n| {
                let mut t = vec![(1.0 / n as f64, 0.0); n];
                t[0].1 = n as f64;
                t
            })
            .collect();
        let r = check_equintegrability(&spikes, &[0.5], &[0.1, 0.01, 0.001]);
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert_eq!((w.level, w.cells.as_slice()), (2, &[0][..]));
    }
}
