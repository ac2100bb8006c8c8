//! Transport rays: cycle closure of a monotone support, the oriented relation
//! `G`, transport sets, endpoints, and the ray map.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::kantorovich::{exchange_weights, has_negative_cycle, shortest_paths, TransportPlan};
use crate::space::{FiniteGeodesicSpace, Point};

/// `Γ′`: all `(x_a, y_b)` closing a zero-defect cycle through the support.
///
/// With `w[a][b] = dL(x_b, y_a) − dL(x_a, y_a)` and `D` the shortest-path
/// closure of `w`, the chain `a → … → b` closed back to `a` has total weight
/// `D[a][b] + w[b][a]`; monotonicity makes it nonnegative and `Γ′` collects
/// the pairs where it vanishes within tol. Output is sorted.
pub fn close_cycles(space: &FiniteGeodesicSpace, support: &[(Point, Point)]) -> Result<Vec<(Point, Point)>> {
    let mut pairs: Vec<(Point, Point)> = support.to_vec();
    pairs.sort_unstable();
    pairs.dedup();
    if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| !space.is_finite(x, y)) {
        return Err(Error::InfiniteDistance(x, y));
    }
    let s = pairs.len();
    let w = exchange_weights(space, &pairs);
    let tol = space.tol();
    let dist = shortest_paths(&w, s, tol).map_err(|(_, d)| Error::NonmonotoneInput { defect: -d })?;
    let mut worst: f64 = 0.0;
    for a in 0..s {
        for b in 0..s {
            worst = worst.min(dist[a * s + b] + w[b * s + a]);
        }
    }
    if worst < -tol {
        return Err(Error::NonmonotoneInput { defect: -worst });
    }
    let mut out = Vec::new();
    for a in 0..s {
        for b in 0..s {
            if dist[a * s + b] + w[b * s + a] <= tol {
                out.push((pairs[a].0, pairs[b].1));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// A relation on `0..n` stored as sorted successor lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Relation {
    succ: Vec<Vec<Point>>,
}

impl Relation {
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (Point, Point)>) -> Self {
        let mut succ = vec![Vec::new(); n];
        for (x, y) in pairs {
            succ[x].push(y);
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        Self { succ }
    }

    pub fn n(&self) -> usize {
        self.succ.len()
    }

    pub fn contains(&self, x: Point, y: Point) -> bool {
        self.succ[x].binary_search(&y).is_ok()
    }

    pub fn successors(&self, x: Point) -> &[Point] {
        &self.succ[x]
    }

    pub fn len(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pairs(&self) -> Vec<(Point, Point)> {
        self.succ.iter().enumerate().flat_map(|(x, s)| s.iter().map(move |&y| (x, y))).collect()
    }

    pub fn inverse(&self) -> Self {
        Self::from_pairs(self.n(), self.pairs().into_iter().map(|(x, y)| (y, x)))
    }
}

/// `G`: every `(x, y)` with `dL(w,x) + dL(x,y) + dL(y,z) = dL(w,z)` for some
/// `(w, z) ∈ Γ′`.
pub fn build_g(space: &FiniteGeodesicSpace, gamma_prime: &[(Point, Point)]) -> Relation {
    let n = space.n();
    let tol = space.tol();
    let mut pairs = Vec::new();
    for &(w, z) in gamma_prime {
        let total = space.dl(w, z);
        let mut chain: Vec<Point> = (0..n).filter(|&p| space.between(w, p, z)).collect();
        chain.sort_by(|&a, &b| space.dl(w, a).total_cmp(&space.dl(w, b)).then(a.cmp(&b)));
        for (i, &x) in chain.iter().enumerate() {
            for &y in &chain[i..] {
                if (space.dl(w, x) + space.dl(x, y) + space.dl(y, z) - total).abs() <= tol {
                    pairs.push((x, y));
                }
            }
        }
    }
    Relation::from_pairs(n, pairs)
}

/// `(𝒯, 𝒯ₑ)`: points with a strict predecessor and a strict successor, and
/// points with at least one of them.
pub fn transport_sets(g: &Relation) -> (Vec<Point>, Vec<Point>) {
    let n = g.n();
    let mut has_succ = vec![false; n];
    let mut has_pred = vec![false; n];
    for (x, y) in g.pairs() {
        if x != y {
            has_succ[x] = true;
            has_pred[y] = true;
        }
    }
    let t = (0..n).filter(|&p| has_succ[p] && has_pred[p]).collect();
    let te = (0..n).filter(|&p| has_succ[p] || has_pred[p]).collect();
    (t, te)
}

/// Initial and final points `a(x)`, `b(x)` for `x ∈ 𝒯`.
pub fn endpoints(g: &Relation) -> Result<(BTreeMap<Point, Point>, BTreeMap<Point, Point>)> {
    let inv = g.inverse();
    let (t, _) = transport_sets(g);
    let strict = |rel: &Relation, p: Point| rel.successors(p).iter().any(|&q| q != p);
    let mut a = BTreeMap::new();
    let mut b = BTreeMap::new();
    for &x in &t {
        let initial: Vec<Point> = inv.successors(x).iter().copied().filter(|&p| p != x && !strict(&inv, p)).collect();
        let terminal: Vec<Point> = g.successors(x).iter().copied().filter(|&p| p != x && !strict(g, p)).collect();
        if initial.len() > 1 || terminal.len() > 1 {
            return Err(Error::BranchingDetected { point: x });
        }
        if let Some(&p) = initial.first() {
            a.insert(x, p);
        }
        if let Some(&p) = terminal.first() {
            b.insert(x, p);
        }
    }
    Ok((a, b))
}

/// First triple `(x, y, z)` in `set` with `x R y`, `y R z` but not `x R z`
/// (`R = G ∪ G⁻¹`), or a point of `set` not related to itself.
pub fn equivalence_witness(g: &Relation, set: &[Point]) -> Option<[Point; 3]> {
    let r = |x: Point, y: Point| g.contains(x, y) || g.contains(y, x);
    let n = g.n();
    let mut inside = vec![false; n];
    for &p in set {
        inside[p] = true;
    }
    let mut nbrs: Vec<Vec<Point>> = vec![Vec::new(); n];
    for (x, y) in g.pairs() {
        if inside[x] && inside[y] {
            nbrs[x].push(y);
            nbrs[y].push(x);
        }
    }
    for v in &mut nbrs {
        v.sort_unstable();
        v.dedup();
    }
    for &x in set {
        if !r(x, x) {
            return Some([x, x, x]);
        }
    }
    for &y in set {
        for &x in &nbrs[y] {
            for &z in &nbrs[y] {
                if !r(x, z) {
                    return Some([x, y, z]);
                }
            }
        }
    }
    None
}

/// Violations of the partial-order axioms of `G` on `set`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderAxioms {
    pub not_reflexive: Vec<Point>,
    pub not_transitive: Vec<[Point; 3]>,
    pub not_antisymmetric: Vec<[Point; 2]>,
}

impl OrderAxioms {
    pub fn ok(&self) -> bool {
        self.not_reflexive.is_empty() && self.not_transitive.is_empty() && self.not_antisymmetric.is_empty()
    }
}

/// Exhaustive check of reflexivity, transitivity and antisymmetry of `G`
/// restricted to `set`.
pub fn check_order_axioms(g: &Relation, set: &[Point]) -> OrderAxioms {
    let mut out = OrderAxioms::default();
    let mut inside = vec![false; g.n()];
    for &p in set {
        inside[p] = true;
    }
    for &x in set {
        if !g.contains(x, x) {
            out.not_reflexive.push(x);
        }
        for &y in g.successors(x) {
            if !inside[y] || y == x {
                continue;
            }
            if x < y && g.contains(y, x) {
                out.not_antisymmetric.push([x, y]);
            }
            for &z in g.successors(y) {
                if inside[z] && !g.contains(x, z) {
                    out.not_transitive.push([x, y, z]);
                }
            }
        }
    }
    out
}

/// One transport ray: points ordered along `G`, signed arclength from the
/// section representative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub points: Vec<Point>,
    pub params: Vec<f64>,
    pub representative: Point,
    /// Initial point `a`, when the ray has one.
    pub initial: Option<Point>,
    /// Final point `b`, when the ray has one.
    pub terminal: Option<Point>,
    /// A `G`-pair with no interior point: both ends lie in `𝒯ₑ \ 𝒯`.
    pub degenerate: bool,
}

impl Ray {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn position(&self, p: Point) -> Option<usize> {
        self.points.iter().position(|&q| q == p)
    }

    pub fn length(&self) -> f64 {
        match (self.params.first(), self.params.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Largest violation of `dL(g(s), g(t)) = |t − s|` over all param pairs.
    pub fn isometry_defect(&self, space: &FiniteGeodesicSpace) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                let e = space.dl(self.points[i], self.points[j]) - (self.params[j] - self.params[i]);
                worst = worst.max(e.abs());
            }
        }
        worst
    }
}

/// The ray decomposition of `𝒯`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaySystem {
    pub n: usize,
    pub tol: f64,
    pub t_points: Vec<Point>,
    pub te_points: Vec<Point>,
    pub a: BTreeMap<Point, Point>,
    pub b: BTreeMap<Point, Point>,
    /// Section representative of each ray, indexed like `rays`.
    pub section: Vec<Point>,
    /// `f`: ray index of each point of `𝒯`.
    pub quotient: BTreeMap<Point, usize>,
    pub rays: Vec<Ray>,
    /// Points of `𝒯ₑ` on no ray.
    pub unassigned: Vec<Point>,
}

impl RaySystem {
    pub fn empty(n: usize, tol: f64) -> Self {
        Self {
            n,
            tol,
            t_points: Vec::new(),
            te_points: Vec::new(),
            a: BTreeMap::new(),
            b: BTreeMap::new(),
            section: Vec::new(),
            quotient: BTreeMap::new(),
            rays: Vec::new(),
            unassigned: Vec::new(),
        }
    }

    pub fn in_t(&self, p: Point) -> bool {
        self.quotient.contains_key(&p)
    }

    /// Ray indices whose point list contains `p`.
    pub fn rays_through(&self, p: Point) -> Vec<usize> {
        (0..self.rays.len()).filter(|&r| self.rays[r].position(p).is_some()).collect()
    }

    /// The ray carrying the plan pair `(x, y)`; `None` for a diagonal pair
    /// off `𝒯`.
    pub fn ray_of_pair(&self, x: Point, y: Point) -> Result<Option<usize>> {
        let owner = self.quotient.get(&x).or_else(|| self.quotient.get(&y)).copied();
        if let Some(r) = owner {
            return if self.rays[r].position(x).is_some() && self.rays[r].position(y).is_some() {
                Ok(Some(r))
            } else {
                Err(Error::RayMismatch(x, y))
            };
        }
        if x == y {
            return Ok(None);
        }
        self.rays_through(x)
            .into_iter()
            .find(|&r| self.rays[r].position(y).is_some())
            .map(Some)
            .ok_or(Error::RayMismatch(x, y))
    }

    pub fn to_json(&self) -> Value {
        let rays: Vec<Value> = self
            .rays
            .iter()
            .map(|r| json!({ "points": r.points, "params": r.params, "degenerate": r.degenerate }))
            .collect();
        json!({
            "section": self.section,
            "rays": rays,
            "a": self.a,
            "b": self.b,
            "t_points": self.t_points,
            "te_points": self.te_points,
        })
    }
}

/// Partitions `𝒯` into `R`-classes and builds the ray map. `G`-pairs with no
/// interior point become two-point degenerate rays so that every plan pair
/// lies on some ray.
pub fn build_ray_system(space: &FiniteGeodesicSpace, g: &Relation) -> Result<RaySystem> {
    let n = space.n();
    let (t, te) = transport_sets(g);
    let (a, b) = endpoints(g)?;
    if let Some(w) = equivalence_witness(g, &t) {
        return Err(Error::EquivalenceFailure(w));
    }
    let mut rs = RaySystem::empty(n, space.tol());
    let mut in_t = vec![false; n];
    for &p in &t {
        in_t[p] = true;
    }
    // Classes: transitivity has been checked, so the class of `x` is its R-row.
    let mut class_of = vec![usize::MAX; n];
    let inv = g.inverse();
    for &x in &t {
        if class_of[x] != usize::MAX {
            continue;
        }
        let id = rs.rays.len();
        let mut members: Vec<Point> = g
            .successors(x)
            .iter()
            .chain(inv.successors(x))
            .copied()
            .filter(|&p| in_t[p])
            .collect();
        members.sort_unstable();
        members.dedup();
        for &p in &members {
            class_of[p] = id;
        }
        let rep = members[0];
        let mut pts = members.clone();
        let initial = a.get(&rep).copied();
        let terminal = b.get(&rep).copied();
        pts.extend(initial);
        pts.extend(terminal);
        rs.rays.push(orient(space, g, pts, rep, initial, terminal, false)?);
    }
    for (x, &r) in t.iter().map(|&x| (x, &class_of[x])) {
        rs.quotient.insert(x, r);
    }

    let mut covered = vec![false; n];
    for r in &rs.rays {
        for &p in &r.points {
            covered[p] = true;
        }
    }
    for (x, y) in g.pairs() {
        if x == y || in_t[x] || in_t[y] {
            continue;
        }
        let shared = rs.rays.iter().any(|r| r.position(x).is_some() && r.position(y).is_some());
        if !shared {
            let rep = x.min(y);
            rs.rays.push(orient(space, g, vec![x, y], rep, Some(x), Some(y), true)?);
            covered[x] = true;
            covered[y] = true;
        }
    }
    rs.section = rs.rays.iter().map(|r| r.representative).collect();
    rs.unassigned = te.iter().copied().filter(|&p| !covered[p]).collect();
    rs.t_points = t;
    rs.te_points = te;
    rs.a = a;
    rs.b = b;
    Ok(rs)
}

fn orient(
    space: &FiniteGeodesicSpace,
    g: &Relation,
    mut pts: Vec<Point>,
    rep: Point,
    initial: Option<Point>,
    terminal: Option<Point>,
    degenerate: bool,
) -> Result<Ray> {
    pts.sort_unstable();
    pts.dedup();
    let param = |p: Point| {
        if g.contains(rep, p) {
            space.dl(rep, p)
        } else {
            -space.dl(rep, p)
        }
    };
    let mut keyed: Vec<(f64, Point)> = pts.iter().map(|&p| (param(p), p)).collect();
    keyed.sort_by(|u, v| u.0.total_cmp(&v.0).then(u.1.cmp(&v.1)));
    let ray = Ray {
        points: keyed.iter().map(|k| k.1).collect(),
        params: keyed.iter().map(|k| k.0).collect(),
        representative: rep,
        initial,
        terminal,
        degenerate,
    };
    for (i, w) in ray.points.windows(2).enumerate() {
        let ordered = g.contains(w[0], w[1]);
        let gap = ray.params[i + 1] - ray.params[i];
        if !ordered || gap <= 0.0 {
            return Err(Error::EquivalenceFailure([rep, w[0], w[1]]));
        }
    }
    if ray.isometry_defect(space) > space.tol() * ray.len().max(1) as f64 {
        let (p, q) = (ray.points[0], *ray.points.last().unwrap());
        return Err(Error::EquivalenceFailure([p, rep, q]));
    }
    Ok(ray)
}

/// All intermediate structures of the ray construction.
#[derive(Debug, Clone)]
pub struct RayConstruction {
    pub gamma_prime: Vec<(Point, Point)>,
    pub g: Relation,
    pub system: RaySystem,
}

/// `Γ → Γ′ → G → rays` for the support of `plan`.
pub fn rays_from_plan(space: &FiniteGeodesicSpace, plan: &TransportPlan) -> Result<RayConstruction> {
    let gamma_prime = close_cycles(space, &plan.support())?;
    let g = build_g(space, &gamma_prime);
    let system = build_ray_system(space, &g)?;
    Ok(RayConstruction { gamma_prime, g, system })
}

/// Exhaustive consistency checks of a ray construction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureAudit {
    /// Support pairs missing from `Γ′`.
    pub support_outside_gamma_prime: Vec<(Point, Point)>,
    /// `Γ′` pairs missing from `G`.
    pub gamma_prime_outside_g: Vec<(Point, Point)>,
    /// `None` when `Γ′` was too large to close again.
    pub idempotent: Option<bool>,
    pub order: OrderAxioms,
    pub equivalence: Option<[Point; 3]>,
    /// `None` when `Γ′` was too large for the all-lengths test.
    pub closure_monotone: Option<bool>,
}

impl StructureAudit {
    pub fn violations(&self) -> usize {
        self.support_outside_gamma_prime.len()
            + self.gamma_prime_outside_g.len()
            + usize::from(self.idempotent == Some(false))
            + self.order.not_reflexive.len()
            + self.order.not_transitive.len()
            + self.order.not_antisymmetric.len()
            + usize::from(self.equivalence.is_some())
            + usize::from(self.closure_monotone == Some(false))
    }
}

/// `Γ ⊆ Γ′ ⊆ G`, `Γ′` closed, `G` a partial order on `𝒯ₑ`, `R` an
/// equivalence on `𝒯`, and `Γ′` still cyclically monotone. The cubic checks
/// on `Γ′` run only when `|Γ′| <= limit`.
pub fn audit_construction(space: &FiniteGeodesicSpace, plan: &TransportPlan, rc: &RayConstruction, limit: usize) -> Result<StructureAudit> {
    let gp = &rc.gamma_prime;
    let mut out = StructureAudit {
        support_outside_gamma_prime: plan.support().into_iter().filter(|p| gp.binary_search(p).is_err()).collect(),
        gamma_prime_outside_g: gp.iter().copied().filter(|&(x, y)| !rc.g.contains(x, y)).collect(),
        order: check_order_axioms(&rc.g, &rc.system.te_points),
        equivalence: equivalence_witness(&rc.g, &rc.system.t_points),
        ..Default::default()
    };
    if gp.len() <= limit {
        out.idempotent = Some(close_cycles(space, gp)? == *gp);
        let w = exchange_weights(space, gp);
        out.closure_monotone = Some(!has_negative_cycle(&w, gp.len(), space.tol()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::build_segment;
    use approx::assert_abs_diff_eq;

    fn diag(n: usize) -> Vec<(Point, Point)> {
        (0..n).map(|i| (i, i)).collect()
    }

    #[test]
    fn singleton_and_diagonal_closures() {
        let s = build_segment(5, 1.0).unwrap();
        assert_eq!(close_cycles(&s, &[(1, 3)]).unwrap(), vec![(1, 3)]);
        assert_eq!(close_cycles(&s, &diag(5)).unwrap(), diag(5));
    }

    #[test]
    fn overlapping_translations_add_crossed_pairs() {
        let s = build_segment(6, 5.0).unwrap();
        let gp = close_cycles(&s, &[(0, 3), (1, 4)]).unwrap();
        // dL(1,3) + dL(0,4) = 2 + 4 = dL(0,3) + dL(1,4).
        assert_eq!(gp, vec![(0, 3), (0, 4), (1, 3), (1, 4)]);
        assert_eq!(close_cycles(&s, &gp).unwrap(), gp);
    }

    #[test]
    fn closure_rejects_swaps() {
        let s = build_segment(3, 1.0).unwrap();
        let e = close_cycles(&s, &[(0, 2), (2, 0)]).unwrap_err();
        assert_eq!(e.code(), "NONMONOTONE_INPUT");
    }

    #[test]
    fn g_of_full_segment() {
        let s = build_segment(5, 1.0).unwrap();
        let g = build_g(&s, &[(0, 4)]);
        assert_eq!(g.len(), 15);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(g.contains(i, j), i <= j);
            }
        }
        let (t, te) = transport_sets(&g);
        assert_eq!(t, vec![1, 2, 3]);
        assert_eq!(te, vec![0, 1, 2, 3, 4]);
        let (a, b) = endpoints(&g).unwrap();
        assert_eq!((a[&2], b[&2]), (0, 4));
    }

    #[test]
    fn diagonal_g_is_empty_structure() {
        let s = build_segment(4, 1.0).unwrap();
        let g = build_g(&s, &diag(4));
        assert_eq!(g.pairs(), diag(4));
        let (t, te) = transport_sets(&g);
        assert!(t.is_empty() && te.is_empty());
        let rs = build_ray_system(&s, &g).unwrap();
        assert!(rs.rays.is_empty());
    }

    #[test]
    fn single_pair_without_interior() {
        let s = build_segment(2, 1.0).unwrap();
        let g = build_g(&s, &[(0, 1)]);
        let (a, _) = endpoints(&g).unwrap();
        assert!(a.is_empty());
        let rs = build_ray_system(&s, &g).unwrap();
        assert_eq!(rs.rays.len(), 1);
        assert!(rs.rays[0].degenerate);
        assert_eq!(rs.ray_of_pair(0, 1).unwrap(), Some(0));
    }

    #[test]
    fn closed_loop_has_no_endpoints() {
        // Discrete circle of 4 points, G = everything: every point is interior.
        let n = 4;
        let g = Relation::from_pairs(n, (0..n).flat_map(|x| (0..n).map(move |y| (x, y))));
        let (a, b) = endpoints(&g).unwrap();
        assert!(a.is_empty() && b.is_empty());
    }

    #[test]
    fn five_point_ray_params() {
        let s = build_segment(5, 1.0).unwrap();
        let g = build_g(&s, &[(0, 4)]);
        let rs = build_ray_system(&s, &g).unwrap();
        assert_eq!(rs.rays.len(), 1);
        let r = &rs.rays[0];
        assert_eq!(r.representative, 1);
        assert_eq!(r.points, vec![0, 1, 2, 3, 4]);
        let expected = [-0.25, 0.0, 0.25, 0.5, 0.75];
        for (p, e) in r.params.iter().zip(expected) {
            assert_abs_diff_eq!(*p, e, epsilon = 1e-12);
        }
        assert_eq!((r.initial, r.terminal), (Some(0), Some(4)));
    }

    #[test]
    fn converging_rays_share_an_endpoint() {
        let s = build_segment(5, 4.0).unwrap();
        let g = build_g(&s, &[(0, 2), (4, 2)]);
        let rs = build_ray_system(&s, &g).unwrap();
        assert_eq!(rs.section, vec![1, 3]);
        assert_eq!(rs.rays[1].points, vec![4, 3, 2]);
        assert_eq!(rs.rays_through(2), vec![0, 1]);
        assert!(check_order_axioms(&g, &rs.te_points).ok());
    }

    #[test]
    fn branching_tree_is_detected() {
        // Star: centre 0, leaves 1, 2, 3; leaves 1 and 2 both send to 3.
        let s = FiniteGeodesicSpace::from_tree(&[None, Some(0), Some(0), Some(0)], &[0.0, 1.0, 1.0, 1.0], 1e-9).unwrap();
        let plan = TransportPlan::from_entries(4, &[(1, 3, 0.5), (2, 3, 0.5)]).unwrap();
        let e = rays_from_plan(&s, &plan).unwrap_err();
        assert_eq!(e.code(), "BRANCHING_DETECTED");
    }

    #[test]
    fn rays_json_shape() {
        let s = build_segment(5, 1.0).unwrap();
        let g = build_g(&s, &[(0, 4)]);
        let rs = build_ray_system(&s, &g).unwrap();
        let v = rs.to_json();
        assert_eq!(v["section"], json!([1]));
        assert_eq!(v["a"]["2"], json!(0));
        assert_eq!(v["rays"][0]["points"], json!([0, 1, 2, 3, 4]));
    }
}
