//! Exact optimal couplings on desk-scale instances, cyclical-monotonicity
//! certificates and Kantorovich potentials.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::par;
use crate::space::{FiniteGeodesicSpace, Point, INFINITY};

/// Totals of `mu` and `nu` must agree to this relative precision.
pub const MASS_TOL: f64 = 1e-9;

/// Above this support size the all-lengths cycle certificate is skipped.
pub const FULL_CERTIFICATE_LIMIT: usize = 400;

pub const DEFAULT_MAX_CYCLE: usize = 4;

/// A coupling stored as sorted `(source, target, mass)` triples with positive
/// mass, together with its two marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    entries: Vec<(Point, Point, f64)>,
    left: DiscreteMeasure,
    right: DiscreteMeasure,
    cost: Option<f64>,
}

impl TransportPlan {
    /// Merges repeated pairs and drops zero-mass entries.
    pub fn from_entries(n: usize, entries: &[(Point, Point, f64)]) -> Result<Self> {
        let mut v: Vec<(Point, Point, f64)> = Vec::with_capacity(entries.len());
        for &(x, y, m) in entries {
            if x >= n || y >= n {
                return Err(Error::InvalidInput(format!("plan entry ({x}, {y}) out of range for n = {n}")));
            }
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::InvalidInput(format!("plan entry ({x}, {y}) has mass {m}")));
            }
            if m > 0.0 {
                v.push((x, y, m));
            }
        }
        v.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(Point, Point, f64)> = Vec::with_capacity(v.len());
        for e in v {
            match merged.last_mut() {
                Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
                _ => merged.push(e),
            }
        }
        let mut left = vec![0.0; n];
        let mut right = vec![0.0; n];
        for &(x, y, m) in &merged {
            left[x] += m;
            right[y] += m;
        }
        Ok(Self {
            entries: merged,
            left: DiscreteMeasure::new(left)?,
            right: DiscreteMeasure::new(right)?,
            cost: None,
        })
    }

    /// `(I, T)♯ μ` for a map given on the support of `mu`.
    pub fn from_map(mu: &DiscreteMeasure, map: impl Fn(Point) -> Point) -> Result<Self> {
        let entries: Vec<_> = mu.atoms().into_iter().map(|(x, m)| (x, map(x), m)).collect();
        Self::from_entries(mu.n(), &entries)
    }

    pub fn identity(mu: &DiscreteMeasure) -> Self {
        Self::from_map(mu, |x| x).expect("identity plan of a valid measure")
    }

    pub fn entries(&self) -> &[(Point, Point, f64)] {
        &self.entries
    }

    pub fn left(&self) -> &DiscreteMeasure {
        &self.left
    }

    pub fn right(&self) -> &DiscreteMeasure {
        &self.right
    }

    pub fn n(&self) -> usize {
        self.left.n()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support(&self) -> Vec<(Point, Point)> {
        self.entries.iter().map(|&(x, y, _)| (x, y)).collect()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    pub fn cached_cost(&self) -> Option<f64> {
        self.cost
    }

    /// `Σ dL(x, y) · mass`, caching the value.
    pub fn cost(&mut self, space: &FiniteGeodesicSpace) -> f64 {
        let c = plan_cost(space, &self.entries);
        self.cost = Some(c);
        c
    }

    pub fn with_cost(mut self, space: &FiniteGeodesicSpace) -> Self {
        self.cost(space);
        self
    }

    /// Largest absolute deviation between the stored marginals and the
    /// given measures.
    pub fn marginal_defect(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let dl = self.left.weights().iter().zip(mu.weights()).map(|(a, b)| (a - b).abs());
        let dr = self.right.weights().iter().zip(nu.weights()).map(|(a, b)| (a - b).abs());
        dl.chain(dr).fold(0.0, f64::max)
    }

    /// Mass carried by pairs `(x, x)`.
    pub fn diagonal_mass(&self) -> DiscreteMeasure {
        let mut w = vec![0.0; self.n()];
        for &(x, y, m) in &self.entries {
            if x == y {
                w[x] += m;
            }
        }
        DiscreteMeasure::new(w).expect("nonnegative")
    }

    /// Relabels by `perm`: old point `p` becomes `perm[p]`.
    pub fn permuted(&self, perm: &[Point]) -> Result<Self> {
        let e: Vec<_> = self.entries.iter().map(|&(x, y, m)| (perm[x], perm[y], m)).collect();
        let mut p = Self::from_entries(self.n(), &e)?;
        p.cost = self.cost;
        Ok(p)
    }

    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self.entries.iter().map(|&(x, y, m)| json!([x, y, m])).collect();
        json!({ "entries": entries, "cost": self.cost })
    }

    pub fn from_json(v: &Value, n: usize) -> Result<Self> {
        let arr = v
            .get("entries")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Format("plan needs an `entries` array".into()))?;
        let mut entries = Vec::with_capacity(arr.len());
        for e in arr {
            let t = e.as_array().filter(|t| t.len() == 3);
            let parsed = t.and_then(|t| Some((t[0].as_u64()? as Point, t[1].as_u64()? as Point, t[2].as_f64()?)));
            entries.push(parsed.ok_or_else(|| Error::Format(format!("bad plan entry {e}")))?);
        }
        let mut p = Self::from_entries(n, &entries)?;
        p.cost = v.get("cost").and_then(Value::as_f64);
        Ok(p)
    }
}

pub fn plan_cost(space: &FiniteGeodesicSpace, entries: &[(Point, Point, f64)]) -> f64 {
    entries.iter().map(|&(x, y, m)| space.dl(x, y) * m).sum()
}

pub(crate) fn check_totals(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    let (a, b) = (mu.total(), nu.total());
    if (a - b).abs() > MASS_TOL * a.max(b).max(1.0) {
        return Err(Error::InfeasibleMass { mu: a, nu: b });
    }
    Ok(())
}

/// An optimal coupling by successive shortest paths on the bipartite graph of
/// finite-cost pairs.
///
/// Sources are processed in index order and ties in Dijkstra are broken by
/// node index, so the output is a deterministic function of the input.
pub fn solve_kantorovich(space: &FiniteGeodesicSpace, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportPlan> {
    check_totals(mu, nu)?;
    if mu.n() != space.n() || nu.n() != space.n() {
        return Err(Error::InvalidInput("measure size differs from space size".into()));
    }
    let src = mu.atoms();
    let snk = nu.atoms();
    let (m, k) = (src.len(), snk.len());
    let total = mu.total().max(nu.total());
    // Below this, residual supply is rounding noise.
    let eps = 1e-13 * total.max(1.0);

    let cost: Vec<f64> = (0..m * k).map(|e| space.dl(src[e / k].0, snk[e % k].0)).collect();
    let mut flow = vec![0.0; m * k];
    let mut supply: Vec<f64> = src.iter().map(|a| a.1).collect();
    let mut demand: Vec<f64> = snk.iter().map(|a| a.1).collect();
    // Nodes 0..m are sources, m..m+k sinks.
    let mut pot = vec![0.0; m + k];

    loop {
        let remaining: f64 = supply.iter().sum();
        if remaining <= eps || demand.iter().all(|&d| d <= eps) {
            break;
        }
        let top = (0..m).filter(|&i| supply[i] > eps).map(|i| pot[i]).fold(f64::NEG_INFINITY, f64::max);
        let mut dist = vec![INFINITY; m + k];
        let mut prev = vec![usize::MAX; m + k];
        let mut done = vec![false; m + k];
        for i in 0..m {
            if supply[i] > eps {
                dist[i] = top - pot[i];
            }
        }
        loop {
            let mut u = usize::MAX;
            for v in 0..m + k {
                if !done[v] && dist[v] < INFINITY && (u == usize::MAX || dist[v] < dist[u]) {
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < m {
                for j in 0..k {
                    let c = cost[u * k + j];
                    if c.is_finite() {
                        let nd = dist[u] + (c + pot[u] - pot[m + j]).max(0.0);
                        if nd < dist[m + j] {
                            dist[m + j] = nd;
                            prev[m + j] = u;
                        }
                    }
                }
            } else {
                let j = u - m;
                for i in 0..m {
                    if flow[i * k + j] > eps {
                        let nd = dist[u] + (-cost[i * k + j] + pot[u] - pot[i]).max(0.0);
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        let target = (0..k)
            .filter(|&j| demand[j] > eps && dist[m + j] < INFINITY)
            .min_by(|&a, &b| dist[m + a].total_cmp(&dist[m + b]).then(a.cmp(&b)));
        let Some(j) = target else {
            return Err(Error::NoFiniteCoupling);
        };
        let dt = dist[m + j];
        for v in 0..m + k {
            pot[v] += dist[v].min(dt);
        }
        // Walk back to a source, collecting the bottleneck.
        let mut amount = demand[j];
        let mut v = m + j;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= m {
                amount = amount.min(flow[v * k + (u - m)]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        supply[v] -= amount;
        demand[j] -= amount;
        let mut v = m + j;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < m {
                flow[u * k + (v - m)] += amount;
            } else {
                let e = v * k + (u - m);
                flow[e] -= amount;
                if flow[e] <= eps {
                    flow[e] = 0.0;
                }
            }
            v = u;
        }
    }

    let entries: Vec<_> = (0..m * k)
        .filter(|&e| flow[e] > eps)
        .map(|e| (src[e / k].0, snk[e % k].0, flow[e]))
        .collect();
    Ok(TransportPlan::from_entries(space.n(), &entries)?.with_cost(space))
}

/// Every vertex of the transport polytope `Π(mu, nu)`, found by enumerating
/// spanning trees of the bipartite support graph. Refuses instances with more
/// than `limit` candidate bases.
pub fn vertex_couplings(mu: &DiscreteMeasure, nu: &DiscreteMeasure, limit: u64) -> Result<Vec<TransportPlan>> {
    check_totals(mu, nu)?;
    let src = mu.atoms();
    let snk = nu.atoms();
    let (m, k) = (src.len(), snk.len());
    let cells = m * k;
    let size = m + k - 1;
    if binomial(cells as u64, size as u64) > limit {
        return Err(Error::InvalidInput(format!("{cells} cells choose {size} exceeds the enumeration limit")));
    }
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut chosen = Vec::with_capacity(size);
    let mut visit = |basis: &[usize]| {
        if let Some(sol) = basis_solution(basis, &src, &snk) {
            let key_eq = |a: &Vec<f64>| a.iter().zip(&sol).all(|(x, y)| (x - y).abs() <= 1e-12);
            if !found.iter().any(key_eq) {
                found.push(sol);
            }
        }
    };
    combinations(cells, size, 0, &mut chosen, &mut visit);
    found.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b) {
            let o = y.total_cmp(x);
            if o.is_ne() {
                return o;
            }
        }
        std::cmp::Ordering::Equal
    });
    found
        .into_iter()
        .map(|sol| {
            let e: Vec<_> = (0..cells).map(|c| (src[c / k].0, snk[c % k].0, sol[c])).collect();
            TransportPlan::from_entries(mu.n(), &e)
        })
        .collect()
}

fn binomial(n: u64, r: u64) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u64 = 1;
    for i in 0..r {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn combinations(n: usize, r: usize, start: usize, chosen: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if chosen.len() == r {
        visit(chosen);
        return;
    }
    for c in start..n {
        if n - c < r - chosen.len() {
            break;
        }
        chosen.push(c);
        combinations(n, r, c + 1, chosen, visit);
        chosen.pop();
    }
}

/// Solves the marginal equations on a candidate basis by peeling leaves.
/// `None` if the cells do not form a spanning tree or the solution is
/// negative.
fn basis_solution(basis: &[usize], src: &[(Point, f64)], snk: &[(Point, f64)]) -> Option<Vec<f64>> {
    let (m, k) = (src.len(), snk.len());
    let mut row: Vec<f64> = src.iter().map(|a| a.1).collect();
    let mut col: Vec<f64> = snk.iter().map(|a| a.1).collect();
    let mut live: Vec<usize> = basis.to_vec();
    let mut sol = vec![0.0; m * k];
    while !live.is_empty() {
        let mut deg = vec![0usize; m + k];
        for &c in &live {
            deg[c / k] += 1;
            deg[m + c % k] += 1;
        }
        let pick = live.iter().position(|&c| deg[c / k] == 1 || deg[m + c % k] == 1)?;
        let c = live.swap_remove(pick);
        let (i, j) = (c / k, c % k);
        let v = if deg[i] == 1 { row[i] } else { col[j] };
        if v < -1e-12 {
            return None;
        }
        let v = v.max(0.0);
        sol[c] = v;
        row[i] -= v;
        col[j] -= v;
    }
    let slack = row.iter().chain(&col).fold(0.0f64, |a, b| a.max(b.abs()));
    (slack <= 1e-9).then_some(sol)
}

/// Outcome of [`certify_monotone`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCertificate {
    pub max_cycle: usize,
    /// No cycle of length `<= max_cycle` lowers the cost by more than tol.
    pub bounded_pass: bool,
    /// First violating cycle (indices into the sorted support) and the
    /// amount by which it lowers the cost.
    pub violation: Option<(Vec<(Point, Point)>, f64)>,
    /// Result of the all-lengths negative-cycle test on the pair graph, when
    /// the support is small enough to run it.
    pub all_lengths_pass: Option<bool>,
    /// A cost-lowering cycle of any length found by the all-lengths test, and
    /// the amount it lowers the cost by.
    pub long_cycle: Option<(Vec<(Point, Point)>, f64)>,
    /// All-lengths monotone and `d = dL`: the plan is optimal.
    pub optimality_certified: bool,
}

impl MonotoneCertificate {
    pub fn passed(&self) -> bool {
        self.bounded_pass && self.all_lengths_pass != Some(false)
    }
}

/// Weights of the exchange graph on support pairs: `w[a][b]` is the change
/// in cost when the source of pair `b` is sent to the target of pair `a`,
/// `dL(x_b, y_a) − dL(x_a, y_a)`. A cycle lowers the cost iff its weight is
/// negative.
pub(crate) fn exchange_weights(space: &FiniteGeodesicSpace, pairs: &[(Point, Point)]) -> Vec<f64> {
    let s = pairs.len();
    let mut w = vec![0.0; s * s];
    par::fill_rows(&mut w, s, |a, row| {
        let (xa, ya) = pairs[a];
        let base = space.dl(xa, ya);
        for (b, slot) in row.iter_mut().enumerate() {
            *slot = space.dl(pairs[b].0, ya) - base;
        }
    });
    w
}

/// Exhaustive check of every cycle of at most `max_cycle` distinct support
/// pairs, plus the polynomial all-lengths test when the support is small.
pub fn certify_monotone(space: &FiniteGeodesicSpace, plan: &TransportPlan, max_cycle: usize) -> Result<MonotoneCertificate> {
    if plan.is_empty() {
        return Err(Error::InvalidInput("empty plan".into()));
    }
    if max_cycle < 2 {
        return Err(Error::InvalidInput(format!("max_cycle must be >= 2, got {max_cycle}")));
    }
    let pairs = plan.support();
    let w = exchange_weights(space, &pairs);
    let tol = space.tol();
    let violation = bounded_cycle_violation(&w, pairs.len(), max_cycle, tol)
        .map(|(cyc, defect)| (cyc.into_iter().map(|a| pairs[a]).collect(), defect));
    let long = (pairs.len() <= FULL_CERTIFICATE_LIMIT).then(|| negative_cycle(&w, pairs.len(), tol));
    let all = long.as_ref().map(Option::is_none);
    let long_cycle = long
        .flatten()
        .map(|(cyc, weight)| (cyc.into_iter().map(|a| pairs[a]).collect(), -weight));
    Ok(MonotoneCertificate {
        max_cycle,
        bounded_pass: violation.is_none(),
        violation,
        all_lengths_pass: all,
        long_cycle,
        optimality_certified: all == Some(true) && space.d_equals_dl(),
    })
}

/// Lexicographically first (by length, then by index sequence with the
/// smallest index leading) cycle of weight `< -tol`.
pub(crate) fn bounded_cycle_violation(w: &[f64], s: usize, max_cycle: usize, tol: f64) -> Option<(Vec<usize>, f64)> {
    for len in 2..=max_cycle.min(s) {
        let hit = par::find_first(s, |first| {
            let mut path = vec![first];
            let mut used = vec![false; s];
            used[first] = true;
            search_cycles(w, s, len, tol, &mut path, &mut used, 0.0)
        });
        if hit.is_some() {
            return hit;
        }
    }
    None
}

fn search_cycles(
    w: &[f64],
    s: usize,
    len: usize,
    tol: f64,
    path: &mut Vec<usize>,
    used: &mut [bool],
    acc: f64,
) -> Option<(Vec<usize>, f64)> {
    let last = *path.last().unwrap();
    if path.len() == len {
        let total = acc + w[last * s + path[0]];
        return (total < -tol).then(|| (path.clone(), -total));
    }
    for next in path[0] + 1..s {
        if used[next] {
            continue;
        }
        let step = w[last * s + next];
        if !step.is_finite() {
            continue;
        }
        used[next] = true;
        path.push(next);
        let r = search_cycles(w, s, len, tol, path, used, acc + step);
        path.pop();
        used[next] = false;
        if r.is_some() {
            return r;
        }
    }
    None
}

/// All-pairs shortest paths of a dense weight matrix whose cycles are
/// nonnegative up to `tol`.
///
/// Plain Floyd–Warshall compounds rounding on the many zero-weight cycles of
/// a monotone support exponentially in `s`. Instead a Bellman–Ford potential
/// `p` reweights the matrix to `w + p[a] − p[b] ≥ −tol/s`, the slack is
/// clamped to zero, and Floyd–Warshall runs on nonnegative weights, where
/// errors only add up. A cycle below `−tol` is returned as the error.
pub(crate) fn shortest_paths(w: &[f64], s: usize, tol: f64) -> std::result::Result<Vec<f64>, (Vec<usize>, f64)> {
    let (p, clamp) = match bellman_ford(w, s, tol / (s.max(1) as f64)) {
        Ok(p) => (p, true),
        Err(cycle) => {
            let weight = cycle_weight(w, s, &cycle);
            if weight < -tol {
                return Err((cycle, weight));
            }
            // Relaxation kept cycling on a tolerance-sized loop; the plain
            // closure is accurate enough there.
            (vec![0.0; s], false)
        }
    };
    let mut dist = vec![0.0; s * s];
    for a in 0..s {
        for b in 0..s {
            let r = w[a * s + b] + p[a] - p[b];
            dist[a * s + b] = match (a == b, clamp) {
                (true, _) => 0.0,
                (false, true) => r.max(0.0),
                (false, false) => r,
            };
        }
    }
    floyd_warshall(&mut dist, s);
    for a in 0..s {
        for b in 0..s {
            if dist[a * s + b].is_finite() {
                dist[a * s + b] += p[b] - p[a];
            }
        }
    }
    Ok(dist)
}

/// A cycle of weight `< −tol` in the dense graph `w`, with its weight.
pub(crate) fn negative_cycle(w: &[f64], s: usize, tol: f64) -> Option<(Vec<usize>, f64)> {
    shortest_paths(w, s, tol).err()
}

pub(crate) fn cycle_weight(w: &[f64], s: usize, cycle: &[usize]) -> f64 {
    (0..cycle.len()).map(|i| w[cycle[i] * s + cycle[(i + 1) % cycle.len()]]).sum()
}

/// Potentials from a virtual source joined to every node with weight 0;
/// improvements smaller than `eps` are ignored. If relaxation has not
/// settled after `s + 1` rounds, the cycle of the predecessor graph is
/// returned in forward order.
fn bellman_ford(w: &[f64], s: usize, eps: f64) -> std::result::Result<Vec<f64>, Vec<usize>> {
    let mut p = vec![0.0; s];
    let mut pred = vec![usize::MAX; s];
    let mut last = 0;
    for _ in 0..=s {
        let mut changed = false;
        for a in 0..s {
            for b in 0..s {
                let c = p[a] + w[a * s + b];
                if c < p[b] - eps {
                    p[b] = c;
                    pred[b] = a;
                    last = b;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(p);
        }
    }
    let mut v = last;
    for _ in 0..s {
        v = pred[v];
    }
    let mut cycle = vec![v];
    let mut u = pred[v];
    while u != v {
        cycle.push(u);
        u = pred[u];
    }
    cycle.reverse();
    Err(cycle)
}

fn floyd_warshall(dist: &mut [f64], s: usize) {
    for k in 0..s {
        for i in 0..s {
            let dik = dist[i * s + k];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..s {
                let c = dik + dist[k * s + j];
                if c < dist[i * s + j] {
                    dist[i * s + j] = c;
                }
            }
        }
    }
}

/// Negative-cycle test on a dense weight matrix.
pub(crate) fn has_negative_cycle(w: &[f64], s: usize, tol: f64) -> bool {
    negative_cycle(w, s, tol).is_some()
}

/// Potentials on the points of the space. `psi = -phi` on the component where
/// `phi` is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPair {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl PotentialPair {
    /// `J(φ, ψ) = Σ φ dμ + Σ ψ dν`, skipping points where a potential is
    /// infinite and the measure vanishes.
    pub fn dual_value(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let a: f64 = mu.atoms().iter().map(|&(x, m)| self.phi[x] * m).sum();
        let b: f64 = nu.atoms().iter().map(|&(y, m)| self.psi[y] * m).sum();
        a + b
    }

    /// Largest excess `φ(x) + ψ(y) − dL(x, y)` over finite pairs where both
    /// potentials are finite; nonpositive for an admissible pair.
    pub fn constraint_excess(&self, space: &FiniteGeodesicSpace) -> f64 {
        let n = space.n();
        let mut worst = f64::NEG_INFINITY;
        for x in 0..n {
            for y in 0..n {
                if self.phi[x].is_finite() && self.psi[y].is_finite() && space.is_finite(x, y) {
                    worst = worst.max(self.phi[x] + self.psi[y] - space.dl(x, y));
                }
            }
        }
        worst
    }
}

/// The potential of the Rockafellar construction rooted at `base`:
///
/// `φ(x) = inf Σ_{i=0}^{I} dL(x_{i+1}, y_i) − dL(x_i, y_i)`
///
/// over chains of support pairs starting at `(base, base)` with
/// `x_{I+1} = x`. The diagonal pair keeps the support monotone for a
/// distance cost, so `base` need not be a source. Points not reachable from
/// `base` by finite `dL` get `φ = +∞`, `ψ = −∞`.
pub fn compute_potential(space: &FiniteGeodesicSpace, plan: &TransportPlan, base: Point) -> Result<PotentialPair> {
    let n = space.n();
    if base >= n {
        return Err(Error::InvalidInput(format!("base point {base} out of range")));
    }
    let mut pairs = vec![(base, base)];
    pairs.extend(plan.support().into_iter().filter(|&(x, _)| space.is_finite(base, x)));
    let s = pairs.len();
    let w = exchange_weights(space, &pairs);
    let tol = space.tol();

    // Bellman–Ford from the base pair.
    let mut val = vec![INFINITY; s];
    val[0] = 0.0;
    for round in 0..=s {
        let mut changed = false;
        for a in 0..s {
            if !val[a].is_finite() {
                continue;
            }
            for b in 0..s {
                let c = val[a] + w[a * s + b];
                if c < val[b] - tol {
                    val[b] = c;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        if round == s {
            return Err(Error::NegativeCycle);
        }
    }
    if val[0] < 0.0 {
        return Err(Error::NegativeCycle);
    }

    let mut phi = vec![INFINITY; n];
    let mut psi = vec![f64::NEG_INFINITY; n];
    for x in 0..n {
        if !space.is_finite(base, x) {
            continue;
        }
        let mut best = INFINITY;
        for (a, &(xa, ya)) in pairs.iter().enumerate() {
            best = best.min(val[a] + space.dl(x, ya) - space.dl(xa, ya));
        }
        phi[x] = best;
        psi[x] = -best;
    }
    Ok(PotentialPair { phi, psi })
}

/// One potential per finite component that meets the support, rooted at the
/// component's smallest source point. Components the plan does not touch get
/// `φ = 0`.
pub fn kantorovich_potentials(space: &FiniteGeodesicSpace, plan: &TransportPlan) -> Result<PotentialPair> {
    let n = space.n();
    let mut phi = vec![0.0; n];
    let mut psi = vec![0.0; n];
    for comp in crate::space::finite_components(space) {
        let Some(base) = plan.entries().iter().map(|e| e.0).filter(|x| comp.binary_search(x).is_ok()).min() else {
            continue;
        };
        let p = compute_potential(space, plan, base)?;
        for &x in &comp {
            phi[x] = p.phi[x];
            psi[x] = p.psi[x];
        }
    }
    Ok(PotentialPair { phi, psi })
}
