//! Finite geodesic spaces: a point set carrying an ambient distance `d` and a
//! (possibly infinite) geodesic cost distance `dL`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::par;

pub mod counterexample;

pub use counterexample::{build_counterexample, build_counterexample_space, Counterexample, CounterexampleConfig};

/// Index of a point in a [`FiniteGeodesicSpace`].
pub type Point = usize;

/// Sentinel for "not connected by any path of finite length". Arithmetic on it
/// is absorbing: `INFINITY + x == INFINITY`.
pub const INFINITY: f64 = f64::INFINITY;

pub const DEFAULT_TOL: f64 = 1e-9;

/// Above this many points `validate_structure` skips the cubic checks.
pub const EXHAUSTIVE_LIMIT: usize = 600;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGeodesicSpace {
    n: usize,
    labels: Option<Vec<Vec<f64>>>,
    d: Vec<f64>,
    dl: Vec<f64>,
    tol: f64,
}

impl FiniteGeodesicSpace {
    /// Builds a space from row-major `n × n` matrices.
    ///
    /// Checks shape, symmetry, the zero diagonal, positivity off the diagonal
    /// and `dL >= d` on finite entries. The cubic triangle-inequality scan is
    /// left to [`validate_structure`].
    pub fn new(
        d: Vec<f64>,
        dl: Vec<f64>,
        tol: f64,
        labels: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n = (d.len() as f64).sqrt().round() as usize;
        if n == 0 || n * n != d.len() || dl.len() != d.len() {
            return Err(Error::InvalidInput(format!(
                "distance matrices must be square and equal-sized (got {} and {})",
                d.len(),
                dl.len()
            )));
        }
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::InvalidInput(format!("tolerance {tol} must be finite and >= 0")));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidInput(format!("{} labels for {n} points", l.len())));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (d[i * n + j], dl[i * n + j]);
                if a.is_nan() || b.is_nan() || !a.is_finite() || a < 0.0 || b < 0.0 {
                    return Err(Error::InvalidInput(format!("bad distance entry at ({i}, {j})")));
                }
                if (a - d[j * n + i]).abs() > tol || !same_extended(b, dl[j * n + i], tol) {
                    return Err(Error::InvalidInput(format!("asymmetric entry at ({i}, {j})")));
                }
                if (i == j) != (a == 0.0) || (i == j) != (b == 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "distances must vanish exactly on the diagonal (entry ({i}, {j}))"
                    )));
                }
                if b.is_finite() && b < a - tol {
                    return Err(Error::InvalidInput(format!(
                        "dL({i}, {j}) = {b} is smaller than d = {a}"
                    )));
                }
            }
        }
        Ok(FiniteGeodesicSpace { n, labels, d, dl, tol })
    }

    /// A space with `d == dL`.
    pub fn from_metric(d: Vec<f64>, tol: f64, labels: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let dl = d.clone();
        Self::new(d, dl, tol, labels)
    }

    /// Points on a line at the given coordinates; `d = dL = |x - y|`.
    pub fn from_positions(positions: &[f64], tol: f64) -> Result<Self> {
        let n = positions.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = (positions[i] - positions[j]).abs();
            }
        }
        let labels = positions.iter().map(|&x| vec![x]).collect();
        Self::from_metric(d, tol, Some(labels))
    }

    /// Path metric of a weighted tree. `parent[i]` is `None` for the root.
    pub fn from_tree(parent: &[Option<usize>], edge_len: &[f64], tol: f64) -> Result<Self> {
        let n = parent.len();
        if edge_len.len() != n {
            return Err(Error::InvalidInput("edge_len must match parent".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n || !(edge_len[i] > 0.0) {
                    return Err(Error::InvalidInput(format!("bad tree edge at node {i}")));
                }
                adj[i].push((p, edge_len[i]));
                adj[p].push((i, edge_len[i]));
            }
        }
        let dl = all_pairs_shortest_paths(&adj);
        if dl.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("tree is not connected".into()));
        }
        Self::from_metric(dl, tol, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn labels(&self) -> Option<&[Vec<f64>]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn d(&self, x: Point, y: Point) -> f64 {
        self.d[x * self.n + y]
    }

    #[inline]
    pub fn dl(&self, x: Point, y: Point) -> f64 {
        self.dl[x * self.n + y]
    }

    pub fn dl_row(&self, x: Point) -> &[f64] {
        &self.dl[x * self.n..(x + 1) * self.n]
    }

    pub fn is_finite(&self, x: Point, y: Point) -> bool {
        self.dl(x, y).is_finite()
    }

    /// True when `z` lies on a `dL`-geodesic from `x` to `y` (within tol).
    #[inline]
    pub fn between(&self, x: Point, z: Point, y: Point) -> bool {
        let xy = self.dl(x, y);
        xy.is_finite() && (self.dl(x, z) + self.dl(z, y) - xy).abs() <= self.tol
    }

    /// True when the two distance matrices coincide.
    pub fn d_equals_dl(&self) -> bool {
        self.d
            .iter()
            .zip(&self.dl)
            .all(|(a, b)| (a - b).abs() <= self.tol)
    }

    /// The same space with points relabeled: old point `p` becomes
    /// `perm[p]`, as in `DiscreteMeasure::permuted` and
    /// `TransportPlan::permuted`.
    pub fn permuted(&self, perm: &[Point]) -> Result<Self> {
        let n = self.n;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidInput("not a permutation of the points".into()));
        }
        let mut d = vec![0.0; n * n];
        let mut dl = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[perm[i] * n + perm[j]] = self.d(i, j);
                dl[perm[i] * n + perm[j]] = self.dl(i, j);
            }
        }
        let labels = self.labels.as_ref().map(|l| {
            let mut out = vec![Vec::new(); n];
            for (p, row) in l.iter().enumerate() {
                out[perm[p]] = row.clone();
            }
            out
        });
        Self::new(d, dl, self.tol, labels)
    }

    pub fn to_json(&self) -> Value {
        let dl: Vec<Value> = self
            .dl
            .iter()
            .map(|&v| if v.is_finite() { json!(v) } else { json!("inf") })
            .collect();
        let mut obj = serde_json::Map::new();
        obj.insert("n".into(), json!(self.n));
        if let Some(l) = &self.labels {
            obj.insert("labels".into(), json!(l));
        }
        obj.insert("d".into(), json!(self.d));
        obj.insert("dL".into(), Value::Array(dl));
        obj.insert("tol".into(), json!(self.tol));
        Value::Object(obj)
    }

    /// Parses the space file schema. `d` may be a flat or nested row-major
    /// array, or omitted in favour of `"metric": "euclidean"` with labels;
    /// `dL` entries may be the string `"inf"`.
    pub fn from_json(v: &Value) -> Result<Self> {
        let n = v
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Format("missing integer field \"n\"".into()))?
            as usize;
        let tol = v.get("tol").and_then(Value::as_f64).unwrap_or(DEFAULT_TOL);
        let labels: Option<Vec<Vec<f64>>> = match v.get("labels") {
            Some(l) => Some(serde_json::from_value(l.clone())?),
            None => None,
        };
        let d = match (v.get("d"), v.get("metric").and_then(Value::as_str)) {
            (Some(d), _) => parse_matrix(d, n, "d")?,
            (None, Some("euclidean")) => {
                let l = labels
                    .as_ref()
                    .ok_or_else(|| Error::Format("euclidean metric needs labels".into()))?;
                euclidean_matrix(l)
            }
            _ => return Err(Error::Format("space needs \"d\" or \"metric\": \"euclidean\"".into())),
        };
        let dl = match v.get("dL") {
            Some(m) => parse_matrix(m, n, "dL")?,
            None => d.clone(),
        };
        if d.len() != n * n {
            return Err(Error::Format(format!("\"d\" has {} entries, expected {}", d.len(), n * n)));
        }
        Self::new(d, dl, tol, labels)
    }
}

fn same_extended(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        a == b
    } else {
        (a - b).abs() <= tol
    }
}

fn parse_entry(v: &Value) -> Result<f64> {
    match v {
        Value::Number(x) => x
            .as_f64()
            .ok_or_else(|| Error::Format(format!("bad number {x}"))),
        Value::String(s) if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") => {
            Ok(INFINITY)
        }
        other => Err(Error::Format(format!("bad matrix entry {other}"))),
    }
}

fn parse_matrix(v: &Value, n: usize, name: &str) -> Result<Vec<f64>> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Format(format!("\"{name}\" must be an array")))?;
    let mut out = Vec::with_capacity(n * n);
    for r in rows {
        match r {
            Value::Array(row) => {
                for e in row {
                    out.push(parse_entry(e)?);
                }
            }
            e => out.push(parse_entry(e)?),
        }
    }
    if out.len() != n * n {
        return Err(Error::Format(format!(
            "\"{name}\" has {} entries, expected {}",
            out.len(),
            n * n
        )));
    }
    Ok(out)
}

fn euclidean_matrix(labels: &[Vec<f64>]) -> Vec<f64> {
    let n = labels.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = labels[i]
                .iter()
                .zip(&labels[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        }
    }
    d
}

/// Dijkstra from every node of a sparse nonnegative graph. Row-major output,
/// `INFINITY` for unreachable pairs.
pub(crate) fn all_pairs_shortest_paths(adj: &[Vec<(usize, f64)>]) -> Vec<f64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Key(f64);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Key {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&o.0)
        }
    }

    let n = adj.len();
    let mut out = vec![INFINITY; n * n];
    par::fill_rows(&mut out, n, |src, dist| {
        dist[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((Key(0.0), src)));
        while let Some(Reverse((Key(du), u))) = heap.pop() {
            if du > dist[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = du + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((Key(nd), v)));
                }
            }
        }
    });
    out
}

/// Equally spaced points on `[0, length]`.
pub fn build_segment(n_points: usize, length: f64) -> Result<FiniteGeodesicSpace> {
    if n_points < 2 {
        return Err(Error::InvalidInput(format!("segment needs at least 2 points, got {n_points}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidInput(format!("segment length {length} must be positive")));
    }
    let h = length / (n_points - 1) as f64;
    let positions: Vec<f64> = (0..n_points).map(|i| i as f64 * h).collect();
    FiniteGeodesicSpace::from_positions(&positions, DEFAULT_TOL)
}

/// An ordered additive chain of points with arclength parameters from the
/// first point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub points: Vec<Point>,
    pub params: Vec<f64>,
}

impl GeodesicPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest violation of `|params[i] - params[j]| = dL(p_i, p_j)` and of
    /// `params[k] = dL(p_0, p_k)` over all index pairs.
    pub fn isometry_defect(&self, space: &FiniteGeodesicSpace) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.points.len() {
            for j in i..self.points.len() {
                let dl = space.dl(self.points[i], self.points[j]);
                worst = worst.max((dl - (self.params[j] - self.params[i]).abs()).abs());
            }
            if let Some(&p0) = self.points.first() {
                worst = worst.max((space.dl(p0, self.points[i]) - (self.params[i] - self.params[0])).abs());
            }
        }
        worst
    }

    /// The same chain traversed from the other end, with reflected params.
    pub fn reversed(&self) -> GeodesicPath {
        let total = self.params.last().copied().unwrap_or(0.0);
        GeodesicPath {
            points: self.points.iter().rev().copied().collect(),
            params: self.params.iter().rev().map(|p| total - p).collect(),
        }
    }
}

/// The maximal additive chain from `x` to `y`: every `z` with
/// `dL(x,z) + dL(z,y) = dL(x,y)`, ordered by `dL(x, ·)`.
pub fn geodesic_between(space: &FiniteGeodesicSpace, x: Point, y: Point) -> Result<GeodesicPath> {
    let n = space.n();
    if x >= n || y >= n {
        return Err(Error::InvalidInput(format!("point out of range ({x}, {y}) for n = {n}")));
    }
    if !space.is_finite(x, y) {
        return Err(Error::InfiniteDistance(x, y));
    }
    let mut chain: Vec<Point> = (0..n).filter(|&z| space.between(x, z, y)).collect();
    chain.sort_by(|&a, &b| space.dl(x, a).total_cmp(&space.dl(x, b)).then(a.cmp(&b)));
    for w in chain.windows(2) {
        if !space.between(x, w[0], w[1]) || w[0] == w[1] {
            return Err(Error::AmbiguousGeodesic { x, y, z1: w[0], z2: w[1] });
        }
    }
    // Snap the ends exactly so reversal reflects params cleanly.
    let total = space.dl(x, y);
    let params = chain
        .iter()
        .map(|&z| {
            if z == x {
                0.0
            } else if z == y {
                total
            } else {
                space.dl(x, z)
            }
        })
        .collect();
    Ok(GeodesicPath { points: chain, params })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// Both `d` and `dL` satisfy the triangle inequality within tol.
    pub triangle_ok: bool,
    /// `(x, z, y)` with `dL(x,y) > dL(x,z) + dL(z,y) + tol`, with the excess.
    pub additivity_violations: Vec<([Point; 3], f64)>,
    /// `(x, z, y1, y2)`: `z` is interior to geodesics from `x` to both `y1`
    /// and `y2`, and neither `y` lies between `z` and the other.
    pub branching_witnesses: Vec<[Point; 4]>,
    /// Pairs `(x, y)` whose in-between set is not a chain.
    pub ambiguous_pairs: Vec<[Point; 4]>,
    /// Classes of the relation `dL < INFINITY`.
    pub finite_components: Vec<Vec<Point>>,
    /// `dL >= d` on every finite entry.
    pub dl_dominates_d: bool,
    /// False when the space exceeded the size limit and the cubic checks
    /// were skipped.
    pub exhaustive: bool,
}

impl StructureReport {
    pub fn non_branching(&self) -> bool {
        self.branching_witnesses.is_empty()
    }
}

const MAX_WITNESSES: usize = 64;

pub fn validate_structure(space: &FiniteGeodesicSpace) -> StructureReport {
    validate_structure_with_limit(space, EXHAUSTIVE_LIMIT)
}

pub fn validate_structure_with_limit(space: &FiniteGeodesicSpace, limit: usize) -> StructureReport {
    let n = space.n();
    let tol = space.tol();
    let finite_components = finite_components(space);
    let dl_dominates_d = (0..n).all(|i| {
        (0..n).all(|j| !space.is_finite(i, j) || space.dl(i, j) >= space.d(i, j) - tol)
    });
    if n > limit {
        return StructureReport {
            triangle_ok: true,
            additivity_violations: Vec::new(),
            branching_witnesses: Vec::new(),
            ambiguous_pairs: Vec::new(),
            finite_components,
            dl_dominates_d,
            exhaustive: false,
        };
    }

    struct Row {
        d_triangle_ok: bool,
        violations: Vec<([Point; 3], f64)>,
        branching: Vec<[Point; 4]>,
        ambiguous: Vec<[Point; 4]>,
    }

    let rows = par::map_range(n, |x| {
        let mut row = Row {
            d_triangle_ok: true,
            violations: Vec::new(),
            branching: Vec::new(),
            ambiguous: Vec::new(),
        };
        for z in 0..n {
            for y in 0..n {
                if space.d(x, y) > space.d(x, z) + space.d(z, y) + tol {
                    row.d_triangle_ok = false;
                }
                let excess = space.dl(x, y) - (space.dl(x, z) + space.dl(z, y));
                if space.is_finite(x, z) && space.is_finite(z, y) && excess > tol {
                    row.violations.push(([x, z, y], excess));
                }
            }
        }
        // Continuations beyond each interior point z of geodesics from x.
        for z in 0..n {
            if z == x || !space.is_finite(x, z) {
                continue;
            }
            let mut cont: Vec<Point> = (0..n)
                .filter(|&y| y != z && y != x && space.between(x, z, y))
                .collect();
            cont.sort_by(|&a, &b| space.dl(z, a).total_cmp(&space.dl(z, b)).then(a.cmp(&b)));
            for w in cont.windows(2) {
                if !space.between(z, w[0], w[1]) {
                    row.branching.push([x, z, w[0], w[1]]);
                    break;
                }
            }
        }
        // Chain structure of in-between sets.
        for y in (x + 1)..n {
            if !space.is_finite(x, y) {
                continue;
            }
            if let Err(Error::AmbiguousGeodesic { z1, z2, .. }) = geodesic_between(space, x, y) {
                row.ambiguous.push([x, y, z1, z2]);
            }
        }
        row
    });

    let mut report = StructureReport {
        triangle_ok: true,
        additivity_violations: Vec::new(),
        branching_witnesses: Vec::new(),
        ambiguous_pairs: Vec::new(),
        finite_components,
        dl_dominates_d,
        exhaustive: true,
    };
    for row in rows {
        report.triangle_ok &= row.d_triangle_ok && row.violations.is_empty();
        extend_capped(&mut report.additivity_violations, row.violations);
        extend_capped(&mut report.branching_witnesses, row.branching);
        extend_capped(&mut report.ambiguous_pairs, row.ambiguous);
    }
    report
}

fn extend_capped<T>(dst: &mut Vec<T>, src: Vec<T>) {
    let room = MAX_WITNESSES.saturating_sub(dst.len());
    dst.extend(src.into_iter().take(room));
}

/// Partition of the points by finiteness of `dL`, each class sorted, classes
/// ordered by their smallest point.
pub fn finite_components(space: &FiniteGeodesicSpace) -> Vec<Vec<Point>> {
    let n = space.n();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let members: Vec<Point> = (0..n).filter(|&y| space.is_finite(start, y)).collect();
        for &m in &members {
            comp[m] = id;
        }
        out.push(members);
    }
    out
}

/// Map from point to the index of its finite component.
pub fn component_index(space: &FiniteGeodesicSpace) -> BTreeMap<Point, usize> {
    finite_components(space)
        .iter()
        .enumerate()
        .flat_map(|(c, pts)| pts.iter().map(move |&p| (p, c)))
        .collect()
}
