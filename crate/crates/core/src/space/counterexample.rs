//! A finite model of the glued-tori space in which a `dL`-cyclically
//! monotone map fails to be optimal.
//!
//! Component `C` and the extra components `C^i` are unit tori glued along the
//! circle `S = {y = 0}`. Finite-length paths run only along lines of slope
//! `(c·α, 1)` (`c = 1` on `C`, `c = i` on `C^i`); on the upper half of `C`
//! they cost four times their Euclidean length. With a rational slope
//! `α = p/q` the lines leaving the circle at `θ = j/q` close up, and the
//! points of those lines at heights `k/M` form the vertex set.

use serde::{Deserialize, Serialize};

use super::{all_pairs_shortest_paths, FiniteGeodesicSpace, Point};
use crate::error::{Error, Result};

/// Golden-ratio conjugate `(√5 − 1)/2`, the slope being approximated.
pub const ALPHA_TARGET: f64 = 0.618_033_988_749_894_8;

/// Extra gluing components used when none are specified.
pub const DEFAULT_BRANCHES: [i64; 4] = [-2, -1, 1, 2];

/// Cost multiplier on the upper half of `C`.
pub const UPPER_WEIGHT: f64 = 4.0;

pub const COUNTEREXAMPLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    pub q_denom: usize,
    pub strip_res: usize,
    pub branches: Vec<i64>,
    /// When false every component keeps its own copy of the circle.
    pub glued: bool,
}

impl CounterexampleConfig {
    pub fn new(q_denom: usize, strip_res: usize) -> Self {
        CounterexampleConfig {
            q_denom,
            strip_res,
            branches: DEFAULT_BRANCHES.to_vec(),
            glued: true,
        }
    }
}

/// The built space together with the coordinates needed to state the two
/// competing maps.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub space: FiniteGeodesicSpace,
    pub config: CounterexampleConfig,
    /// Numerator of the slope `α = alpha_num / q_denom`.
    pub alpha_num: usize,
    /// Heights (in units of `1/strip_res`) of the source strip `A`.
    pub source_levels: Vec<usize>,
    /// Heights of the target strip `B`.
    pub target_levels: Vec<usize>,
    components: usize,
}

impl Counterexample {
    pub fn alpha(&self) -> f64 {
        self.alpha_num as f64 / self.config.q_denom as f64
    }

    /// `√(1 + α²)`, the Euclidean length per unit height of a line in `C`.
    pub fn line_factor(&self) -> f64 {
        (1.0 + self.alpha() * self.alpha()).sqrt()
    }

    fn m(&self) -> usize {
        self.config.strip_res
    }

    /// Point on line `line` of component `comp` (0 = `C`, `b + 1` = the
    /// `b`-th branch) at height `level / strip_res`. Level 0 is the circle.
    pub fn point(&self, comp: usize, line: usize, level: usize) -> Point {
        assert!(level < self.m() && comp < self.components);
        let layout = Layout::of(&self.config);
        if level == 0 {
            layout.circle(comp, line)
        } else {
            layout.interior(comp, line, level)
        }
    }

    /// Source strip `A` of component `C`, line-major.
    pub fn source_points(&self) -> Vec<Point> {
        self.strip_points(&self.source_levels)
    }

    pub fn target_points(&self) -> Vec<Point> {
        self.strip_points(&self.target_levels)
    }

    fn strip_points(&self, levels: &[usize]) -> Vec<Point> {
        let mut out = Vec::new();
        for line in 0..self.config.q_denom {
            for &k in levels {
                out.push(self.point(0, line, k));
            }
        }
        out
    }

    /// Upward map: `(x, y) ↦ (x + 3α/8, y + 3/8)`, i.e. three eighths of a
    /// turn up the same line.
    pub fn t_plus(&self, line: usize, level: usize) -> Point {
        self.point(0, line, level + 3 * self.m() / 8)
    }

    /// Downward map: `(x, y) ↦ (x − 5α/8, y + 3/8 − 1)`, reached by passing
    /// through the circle.
    pub fn t_minus(&self, line: usize, level: usize) -> Point {
        let q = self.config.q_denom;
        self.point(0, (line + q - self.alpha_num % q) % q, level + 3 * self.m() / 8)
    }
}

/// Vertex numbering. Glued: the `q` circle points first, then each
/// component's interior points line-major. Unglued: every component owns a
/// block of `q·M` points starting with its own circle copy.
#[derive(Clone, Copy)]
struct Layout {
    q: usize,
    m: usize,
    glued: bool,
}

impl Layout {
    fn of(config: &CounterexampleConfig) -> Self {
        Layout {
            q: config.q_denom,
            m: config.strip_res,
            glued: config.glued,
        }
    }

    fn circle(self, comp: usize, line: usize) -> Point {
        if self.glued {
            line % self.q
        } else {
            comp * self.q * self.m + line % self.q
        }
    }

    fn interior(self, comp: usize, line: usize, level: usize) -> Point {
        let within = (line % self.q) * (self.m - 1) + (level - 1);
        if self.glued {
            self.q + comp * self.q * (self.m - 1) + within
        } else {
            comp * self.q * self.m + self.q + within
        }
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Numerator `p` coprime to `q` with `p/q` closest to the golden conjugate.
fn alpha_numerator(q: usize) -> usize {
    let target = ALPHA_TARGET * q as f64;
    (1..q)
        .filter(|&p| gcd(p, q) == 1)
        .min_by(|&a, &b| {
            (a as f64 - target)
                .abs()
                .total_cmp(&(b as f64 - target).abs())
                .then(a.cmp(&b))
        })
        .unwrap_or(1)
}

/// Builds the counterexample space with the default branches `{−2,−1,1,2}`.
pub fn build_counterexample_space(q_denom: usize, strip_res: usize) -> Result<Counterexample> {
    build_counterexample(&CounterexampleConfig::new(q_denom, strip_res))
}

pub fn build_counterexample(config: &CounterexampleConfig) -> Result<Counterexample> {
    let q = config.q_denom;
    let m = config.strip_res;
    if q < 2 {
        return Err(Error::InvalidInput(format!("q_denom must be >= 2, got {q}")));
    }
    // The strips A = (1/2, 5/8) and B = (7/8, 1) need interior levels, and the
    // shift by 3/8 must land on a level.
    if m % 8 != 0 || m < 16 {
        return Err(Error::InvalidInput(format!(
            "strip_res must be a multiple of 8 and at least 16 to resolve the strips, got {m}"
        )));
    }
    if config.branches.iter().any(|&b| b == 0) {
        return Err(Error::InvalidInput("branch index 0 is the main component".into()));
    }
    let p = alpha_numerator(q);
    let alpha = p as f64 / q as f64;
    let components = 1 + config.branches.len();
    let slopes: Vec<i64> = std::iter::once(1).chain(config.branches.iter().copied()).collect();

    let mut ce = Counterexample {
        space: FiniteGeodesicSpace::from_metric(vec![0.0], 0.0, None)?,
        config: config.clone(),
        alpha_num: p,
        source_levels: (m / 2 + 1..5 * m / 8).filter(|&k| 8 * k > 4 * m).collect(),
        target_levels: (7 * m / 8 + 1..m).collect(),
        components,
    };
    if ce.source_levels.is_empty() || ce.target_levels.is_empty() {
        return Err(Error::InvalidInput("resolution too coarse for the strips".into()));
    }

    let n = if config.glued {
        q + components * q * (m - 1)
    } else {
        components * q * m
    };
    let mut labels = vec![Vec::new(); n];
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let wrap = |x: f64| x.rem_euclid(1.0);
    let layout = Layout::of(config);

    for (comp, &c) in slopes.iter().enumerate() {
        let shift = ((c * p as i64).rem_euclid(q as i64)) as usize;
        let step_len = (1.0 + (c as f64 * alpha).powi(2)).sqrt() / m as f64;
        for line in 0..q {
            let x0 = line as f64 / q as f64;
            let node = |level: usize| -> Point {
                if level == 0 {
                    layout.circle(comp, line)
                } else if level == m {
                    layout.circle(comp, line + shift)
                } else {
                    layout.interior(comp, line, level)
                }
            };
            for level in 0..=m {
                let pt = node(level);
                let y = (level % m) as f64 / m as f64;
                let x = if level == 0 || level == m {
                    ((line + if level == m { shift } else { 0 }) % q) as f64 / q as f64
                } else {
                    wrap(x0 + c as f64 * alpha * level as f64 / m as f64)
                };
                if level == 0 || level == m {
                    let code = if config.glued { 0.0 } else { comp_code(&slopes, comp) };
                    labels[pt] = vec![code, x, 0.0];
                } else {
                    labels[pt] = vec![comp_code(&slopes, comp), x, y];
                }
                if level < m {
                    let weight = if comp == 0 && level >= m / 2 { UPPER_WEIGHT } else { 1.0 };
                    let (a, b) = (pt, node(level + 1));
                    adj[a].push((b, weight * step_len));
                    adj[b].push((a, weight * step_len));
                }
            }
        }
    }

    let mut dl = all_pairs_shortest_paths(&adj);
    // Dijkstra sums in different orders from each end; keep the matrix symmetric.
    for i in 0..n {
        for j in i + 1..n {
            let v = dl[i * n + j].min(dl[j * n + i]);
            dl[i * n + j] = v;
            dl[j * n + i] = v;
        }
    }
    let d = ambient_distance(&labels, config.glued);
    // d <= dL holds exactly; rounding in the two computations can break it by an ulp.
    let d: Vec<f64> = d
        .iter()
        .zip(&dl)
        .map(|(&a, &b)| if b.is_finite() { a.min(b) } else { a })
        .collect();
    ce.space = FiniteGeodesicSpace::new(d, dl, COUNTEREXAMPLE_TOL, Some(labels))?;
    Ok(ce)
}

/// Component code stored in the first label coordinate: 0 for `C`, `i` for `C^i`.
fn comp_code(slopes: &[i64], comp: usize) -> f64 {
    if comp == 0 {
        0.0
    } else {
        slopes[comp] as f64
    }
}

/// Flat-torus distance within a component, or through the circle between
/// glued components (reflection formula for `min_θ |p1 − (θ,0)| + |p2 − (θ,0)|`).
fn ambient_distance(labels: &[Vec<f64>], glued: bool) -> Vec<f64> {
    let n = labels.len();
    let tor = |a: f64, b: f64| {
        let t = (a - b).abs();
        t.min(1.0 - t)
    };
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (li, lj) = (&labels[i], &labels[j]);
            let dx = tor(li[1], lj[1]);
            let ri = li[2].min(1.0 - li[2]);
            let rj = lj[2].min(1.0 - lj[2]);
            let via_circle = (dx * dx + (ri + rj) * (ri + rj)).sqrt();
            let on_circle_i = li[2] == 0.0 && glued;
            let on_circle_j = lj[2] == 0.0 && glued;
            let same = li[0] == lj[0] || on_circle_i || on_circle_j;
            let direct = if same {
                let dy = tor(li[2], lj[2]);
                (dx * dx + dy * dy).sqrt()
            } else {
                f64::INFINITY
            };
            d[i * n + j] = if glued || same {
                direct.min(via_circle)
            } else {
                // Unglued copies of the circle coincide in the plane; keep
                // them a unit apart so d stays a metric.
                1.0 + via_circle
            };
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{finite_components, geodesic_between, validate_structure_with_limit};
    use approx::assert_abs_diff_eq;

    fn small() -> Counterexample {
        build_counterexample_space(8, 16).unwrap()
    }

    #[test]
    fn slope_is_coprime_and_close() {
        assert_eq!(alpha_numerator(64), 39);
        assert_eq!(alpha_numerator(8), 5);
        let ce = small();
        assert_eq!(ce.alpha_num, 5);
        assert_eq!(ce.source_levels, vec![9]);
        assert_eq!(ce.target_levels, vec![15]);
    }

    #[test]
    fn rejects_coarse_resolution() {
        assert!(build_counterexample_space(8, 8).is_err());
        assert!(build_counterexample_space(8, 12).is_err());
        assert!(build_counterexample_space(1, 16).is_err());
    }

    #[test]
    fn neighbours_on_lower_line_cost_line_length() {
        let ce = small();
        let s = &ce.space;
        let step = ce.line_factor() / 16.0;
        let (a, b) = (ce.point(0, 3, 2), ce.point(0, 3, 3));
        assert_abs_diff_eq!(s.dl(a, b), step, epsilon = 1e-12);
        assert_eq!(s.dl(a, a), 0.0);
    }

    #[test]
    fn upper_half_costs_four_times() {
        let ce = small();
        let s = &ce.space;
        let step = ce.line_factor() / 16.0;
        let (a, b) = (ce.point(0, 3, 9), ce.point(0, 3, 15));
        assert_abs_diff_eq!(s.dl(a, b), 6.0 * 4.0 * step, epsilon = 1e-12);
        assert_abs_diff_eq!(s.dl(a, ce.t_plus(3, 9)), 1.5 * ce.line_factor(), epsilon = 1e-9);
        assert_abs_diff_eq!(s.dl(a, ce.t_minus(3, 9)), ce.line_factor(), epsilon = 1e-9);
    }

    #[test]
    fn dl_dominates_d_and_is_symmetric() {
        let ce = small();
        let s = &ce.space;
        for i in 0..s.n() {
            for j in 0..s.n() {
                assert_eq!(s.dl(i, j), s.dl(j, i));
                if s.is_finite(i, j) {
                    assert!(s.dl(i, j) >= s.d(i, j) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn gluing_merges_components() {
        let glued = small();
        assert_eq!(finite_components(&glued.space).len(), 1);
        let mut cfg = CounterexampleConfig::new(8, 16);
        cfg.glued = false;
        let apart = build_counterexample(&cfg).unwrap();
        // C, C^±1 are single loops (gcd(5,8)=1); C^±2 split into gcd(10,8)=2.
        assert_eq!(finite_components(&apart.space).len(), 1 + 1 + 1 + 2 + 2);
        let r = validate_structure_with_limit(&apart.space, 0);
        assert!(!r.exhaustive);
        assert_eq!(r.finite_components.len(), 7);
    }

    #[test]
    fn geodesic_stays_on_line() {
        let ce = small();
        let s = &ce.space;
        let (a, b) = (ce.point(0, 2, 1), ce.point(0, 2, 6));
        let g = geodesic_between(s, a, b).unwrap();
        let expected: Vec<Point> = (1..=6).map(|k| ce.point(0, 2, k)).collect();
        assert_eq!(g.points, expected);
        assert!(g.isometry_defect(s) < 1e-9);
    }
}
