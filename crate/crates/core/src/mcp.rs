//! Measure-contraction comparison functions and the density bounds they imply
//! along transport rays.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::disintegration::ConditionalFamily;
use crate::measure::DiscreteMeasure;
use crate::rays::{Ray, RaySystem};
use crate::space::{geodesic_between, FiniteGeodesicSpace, Point};

/// Multiplicative slack for ratio inequalities.
pub const TOL_MCP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McpParams {
    pub k: f64,
    pub n: f64,
}

impl McpParams {
    pub fn new(k: f64, n: f64) -> Result<Self> {
        if !k.is_finite() || !(n >= 1.0) || !n.is_finite() {
            return Err(Error::InvalidInput(format!("need finite K and N >= 1, got K = {k}, N = {n}")));
        }
        Ok(Self { k, n })
    }

    /// Upper end of the domain of `s_K` (infinite unless `K > 0`).
    pub fn diameter(&self) -> f64 {
        if self.k > 0.0 {
            PI / self.k.sqrt()
        } else {
            f64::INFINITY
        }
    }
}

/// `sin(√K t)/√K`, `t`, or `sinh(√−K t)/√−K` as `K` is positive, zero or
/// negative.
pub fn s_k(p: McpParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) || (p.k > 0.0 && t >= p.diameter()) {
        return Err(Error::Domain { k: p.k, t });
    }
    Ok(if p.k > 0.0 {
        let r = p.k.sqrt();
        (r * t).sin() / r
    } else if p.k == 0.0 {
        t
    } else {
        let r = (-p.k).sqrt();
        (r * t).sinh() / r
    })
}

/// `(a/b)^e` with `0/0 = 1`.
fn ratio_pow(a: f64, b: f64, e: f64) -> f64 {
    if e == 0.0 || a == b {
        return 1.0;
    }
    if b == 0.0 {
        return f64::INFINITY;
    }
    (a / b).powf(e)
}

/// `∫₀^x f` by midpoint sums on doubling grids with Richardson
/// extrapolation, until two successive estimates agree to `rel`.
pub fn integrate(f: impl Fn(f64) -> f64, x: f64, rel: f64) -> f64 {
    let midpoint = |m: usize| {
        let h = x / m as f64;
        (0..m).map(|i| f((i as f64 + 0.5) * h)).sum::<f64>() * h
    };
    let mut m = 8;
    let mut coarse = midpoint(m);
    let mut prev = f64::NAN;
    loop {
        m *= 2;
        let fine = midpoint(m);
        let est = (4.0 * fine - coarse) / 3.0;
        if (est - prev).abs() <= rel * est.abs() || m >= 1 << 24 {
            return est;
        }
        prev = est;
        coarse = fine;
    }
}

/// `c_K(t) = s_K(t/2)^{N−1} / 2 · (∫₀^{t/2} s_K(τ)^{N−1} dτ)^{−1}`.
pub fn c_k_bound(p: McpParams, t: f64) -> Result<f64> {
    if !(t > 0.0) || t >= p.diameter() {
        return Err(Error::Domain { k: p.k, t });
    }
    let e = p.n - 1.0;
    let top = s_k(p, t / 2.0)?.powf(e) / 2.0;
    let integral = if e == 0.0 {
        t / 2.0
    } else {
        integrate(|tau| s_k(p, tau).map_or(f64::NAN, |s| s.powf(e)), t / 2.0, 1e-10)
    };
    Ok(top / integral)
}

/// `2 (1 + 2 (s_K(2l)/s_K(l) − 1)) c_K(2l)`.
pub fn tv_bound(p: McpParams, l: f64) -> Result<f64> {
    Ok(2.0 * (1.0 + 2.0 * (s_k(p, 2.0 * l)? / s_k(p, l)? - 1.0)) * c_k_bound(p, 2.0 * l)?)
}

/// A pair of ray indices `s < t` whose density ratio leaves the allowed band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioViolation {
    pub s: usize,
    pub t: usize,
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayMcp {
    pub ray: usize,
    pub tested_pairs: usize,
    /// Points skipped because `q` vanishes there.
    pub untestable: Vec<usize>,
    pub violations: Vec<RatioViolation>,
    pub tv: Option<f64>,
    pub tv_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McpReport {
    pub params: McpParams,
    pub rays: Vec<RayMcp>,
    pub pass: bool,
}

fn ray_ends(ray: &Ray, r: usize) -> Result<(f64, f64)> {
    if ray.initial.is_none() || ray.terminal.is_none() || ray.len() < 2 {
        return Err(Error::EndpointMissing(r));
    }
    Ok((ray.params[0], *ray.params.last().unwrap()))
}

/// Conditional density `q(y, t_k)` at every point of every ray.
fn point_densities(fam: &ConditionalFamily) -> Result<&Vec<Vec<f64>>> {
    fam.densities.as_ref().ok_or(Error::MissingDensity)
}

fn band_check(
    params: &[f64],
    q: &[f64],
    p: McpParams,
    lower_end: f64,
    upper_end: Option<f64>,
    r: usize,
) -> Result<RayMcp> {
    let e = p.n - 1.0;
    let mut out = RayMcp { ray: r, tested_pairs: 0, untestable: Vec::new(), violations: Vec::new(), tv: None, tv_bound: None };
    let live: Vec<usize> = (0..q.len()).filter(|&i| q[i] > 0.0 && q[i].is_finite()).collect();
    out.untestable = (0..q.len()).filter(|i| live.binary_search(i).is_err()).collect();
    let sk = |d: f64| s_k(p, d.max(0.0));
    for (x, &i) in live.iter().enumerate() {
        for &j in &live[x + 1..] {
            let ratio = q[j] / q[i];
            let lower = ratio_pow(sk(lower_end - params[j])?, sk(lower_end - params[i])?, e);
            let upper = match upper_end {
                Some(a) => ratio_pow(sk(params[j] - a)?, sk(params[i] - a)?, e),
                None => f64::INFINITY,
            };
            out.tested_pairs += 1;
            if ratio * (1.0 + TOL_MCP) < lower || ratio > upper * (1.0 + TOL_MCP) {
                out.violations.push(RatioViolation { s: i, t: j, ratio, lower, upper });
            }
        }
    }
    Ok(out)
}

/// Checks
/// `(s_K(d(g(t), b)) / s_K(d(g(s), b)))^{N−1} ≤ q(t)/q(s) ≤ (s_K(d(g(t), a)) / s_K(d(g(s), a)))^{N−1}`
/// for every `s < t` on every ray where `q > 0` at both.
pub fn verify_density_bounds(rs: &RaySystem, q: &ConditionalFamily, p: McpParams) -> Result<McpReport> {
    let dens = point_densities(q)?;
    let mut rays = Vec::with_capacity(rs.rays.len());
    for (r, ray) in rs.rays.iter().enumerate() {
        let (a, b) = ray_ends(ray, r)?;
        rays.push(band_check(&ray.params, &dens[r], p, b, Some(a), r)?);
    }
    let pass = rays.iter().all(|r| r.violations.is_empty());
    Ok(McpReport { params: p, rays, pass })
}

/// The single-target estimate: only the lower bound, measured from `x_bar`,
/// on every ray through `x_bar`.
pub fn verify_density_bounds_to_target(rs: &RaySystem, q: &ConditionalFamily, p: McpParams, x_bar: Point) -> Result<McpReport> {
    let dens = point_densities(q)?;
    let mut rays = Vec::new();
    for (r, ray) in rs.rays.iter().enumerate() {
        let k = ray.position(x_bar).ok_or(Error::EndpointMissing(r))?;
        rays.push(band_check(&ray.params, &dens[r], p, ray.params[k], None, r)?);
    }
    let pass = rays.iter().all(|r| r.violations.is_empty());
    Ok(McpReport { params: p, rays, pass })
}

/// Total variation of the normalized conditional density on each ray against
/// `2 (1 + 2 (s_K(2l)/s_K(l) − 1)) c_K(2l)`, `2l = d(a(y), b(y))`.
pub fn verify_tv_bound(q: &ConditionalFamily, rs: &RaySystem, p: McpParams) -> Result<McpReport> {
    let dens = point_densities(q)?;
    let mut rays = Vec::with_capacity(rs.rays.len());
    for (r, ray) in rs.rays.iter().enumerate() {
        let (a, b) = ray_ends(ray, r)?;
        let m = q.m[r];
        let interior: Vec<f64> = dens[r][1..ray.len() - 1].iter().map(|d| if m > 0.0 { d / m } else { 0.0 }).collect();
        let tv: f64 = interior.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let bound = tv_bound(p, 0.5 * (b - a))?;
        let mut row = RayMcp { ray: r, tested_pairs: 0, untestable: Vec::new(), violations: Vec::new(), tv: Some(tv), tv_bound: Some(bound) };
        if tv > bound * (1.0 + TOL_MCP) {
            row.violations.push(RatioViolation { s: 0, t: ray.len() - 1, ratio: tv, lower: 0.0, upper: bound });
        }
        rays.push(row);
    }
    let pass = rays.iter().all(|r| r.violations.is_empty());
    Ok(McpReport { params: p, rays, pass })
}

/// Weights whose cell densities sit on the lower envelope of
/// [`verify_density_bounds`]: `q(y, t) = s_K(d(g(y, t), b(y)))^{N−1}` at the
/// points strictly inside each ray, zero at its ends.
pub fn envelope_family(rs: &RaySystem, p: McpParams) -> Result<ConditionalFamily> {
    let mut weights = Vec::with_capacity(rs.rays.len());
    for (r, ray) in rs.rays.iter().enumerate() {
        let (_, b) = ray_ends(ray, r)?;
        let cells = crate::disintegration::cell_lengths(&ray.params);
        let k = ray.len();
        let mut w = vec![0.0; k];
        for i in 1..k - 1 {
            w[i] = s_k(p, b - ray.params[i])?.powf(p.n - 1.0) * cells[i];
        }
        weights.push(w);
    }
    Ok(ConditionalFamily::from_ray_weights(rs, weights))
}

/// Per-point outcome of the contraction check at one `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub t: f64,
    pub point: Point,
    pub eta: f64,
    pub rhs: f64,
    /// Mass snapping moved onto this point: each preimage contributes its
    /// share `δ/h` of the gap `h` it was pulled across.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub pass: bool,
    /// Rows where `rhs > eta`.
    pub defects: Vec<ContractionRow>,
    /// Largest `|snapped param − t · d(x̄, a)|`.
    pub snapping_defect: f64,
}

/// `η ≥ (e_t)♯(t {s_K(t d(x̄, a)) / s_K(d(x̄, a))}^{N−1} η|_A)` with `e_t`
/// sending `a ∈ A` to the point of the geodesic `x̄ → a` nearest to
/// param `t d(x̄, a)`. A point passes when the excess is at most the mass
/// that snapping (rather than splitting between neighbours) placed there.
pub fn mcp_contract_check(
    space: &FiniteGeodesicSpace,
    eta: &DiscreteMeasure,
    x_bar: Point,
    a: &[Point],
    ts: &[f64],
    p: McpParams,
) -> Result<ContractionReport> {
    let n = space.n();
    let mut geos = Vec::with_capacity(a.len());
    for &x in a {
        geos.push(geodesic_between(space, x_bar, x)?);
    }
    let e = p.n - 1.0;
    let mut defects = Vec::new();
    let mut snapping_defect: f64 = 0.0;
    let mut pass = true;
    for &t in ts {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidInput(format!("t = {t} outside [0, 1]")));
        }
        let mut rhs = vec![0.0; n];
        let mut slack = vec![0.0; n];
        for (&x, g) in a.iter().zip(&geos) {
            let d = space.dl(x_bar, x);
            let w = eta.weight(x);
            if w == 0.0 {
                continue;
            }
            let factor = if d == 0.0 { t } else { t * ratio_pow(s_k(p, t * d)?, s_k(p, d)?, e) };
            let target = t * d;
            let k = g.params.partition_point(|&q| q < target);
            let k = [k.wrapping_sub(1), k]
                .into_iter()
                .filter(|&j| j < g.len())
                .min_by(|&i, &j| (g.params[i] - target).abs().total_cmp(&(g.params[j] - target).abs()))
                .unwrap();
            let delta = g.params[k] - target;
            snapping_defect = snapping_defect.max(delta.abs());
            let other = if delta > 0.0 { k.checked_sub(1) } else { Some(k + 1).filter(|&j| j < g.len()) };
            let moved = match other {
                Some(j) if delta != 0.0 => delta.abs() / (g.params[k] - g.params[j]).abs(),
                _ => 0.0,
            };
            let pt = g.points[k];
            rhs[pt] += factor * w;
            slack[pt] += factor * w * moved;
        }
        for pt in 0..n {
            if rhs[pt] > eta.weight(pt) * (1.0 + TOL_MCP) {
                let row = ContractionRow { t, point: pt, eta: eta.weight(pt), rhs: rhs[pt], slack: slack[pt] };
                if rhs[pt] - eta.weight(pt) > slack[pt] * (1.0 + TOL_MCP) {
                    pass = false;
                }
                defects.push(row);
            }
        }
    }
    Ok(ContractionReport { pass, defects, snapping_defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kantorovich::TransportPlan;
    use crate::rays::rays_from_plan;
    use crate::space::build_segment;
    use approx::assert_abs_diff_eq;

    fn p(k: f64, n: f64) -> McpParams {
        McpParams::new(k, n).unwrap()
    }

    #[test]
    fn s_k_branches() {
        assert_eq!(s_k(p(0.0, 2.0), 3.7).unwrap(), 3.7);
        assert_abs_diff_eq!(s_k(p(1.0, 2.0), PI / 2.0).unwrap(), 1.0, epsilon = 1e-12);
        // sinh 1 = (e − 1/e)/2.
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(s_k(p(-1.0, 2.0), 1.0).unwrap(), 0.5 * (e - 1.0 / e), epsilon = 1e-12);
        assert_eq!(s_k(p(1.0, 2.0), 0.0).unwrap(), 0.0);
        assert_eq!(s_k(p(1.0, 2.0), PI).unwrap_err().code(), "DOMAIN");
        assert!(s_k(p(0.0, 2.0), -1.0).is_err());
    }

    #[test]
    fn c_k_closed_forms() {
        for t in [0.1, 1.0, 3.0] {
            assert_abs_diff_eq!(c_k_bound(p(0.0, 1.0), t).unwrap(), 1.0 / t, epsilon = 1e-8 / t);
            assert_abs_diff_eq!(c_k_bound(p(0.0, 2.0), t).unwrap(), 2.0 / t, epsilon = 1e-8 / t);
        }
        // N/t in general for K = 0.
        assert_abs_diff_eq!(c_k_bound(p(0.0, 3.5), 2.0).unwrap(), 1.75, epsilon = 1e-8);
        assert!(c_k_bound(p(1.0, 2.0), PI).is_err());
    }

    #[test]
    fn c_k_times_t_stays_bounded_near_zero() {
        for k in [-1.0, 0.0, 1.0] {
            let vals: Vec<f64> = (1..=6).map(|e| 10f64.powi(-e)).map(|t| t * c_k_bound(p(k, 2.5), t).unwrap()).collect();
            for v in vals {
                assert!((v - 2.5).abs() < 1e-2, "{k} {v}");
            }
        }
    }

    fn unit_ray(n: usize) -> RaySystem {
        let s = build_segment(n, 1.0).unwrap();
        rays_from_plan(&s, &TransportPlan::from_entries(n, &[(0, n - 1, 1.0)]).unwrap()).unwrap().system
    }

    fn family_from_q(rs: &RaySystem, q: impl Fn(f64) -> f64) -> ConditionalFamily {
        let ray = &rs.rays[0];
        let cells = crate::disintegration::cell_lengths(&ray.params);
        let (a, l) = (ray.params[0], ray.length());
        let k = ray.len();
        let w = (0..k)
            .map(|i| if i == 0 || i == k - 1 { 0.0 } else { q((ray.params[i] - a) / l) * cells[i] })
            .collect();
        ConditionalFamily::from_ray_weights(rs, vec![w])
    }

    #[test]
    fn uniform_with_n_one_passes() {
        let rs = unit_ray(11);
        let fam = family_from_q(&rs, |_| 1.0);
        let r = verify_density_bounds(&rs, &fam, p(0.0, 1.0)).unwrap();
        assert!(r.pass);
        assert_eq!(r.rays[0].untestable, vec![0, 10]);
        assert_eq!(r.rays[0].tested_pairs, 9 * 8 / 2);
    }

    #[test]
    fn envelope_passes_both_checks() {
        let rs = unit_ray(41);
        for (k, n) in [(0.0, 3.0), (1.0, 2.5), (-1.0, 4.0)] {
            let pp = p(k, n);
            let fam = family_from_q(&rs, |t| s_k(pp, 1.0 - t).unwrap().powf(n - 1.0));
            let env = envelope_family(&rs, pp).unwrap().densities.unwrap();
            for (a, b) in env[0].iter().zip(&fam.densities.as_ref().unwrap()[0]) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            assert!(verify_density_bounds(&rs, &fam, pp).unwrap().pass, "{k} {n}");
            assert!(verify_tv_bound(&fam, &rs, pp).unwrap().pass, "{k} {n}");
        }
    }

    #[test]
    fn sawtooth_fails_both_checks() {
        let rs = unit_ray(81);
        let fam = family_from_q(&rs, |t| if ((t * 80.0).round() as i64) % 2 == 0 { 1.0 } else { 40.0 });
        let pp = p(0.0, 2.0);
        assert!(!verify_density_bounds(&rs, &fam, pp).unwrap().pass);
        let tv = verify_tv_bound(&fam, &rs, pp).unwrap();
        assert!(!tv.pass);
    }

    #[test]
    fn interior_zero_is_untestable() {
        let rs = unit_ray(7);
        let fam = family_from_q(&rs, |t| if (t - 0.5).abs() < 0.01 { 0.0 } else { 1.0 });
        let r = verify_density_bounds(&rs, &fam, p(0.0, 1.0)).unwrap();
        assert!(r.pass);
        assert_eq!(r.rays[0].untestable, vec![0, 3, 6]);
    }

    #[test]
    fn missing_endpoint() {
        let s = build_segment(3, 1.0).unwrap();
        let mut rs = rays_from_plan(&s, &TransportPlan::from_entries(3, &[(0, 2, 1.0)]).unwrap()).unwrap().system;
        rs.rays[0].terminal = None;
        let fam = ConditionalFamily::from_ray_weights(&rs, vec![vec![0.0, 1.0, 0.0]]);
        assert_eq!(verify_density_bounds(&rs, &fam, p(0.0, 2.0)).unwrap_err(), Error::EndpointMissing(0));
    }

    #[test]
    fn lebesgue_toward_a_point() {
        let rs = unit_ray(21);
        let fam = family_from_q(&rs, |_| 1.0);
        let r = verify_density_bounds_to_target(&rs, &fam, p(0.0, 1.0), 20).unwrap();
        assert!(r.pass);
    }

    fn lebesgue(n: usize) -> (FiniteGeodesicSpace, DiscreteMeasure) {
        let s = build_segment(n, 1.0).unwrap();
        let h = 1.0 / (n - 1) as f64;
        let w = (0..n).map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h }).collect();
        (s, DiscreteMeasure::new(w).unwrap())
    }

    #[test]
    fn contraction_endpoints_in_t() {
        let (s, eta) = lebesgue(21);
        let all: Vec<Point> = (0..21).collect();
        let r = mcp_contract_check(&s, &eta, 0, &all, &[0.0, 1.0], p(0.0, 1.0)).unwrap();
        assert!(r.pass && r.defects.is_empty());
        assert_eq!(r.snapping_defect, 0.0);
    }

    #[test]
    fn contraction_holds_up_to_snapping() {
        let (s, eta) = lebesgue(41);
        let all: Vec<Point> = (0..41).collect();
        let ts: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let r = mcp_contract_check(&s, &eta, 0, &all, &ts, p(0.0, 1.0)).unwrap();
        assert!(r.pass, "{:?}", r.defects.first());
        assert!(r.snapping_defect <= 0.5 / 40.0 + 1e-12);
    }

    #[test]
    fn contraction_catches_excess_curvature() {
        // K = 0, N = 1 contracts Lebesgue with factor t; claiming N = 1 on a
        // measure concentrated far from x̄ must fail.
        let (s, _) = lebesgue(21);
        let mut w = vec![0.0; 21];
        w[20] = 1.0;
        w[10] = 0.01;
        let eta = DiscreteMeasure::new(w).unwrap();
        let r = mcp_contract_check(&s, &eta, 0, &[20], &[0.5], p(0.0, 1.0)).unwrap();
        assert!(!r.pass);
    }
}
