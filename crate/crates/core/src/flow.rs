//! Transport currents along rays.
//!
//! A current stores one coefficient per edge `[t_i, t_{i+1}]` of each ray and
//! acts on per-point test tables by forward differences:
//!
//! `⟨U, (h, ω)⟩ = Σ_y m(y) Σ_i h(p_i) (ω(p_{i+1}) − ω(p_i)) c_i`.
//!
//! Its boundary puts `c_{i−1} − c_i` on `p_i` (with `c_{−1} = c_k = 0`), so
//! `⟨∂U, ω⟩ = ⟨U, (1, ω)⟩` holds as a finite rearrangement of the same sum.

use serde::{Deserialize, Serialize};

use crate::disintegration::ConditionalFamily;
use crate::error::{Error, Result};
use crate::par;
use crate::rays::RaySystem;
use crate::space::{FiniteGeodesicSpace, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentRay {
    pub points: Vec<Point>,
    pub params: Vec<f64>,
    /// One coefficient per edge.
    pub coeffs: Vec<f64>,
}

impl CurrentRay {
    pub fn edge_lengths(&self) -> Vec<f64> {
        self.params.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCurrent {
    pub n: usize,
    pub m: Vec<f64>,
    pub rays: Vec<CurrentRay>,
}

/// `∂U` as a point measure, split into interior differences and the jumps at
/// the two ends of each ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub measure: Vec<f64>,
    pub interior: Vec<f64>,
    pub endpoint_jumps: Vec<f64>,
    /// `Σ_y m(y) TotVar(c(y, ·))`, counting the end jumps.
    pub total_variation: f64,
}

impl DiscreteCurrent {
    /// A current with the given per-edge coefficients on the rays of `rs`.
    pub fn from_edges(rs: &RaySystem, m: Vec<f64>, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if m.len() != rs.rays.len() || coeffs.len() != rs.rays.len() {
            return Err(Error::InvalidInput("one weight and one coefficient table per ray".into()));
        }
        let mut rays = Vec::with_capacity(coeffs.len());
        for (ray, c) in rs.rays.iter().zip(coeffs) {
            if c.len() + 1 != ray.len().max(1) {
                return Err(Error::InvalidInput(format!("ray with {} points needs {} edge values", ray.len(), ray.len() - 1)));
            }
            rays.push(CurrentRay { points: ray.points.clone(), params: ray.params.clone(), coeffs: c });
        }
        Ok(Self { n: rs.n, m, rays })
    }

    pub fn action(&self, h: &[f64], omega: &[f64]) -> f64 {
        let per_ray = par::map_range(self.rays.len(), |r| {
            let ray = &self.rays[r];
            let s: f64 = ray
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| h[ray.points[i]] * (omega[ray.points[i + 1]] - omega[ray.points[i]]) * c)
                .sum();
            self.m[r] * s
        });
        per_ray.iter().sum()
    }

    /// `Lip(ω) Σ_y m(y) Σ_i |h(p_i)| |c_i| Δt_i`, the mass bound of the
    /// action.
    pub fn mass_bound(&self, h: &[f64], lip: f64) -> f64 {
        let mut acc = 0.0;
        for (r, ray) in self.rays.iter().enumerate() {
            for (i, dt) in ray.edge_lengths().iter().enumerate() {
                acc += self.m[r] * h[ray.points[i]].abs() * ray.coeffs[i].abs() * dt;
            }
        }
        lip * acc
    }

    pub fn boundary(&self) -> Boundary {
        let mut interior = vec![0.0; self.n];
        let mut endpoint_jumps = vec![0.0; self.n];
        let mut tv = 0.0;
        for (r, ray) in self.rays.iter().enumerate() {
            let k = ray.points.len();
            if k < 2 {
                continue;
            }
            let c = &ray.coeffs;
            let w = self.m[r];
            endpoint_jumps[ray.points[0]] -= w * c[0];
            endpoint_jumps[ray.points[k - 1]] += w * c[k - 2];
            let mut ray_tv = c[0].abs() + c[k - 2].abs();
            for i in 1..k - 1 {
                let jump = c[i - 1] - c[i];
                interior[ray.points[i]] += w * jump;
                ray_tv += jump.abs();
            }
            tv += w * ray_tv;
        }
        let measure = interior.iter().zip(&endpoint_jumps).map(|(a, b)| a + b).collect();
        Boundary { measure, interior, endpoint_jumps, total_variation: tv }
    }

    /// `Σ_y m(y) Σ_i |c_i| Δt_i`.
    pub fn l1_norm(&self) -> f64 {
        self.rays
            .iter()
            .zip(&self.m)
            .map(|(ray, w)| w * ray.coeffs.iter().zip(ray.edge_lengths()).map(|(c, dt)| c.abs() * dt).sum::<f64>())
            .sum()
    }

    /// Rows `ray,edge,t_lo,t_hi,coeff` for plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("ray,edge,t_lo,t_hi,coeff\n");
        for (r, ray) in self.rays.iter().enumerate() {
            for (i, c) in ray.coeffs.iter().enumerate() {
                s.push_str(&format!("{r},{i},{:?},{:?},{c:?}\n", ray.params[i], ray.params[i + 1]));
            }
        }
        s
    }
}

/// Per-edge densities of a family: the mean of the two adjacent cell
/// densities, normalized by `m(y)`.
pub fn edge_densities(fam: &ConditionalFamily) -> Result<Vec<Vec<f64>>> {
    let dens = fam.densities.as_ref().ok_or(Error::MissingDensity)?;
    Ok(dens
        .iter()
        .zip(&fam.m)
        .map(|(d, &m)| {
            d.windows(2)
                .map(|w| if m > 0.0 { 0.5 * (w[0] + w[1]) / m } else { 0.0 })
                .collect()
        })
        .collect())
}

/// `ġ`: unit flow along each ray weighted by the background density `q` of
/// `eta`.
pub fn build_current(rs: &RaySystem, eta: &ConditionalFamily) -> Result<DiscreteCurrent> {
    let q = edge_densities(eta)?;
    DiscreteCurrent::from_edges(rs, eta.m.clone(), q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSolution {
    /// `U` with edge coefficients `F − H` (unnormalized, `m ≡ 1`).
    pub current: DiscreteCurrent,
    /// `Σ (H − F) Δt`.
    pub l1_norm: f64,
    /// `max_x |∂U(x) − (μ − ν)(x)|`.
    pub stokes_defect: f64,
}

/// Solves `∂U = μ − ν` on the rays with `U = (F − H) ġ`, where
/// `H(t) = μ_y((−∞, t))`, `F(t) = ν_y((−∞, t))` are evaluated on each edge.
pub fn solve_transport_equation(rs: &RaySystem, mu: &ConditionalFamily, nu: &ConditionalFamily) -> Result<TransportSolution> {
    let mut coeffs = Vec::with_capacity(rs.rays.len());
    let mut diff = vec![0.0; rs.n];
    for (r, ray) in rs.rays.iter().enumerate() {
        let a = &mu.masses[r];
        let b = &nu.masses[r];
        let scale = mu.m[r].max(nu.m[r]).max(1.0);
        let mut c = Vec::with_capacity(ray.len().saturating_sub(1));
        let (mut h, mut f) = (0.0, 0.0);
        for i in 0..ray.len().saturating_sub(1) {
            h += a[i];
            f += b[i];
            if f - h > rs.tol * scale {
                return Err(Error::OrderViolation { ray: r, cell: i });
            }
            c.push(f - h);
        }
        for (k, &p) in ray.points.iter().enumerate() {
            diff[p] += a[k] - b[k];
        }
        coeffs.push(c);
    }
    let current = DiscreteCurrent::from_edges(rs, vec![1.0; rs.rays.len()], coeffs)?;
    let bd = current.boundary();
    let stokes_defect = bd.measure.iter().zip(&diff).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(TransportSolution { l1_norm: current.l1_norm(), current, stokes_defect })
}

/// `ρ = (F − H) / q` per edge, `q` taken from `q_family`.
pub fn density_rho(u: &DiscreteCurrent, q_family: &ConditionalFamily) -> Result<Vec<Vec<f64>>> {
    let q = edge_densities(q_family)?;
    let mut bad = Vec::new();
    let mut out = Vec::with_capacity(u.rays.len());
    for (r, ray) in u.rays.iter().enumerate() {
        let mut row = Vec::with_capacity(ray.coeffs.len());
        for (i, &c) in ray.coeffs.iter().enumerate() {
            let qq = q_family.m[r] * q[r][i];
            if qq > 0.0 {
                row.push(u.m[r] * c / qq);
            } else if c != 0.0 {
                bad.push((r, i));
                row.push(f64::NAN);
            } else {
                row.push(0.0);
            }
        }
        out.push(row);
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(Error::DivisionByZeroCell(bad))
    }
}

/// `max |ω(x) − ω(y)| / d(x, y)` over distinct points.
pub fn lipschitz_constant(space: &FiniteGeodesicSpace, omega: &[f64]) -> f64 {
    let n = space.n();
    let rows = par::map_range(n, |x| {
        (0..n)
            .filter(|&y| y != x)
            .map(|y| (omega[x] - omega[y]).abs() / space.d(x, y))
            .fold(0.0, f64::max)
    });
    rows.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disintegration::split_plan;
    use crate::kantorovich::TransportPlan;
    use crate::measure::DiscreteMeasure;
    use crate::rays::rays_from_plan;
    use crate::space::build_segment;
    use approx::assert_abs_diff_eq;

    fn unit_ray(n: usize) -> (FiniteGeodesicSpace, RaySystem) {
        let s = build_segment(n, 1.0).unwrap();
        let plan = TransportPlan::from_entries(n, &[(0, n - 1, 1.0)]).unwrap();
        let rs = rays_from_plan(&s, &plan).unwrap().system;
        (s, rs)
    }

    fn constant_current(rs: &RaySystem, q: f64) -> DiscreteCurrent {
        let k = rs.rays[0].len() - 1;
        DiscreteCurrent::from_edges(rs, vec![1.0], vec![vec![q; k]]).unwrap()
    }

    #[test]
    fn action_cases() {
        let (_, rs) = unit_ray(5);
        let u = constant_current(&rs, 1.0);
        let params: Vec<f64> = (0..5).map(|i| i as f64 / 4.0).collect();
        assert_abs_diff_eq!(u.action(&[1.0; 5], &params), 1.0, epsilon = 1e-12);
        assert_eq!(u.action(&[1.0; 5], &[3.0; 5]), 0.0);
        assert_eq!(u.action(&[0.0; 5], &params), 0.0);
    }

    #[test]
    fn unit_flow_boundary() {
        let (_, rs) = unit_ray(5);
        let b = constant_current(&rs, 1.0).boundary();
        assert_eq!(b.measure, vec![-1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(b.total_variation, 2.0);
    }

    #[test]
    fn triangular_boundary() {
        let (_, rs) = unit_ray(6);
        let u = DiscreteCurrent::from_edges(&rs, vec![1.0], vec![vec![1.0, 2.0, 3.0, 2.0, 1.0]]).unwrap();
        let b = u.boundary();
        let interior: f64 = b.interior.iter().map(|x| x.abs()).sum();
        assert_eq!(interior, 4.0);
        assert_eq!((b.endpoint_jumps[0], b.endpoint_jumps[5]), (-1.0, 1.0));
        assert_eq!(b.total_variation, 2.0 * 3.0);
        let zero = DiscreteCurrent::from_edges(&rs, vec![0.0], vec![vec![1.0; 5]]).unwrap();
        assert!(zero.boundary().measure.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn translation_solution() {
        let s = build_segment(9, 2.0).unwrap();
        let entries: Vec<_> = (0..5).map(|i| (i, i + 4, 0.2)).collect();
        let mut plan = TransportPlan::from_entries(9, &entries).unwrap();
        let cost = plan.cost(&s);
        let rs = rays_from_plan(&s, &plan).unwrap().system;
        let (mf, nf) = split_plan(&rs, &plan).unwrap().families(&rs);
        let sol = solve_transport_equation(&rs, &mf, &nf).unwrap();
        assert!(sol.stokes_defect <= 1e-15);
        assert_abs_diff_eq!(sol.l1_norm, cost, epsilon = 1e-12);
        let mu = plan.left().clone();
        let nu = plan.right().clone();
        let bd = sol.current.boundary();
        for p in 0..9 {
            assert_abs_diff_eq!(bd.measure[p], mu.weight(p) - nu.weight(p), epsilon = 1e-15);
        }
    }

    #[test]
    fn equal_measures_give_zero_current() {
        let (_, rs) = unit_ray(5);
        let w = vec![vec![0.0, 0.3, 0.4, 0.3, 0.0]];
        let f = ConditionalFamily::from_ray_weights(&rs, w);
        let sol = solve_transport_equation(&rs, &f, &f).unwrap();
        assert!(sol.current.rays[0].coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn backward_flow_is_an_order_violation() {
        let (_, rs) = unit_ray(5);
        let mu = ConditionalFamily::from_ray_weights(&rs, vec![vec![0.0, 0.0, 0.0, 1.0, 0.0]]);
        let nu = ConditionalFamily::from_ray_weights(&rs, vec![vec![0.0, 1.0, 0.0, 0.0, 0.0]]);
        let e = solve_transport_equation(&rs, &mu, &nu).unwrap_err();
        assert_eq!(e, Error::OrderViolation { ray: 0, cell: 1 });
    }

    #[test]
    fn rho_divides_by_background() {
        let (_, rs) = unit_ray(5);
        let u = DiscreteCurrent::from_edges(&rs, vec![1.0], vec![vec![-1.0; 4]]).unwrap();
        // Uniform density 2 on a unit ray: m = 2, normalized q = 1.
        let q = ConditionalFamily::from_ray_weights(&rs, vec![vec![0.25, 0.5, 0.5, 0.5, 0.25]]);
        let rho = density_rho(&u, &q).unwrap();
        for r in &rho[0] {
            assert_abs_diff_eq!(*r, -0.5, epsilon = 1e-12);
        }
        let q1 = ConditionalFamily::from_ray_weights(&rs, vec![vec![0.125, 0.25, 0.25, 0.25, 0.125]]);
        for r in &density_rho(&u, &q1).unwrap()[0] {
            assert_abs_diff_eq!(*r, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rho_reports_empty_cells() {
        let (_, rs) = unit_ray(5);
        let u = DiscreteCurrent::from_edges(&rs, vec![1.0], vec![vec![-1.0; 4]]).unwrap();
        let q = ConditionalFamily::from_ray_weights(&rs, vec![vec![0.5, 0.5, 0.0, 0.0, 0.0]]);
        assert_eq!(density_rho(&u, &q).unwrap_err(), Error::DivisionByZeroCell(vec![(0, 2), (0, 3)]));
    }

    #[test]
    fn missing_density() {
        let (_, rs) = unit_ray(3);
        let mut f = ConditionalFamily::from_ray_weights(&rs, vec![vec![0.5, 0.5, 0.0]]);
        f.densities = None;
        assert_eq!(build_current(&rs, &f).unwrap_err(), Error::MissingDensity);
    }

    #[test]
    fn mass_bound_holds_for_lipschitz_tests() {
        let (s, rs) = unit_ray(6);
        let mu = DiscreteMeasure::uniform_on(6, &[1, 2, 3, 4], 1.0).unwrap();
        let fam = crate::disintegration::disintegrate(&mu, &rs).unwrap();
        let u = build_current(&rs, &fam).unwrap();
        let omega = [0.0, 0.1, -0.3, 0.2, 0.2, 0.5];
        let h = [1.0, -2.0, 0.5, 1.0, 3.0, 0.0];
        let lip = lipschitz_constant(&s, &omega);
        assert!(u.action(&h, &omega).abs() <= u.mass_bound(&h, lip) + 1e-12);
    }
}
