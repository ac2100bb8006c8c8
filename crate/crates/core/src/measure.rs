//! Nonnegative point measures on a finite space.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Point;

/// Dense weights over `0..n`. The total is cached, not normalized: transport
/// problems only need equal totals on both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
    total: f64,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!("weight {w} at point {i} is not a finite nonnegative number")));
        }
        let total = weights.iter().sum();
        Ok(Self { weights, total })
    }

    pub fn zero(n: usize) -> Self {
        Self { weights: vec![0.0; n], total: 0.0 }
    }

    pub fn dirac(n: usize, p: Point, mass: f64) -> Result<Self> {
        Self::from_atoms(n, &[(p, mass)])
    }

    /// Equal mass `total / k` on each of the `k` listed points.
    pub fn uniform_on(n: usize, points: &[Point], total: f64) -> Result<Self> {
        if points.is_empty() {
            return Ok(Self::zero(n));
        }
        let w = total / points.len() as f64;
        let atoms: Vec<(Point, f64)> = points.iter().map(|&p| (p, w)).collect();
        Self::from_atoms(n, &atoms)
    }

    /// Sums repeated points.
    pub fn from_atoms(n: usize, atoms: &[(Point, f64)]) -> Result<Self> {
        let mut weights = vec![0.0; n];
        for &(p, w) in atoms {
            if p >= n {
                return Err(Error::InvalidInput(format!("point {p} out of range for n = {n}")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("weight {w} at point {p} is not a finite nonnegative number")));
            }
            weights[p] += w;
        }
        Self::new(weights)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, p: Point) -> f64 {
        self.weights[p]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Points of positive mass, in index order.
    pub fn support(&self) -> Vec<Point> {
        (0..self.weights.len()).filter(|&p| self.weights[p] > 0.0).collect()
    }

    pub fn atoms(&self) -> Vec<(Point, f64)> {
        self.support().into_iter().map(|p| (p, self.weights[p])).collect()
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.weights.iter().map(|w| w * lambda).collect())
    }

    pub fn restricted(&self, keep: impl Fn(Point) -> bool) -> Self {
        let weights: Vec<f64> = self.weights.iter().enumerate().map(|(p, &w)| if keep(p) { w } else { 0.0 }).collect();
        let total = weights.iter().sum();
        Self { weights, total }
    }

    pub fn mass_of(&self, points: impl IntoIterator<Item = Point>) -> f64 {
        points.into_iter().map(|p| self.weights[p]).sum()
    }

    /// Pointwise minimum `μ ∧ ν`.
    pub fn min(&self, other: &Self) -> Self {
        let weights: Vec<f64> = self.weights.iter().zip(&other.weights).map(|(a, b)| a.min(*b)).collect();
        let total = weights.iter().sum();
        Self { weights, total }
    }

    /// Relabels by `perm`: the mass at `p` moves to `perm[p]`.
    pub fn permuted(&self, perm: &[Point]) -> Self {
        let mut weights = vec![0.0; self.weights.len()];
        for (p, &w) in self.weights.iter().enumerate() {
            weights[perm[p]] = w;
        }
        Self { weights, total: self.total }
    }

    /// `point_index,weight` rows. A header line is accepted, zero rows are
    /// dropped, repeated indices add up.
    pub fn from_csv(text: &str, n: usize) -> Result<Self> {
        let mut atoms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => return Err(Error::Format(format!("line {}: expected `point_index,weight`", lineno + 1))),
            };
            let p: Point = match a.parse() {
                Ok(p) => p,
                Err(_) if lineno == 0 => continue,
                Err(_) => return Err(Error::Format(format!("line {}: bad point index {a:?}", lineno + 1))),
            };
            let w: f64 = b
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad weight {b:?}", lineno + 1)))?;
            if w != 0.0 {
                atoms.push((p, w));
            }
        }
        Self::from_atoms(n, &atoms)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("point_index,weight\n");
        for (p, w) in self.atoms() {
            let _ = writeln!(s, "{p},{w:?}");
        }
        s
    }
}

/// Signed difference `a - b` as a dense vector.
pub fn difference(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Vec<f64> {
    a.weights.iter().zip(&b.weights).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_support() {
        let m = DiscreteMeasure::from_atoms(5, &[(1, 0.5), (3, 0.25), (1, 0.25)]).unwrap();
        assert_eq!(m.total(), 1.0);
        assert_eq!(m.support(), vec![1, 3]);
        assert_eq!(m.weight(1), 0.75);
    }

    #[test]
    fn rejects_negative_and_out_of_range() {
        assert!(DiscreteMeasure::new(vec![1.0, -0.1]).is_err());
        assert!(DiscreteMeasure::from_atoms(2, &[(2, 1.0)]).is_err());
        assert!(DiscreteMeasure::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn csv_round_trip_drops_zeros() {
        let text = "point_index,weight\n0,0.5\n2,0\n4,0.125\n";
        let m = DiscreteMeasure::from_csv(text, 5).unwrap();
        assert_eq!(m.support(), vec![0, 4]);
        let back = DiscreteMeasure::from_csv(&m.to_csv(), 5).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn csv_errors() {
        assert!(DiscreteMeasure::from_csv("0,1\nx,2\n", 3).is_err());
        assert!(DiscreteMeasure::from_csv("0,1,2\n", 3).is_err());
        assert!(DiscreteMeasure::from_csv("7,1\n", 3).is_err());
    }

    #[test]
    fn meet_is_pointwise_min() {
        let a = DiscreteMeasure::new(vec![1.0, 0.0, 2.0]).unwrap();
        let b = DiscreteMeasure::new(vec![0.5, 1.0, 3.0]).unwrap();
        assert_eq!(a.min(&b).weights(), &[0.5, 0.0, 2.0]);
        assert_eq!(a.min(&b).total(), 2.5);
    }
}
