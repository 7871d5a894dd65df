//! Class-level quantities: the mean scalar curvature μ and the energy gap Ψ.
//!
//! Both depend only on finitely many intersection pairings of [c₁] and the
//! Kähler class [ω], so the type stores exactly those numbers. On a flat
//! torus every c₁ pairing is zero and μ = Ψ = 0; nonzero data exercises the
//! same formulas the energy decomposition relies on.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Intersection pairings of a Kähler class with c₁.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohomologyData {
    /// Complex dimension.
    pub n: usize,
    /// [c₁]·[ω]^{n−1}
    pub c1_w_nm1: f64,
    /// [c₁]²·[ω]^{n−2}; ignored when n = 1.
    pub c1sq_w_nm2: f64,
    /// [ω]ⁿ, the class volume; must be positive.
    pub w_n: f64,
}

impl CohomologyData {
    pub fn new(n: usize, c1_w_nm1: f64, c1sq_w_nm2: f64, w_n: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("complex dimension must be at least 1".into()));
        }
        if !w_n.is_finite() || w_n <= 0.0 {
            return Err(Error::Config(format!(
                "class volume [ω]ⁿ must be positive, got {w_n}"
            )));
        }
        if !c1_w_nm1.is_finite() || !c1sq_w_nm2.is_finite() {
            return Err(Error::Config("non-finite intersection pairing".into()));
        }
        Ok(Self {
            n,
            c1_w_nm1,
            c1sq_w_nm2,
            w_n,
        })
    }

    /// Data of a flat torus: all c₁ pairings vanish.
    pub fn flat_torus(n: usize, w_n: f64) -> Result<Self> {
        Self::new(n, 0.0, 0.0, w_n)
    }

    /// Mean scalar curvature of the class, μ = π [c₁]·[ω]^{n−1} / [ω]ⁿ.
    pub fn mu(&self) -> f64 {
        PI * self.c1_w_nm1 / self.w_n
    }

    /// Ψ = n(n−1)π² ([c₁]²·[ω]^{n−2} − ([c₁]·[ω]^{n−1})² / [ω]ⁿ), the
    /// class-level part of the Calabi energy. Identically zero when n = 1,
    /// and zero whenever [ω] is proportional to [c₁].
    pub fn psi(&self) -> f64 {
        if self.n == 1 {
            return 0.0;
        }
        let nn = (self.n * (self.n - 1)) as f64;
        nn * PI * PI * (self.c1sq_w_nm2 - self.c1_w_nm1 * self.c1_w_nm1 / self.w_n)
    }
}

/// Weights for the pairing-wise distance between two classes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DistanceWeights {
    pub c1_w_nm1: f64,
    pub c1sq_w_nm2: f64,
    pub w_n: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        Self {
            c1_w_nm1: 1.0,
            c1sq_w_nm2: 1.0,
            w_n: 1.0,
        }
    }
}

/// Weighted max distance over the stored pairings. For fixed nonnegative
/// weights this is a pseudometric; with positive weights it separates data
/// with any differing pairing (the c₁² pairing does not count when n = 1).
pub fn class_distance(
    a: &CohomologyData,
    b: &CohomologyData,
    weights: &DistanceWeights,
) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch(format!(
            "class data of dimension {} vs {}",
            a.n, b.n
        )));
    }
    let mut d = (weights.c1_w_nm1 * (a.c1_w_nm1 - b.c1_w_nm1).abs())
        .max(weights.w_n * (a.w_n - b.w_n).abs());
    if a.n >= 2 {
        d = d.max(weights.c1sq_w_nm2 * (a.c1sq_w_nm2 - b.c1sq_w_nm2).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_classes_are_silent() {
        let data = CohomologyData::flat_torus(2, 2.0).unwrap();
        assert_eq!(data.mu(), 0.0);
        assert_eq!(data.psi(), 0.0);
    }

    #[test]
    fn mu_direct_value() {
        let data = CohomologyData::new(2, 2.0, 0.0, 5.0).unwrap();
        assert!((data.mu() - 2.0 * PI / 5.0).abs() < 1e-15);
    }

    #[test]
    fn mu_recovers_its_pairing() {
        // μ·[ω]ⁿ/π = [c₁]·[ω]^{n−1}, up to two roundings
        let data = CohomologyData::new(3, 1.7, 0.3, 0.9).unwrap();
        let back = data.mu() * data.w_n / PI;
        assert!((back - data.c1_w_nm1).abs() <= 4.0 * f64::EPSILON * data.c1_w_nm1.abs());
    }

    #[test]
    fn psi_vanishes_in_dimension_one_regardless_of_data() {
        let data = CohomologyData::new(1, 3.0, 17.0, 0.25).unwrap();
        assert_eq!(data.psi(), 0.0);
    }

    #[test]
    fn psi_vanishes_for_proportional_classes() {
        // [ω] = λ[c₁] with [c₁]² = 5: pairings (5λ, 5, 5λ²)
        for lambda in [0.5, 1.0, 2.0] {
            let data =
                CohomologyData::new(2, 5.0 * lambda, 5.0, 5.0 * lambda * lambda).unwrap();
            assert!(data.psi().abs() < 1e-12 * PI * PI * 5.0, "λ = {lambda}");
        }
    }

    #[test]
    fn psi_on_reference_data() {
        // (c1sq, c1_w, w_n) = (1, 2, 5): Ψ = 2π²(1 − 4/5) = 2π²/5
        let data = CohomologyData::new(2, 2.0, 1.0, 5.0).unwrap();
        assert!((data.psi() - 2.0 * PI * PI / 5.0).abs() < 1e-12);
    }

    #[test]
    fn mu_is_inverse_homogeneous_in_the_class() {
        let base = CohomologyData::new(2, 2.0, 1.0, 5.0).unwrap();
        for t in [0.5, 2.0, 10.0] {
            let scaled = CohomologyData::new(2, 2.0 * t, 1.0, 5.0 * t * t).unwrap();
            assert!((scaled.mu() - base.mu() / t).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn psi_is_scale_invariant_in_dimension_two() {
        let base = CohomologyData::new(2, 2.0, 1.0, 5.0).unwrap();
        for t in [0.5, 2.0, 10.0] {
            let scaled = CohomologyData::new(2, 2.0 * t, 1.0, 5.0 * t * t).unwrap();
            assert!((scaled.psi() - base.psi()).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn rejects_bad_volume_and_dimension() {
        assert!(CohomologyData::new(2, 1.0, 1.0, 0.0).is_err());
        assert!(CohomologyData::new(2, 1.0, 1.0, -3.0).is_err());
        assert!(CohomologyData::new(0, 0.0, 0.0, 1.0).is_err());
        assert!(CohomologyData::new(2, f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn distance_is_symmetric_and_separating() {
        let w = DistanceWeights::default();
        let a = CohomologyData::new(2, 2.0, 1.0, 5.0).unwrap();
        let b = CohomologyData::new(2, 2.5, 1.0, 5.0).unwrap();
        assert_eq!(class_distance(&a, &a, &w).unwrap(), 0.0);
        let dab = class_distance(&a, &b, &w).unwrap();
        assert_eq!(dab, class_distance(&b, &a, &w).unwrap());
        assert!((dab - 0.5).abs() < 1e-15);
        let c = CohomologyData::new(1, 2.0, 0.0, 5.0).unwrap();
        assert!(class_distance(&a, &c, &w).is_err());
    }
}
