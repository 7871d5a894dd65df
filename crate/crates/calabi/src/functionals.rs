//! Energy functionals of a metric and the decomposition that splits the
//! Calabi energy into a Ricci part and a class-level remainder.
//!
//! With μ the mean scalar curvature of the class,
//!
//!   Ca(ω) = ∫ (R − μ)² ωⁿ = ∫ |Ric − (μ/n)ω|² ωⁿ + Ψ,
//!
//! where Ψ depends only on intersection numbers. Both sides are computed by
//! independent code paths; their residual is the working measure of spectral
//! accuracy, and on a torus Ψ = 0.

use rayon::prelude::*;
use serde::Serialize;

use crate::cohomology::CohomologyData;
use crate::fields::HermitianField;
use crate::geometry::{CurvatureBundle, MetricField};
use crate::reduce;

/// Relative accuracy demanded of the energy decomposition on analytic data.
pub const DECOMPOSITION_RTOL: f64 = 1e-8;

/// Both sides of the energy decomposition, evaluated independently.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyReport {
    /// Ca = ∫ (R − μ)² ωⁿ
    pub calabi: f64,
    /// ∫ |Ric − (μ/n)ω|² ωⁿ
    pub ricci_deviation: f64,
    /// Class-level remainder, zero on tori.
    pub psi: f64,
    /// calabi − ricci_deviation − psi
    pub decomposition_residual: f64,
    pub mu: f64,
    /// |decomposition_residual| at or below this passes.
    pub residual_tolerance: f64,
}

impl EnergyReport {
    pub fn passes(&self) -> bool {
        self.decomposition_residual.abs() <= self.residual_tolerance
    }
}

/// Ca(ω) = ∫ (R − μ)² ωⁿ from a precomputed scalar curvature.
pub fn calabi_energy_from_scalar(metric: &MetricField, scalar: &[f64], mu: f64) -> f64 {
    let domain = metric.domain();
    let m = domain.points();
    assert_eq!(scalar.len(), m);
    let s = reduce::sum_indexed(m, |p| {
        let d = scalar[p] - mu;
        d * d * metric.det_at(p)
    });
    domain.background_volume() * s / m as f64
}

pub fn calabi_energy(metric: &MetricField, mu: f64) -> f64 {
    let curv = CurvatureBundle::of(metric);
    calabi_energy_from_scalar(metric, &curv.scalar, mu)
}

/// ∫ |Ric − (μ/n)ω|² ωⁿ with the norm |T|² = g^{ik̄} g^{lj̄} T_{ij̄} T_{lk̄},
/// from a precomputed Ricci field. Pointwise |T|² = tr((g⁻¹T)²) is evaluated
/// through trace and determinant, avoiding any matrix intermediates.
pub fn ricci_deviation_energy_from_ricci(
    metric: &MetricField,
    ricci: &HermitianField,
    mu: f64,
) -> f64 {
    let domain = metric.domain();
    let m = domain.points();
    assert_eq!(ricci.points(), m);
    let n = domain.n();
    let g = metric.entries();
    let s = if n == 1 {
        reduce::sum_indexed(m, |p| {
            let t = ricci.aa[p] - mu * g.aa[p];
            // |T|²·det g = (t/g)²·g = t²/g
            t * t / g.aa[p]
        })
    } else {
        let half_mu = mu / 2.0;
        reduce::sum_indexed(m, |p| {
            let taa = ricci.aa[p] - half_mu * g.aa[p];
            let tbb = ricci.bb[p] - half_mu * g.bb[p];
            let tre = ricci.ab_re[p] - half_mu * g.ab_re[p];
            let tim = ricci.ab_im[p] - half_mu * g.ab_im[p];
            let det_g = metric.det_at(p);
            let det_t = taa * tbb - (tre * tre + tim * tim);
            let trace = (g.bb[p] * taa + g.aa[p] * tbb
                - 2.0 * (g.ab_re[p] * tre + g.ab_im[p] * tim))
                / det_g;
            // tr((g⁻¹T)²) = (tr g⁻¹T)² − 2 det T / det g, times det g
            trace * trace * det_g - 2.0 * det_t
        })
    };
    domain.background_volume() * s / m as f64
}

pub fn ricci_deviation_energy(metric: &MetricField, mu: f64) -> f64 {
    let curv = CurvatureBundle::of(metric);
    ricci_deviation_energy_from_ricci(metric, &curv.ricci, mu)
}

/// F = log(ω′ⁿ/ωⁿ) = log(det g′ / det g) pointwise.
pub fn log_volume_ratio(prime: &MetricField, base: &MetricField) -> Vec<f64> {
    let m = prime.domain().points();
    assert_eq!(base.domain().points(), m);
    (0..m)
        .into_par_iter()
        .map(|p| (prime.det_at(p) / base.det_at(p)).ln())
        .collect()
}

/// Evaluates both sides of the decomposition from one curvature pass.
pub fn decomposition_check(metric: &MetricField, cohomology: &CohomologyData) -> EnergyReport {
    let curv = CurvatureBundle::of(metric);
    decomposition_check_with(metric, &curv, cohomology)
}

/// Same verdict from a caller-supplied curvature bundle, so a suite that
/// already holds one per metric pays no second pass.
pub fn decomposition_check_with(
    metric: &MetricField,
    curv: &CurvatureBundle,
    cohomology: &CohomologyData,
) -> EnergyReport {
    let mu = cohomology.mu();
    let psi = cohomology.psi();
    let calabi = calabi_energy_from_scalar(metric, &curv.scalar, mu);
    let ricci_deviation = ricci_deviation_energy_from_ricci(metric, &curv.ricci, mu);
    let decomposition_residual = calabi - ricci_deviation - psi;
    EnergyReport {
        calabi,
        ricci_deviation,
        psi,
        decomposition_residual,
        mu,
        residual_tolerance: DECOMPOSITION_RTOL * calabi.max(1e-12),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{CosineMode, PotentialField};
    use crate::geometry;
    use crate::grid::TorusDomain;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn mode(k: &[i64], a: f64) -> CosineMode {
        CosineMode {
            wavevector: k.to_vec(),
            amplitude: a,
        }
    }

    fn metric_1d(size: usize, k: i64, a: f64) -> (Arc<TorusDomain>, MetricField) {
        let domain = TorusDomain::new(1, size, &[1.0, 1.0]).unwrap();
        let phi = PotentialField::from_modes(domain.clone(), &[mode(&[k, 0], a)]).unwrap();
        let g = MetricField::from_potential(&phi).unwrap();
        (domain, g)
    }

    #[test]
    fn flat_metric_has_zero_energies() {
        let domain = TorusDomain::new(2, 8, &[1.0; 4]).unwrap();
        let flat = MetricField::flat(domain.clone());
        assert_eq!(calabi_energy(&flat, 0.0), 0.0);
        assert_eq!(ricci_deviation_energy(&flat, 0.0), 0.0);
        let report =
            decomposition_check(&flat, &CohomologyData::flat_torus(2, 2.0).unwrap());
        assert_eq!(report.calabi, 0.0);
        assert!(report.passes());
    }

    #[test]
    fn small_cosine_energy_matches_linearized_value() {
        // R ≈ −π⁴ a cos(2πx), so Ca ≈ ∫(π⁴ a cos)² = π⁸ a²/2 on the unit torus
        let a = 1e-4;
        let (_, g) = metric_1d(64, 1, a);
        let ca = calabi_energy(&g, 0.0);
        let lin = PI.powi(8) * a * a / 2.0;
        assert!((ca - lin).abs() < 0.01 * lin, "{ca} vs {lin}");
    }

    #[test]
    fn mu_shift_expands_the_square() {
        let (domain, g) = metric_1d(32, 1, 2e-3);
        let curv = CurvatureBundle::of(&g);
        let v = geometry::volume(&g);
        let r_mean = {
            let m = domain.points();
            domain.background_volume()
                * reduce::sum_indexed(m, |p| curv.scalar[p] * g.det_at(p))
                / m as f64
        };
        let mu = 0.0;
        let c = 0.37;
        let base = calabi_energy_from_scalar(&g, &curv.scalar, mu);
        let shifted = calabi_energy_from_scalar(&g, &curv.scalar, mu + c);
        let expect = base + c * c * v - 2.0 * c * (r_mean - mu * v);
        assert!(
            (shifted - expect).abs() <= 1e-12 * shifted.abs().max(1.0),
            "{shifted} vs {expect}"
        );
    }

    #[test]
    fn one_dimensional_deviation_equals_calabi() {
        let (_, g) = metric_1d(64, 2, 3e-3);
        let curv = CurvatureBundle::of(&g);
        let ca = calabi_energy_from_scalar(&g, &curv.scalar, 0.0);
        let dev = ricci_deviation_energy_from_ricci(&g, &curv.ricci, 0.0);
        assert!((ca - dev).abs() <= 1e-12 * ca, "{ca} vs {dev}");
    }

    #[test]
    fn product_metric_deviation_splits_into_factors() {
        // φ(x₁) + φ(x₂) on T²: Ric is block-diagonal, and with unit periods
        // ∫|Ric|² ω² = 2(Ca₁ + Ca₂) of the one-dimensional factors.
        let a1 = 4e-3;
        let a2 = 2.5e-3;
        let (_, g1) = metric_1d(32, 1, a1);
        let (_, g2) = metric_1d(32, 2, a2);
        let ca1 = calabi_energy(&g1, 0.0);
        let ca2 = calabi_energy(&g2, 0.0);

        let domain = TorusDomain::new(2, 32, &[1.0; 4]).unwrap();
        let phi = PotentialField::from_modes(
            domain,
            &[mode(&[1, 0, 0, 0], a1), mode(&[0, 0, 2, 0], a2)],
        )
        .unwrap();
        let g = MetricField::from_potential(&phi).unwrap();
        let dev = ricci_deviation_energy(&g, 0.0);
        let expect = 2.0 * (ca1 + ca2);
        assert!((dev - expect).abs() <= 1e-9 * expect, "{dev} vs {expect}");
    }

    #[test]
    fn decomposition_residual_is_spectrally_small_in_dim_two() {
        let domain = TorusDomain::new(2, 32, &[1.0; 4]).unwrap();
        // a·cos(2πx₁)cos(2πy₁) = (a/2)[cos(2π(x₁+y₁)) + cos(2π(x₁−y₁))]
        let a = 1e-3;
        let phi = PotentialField::from_modes(
            domain,
            &[mode(&[1, 1, 0, 0], a / 2.0), mode(&[1, -1, 0, 0], a / 2.0)],
        )
        .unwrap();
        let g = MetricField::from_potential(&phi).unwrap();
        let report = decomposition_check(&g, &CohomologyData::flat_torus(2, 2.0).unwrap());
        assert!(report.calabi > 0.0);
        assert!(
            report.passes(),
            "residual {} vs tol {}",
            report.decomposition_residual,
            report.residual_tolerance
        );
    }

    #[test]
    fn log_volume_ratio_of_scaled_metric_is_constant() {
        let (domain, g) = metric_1d(32, 1, 2e-3);
        let f_same = log_volume_ratio(&g, &g);
        assert!(f_same.iter().all(|&v| v == 0.0));

        let m = domain.points();
        let doubled = MetricField::from_hermitian(
            domain,
            HermitianField::new(
                1,
                g.entries().aa.par_iter().map(|v| 2.0 * v).collect(),
                Vec::new(),
                Vec::new(),
                Vec::new(),
            ),
        )
        .unwrap();
        let f = log_volume_ratio(&doubled, &g);
        for &v in f.iter().take(m) {
            assert!((v - std::f64::consts::LN_2).abs() < 1e-14);
        }
    }

    #[test]
    fn same_class_volume_ratio_obeys_jensen() {
        let domain = TorusDomain::new(1, 32, &[1.0, 1.0]).unwrap();
        let phi_a =
            PotentialField::from_modes(domain.clone(), &[mode(&[1, 0], 5e-3)]).unwrap();
        let phi_b = PotentialField::from_modes(
            domain.clone(),
            &[mode(&[2, 0], 3e-3), mode(&[1, 1], 2e-3)],
        )
        .unwrap();
        let base = MetricField::from_potential(&phi_a).unwrap();
        let prime = MetricField::from_potential(&phi_b).unwrap();
        let f = log_volume_ratio(&prime, &base);
        let mean = geometry::integrate(&base, &f) / geometry::volume(&base);
        assert!(mean <= 1e-10, "mean {mean}");
        // volume consistency: ∫ e^F ωⁿ recovers the ω′ volume
        let ef: Vec<f64> = f.iter().map(|v| v.exp()).collect();
        let v_prime = geometry::integrate(&base, &ef);
        assert!((v_prime - geometry::volume(&prime)).abs() < 1e-10 * v_prime);
    }

    #[test]
    fn calabi_energy_is_stable_under_refinement() {
        let a = 2e-3;
        let (_, coarse) = metric_1d(32, 1, a);
        let (_, fine) = metric_1d(64, 1, a);
        let ca_c = calabi_energy(&coarse, 0.0);
        let ca_f = calabi_energy(&fine, 0.0);
        assert!((ca_c - ca_f).abs() <= 1e-10 * ca_f, "{ca_c} vs {ca_f}");
    }
}
