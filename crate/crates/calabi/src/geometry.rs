//! Kähler metrics on the torus and their curvature.
//!
//! Coordinates are z_j = x_j + i y_j with the background form
//! ω̃ = (√−1/2) Σ dz_j ∧ dz̄_j, so the background metric is the identity in
//! the complex frame and Δ₀ = Σ ∂_j∂_j̄ is a quarter of the Euclidean
//! Laplacian. A potential φ deforms the metric to g = I + ∂∂̄φ, which must
//! stay positive definite; the Ricci form of any metric in the class is
//! Ric_ij̄ = −∂_i∂_j̄ log det g, and the top power is ωⁿ = n! det g · dVol.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::fields::{HermitianField, PotentialField};
use crate::grid::TorusDomain;
use crate::reduce;
use crate::spectral::{self, symbols};
use crate::{Error, Result, POSITIVITY_FLOOR};
use std::sync::Arc;

/// ∂_i∂_j̄ φ as a pointwise Hermitian matrix. Diagonal entries of an n = 2
/// Hessian are packed into one complex synthesis; the mixed entry needs a
/// full complex transform of its own.
pub fn complex_hessian(phi: &PotentialField) -> HermitianField {
    let domain = phi.domain().clone();
    match domain.n() {
        1 => {
            let (spec, occ) = phi.spectrum_with(|m| {
                Complex64::new(symbols::hessian_entry(m, 0, 0).re, 0.0)
            });
            let aa = spectral::synthesize_real(&domain, spec, occ);
            HermitianField::new(1, aa, Vec::new(), Vec::new(), Vec::new())
        }
        2 => {
            let (packed, occ) = phi.spectrum_with(|m| {
                Complex64::new(
                    symbols::hessian_entry(m, 0, 0).re,
                    symbols::hessian_entry(m, 1, 1).re,
                )
            });
            let (aa, bb) = spectral::synthesize_real_pair(&domain, packed, occ);
            let (off, occ) = phi.spectrum_with(|m| symbols::hessian_entry(m, 0, 1));
            let full = spectral::synthesize_complex(&domain, off, occ);
            let ab_re = full.par_iter().map(|c| c.re).collect();
            let ab_im = full.par_iter().map(|c| c.im).collect();
            HermitianField::new(2, aa, bb, ab_re, ab_im)
        }
        _ => unreachable!(),
    }
}

/// Hessian straight from dense normalized coefficients, for callers that
/// already hold a field's spectrum.
pub(crate) fn hessian_from_coeffs(domain: &TorusDomain, coeffs: &[Complex64]) -> HermitianField {
    match domain.n() {
        1 => {
            let spec = spectral::map_spectrum(domain, coeffs, |m| {
                Complex64::new(symbols::hessian_entry(m, 0, 0).re, 0.0)
            });
            let aa = spectral::synthesize_real(domain, spec, None);
            HermitianField::new(1, aa, Vec::new(), Vec::new(), Vec::new())
        }
        2 => {
            let packed = spectral::map_spectrum(domain, coeffs, |m| {
                Complex64::new(
                    symbols::hessian_entry(m, 0, 0).re,
                    symbols::hessian_entry(m, 1, 1).re,
                )
            });
            let (aa, bb) = spectral::synthesize_real_pair(domain, packed, None);
            let off = spectral::map_spectrum(domain, coeffs, |m| symbols::hessian_entry(m, 0, 1));
            let full = spectral::synthesize_complex(domain, off, None);
            let ab_re = full.par_iter().map(|c| c.re).collect();
            let ab_im = full.par_iter().map(|c| c.im).collect();
            HermitianField::new(2, aa, bb, ab_re, ab_im)
        }
        _ => unreachable!(),
    }
}

/// A positive definite Hermitian metric field. Inverse and determinant are
/// derived pointwise on demand; only the metric entries are stored.
pub struct MetricField {
    domain: Arc<TorusDomain>,
    g: HermitianField,
    eigen_min: f64,
    eigen_max: f64,
}

impl MetricField {
    /// The flat background metric, identity at every point.
    pub fn flat(domain: Arc<TorusDomain>) -> Self {
        let m = domain.points();
        let n = domain.n();
        let g = if n == 1 {
            HermitianField::new(1, vec![1.0; m], Vec::new(), Vec::new(), Vec::new())
        } else {
            HermitianField::new(2, vec![1.0; m], vec![1.0; m], vec![0.0; m], vec![0.0; m])
        };
        Self {
            domain,
            g,
            eigen_min: 1.0,
            eigen_max: 1.0,
        }
    }

    /// g = I + ∂∂̄φ, rejected when the smallest eigenvalue over the grid is
    /// not safely positive.
    pub fn from_potential(phi: &PotentialField) -> Result<Self> {
        let domain = phi.domain().clone();
        let mut h = complex_hessian(phi);
        h.aa.par_iter_mut().for_each(|v| *v += 1.0);
        h.bb.par_iter_mut().for_each(|v| *v += 1.0);
        Self::from_hermitian(domain, h)
    }

    /// Wraps explicit metric entries, validating positivity. The caller is
    /// responsible for the entries actually being a Kähler metric (constant
    /// or potential-derived fields always are).
    pub fn from_hermitian(domain: Arc<TorusDomain>, g: HermitianField) -> Result<Self> {
        if g.dim() != domain.n() || g.points() != domain.points() {
            return Err(Error::DimensionMismatch(
                "metric entries do not match the domain".into(),
            ));
        }
        let (lo, hi) = g.eigen_extremes();
        if lo.is_nan() || lo <= POSITIVITY_FLOOR {
            return Err(Error::NotKahler {
                min_eigenvalue: lo,
                floor: POSITIVITY_FLOOR,
            });
        }
        Ok(Self {
            domain,
            g,
            eigen_min: lo,
            eigen_max: hi,
        })
    }

    pub fn domain(&self) -> &Arc<TorusDomain> {
        &self.domain
    }

    pub fn entries(&self) -> &HermitianField {
        &self.g
    }

    /// Smallest/largest metric eigenvalue over the grid (a uniform
    /// equivalence bound against the background).
    pub fn eigen_extremes(&self) -> (f64, f64) {
        (self.eigen_min, self.eigen_max)
    }

    #[inline]
    pub fn det_at(&self, p: usize) -> f64 {
        if self.g.dim() == 1 {
            self.g.aa[p]
        } else {
            self.g.aa[p] * self.g.bb[p]
                - (self.g.ab_re[p] * self.g.ab_re[p] + self.g.ab_im[p] * self.g.ab_im[p])
        }
    }

    /// Inverse metric entries (iaa, ibb, iab_re, iab_im) at one point.
    #[inline]
    pub fn inverse_at(&self, p: usize) -> (f64, f64, f64, f64) {
        if self.g.dim() == 1 {
            (1.0 / self.g.aa[p], 0.0, 0.0, 0.0)
        } else {
            let det = self.det_at(p);
            (
                self.g.bb[p] / det,
                self.g.aa[p] / det,
                -self.g.ab_re[p] / det,
                -self.g.ab_im[p] / det,
            )
        }
    }

    /// Pointwise trace tr(g⁻¹ h) of a Hermitian field against this metric.
    pub fn contract(&self, h: &HermitianField) -> Vec<f64> {
        let m = self.domain.points();
        assert_eq!(h.points(), m);
        if self.g.dim() == 1 {
            (0..m)
                .into_par_iter()
                .map(|p| h.aa[p] / self.g.aa[p])
                .collect()
        } else {
            (0..m)
                .into_par_iter()
                .map(|p| {
                    let det = self.det_at(p);
                    (self.g.bb[p] * h.aa[p] + self.g.aa[p] * h.bb[p]
                        - 2.0 * (self.g.ab_re[p] * h.ab_re[p] + self.g.ab_im[p] * h.ab_im[p]))
                        / det
                })
                .collect()
        }
    }
}

/// Ricci curvature of a metric together with its scalar trace and the
/// extremes a flow monitor watches.
pub struct CurvatureBundle {
    pub ricci: HermitianField,
    pub scalar: Vec<f64>,
    pub ricci_eigen_min: f64,
    pub ricci_eigen_max: f64,
    pub scalar_min: f64,
    pub scalar_max: f64,
}

impl CurvatureBundle {
    pub fn of(metric: &MetricField) -> Self {
        let domain = metric.domain().clone();
        let m = domain.points();
        let logdet: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|p| metric.det_at(p).ln())
            .collect();
        let spec = spectral::forward_unscaled(&domain, &logdet);
        drop(logdet);
        let inv_m = 1.0 / m as f64;
        let ricci = match domain.n() {
            1 => {
                let rs = spectral::map_spectrum(&domain, &spec, |md| {
                    Complex64::new(-symbols::hessian_entry(md, 0, 0).re * inv_m, 0.0)
                });
                drop(spec);
                let aa = spectral::synthesize_real(&domain, rs, None);
                HermitianField::new(1, aa, Vec::new(), Vec::new(), Vec::new())
            }
            2 => {
                let packed = spectral::map_spectrum(&domain, &spec, |md| {
                    Complex64::new(
                        -symbols::hessian_entry(md, 0, 0).re * inv_m,
                        -symbols::hessian_entry(md, 1, 1).re * inv_m,
                    )
                });
                let (aa, bb) = spectral::synthesize_real_pair(&domain, packed, None);
                let off = spectral::map_spectrum(&domain, &spec, |md| {
                    symbols::hessian_entry(md, 0, 1) * -inv_m
                });
                drop(spec);
                let full = spectral::synthesize_complex(&domain, off, None);
                let ab_re = full.par_iter().map(|c| c.re).collect();
                let ab_im = full.par_iter().map(|c| c.im).collect();
                HermitianField::new(2, aa, bb, ab_re, ab_im)
            }
            _ => unreachable!(),
        };
        let scalar = metric.contract(&ricci);
        let (ricci_eigen_min, ricci_eigen_max) = ricci.eigen_extremes();
        let scalar_min = reduce::min(&scalar);
        let scalar_max = reduce::max(&scalar);
        Self {
            ricci,
            scalar,
            ricci_eigen_min,
            ricci_eigen_max,
            scalar_min,
            scalar_max,
        }
    }
}

/// Δ_g f = g^{ij̄} ∂_i∂_j̄ f for a scalar field given as a potential.
pub fn laplacian(metric: &MetricField, f: &PotentialField) -> Vec<f64> {
    let hess = complex_hessian(f);
    metric.contract(&hess)
}

/// ∫ f ω_gⁿ on the discrete torus: n! ∏L · mean(f · det g).
pub fn integrate(metric: &MetricField, f: &[f64]) -> f64 {
    let domain = metric.domain();
    let m = domain.points();
    assert_eq!(f.len(), m);
    let s = reduce::sum_indexed(m, |p| f[p] * metric.det_at(p));
    domain.background_volume() * s / m as f64
}

/// ∫ f ω̃ⁿ against the flat background.
pub fn integrate_background(domain: &TorusDomain, f: &[f64]) -> f64 {
    assert_eq!(f.len(), domain.points());
    domain.background_volume() * reduce::sum(f) / domain.points() as f64
}

/// Total volume ∫ ω_gⁿ; equals the background volume for every metric in
/// the class, up to quadrature error.
pub fn volume(metric: &MetricField) -> f64 {
    let domain = metric.domain();
    let m = domain.points();
    let s = reduce::sum_indexed(m, |p| metric.det_at(p));
    domain.background_volume() * s / m as f64
}

/// Global bounds (c_min, c_max) with c_min·b ≤ a ≤ c_max·b as forms.
pub fn metric_ratio_bounds(a: &MetricField, b: &MetricField) -> (f64, f64) {
    a.entries().relative_eigen_extremes(b.entries())
}
