//! Identity and inequality checks for pairs of Kähler metrics.
//!
//! For metrics ω (base) and ω′ (prime) with F = log(ω′ⁿ/ωⁿ), the following
//! hold pointwise and are verified here with each side evaluated through an
//! independent pipeline:
//!
//!   Δ_ω F  = R(ω) − tr_ω Ric(ω′)
//!   Δ_ω′ F = tr_ω′ Ric(ω) − R(ω′)
//!   ∂∂̄ F   = Ric(ω) − Ric(ω′)
//!   e^F ≥ (n / tr_ω′ ω)ⁿ          (means inequality)
//!   (1/V)∫ F ωⁿ ≤ 0               (same class, Jensen)
//!
//! plus the Green's representation of a scalar field over the flat
//! background. A check never trusts shared intermediates for both of its
//! sides; that is what makes a pass informative.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

use crate::fields::{HermitianField, PotentialField};
use crate::functionals::log_volume_ratio;
use crate::geometry::{self, CurvatureBundle, MetricField};
use crate::reduce;
use crate::spectral::{self, symbols};
use crate::{Error, Result};

/// Outcome of one check. `pass` is exactly `residual_sup <= tolerance`.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub name: String,
    /// Max absolute residual over grid points (and matrix entries);
    /// for inequalities, the worst violation (0 when satisfied).
    pub residual_sup: f64,
    /// Root mean square of the same residuals.
    pub residual_l2: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityReport {
    fn from_residuals(name: &str, parts: &[&[f64]], tolerance: f64) -> Self {
        let sup = parts.iter().map(|r| reduce::max_abs(r)).fold(0.0, f64::max);
        let count: usize = parts.iter().map(|r| r.len()).sum();
        let sq: f64 = parts
            .iter()
            .map(|r| reduce::sum_indexed(r.len(), |p| r[p] * r[p]))
            .sum();
        let l2 = (sq / count.max(1) as f64).sqrt();
        Self {
            name: name.to_string(),
            residual_sup: sup,
            residual_l2: l2,
            tolerance,
            pass: sup <= tolerance,
        }
    }

    fn from_scalar(name: &str, violation: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            residual_sup: violation,
            residual_l2: violation,
            tolerance,
            pass: violation <= tolerance,
        }
    }
}

/// A base/prime metric pair with every shared derived quantity computed
/// once: both curvatures, F = log(ω′ⁿ/ωⁿ), its spectrum and its Hessian.
pub struct MetricPair<'a> {
    pub base: &'a MetricField,
    pub prime: &'a MetricField,
    pub base_curvature: Arc<CurvatureBundle>,
    pub prime_curvature: Arc<CurvatureBundle>,
    f: Vec<f64>,
    f_coeffs: Vec<Complex64>,
    f_hessian: HermitianField,
}

impl<'a> MetricPair<'a> {
    pub fn new(prime: &'a MetricField, base: &'a MetricField) -> Result<Self> {
        let prime_curvature = Arc::new(CurvatureBundle::of(prime));
        let base_curvature = Arc::new(CurvatureBundle::of(base));
        Self::with_curvatures(prime, prime_curvature, base, base_curvature)
    }

    /// Builds the pair around caller-supplied curvature bundles, so a fixed
    /// base metric's curvature can be shared across many pairs.
    pub fn with_curvatures(
        prime: &'a MetricField,
        prime_curvature: Arc<CurvatureBundle>,
        base: &'a MetricField,
        base_curvature: Arc<CurvatureBundle>,
    ) -> Result<Self> {
        if prime.domain() != base.domain() {
            return Err(Error::DimensionMismatch(
                "metric pair on different domains".into(),
            ));
        }
        let domain = base.domain().clone();
        let f = log_volume_ratio(prime, base);
        let f_coeffs = spectral::forward_coeffs(&domain, &f);
        let f_hessian = geometry::hessian_from_coeffs(&domain, &f_coeffs);
        Ok(Self {
            base,
            prime,
            base_curvature,
            prime_curvature,
            f,
            f_coeffs,
            f_hessian,
        })
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f
    }

    pub fn f_hessian(&self) -> &HermitianField {
        &self.f_hessian
    }

    /// F as a potential, without recomputing its spectrum.
    pub fn f_potential(&self) -> PotentialField {
        PotentialField::from_parts(
            self.base.domain().clone(),
            self.f.clone(),
            self.f_coeffs.clone(),
        )
    }
}

/// Δ_ω F against R(ω) − tr_ω Ric(ω′).
pub fn check_laplace_f(pair: &MetricPair, tolerance: f64) -> IdentityReport {
    let lhs = pair.base.contract(&pair.f_hessian);
    let trace = pair.base.contract(&pair.prime_curvature.ricci);
    let scalar = &pair.base_curvature.scalar;
    let residual: Vec<f64> = (0..lhs.len())
        .into_par_iter()
        .map(|p| lhs[p] - (scalar[p] - trace[p]))
        .collect();
    IdentityReport::from_residuals("laplace_of_volume_ratio", &[&residual], tolerance)
}

/// Δ_ω′ F against tr_ω′ Ric(ω) − R(ω′).
pub fn check_dual_laplace_f(pair: &MetricPair, tolerance: f64) -> IdentityReport {
    let lhs = pair.prime.contract(&pair.f_hessian);
    let trace = pair.prime.contract(&pair.base_curvature.ricci);
    let scalar = &pair.prime_curvature.scalar;
    let residual: Vec<f64> = (0..lhs.len())
        .into_par_iter()
        .map(|p| lhs[p] - (trace[p] - scalar[p]))
        .collect();
    IdentityReport::from_residuals("dual_laplace_of_volume_ratio", &[&residual], tolerance)
}

/// ∂∂̄F against Ric(ω) − Ric(ω′), entry by entry.
pub fn check_ricci_difference(pair: &MetricPair, tolerance: f64) -> IdentityReport {
    let h = &pair.f_hessian;
    let rb = &pair.base_curvature.ricci;
    let rp = &pair.prime_curvature.ricci;
    let m = h.points();
    let diff = |a: &[f64], b: &[f64], c: &[f64]| -> Vec<f64> {
        (0..m).into_par_iter().map(|p| a[p] - (b[p] - c[p])).collect()
    };
    let raa = diff(&h.aa, &rb.aa, &rp.aa);
    if h.dim() == 1 {
        return IdentityReport::from_residuals("ricci_difference", &[&raa], tolerance);
    }
    let rbb = diff(&h.bb, &rb.bb, &rp.bb);
    let rre = diff(&h.ab_re, &rb.ab_re, &rp.ab_re);
    let rim = diff(&h.ab_im, &rb.ab_im, &rp.ab_im);
    IdentityReport::from_residuals("ricci_difference", &[&raa, &rbb, &rre, &rim], tolerance)
}

/// Green's representation over the flat background:
/// f(x) = (1/V)∫f ω̃ⁿ − ∫ Δf(y) G(x,y) ω̃ⁿ(y), with G realized spectrally
/// as the multiplier −1/λ on mean-zero modes. The right side goes through
/// physical space and a fresh forward transform, so the two sides share no
/// spectral pipeline.
pub fn check_greens(
    base: &MetricField,
    f: &PotentialField,
    tolerance: f64,
) -> Result<IdentityReport> {
    greens_report(base, f, tolerance, 1.0)
}

/// Same computation with the inversion kernel's sign deliberately flipped.
/// Exists so a checker run can prove it would notice a corrupted kernel.
pub(crate) fn check_greens_sign_flipped(
    base: &MetricField,
    f: &PotentialField,
    tolerance: f64,
) -> Result<IdentityReport> {
    greens_report(base, f, tolerance, -1.0)
}

fn greens_report(
    base: &MetricField,
    f: &PotentialField,
    tolerance: f64,
    kernel_sign: f64,
) -> Result<IdentityReport> {
    let (lo, hi) = base.eigen_extremes();
    let deviation = (lo - 1.0).abs().max((hi - 1.0).abs());
    if deviation > 1e-12 {
        return Err(Error::NotFlat { deviation });
    }
    let domain = f.domain().clone();
    let (lap_spec, occ) =
        f.spectrum_with(|m| Complex64::new(symbols::laplace(m), 0.0));
    let laplace = spectral::synthesize_real(&domain, lap_spec, occ);

    let mean = geometry::integrate_background(&domain, f.values()) / domain.background_volume();

    let mut conv_spec = spectral::forward_unscaled(&domain, &laplace);
    let inv_m = kernel_sign / domain.points() as f64;
    conv_spec = spectral::map_spectrum(&domain, &conv_spec, |m| {
        let lam = symbols::laplace(m);
        if lam == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(-inv_m / lam, 0.0)
        }
    });
    let conv = spectral::synthesize_real(&domain, conv_spec, None);

    let values = f.values();
    let residual: Vec<f64> = (0..values.len())
        .into_par_iter()
        .map(|p| values[p] - (mean - conv[p]))
        .collect();
    Ok(IdentityReport::from_residuals(
        "greens_representation",
        &[&residual],
        tolerance,
    ))
}

/// Pointwise means inequality e^F ≥ (n / tr_ω′ ω)ⁿ; reports the worst
/// violation (0 when it holds everywhere, as it must).
pub fn check_amgm(pair: &MetricPair, tolerance: f64) -> IdentityReport {
    let n = pair.base.domain().n();
    let trace = pair.prime.contract(pair.base.entries());
    let f = &pair.f;
    let worst = (0..f.len())
        .into_par_iter()
        .map(|p| {
            let bound = (n as f64 / trace[p]).powi(n as i32);
            f[p].exp() - bound
        })
        .reduce(|| f64::INFINITY, f64::min);
    IdentityReport::from_scalar("arithmetic_geometric_means", (-worst).max(0.0), tolerance)
}

/// Class-level Jensen bound: the ωⁿ-mean of F is nonpositive for same-class
/// pairs. Reports the positive part of the mean.
pub fn check_jensen(pair: &MetricPair, tolerance: f64) -> IdentityReport {
    let mean = geometry::integrate(pair.base, &pair.f) / geometry::volume(pair.base);
    IdentityReport::from_scalar("jensen_mean", mean.max(0.0), tolerance)
}
