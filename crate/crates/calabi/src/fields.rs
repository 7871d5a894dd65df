//! Scalar potentials and pointwise Hermitian matrix fields.
//!
//! A potential keeps its grid values and its Fourier description in sync.
//! Potentials assembled from an explicit mode list stay in a sparse spectral
//! form: derived spectra (Hessians, curvatures of the start data) are then
//! built directly from the mode entries, which skips the forward transform
//! and makes constant shifts exactly invisible to every derivative.

use std::collections::BTreeMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::grid::TorusDomain;
use crate::reduce;
use crate::spectral::{self, Mode, Occupancy};
use crate::{Error, Result};

#[derive(Clone)]
enum Spectrum {
    Dense(Vec<Complex64>),
    Sparse {
        entries: Vec<(usize, Complex64)>,
        occupancy: Occupancy,
    },
}

/// A real scalar field on the torus, the Kähler potential of a metric.
#[derive(Clone)]
pub struct PotentialField {
    domain: Arc<TorusDomain>,
    values: Vec<f64>,
    spectrum: Spectrum,
}

/// One cosine component of start data: amplitude · cos(2π Σ_a k_a x_a / L_a).
#[derive(Clone, Debug)]
pub struct CosineMode {
    pub wavevector: Vec<i64>,
    pub amplitude: f64,
}

impl PotentialField {
    /// The zero potential (background metric).
    pub fn zero(domain: Arc<TorusDomain>) -> Self {
        let points = domain.points();
        let occupancy = Occupancy::from_linear_indices(&domain, []);
        Self {
            domain,
            values: vec![0.0; points],
            spectrum: Spectrum::Sparse {
                entries: Vec::new(),
                occupancy,
            },
        }
    }

    /// Superposition of cosine modes. Every wavevector must be resolvable on
    /// the grid; repeated wavevectors accumulate.
    pub fn from_modes(domain: Arc<TorusDomain>, modes: &[CosineMode]) -> Result<Self> {
        let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
        for mode in modes {
            domain.check_wavevector(&mode.wavevector)?;
            if !mode.amplitude.is_finite() {
                return Err(Error::NonFinite(format!(
                    "mode amplitude {}",
                    mode.amplitude
                )));
            }
            if mode.wavevector.iter().all(|&k| k == 0) {
                *acc.entry(0).or_insert(Complex64::new(0.0, 0.0)) += mode.amplitude;
                continue;
            }
            let plus = domain.mode_index(&mode.wavevector)?;
            let negated: Vec<i64> = mode.wavevector.iter().map(|k| -k).collect();
            let minus = domain.mode_index(&negated)?;
            let half = Complex64::new(mode.amplitude / 2.0, 0.0);
            *acc.entry(plus).or_insert(Complex64::new(0.0, 0.0)) += half;
            *acc.entry(minus).or_insert(Complex64::new(0.0, 0.0)) += half;
        }
        let entries: Vec<(usize, Complex64)> = acc.into_iter().collect();
        let occupancy =
            Occupancy::from_linear_indices(&domain, entries.iter().map(|&(i, _)| i));
        let mut spec = vec![Complex64::new(0.0, 0.0); domain.points()];
        for &(i, c) in &entries {
            spec[i] = c;
        }
        let values = spectral::synthesize_real(&domain, spec, Some(&occupancy));
        Ok(Self {
            domain,
            values,
            spectrum: Spectrum::Sparse { entries, occupancy },
        })
    }

    /// Wraps raw grid values; the spectrum is computed densely.
    pub fn from_values(domain: Arc<TorusDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.points() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                domain.points()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential values".into()));
        }
        let coeffs = spectral::forward_coeffs(&domain, &values);
        Ok(Self {
            domain,
            values,
            spectrum: Spectrum::Dense(coeffs),
        })
    }

    /// Rebuilds a potential from dense normalized coefficients (the flow
    /// stepper's state update). Values are synthesized from the spectrum.
    pub(crate) fn from_dense_coeffs(domain: Arc<TorusDomain>, coeffs: Vec<Complex64>) -> Self {
        let values = spectral::synthesize_real(&domain, coeffs.clone(), None);
        Self {
            domain,
            values,
            spectrum: Spectrum::Dense(coeffs),
        }
    }

    /// Adopts values and their dense spectrum together; the caller vouches
    /// that they describe the same field.
    pub(crate) fn from_parts(
        domain: Arc<TorusDomain>,
        values: Vec<f64>,
        coeffs: Vec<Complex64>,
    ) -> Self {
        debug_assert_eq!(values.len(), domain.points());
        debug_assert_eq!(coeffs.len(), domain.points());
        Self {
            domain,
            values,
            spectrum: Spectrum::Dense(coeffs),
        }
    }

    pub fn domain(&self) -> &Arc<TorusDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dense normalized coefficient array (copied out of sparse storage).
    pub fn dense_coeffs(&self) -> Vec<Complex64> {
        match &self.spectrum {
            Spectrum::Dense(c) => c.clone(),
            Spectrum::Sparse { entries, .. } => {
                let mut spec = vec![Complex64::new(0.0, 0.0); self.domain.points()];
                for &(i, c) in entries {
                    spec[i] = c;
                }
                spec
            }
        }
    }

    /// Complex amplitude of one mode: 2·c(k) for k ≠ 0 (so a pure cosine of
    /// amplitude A reports A), and the mean c(0) at k = 0.
    pub fn mode_amplitude(&self, wavevector: &[i64]) -> Result<Complex64> {
        self.domain.check_wavevector(wavevector)?;
        let idx = self.domain.mode_index(wavevector)?;
        let c = match &self.spectrum {
            Spectrum::Dense(cs) => cs[idx],
            Spectrum::Sparse { entries, .. } => entries
                .iter()
                .find(|&&(i, _)| i == idx)
                .map_or(Complex64::new(0.0, 0.0), |&(_, c)| c),
        };
        if wavevector.iter().all(|&k| k == 0) {
            Ok(c)
        } else {
            Ok(c * 2.0)
        }
    }

    /// Grid mean, read off the DC coefficient.
    pub fn mean(&self) -> f64 {
        match &self.spectrum {
            Spectrum::Dense(cs) => cs[0].re,
            Spectrum::Sparse { entries, .. } => entries
                .iter()
                .find(|&&(i, _)| i == 0)
                .map_or(0.0, |&(_, c)| c.re),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        reduce::max_abs(&self.values)
    }

    /// Adds a constant. Derivatives, metrics and energies must not notice.
    pub fn shift_constant(&mut self, delta: f64) {
        for v in &mut self.values {
            *v += delta;
        }
        match &mut self.spectrum {
            Spectrum::Dense(cs) => cs[0] += delta,
            Spectrum::Sparse { entries, occupancy } => {
                if let Some(e) = entries.iter_mut().find(|(i, _)| *i == 0) {
                    e.1 += delta;
                } else {
                    entries.insert(0, (0, Complex64::new(delta, 0.0)));
                    occupancy.include_dc();
                }
            }
        }
    }

    /// Fraction of spectral energy in the top third of the resolved band.
    pub fn tail_energy_fraction(&self) -> f64 {
        match &self.spectrum {
            Spectrum::Dense(cs) => spectral::tail_energy_fraction(&self.domain, cs),
            Spectrum::Sparse { entries, .. } => {
                let n = self.domain.size();
                let cut = (n / 3) as i64 + 1;
                let mut total = 0.0;
                let mut tail = 0.0;
                for &(idx, c) in entries {
                    if idx == 0 {
                        continue;
                    }
                    let coords = self.domain.decode(idx);
                    let m = coords
                        .iter()
                        .map(|&i| self.domain.freq_int(i).abs())
                        .max()
                        .unwrap_or(0);
                    let e = c.norm_sqr();
                    total += e;
                    if m >= cut {
                        tail += e;
                    }
                }
                if total > 0.0 {
                    tail / total
                } else {
                    0.0
                }
            }
        }
    }

    /// Spectrum of a derived field: sym(m)·φ̂(m), in whichever representation
    /// the potential holds. The returned occupancy bounds the support.
    pub(crate) fn spectrum_with(
        &self,
        sym: impl Fn(Mode) -> Complex64 + Sync,
    ) -> (Vec<Complex64>, Option<&Occupancy>) {
        match &self.spectrum {
            Spectrum::Dense(cs) => (spectral::map_spectrum(&self.domain, cs, sym), None),
            Spectrum::Sparse { entries, occupancy } => (
                spectral::build_from_entries(&self.domain, entries, sym),
                Some(occupancy),
            ),
        }
    }
}

/// A pointwise Hermitian matrix field in the complex frame dz_i ⊗ dz̄_j.
/// For n = 1 only `aa` is populated; for n = 2 the entry h_{12̄} is split
/// into real and imaginary parts.
pub struct HermitianField {
    n: usize,
    pub aa: Vec<f64>,
    pub bb: Vec<f64>,
    pub ab_re: Vec<f64>,
    pub ab_im: Vec<f64>,
}

impl HermitianField {
    pub fn new(n: usize, aa: Vec<f64>, bb: Vec<f64>, ab_re: Vec<f64>, ab_im: Vec<f64>) -> Self {
        debug_assert!(n == 1 || n == 2);
        if n == 2 {
            debug_assert_eq!(aa.len(), bb.len());
            debug_assert_eq!(aa.len(), ab_re.len());
            debug_assert_eq!(aa.len(), ab_im.len());
        }
        Self {
            n,
            aa,
            bb,
            ab_re,
            ab_im,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.aa.len()
    }

    /// Per-point eigenvalues, smaller first (n = 2) or the single entry.
    #[inline]
    pub fn eigen_at(&self, p: usize) -> (f64, f64) {
        if self.n == 1 {
            let a = self.aa[p];
            (a, a)
        } else {
            let a = self.aa[p];
            let b = self.bb[p];
            let mid = 0.5 * (a + b);
            let off = self.ab_re[p] * self.ab_re[p] + self.ab_im[p] * self.ab_im[p];
            let half = 0.5 * (a - b);
            let disc = (half * half + off).sqrt();
            (mid - disc, mid + disc)
        }
    }

    /// Global (min over grid of λ_min, max over grid of λ_max).
    pub fn eigen_extremes(&self) -> (f64, f64) {
        use rayon::prelude::*;
        (0..self.points())
            .into_par_iter()
            .fold(
                || (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), p| {
                    let (a, b) = self.eigen_at(p);
                    (lo.min(a), hi.max(b))
                },
            )
            .reduce(
                || (f64::INFINITY, f64::NEG_INFINITY),
                |x, y| (x.0.min(y.0), x.1.max(y.1)),
            )
    }

    /// Per-point extremes of the spectrum of `self` relative to a positive
    /// definite `basis`: the roots c of det(A − cB) = 0.
    #[inline]
    pub fn relative_eigen_at(&self, basis: &HermitianField, p: usize) -> (f64, f64) {
        if self.n == 1 {
            let r = self.aa[p] / basis.aa[p];
            (r, r)
        } else {
            let det_a = self.aa[p] * self.bb[p]
                - (self.ab_re[p] * self.ab_re[p] + self.ab_im[p] * self.ab_im[p]);
            let det_b = basis.aa[p] * basis.bb[p]
                - (basis.ab_re[p] * basis.ab_re[p] + basis.ab_im[p] * basis.ab_im[p]);
            let m = self.aa[p] * basis.bb[p] + self.bb[p] * basis.aa[p]
                - 2.0 * (self.ab_re[p] * basis.ab_re[p] + self.ab_im[p] * basis.ab_im[p]);
            let disc = (m * m - 4.0 * det_a * det_b).max(0.0).sqrt();
            ((m - disc) / (2.0 * det_b), (m + disc) / (2.0 * det_b))
        }
    }

    pub fn relative_eigen_extremes(&self, basis: &HermitianField) -> (f64, f64) {
        use rayon::prelude::*;
        (0..self.points())
            .into_par_iter()
            .fold(
                || (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), p| {
                    let (a, b) = self.relative_eigen_at(basis, p);
                    (lo.min(a), hi.max(b))
                },
            )
            .reduce(
                || (f64::INFINITY, f64::NEG_INFINITY),
                |x, y| (x.0.min(y.0), x.1.max(y.1)),
            )
    }
}
