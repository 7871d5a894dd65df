use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// A flat torus T^n = C^n / Λ with a uniform tensor grid.
///
/// Complex coordinates z_j = x_j + i y_j are split into 2n real axes ordered
/// (x_1, y_1, ..., x_n, y_n); axis a has period `periods[a]` and carries N
/// grid points, so fields live on N^(2n) points stored row-major with the
/// last axis contiguous.
///
/// The reference Kähler form is ω = (i/2) Σ dz_j ∧ dz̄_j, whose volume form
/// is ωⁿ = n! dx_1 dy_1 ... dx_n dy_n; the total volume n!·∏ periods is
/// cached in [`TorusDomain::background_volume`].
pub struct TorusDomain {
    n: usize,
    size: usize,
    periods: Vec<f64>,
    points: usize,
    background_volume: f64,
    /// Folded integer frequency per grid index: i ↦ i for i ≤ N/2, else i − N.
    freq_int: Vec<i64>,
    /// freq_scaled[a][i] = folded(i) / periods[a].
    freq_scaled: Vec<Vec<f64>>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusDomain")
            .field("n", &self.n)
            .field("size", &self.size)
            .field("periods", &self.periods)
            .finish()
    }
}

impl PartialEq for TorusDomain {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.size == other.size && self.periods == other.periods
    }
}

impl TorusDomain {
    /// Builds a domain with complex dimension `n` (1 or 2), `size` grid
    /// points per real axis (a power of two, at least 8), and one period per
    /// real axis (2n positive reals).
    pub fn new(n: usize, size: usize, periods: &[f64]) -> Result<Arc<Self>> {
        if !(n == 1 || n == 2) {
            return Err(Error::InvalidDomain(format!(
                "complex dimension must be 1 or 2, got {n}"
            )));
        }
        if size < 8 || !size.is_power_of_two() {
            return Err(Error::InvalidDomain(format!(
                "grid size must be a power of two >= 8, got {size}"
            )));
        }
        let axes = 2 * n;
        if periods.len() != axes {
            return Err(Error::InvalidDomain(format!(
                "expected {axes} periods (one per real axis), got {}",
                periods.len()
            )));
        }
        if periods.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(Error::InvalidDomain(format!(
                "periods must be positive and finite, got {periods:?}"
            )));
        }

        let points = size.pow(axes as u32);
        let factorial = if n == 1 { 1.0 } else { 2.0 };
        let background_volume = factorial * periods.iter().product::<f64>();

        let freq_int: Vec<i64> = (0..size)
            .map(|i| {
                if i <= size / 2 {
                    i as i64
                } else {
                    i as i64 - size as i64
                }
            })
            .collect();
        let freq_scaled = periods
            .iter()
            .map(|&p| freq_int.iter().map(|&m| m as f64 / p).collect())
            .collect();

        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(size);
        let fft_inverse = planner.plan_fft_inverse(size);

        Ok(Arc::new(Self {
            n,
            size,
            periods: periods.to_vec(),
            points,
            background_volume,
            freq_int,
            freq_scaled,
            fft_forward,
            fft_inverse,
        }))
    }

    /// Complex dimension (1 or 2).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of real axes, 2n.
    pub fn axes(&self) -> usize {
        2 * self.n
    }

    /// Grid points per real axis.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Period of real axis `a`.
    pub fn period(&self, a: usize) -> f64 {
        self.periods[a]
    }

    /// All periods, ordered (x_1, y_1, ..., x_n, y_n).
    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    /// Total number of grid points, N^(2n).
    pub fn points(&self) -> usize {
        self.points
    }

    /// ∫ ωⁿ over the torus: n!·∏ periods.
    pub fn background_volume(&self) -> f64 {
        self.background_volume
    }

    /// n! as a float (1 for n = 1, 2 for n = 2).
    pub fn dim_factorial(&self) -> f64 {
        if self.n == 1 {
            1.0
        } else {
            2.0
        }
    }

    /// Memory stride of axis `a` (last axis contiguous).
    pub fn stride(&self, a: usize) -> usize {
        self.size.pow((self.axes() - 1 - a) as u32)
    }

    /// Folded integer frequency for grid index `i` along any axis.
    pub fn freq_int(&self, i: usize) -> i64 {
        self.freq_int[i]
    }

    /// Folded frequency divided by the axis period: the quantity entering
    /// every Fourier multiplier.
    pub fn freq_scaled(&self, a: usize, i: usize) -> f64 {
        self.freq_scaled[a][i]
    }

    pub(crate) fn freq_scaled_table(&self, a: usize) -> &[f64] {
        &self.freq_scaled[a]
    }

    pub(crate) fn fft_plan(&self, forward: bool) -> &Arc<dyn Fft<f64>> {
        if forward {
            &self.fft_forward
        } else {
            &self.fft_inverse
        }
    }

    /// Validates a wavevector (one integer per real axis) and returns the
    /// grid index of its Fourier bin. Components must satisfy |k| < N/2;
    /// anything at or beyond the folding frequency is rejected as aliased.
    pub fn mode_index(&self, k: &[i64]) -> Result<usize> {
        self.check_wavevector(k)?;
        let size = self.size as i64;
        let mut idx = 0usize;
        for &ka in k {
            let i = if ka >= 0 { ka } else { ka + size };
            idx = idx * self.size + i as usize;
        }
        Ok(idx)
    }

    /// Checks dimension and aliasing for a wavevector without converting it.
    pub fn check_wavevector(&self, k: &[i64]) -> Result<()> {
        if k.len() != self.axes() {
            return Err(Error::DimensionMismatch(format!(
                "wavevector {k:?} has {} components, domain has {} real axes",
                k.len(),
                self.axes()
            )));
        }
        let nyquist = (self.size / 2) as i64;
        if k.iter().any(|&ka| ka.abs() >= nyquist) {
            return Err(Error::AliasedMode {
                k: k.to_vec(),
                nyquist,
            });
        }
        Ok(())
    }

    /// Grid coordinates of a linear index, one entry per real axis.
    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.axes()];
        for a in (0..self.axes()).rev() {
            out[a] = idx % self.size;
            idx /= self.size;
        }
        out
    }

    /// Physical coordinate of grid index `i` along axis `a`.
    pub fn coordinate(&self, a: usize, i: usize) -> f64 {
        self.periods[a] * i as f64 / self.size as f64
    }

    /// Eigenvalue of the background complex Laplacian Δ₀ = Σ_j ∂_j∂_j̄ on the
    /// mode with the given wavevector: −π² Σ_a (k_a / L_a)².
    pub fn laplace_eigenvalue(&self, k: &[i64]) -> Result<f64> {
        self.check_wavevector(k)?;
        let s: f64 = k
            .iter()
            .zip(&self.periods)
            .map(|(&ka, &p)| {
                let r = ka as f64 / p;
                r * r
            })
            .sum();
        Ok(-std::f64::consts::PI.powi(2) * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_matches_dimension_factorial_times_periods() {
        let d = TorusDomain::new(1, 64, &[1.0, 1.0]).unwrap();
        assert_eq!(d.background_volume(), 1.0);
        let d = TorusDomain::new(2, 32, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(d.background_volume(), 2.0);
        let d = TorusDomain::new(1, 64, &[2.0, 1.0]).unwrap();
        assert_eq!(d.background_volume(), 2.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TorusDomain::new(3, 64, &[1.0; 6]).is_err());
        assert!(TorusDomain::new(0, 64, &[]).is_err());
        assert!(TorusDomain::new(1, 48, &[1.0, 1.0]).is_err());
        assert!(TorusDomain::new(1, 4, &[1.0, 1.0]).is_err());
        assert!(TorusDomain::new(1, 64, &[1.0]).is_err());
        assert!(TorusDomain::new(1, 64, &[1.0, -1.0]).is_err());
        assert!(TorusDomain::new(1, 64, &[1.0, f64::NAN]).is_err());
        assert!(TorusDomain::new(2, 32, &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn frequency_folding_covers_full_range() {
        let d = TorusDomain::new(1, 8, &[1.0, 1.0]).unwrap();
        let freqs: Vec<i64> = (0..8).map(|i| d.freq_int(i)).collect();
        assert_eq!(freqs, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }

    #[test]
    fn mode_index_round_trips_through_folding() {
        let d = TorusDomain::new(1, 16, &[1.0, 1.0]).unwrap();
        let idx = d.mode_index(&[-1, 3]).unwrap();
        let coords = d.decode(idx);
        assert_eq!(coords, vec![15, 3]);
        assert_eq!(d.freq_int(coords[0]), -1);
        assert_eq!(d.freq_int(coords[1]), 3);
    }

    #[test]
    fn aliased_wavevectors_are_rejected() {
        let d = TorusDomain::new(1, 16, &[1.0, 1.0]).unwrap();
        assert!(d.mode_index(&[7, 0]).is_ok());
        assert!(matches!(
            d.mode_index(&[8, 0]),
            Err(Error::AliasedMode { .. })
        ));
        assert!(matches!(
            d.mode_index(&[0, -8]),
            Err(Error::AliasedMode { .. })
        ));
        assert!(matches!(
            d.mode_index(&[0, 0, 1]),
            Err(Error::DimensionMismatch(..))
        ));
    }

    #[test]
    fn laplace_eigenvalue_matches_closed_form() {
        let d = TorusDomain::new(1, 64, &[1.0, 1.0]).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert_eq!(d.laplace_eigenvalue(&[1, 0]).unwrap(), -pi2);
        assert_eq!(d.laplace_eigenvalue(&[0, 0]).unwrap(), 0.0);
        // doubling a period quarters the eigenvalue contribution of that axis
        let d2 = TorusDomain::new(1, 64, &[2.0, 1.0]).unwrap();
        assert_eq!(d2.laplace_eigenvalue(&[1, 0]).unwrap(), -pi2 / 4.0);
    }

    #[test]
    fn strides_are_row_major() {
        let d = TorusDomain::new(2, 8, &[1.0; 4]).unwrap();
        assert_eq!(d.stride(3), 1);
        assert_eq!(d.stride(2), 8);
        assert_eq!(d.stride(1), 64);
        assert_eq!(d.stride(0), 512);
        assert_eq!(d.points(), 4096);
    }
}
