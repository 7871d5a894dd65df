//! Multi-axis FFT sweeps and Fourier multipliers.
//!
//! Fields are stored row-major with the last axis contiguous. A full
//! transform is one in-place pass per axis; strided axes go through small
//! cache-resident tiles. Spectra built from explicit mode lists are mostly
//! zero, and an [`Occupancy`] records which per-axis indices can be nonzero
//! so sweeps skip lines that are identically zero.
//!
//! Coefficient convention: `forward_coeffs` returns c(m) with
//! f(x) = Σ_m c(m) e^{2πi Σ_a m_a x_a / L_a}, so a cosine of amplitude A on
//! wavevector k contributes c(±k) = A/2. Synthesis is the unnormalized
//! inverse transform of those coefficients.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::grid::TorusDomain;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Width (in inner positions) of the gather tiles used on strided axes.
const TILE: usize = 64;

/// Lines per task on the contiguous axis.
const CONTIG_BATCH: usize = 64;

/// A sparse pass runs line-by-line; it is chosen when the occupied lines are
/// at most this fraction of the total.
const SPARSE_FRACTION: usize = 8;

/// Per-axis sets of spectral indices that may hold nonzero coefficients.
#[derive(Clone, Debug)]
pub struct Occupancy {
    sets: Vec<Vec<usize>>,
}

impl Occupancy {
    /// Bounding occupancy of a set of linear spectral indices: per axis, the
    /// sorted set of coordinates that appear. The product of these sets is a
    /// superset of the true support, which is all a sweep needs.
    pub fn from_linear_indices<I: IntoIterator<Item = usize>>(
        domain: &TorusDomain,
        indices: I,
    ) -> Self {
        let axes = domain.axes();
        let mut sets = vec![Vec::new(); axes];
        for idx in indices {
            let coords = domain.decode(idx);
            for a in 0..axes {
                sets[a].push(coords[a]);
            }
        }
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
        }
        Self { sets }
    }

    /// Marks the DC bin as possibly occupied (index 0 on every axis).
    pub(crate) fn include_dc(&mut self) {
        for s in &mut self.sets {
            if s.first() != Some(&0) {
                s.insert(0, 0);
            }
        }
    }

    fn set(&self, a: usize) -> &[usize] {
        &self.sets[a]
    }
}

struct SendPtr(*mut Complex64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

impl SendPtr {
    fn get(&self) -> *mut Complex64 {
        self.0
    }
}

/// In-place FFT over every axis. `forward` selects the exponent sign
/// (forward = e^{-2πi...}); both directions are unnormalized.
pub fn sweep_in_place(
    domain: &TorusDomain,
    data: &mut [Complex64],
    forward: bool,
    occupancy: Option<&Occupancy>,
) {
    assert_eq!(data.len(), domain.points());
    let axes = domain.axes();
    // Per-axis index sets still known to bound the support; an axis becomes
    // full once it has been transformed.
    let mut sets: Vec<Option<&[usize]>> = match occupancy {
        Some(occ) => (0..axes).map(|a| Some(occ.set(a))).collect(),
        None => vec![None; axes],
    };
    for a in 0..axes {
        pass_axis(domain, data, a, forward, &sets);
        sets[a] = None;
    }
}

fn pass_axis(
    domain: &TorusDomain,
    data: &mut [Complex64],
    axis: usize,
    forward: bool,
    sets: &[Option<&[usize]>],
) {
    let n = domain.size();
    let axes = domain.axes();
    let total_lines = domain.points() / n;

    let occupied_lines: usize = (0..axes)
        .filter(|&b| b != axis)
        .map(|b| sets[b].map_or(n, <[usize]>::len))
        .fold(1usize, usize::saturating_mul);

    if occupied_lines == 0 {
        return;
    }
    if occupied_lines.saturating_mul(SPARSE_FRACTION) < total_lines {
        pass_sparse(domain, data, axis, forward, sets);
    } else if axis == axes - 1 {
        pass_contiguous(domain, data, forward);
    } else {
        pass_strided(domain, data, axis, forward);
    }
}

/// Line-by-line pass over the (few) lines that can be nonzero.
fn pass_sparse(
    domain: &TorusDomain,
    data: &mut [Complex64],
    axis: usize,
    forward: bool,
    sets: &[Option<&[usize]>],
) {
    let n = domain.size();
    let stride = domain.stride(axis);
    let plan = domain.fft_plan(forward);
    let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
    let mut line = vec![ZERO; n];

    let mut bases = vec![0usize];
    for (b, &set) in sets.iter().enumerate() {
        if b == axis {
            continue;
        }
        let s = domain.stride(b);
        let mut next = Vec::with_capacity(bases.len() * set.map_or(n, <[usize]>::len));
        match set {
            Some(idxs) => {
                for &base in &bases {
                    for &i in idxs {
                        next.push(base + i * s);
                    }
                }
            }
            None => {
                for &base in &bases {
                    for i in 0..n {
                        next.push(base + i * s);
                    }
                }
            }
        }
        bases = next;
    }

    for base in bases {
        if stride == 1 {
            plan.process_with_scratch(&mut data[base..base + n], &mut scratch);
        } else {
            for (j, v) in line.iter_mut().enumerate() {
                *v = data[base + j * stride];
            }
            plan.process_with_scratch(&mut line, &mut scratch);
            for (j, v) in line.iter().enumerate() {
                data[base + j * stride] = *v;
            }
        }
    }
}

fn pass_contiguous(domain: &TorusDomain, data: &mut [Complex64], forward: bool) {
    let n = domain.size();
    let plan = domain.fft_plan(forward);
    data.par_chunks_mut(n * CONTIG_BATCH).for_each_init(
        || vec![ZERO; plan.get_inplace_scratch_len()],
        |scratch, chunk| {
            for line in chunk.chunks_exact_mut(n) {
                plan.process_with_scratch(line, scratch);
            }
        },
    );
}

/// Tiled pass over a strided axis: gather TILE lines into a cache-resident
/// buffer (transposing so lines become contiguous), transform, scatter back.
fn pass_strided(domain: &TorusDomain, data: &mut [Complex64], axis: usize, forward: bool) {
    let n = domain.size();
    let stride = domain.stride(axis);
    let tile_w = TILE.min(stride);
    let block = n * stride; // span of one full axis line group
    let nblocks = domain.points() / block;
    let tiles_per_block = stride / tile_w;
    let plan = domain.fft_plan(forward);

    let ptr = SendPtr(data.as_mut_ptr());
    (0..nblocks * tiles_per_block)
        .into_par_iter()
        .with_min_len(4)
        .for_each_init(
            || {
                (
                    vec![ZERO; tile_w * n],
                    vec![ZERO; plan.get_inplace_scratch_len()],
                )
            },
            |(tile, scratch), q| {
                let b = q / tiles_per_block;
                let t0 = (q % tiles_per_block) * tile_w;
                let base = b * block + t0;
                // SAFETY: tile (b, t0) touches exactly the indices
                // base + j*stride + tt with j < n, tt < tile_w. The t0 ranges
                // of distinct tiles within a block are disjoint and blocks
                // are disjoint, so no two tasks alias.
                let data = ptr.get();
                unsafe {
                    for j in 0..n {
                        let src = data.add(base + j * stride);
                        for tt in 0..tile_w {
                            *tile.get_unchecked_mut(tt * n + j) = *src.add(tt);
                        }
                    }
                }
                for line in tile.chunks_exact_mut(n) {
                    plan.process_with_scratch(line, scratch);
                }
                unsafe {
                    for j in 0..n {
                        let dst = data.add(base + j * stride);
                        for tt in 0..tile_w {
                            *dst.add(tt) = *tile.get_unchecked(tt * n + j);
                        }
                    }
                }
            },
        );
}

/// Forward transform of a real field into normalized coefficients c(m).
pub fn forward_coeffs(domain: &TorusDomain, values: &[f64]) -> Vec<Complex64> {
    let mut buf = forward_unscaled(domain, values);
    let inv_m = 1.0 / domain.points() as f64;
    buf.par_iter_mut().for_each(|c| *c *= inv_m);
    buf
}

/// Forward transform without the 1/M normalization; hot paths fold the scale
/// into the multiplier that always follows.
pub(crate) fn forward_unscaled(domain: &TorusDomain, values: &[f64]) -> Vec<Complex64> {
    assert_eq!(values.len(), domain.points());
    let mut buf: Vec<Complex64> = values
        .par_iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    sweep_in_place(domain, &mut buf, true, None);
    buf
}

/// Synthesizes physical values from normalized coefficients (consumed).
pub fn synthesize_complex(
    domain: &TorusDomain,
    mut coeffs: Vec<Complex64>,
    occupancy: Option<&Occupancy>,
) -> Vec<Complex64> {
    sweep_in_place(domain, &mut coeffs, false, occupancy);
    coeffs
}

/// Synthesis of a real field; the imaginary part is dropped (it is FFT noise
/// whenever the coefficients are Hermitian-symmetric).
pub fn synthesize_real(
    domain: &TorusDomain,
    coeffs: Vec<Complex64>,
    occupancy: Option<&Occupancy>,
) -> Vec<f64> {
    let full = synthesize_complex(domain, coeffs, occupancy);
    full.par_iter().map(|c| c.re).collect()
}

/// Two real fields from one transform: the input must be packed as
/// â(m) + i·b̂(m) with â, b̂ Hermitian-symmetric; the output is (a, b).
pub fn synthesize_real_pair(
    domain: &TorusDomain,
    coeffs: Vec<Complex64>,
    occupancy: Option<&Occupancy>,
) -> (Vec<f64>, Vec<f64>) {
    let full = synthesize_complex(domain, coeffs, occupancy);
    let a = full.par_iter().map(|c| c.re).collect();
    let b = full.par_iter().map(|c| c.im).collect();
    (a, b)
}

/// One Fourier mode of the domain as seen by a multiplier.
#[derive(Clone, Copy, Debug)]
pub struct Mode {
    /// Folded frequency over period, per real axis; unused axes stay zero.
    pub w: [f64; 4],
    /// True when any axis index sits at the folding frequency N/2, where the
    /// ±k pairing that keeps real fields real is unavailable.
    pub nyquist: bool,
}

/// Applies a Fourier multiplier: out(m) = sym(m) · src(m).
pub fn map_spectrum(
    domain: &TorusDomain,
    src: &[Complex64],
    sym: impl Fn(Mode) -> Complex64 + Sync,
) -> Vec<Complex64> {
    assert_eq!(src.len(), domain.points());
    let n = domain.size();
    let half = n / 2;
    let mut out = vec![ZERO; src.len()];
    match domain.axes() {
        2 => {
            let t0 = domain.freq_scaled_table(0);
            let t1 = domain.freq_scaled_table(1);
            out.par_chunks_exact_mut(n)
                .zip(src.par_chunks_exact(n))
                .enumerate()
                .for_each(|(i0, (orow, srow))| {
                    let w0 = t0[i0];
                    let ny0 = i0 == half;
                    for i1 in 0..n {
                        let mode = Mode {
                            w: [w0, t1[i1], 0.0, 0.0],
                            nyquist: ny0 || i1 == half,
                        };
                        orow[i1] = srow[i1] * sym(mode);
                    }
                });
        }
        4 => {
            let t0 = domain.freq_scaled_table(0);
            let t1 = domain.freq_scaled_table(1);
            let t2 = domain.freq_scaled_table(2);
            let t3 = domain.freq_scaled_table(3);
            let plane = n * n;
            out.par_chunks_exact_mut(plane)
                .zip(src.par_chunks_exact(plane))
                .enumerate()
                .for_each(|(o, (oplane, splane))| {
                    let (i0, i1) = (o / n, o % n);
                    let (w0, w1) = (t0[i0], t1[i1]);
                    let ny01 = i0 == half || i1 == half;
                    for i2 in 0..n {
                        let w2 = t2[i2];
                        let ny012 = ny01 || i2 == half;
                        let orow = &mut oplane[i2 * n..(i2 + 1) * n];
                        let srow = &splane[i2 * n..(i2 + 1) * n];
                        for i3 in 0..n {
                            let mode = Mode {
                                w: [w0, w1, w2, t3[i3]],
                                nyquist: ny012 || i3 == half,
                            };
                            orow[i3] = srow[i3] * sym(mode);
                        }
                    }
                });
        }
        _ => unreachable!("domains are validated to 2 or 4 real axes"),
    }
    out
}

/// Builds a spectrum from sparse entries, applying a multiplier to each:
/// out(m) = sym(m) · c for every (linear index of m, c) pair; all other
/// coefficients are zero.
pub fn build_from_entries(
    domain: &TorusDomain,
    entries: &[(usize, Complex64)],
    sym: impl Fn(Mode) -> Complex64,
) -> Vec<Complex64> {
    let mut out = vec![ZERO; domain.points()];
    let half = domain.size() / 2;
    for &(idx, c) in entries {
        let coords = domain.decode(idx);
        let mut w = [0.0; 4];
        let mut nyquist = false;
        for (a, &i) in coords.iter().enumerate() {
            w[a] = domain.freq_scaled(a, i);
            nyquist |= i == half;
        }
        out[idx] += c * sym(Mode { w, nyquist });
    }
    out
}

/// Fraction of spectral energy (DC excluded) in the top third of the
/// resolved band, measured in the max norm of the folded wavevector. A value
/// above ~1e−8 means the grid is no longer resolving the field.
pub fn tail_energy_fraction(domain: &TorusDomain, coeffs: &[Complex64]) -> f64 {
    assert_eq!(coeffs.len(), domain.points());
    let n = domain.size();
    let cut = (n / 3) as i64 + 1;
    let axes = domain.axes();
    let chunk = n; // rows: decode the leading coordinates once per row
    let sums: Vec<(f64, f64)> = coeffs
        .par_chunks_exact(chunk)
        .enumerate()
        .map(|(row, cs)| {
            let mut outer = [0i64; 4];
            let mut r = row;
            for a in (0..axes - 1).rev() {
                outer[a] = domain.freq_int(r % n);
                r /= n;
            }
            let outer_max = outer[..axes - 1].iter().map(|m| m.abs()).max().unwrap_or(0);
            let mut total = 0.0;
            let mut tail = 0.0;
            for (i, c) in cs.iter().enumerate() {
                if row == 0 && i == 0 {
                    continue; // DC
                }
                let e = c.norm_sqr();
                total += e;
                if outer_max.max(domain.freq_int(i).abs()) >= cut {
                    tail += e;
                }
            }
            (total, tail)
        })
        .collect();
    let total: f64 = sums.iter().map(|s| s.0).sum();
    let tail: f64 = sums.iter().map(|s| s.1).sum();
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

/// Fourier symbols of the Wirtinger calculus on the split coordinates
/// z_j = x_j + i y_j, acting on e^{2πi Σ m_a x_a / L_a}.
pub mod symbols {
    use super::Mode;
    use rustfft::num_complex::Complex64;
    use std::f64::consts::PI;

    /// ∂_j = ½(∂_{x_j} − i ∂_{y_j}): symbol π(w_{y_j} + i w_{x_j}).
    pub fn wirtinger(mode: Mode, j: usize) -> Complex64 {
        Complex64::new(PI * mode.w[2 * j + 1], PI * mode.w[2 * j])
    }

    /// ∂_j̄ = ½(∂_{x_j} + i ∂_{y_j}): symbol π(−w_{y_j} + i w_{x_j}).
    pub fn wirtinger_bar(mode: Mode, j: usize) -> Complex64 {
        Complex64::new(-PI * mode.w[2 * j + 1], PI * mode.w[2 * j])
    }

    /// ∂_i∂_j̄. Mixed entries (i ≠ j) involve odd powers of single-axis
    /// frequencies, which carry no sign information at the folding frequency;
    /// those modes are projected out to keep Hermitian fields Hermitian.
    pub fn hessian_entry(mode: Mode, i: usize, j: usize) -> Complex64 {
        if i != j && mode.nyquist {
            return Complex64::new(0.0, 0.0);
        }
        wirtinger(mode, i) * wirtinger_bar(mode, j)
    }

    /// Background complex Laplacian Δ₀ = Σ_j ∂_j∂_j̄ = ¼ Δ_euclid:
    /// eigenvalue −π² Σ_a w_a².
    pub fn laplace(mode: Mode) -> f64 {
        let s: f64 = mode.w.iter().map(|w| w * w).sum();
        -PI * PI * s
    }

    /// Δ₀²: eigenvalue (π² Σ_a w_a²)², the linearized decay rate of the flow.
    pub fn biharmonic(mode: Mode) -> f64 {
        let l = laplace(mode);
        l * l
    }
}
