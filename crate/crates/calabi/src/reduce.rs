//! Deterministic compensated reductions.
//!
//! Grid sums feed energies, tolerances, and CSV output, so they must not
//! depend on thread count or scheduling. Every reduction here splits the
//! input into fixed-size chunks, reduces each chunk with Neumaier
//! compensation, and combines the per-chunk results in index order. The
//! chunk layer may run on rayon; the combine step is sequential.

use rayon::prelude::*;

const CHUNK: usize = 4096;

#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn combine(parts: Vec<Kahan>) -> f64 {
    let mut acc = Kahan::default();
    for p in parts {
        acc.add(p.sum);
        acc.add(p.comp);
    }
    acc.value()
}

/// Compensated sum, bitwise independent of the rayon thread count.
pub fn sum(values: &[f64]) -> f64 {
    let parts: Vec<Kahan> = values
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Kahan::default();
            for &v in chunk {
                acc.add(v);
            }
            acc
        })
        .collect();
    combine(parts)
}

/// Compensated Σ_{p < len} f(p), the fused form for integrands assembled
/// from several arrays. Chunking is by index, so the result is identical to
/// the slice-based reductions' ordering.
pub fn sum_indexed(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let starts: Vec<usize> = (0..len).step_by(CHUNK.max(1)).collect();
    let parts: Vec<Kahan> = starts
        .par_iter()
        .map(|&s| {
            let mut acc = Kahan::default();
            for p in s..(s + CHUNK).min(len) {
                acc.add(f(p));
            }
            acc
        })
        .collect();
    combine(parts)
}

pub fn min(values: &[f64]) -> f64 {
    values
        .par_chunks(CHUNK)
        .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

pub fn max(values: &[f64]) -> f64 {
    values
        .par_chunks(CHUNK)
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn max_abs(values: &[f64]) -> f64 {
    values
        .par_chunks(CHUNK)
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}
