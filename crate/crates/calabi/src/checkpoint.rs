//! Binary trajectory checkpoints with bit-exact resume.
//!
//! Everything a continuation needs is stored in full precision: the spectral
//! coefficients of the potential, the adaptive step the next iteration would
//! have attempted, and the monitor's accumulated bounds. All integers and
//! float bit patterns are little-endian; an explicit endianness tag plus a
//! trailing content digest make silent corruption loud. A trajectory hash
//! over domain and class data stops a checkpoint from being resumed under a
//! config that describes a different flow.

use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::cohomology::CohomologyData;
use crate::error::Error;
use crate::flow::MonitorSnapshot;
use crate::grid::TorusDomain;
use crate::Result;

const MAGIC: &[u8; 8] = b"CALABICK";
const FORMAT_VERSION: u32 = 1;
const ENDIAN_TAG: u32 = 0x0102_0304;

/// Totals carried across resume boundaries so a continued run reports the
/// whole trajectory, not just its own segment.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CumulativeSummary {
    pub initial_calabi: f64,
    pub last_calabi: f64,
    pub accepted: u64,
    pub rejected: u64,
    pub volume_drift: f64,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    pub domain: Arc<TorusDomain>,
    pub cohomology: CohomologyData,
    pub t: f64,
    pub step: u64,
    /// Step size the next attempt would have used.
    pub dt_next: f64,
    pub summary: CumulativeSummary,
    pub monitor: MonitorSnapshot,
    /// Dense spectral coefficients of the potential, normalized (mean-free).
    pub coeffs: Vec<Complex64>,
}

/// Identity of a trajectory: the domain and the class being flowed. Flow
/// and output settings are deliberately excluded, so a resume may extend
/// t_max or tighten stop_ca without being mistaken for a different run.
pub fn trajectory_hash(domain: &TorusDomain, cohomology: &CohomologyData) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"CALABI-TRAJECTORY-V1");
    h.update((domain.n() as u64).to_le_bytes());
    h.update((domain.size() as u64).to_le_bytes());
    for a in 0..domain.axes() {
        h.update(domain.period(a).to_bits().to_le_bytes());
    }
    h.update((cohomology.n as u64).to_le_bytes());
    h.update(cohomology.c1_w_nm1.to_bits().to_le_bytes());
    h.update(cohomology.c1sq_w_nm2.to_bits().to_le_bytes());
    h.update(cohomology.w_n.to_bits().to_le_bytes());
    h.finalize().into()
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::with_capacity(256) }
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).ok_or_else(truncated)?;
        if end > self.buf.len() {
            return Err(truncated());
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
}

fn truncated() -> Error {
    Error::Checkpoint("file is truncated".into())
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(FORMAT_VERSION);
        w.u32(ENDIAN_TAG);
        w.bytes(&self.config_hash);

        w.u64(self.domain.n() as u64);
        w.u64(self.domain.size() as u64);
        for a in 0..self.domain.axes() {
            w.f64(self.domain.period(a));
        }
        w.u64(self.cohomology.n as u64);
        w.f64(self.cohomology.c1_w_nm1);
        w.f64(self.cohomology.c1sq_w_nm2);
        w.f64(self.cohomology.w_n);

        w.f64(self.t);
        w.u64(self.step);
        w.f64(self.dt_next);

        w.f64(self.summary.initial_calabi);
        w.f64(self.summary.last_calabi);
        w.u64(self.summary.accepted);
        w.u64(self.summary.rejected);
        w.f64(self.summary.volume_drift);

        let m = &self.monitor;
        w.f64(m.factor);
        w.u32(m.warmup_steps);
        w.u32(m.seen);
        w.f64(m.neg_seen);
        w.f64(m.pos_seen);
        w.f64(m.k3);
        w.f64(m.k4);
        w.u8(m.status_code);
        w.f64(m.exit_time);

        w.u64(self.coeffs.len() as u64);
        for c in &self.coeffs {
            w.f64(c.re);
            w.f64(c.im);
        }

        let digest: [u8; 32] = Sha256::digest(&w.buf).into();
        w.bytes(&digest);
        w.buf
    }

    pub fn decode(data: &[u8]) -> Result<Self> {
        if data.len() < 32 {
            return Err(truncated());
        }
        let (body, tail) = data.split_at(data.len() - 32);
        let digest: [u8; 32] = Sha256::digest(body).into();
        if digest != tail {
            return Err(Error::Checkpoint("content digest mismatch".into()));
        }

        let mut r = Reader::new(body);
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        let endian = r.u32()?;
        if endian != ENDIAN_TAG {
            return Err(Error::Checkpoint(format!(
                "endianness tag {endian:#010x} does not match {ENDIAN_TAG:#010x}"
            )));
        }
        let config_hash: [u8; 32] = r.take(32)?.try_into().unwrap();

        let n = r.u64()? as usize;
        let size = r.u64()? as usize;
        if n == 0 || n > 2 {
            return Err(Error::Checkpoint(format!("dimension {n} out of range")));
        }
        let mut periods = Vec::with_capacity(2 * n);
        for _ in 0..2 * n {
            periods.push(r.f64()?);
        }
        let domain = TorusDomain::new(n, size, &periods)
            .map_err(|e| Error::Checkpoint(format!("stored domain is invalid: {e}")))?;

        let cn = r.u64()? as usize;
        let c1_w_nm1 = r.f64()?;
        let c1sq_w_nm2 = r.f64()?;
        let w_n = r.f64()?;
        let cohomology = CohomologyData::new(cn, c1_w_nm1, c1sq_w_nm2, w_n)
            .map_err(|e| Error::Checkpoint(format!("stored class data is invalid: {e}")))?;

        let t = r.f64()?;
        let step = r.u64()?;
        let dt_next = r.f64()?;

        let summary = CumulativeSummary {
            initial_calabi: r.f64()?,
            last_calabi: r.f64()?,
            accepted: r.u64()?,
            rejected: r.u64()?,
            volume_drift: r.f64()?,
        };

        let monitor = MonitorSnapshot {
            factor: r.f64()?,
            warmup_steps: r.u32()?,
            seen: r.u32()?,
            neg_seen: r.f64()?,
            pos_seen: r.f64()?,
            k3: r.f64()?,
            k4: r.f64()?,
            status_code: r.u8()?,
            exit_time: r.f64()?,
        };

        let count = r.u64()? as usize;
        if count != domain.points() {
            return Err(Error::Checkpoint(format!(
                "coefficient count {count} does not match the {} grid points",
                domain.points()
            )));
        }
        let mut coeffs = Vec::with_capacity(count);
        for _ in 0..count {
            let re = r.f64()?;
            let im = r.f64()?;
            coeffs.push(Complex64::new(re, im));
        }
        if r.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes after payload".into()));
        }

        Ok(Self {
            config_hash,
            domain,
            cohomology,
            t,
            step,
            dt_next,
            summary,
            monitor,
            coeffs,
        })
    }

    /// Atomic-enough write: a sibling temp file is renamed over the target,
    /// so a crash never leaves a half-written checkpoint under the real name.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let bytes = self.encode();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, &bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let data = std::fs::read(path)?;
        Self::decode(&data)
    }

    /// Refuse checkpoints recorded for a different domain or class.
    pub fn verify_trajectory(&self, domain: &TorusDomain, cohomology: &CohomologyData) -> Result<()> {
        if self.config_hash != trajectory_hash(domain, cohomology) {
            return Err(Error::Checkpoint(
                "checkpoint belongs to a different trajectory (domain or class mismatch)".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{CosineMode, PotentialField};
    use crate::flow::{step_imex, FlowConfig, FlowDriver, FlowState, TrapMonitor};

    fn sample() -> Checkpoint {
        let domain = TorusDomain::new(1, 16, &[1.0, 2.0]).unwrap();
        let cohomology = CohomologyData::flat_torus(1, domain.background_volume()).unwrap();
        let phi = PotentialField::from_modes(
            domain.clone(),
            &[CosineMode { wavevector: vec![1, 0], amplitude: 1e-3 }],
        )
        .unwrap();
        let mut monitor = TrapMonitor::new(2.0, 2);
        monitor.observe(0.1, -0.3, 0.4);
        Checkpoint {
            config_hash: trajectory_hash(&domain, &cohomology),
            domain: domain.clone(),
            cohomology,
            t: 0.125,
            step: 17,
            dt_next: 3.5e-5,
            summary: CumulativeSummary {
                initial_calabi: 0.47,
                last_calabi: 1.2e-3,
                accepted: 17,
                rejected: 2,
                volume_drift: 3e-16,
            },
            monitor: monitor.snapshot(),
            coeffs: phi.dense_coeffs(),
        }
    }

    #[test]
    fn encode_decode_round_trips_bitwise() {
        let ck = sample();
        let back = Checkpoint::decode(&ck.encode()).unwrap();
        assert_eq!(ck.config_hash, back.config_hash);
        assert_eq!(*ck.domain, *back.domain);
        assert_eq!(ck.cohomology, back.cohomology);
        assert_eq!(ck.t.to_bits(), back.t.to_bits());
        assert_eq!(ck.step, back.step);
        assert_eq!(ck.dt_next.to_bits(), back.dt_next.to_bits());
        assert_eq!(ck.summary, back.summary);
        assert_eq!(ck.monitor, back.monitor);
        assert_eq!(ck.coeffs.len(), back.coeffs.len());
        for (a, b) in ck.coeffs.iter().zip(&back.coeffs) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn corruption_and_truncation_are_detected() {
        let bytes = sample().encode();

        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 0x40;
        assert!(matches!(
            Checkpoint::decode(&flipped),
            Err(Error::Checkpoint(_))
        ));

        assert!(matches!(
            Checkpoint::decode(&bytes[..bytes.len() - 7]),
            Err(Error::Checkpoint(_))
        ));

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] ^= 0xff;
        assert!(matches!(
            Checkpoint::decode(&wrong_magic),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn trajectory_hash_separates_runs() {
        let d16 = TorusDomain::new(1, 16, &[1.0, 2.0]).unwrap();
        let d32 = TorusDomain::new(1, 32, &[1.0, 2.0]).unwrap();
        let flat16 = CohomologyData::flat_torus(1, d16.background_volume()).unwrap();
        let other = CohomologyData::new(1, 0.5, 0.0, d16.background_volume()).unwrap();
        assert_ne!(trajectory_hash(&d16, &flat16), trajectory_hash(&d32, &flat16));
        assert_ne!(trajectory_hash(&d16, &flat16), trajectory_hash(&d16, &other));

        let ck = sample();
        assert!(ck.verify_trajectory(&d16, &flat16).is_ok());
        assert!(ck.verify_trajectory(&d32, &flat16).is_err());
    }

    #[test]
    fn resume_from_disk_continues_bit_identically() {
        let domain = TorusDomain::new(1, 16, &[1.0, 1.0]).unwrap();
        let phi = || {
            PotentialField::from_modes(
                domain.clone(),
                &[CosineMode { wavevector: vec![1, 0], amplitude: 5e-3 }],
            )
            .unwrap()
        };
        let cohomology = CohomologyData::flat_torus(1, domain.background_volume()).unwrap();
        let config = FlowConfig {
            dt_init: 1e-4,
            t_max: 2e-2,
            stop_ca: 0.0,
            warmup_steps: 3,
            ..FlowConfig::default()
        };

        let full = FlowDriver::new(phi(), 0.0, config.clone())
            .unwrap()
            .run()
            .unwrap();

        // Capture step 5 through an actual file, then continue from it.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mid.bin");
        let mut captured = false;
        FlowDriver::new(phi(), 0.0, config.clone())
            .unwrap()
            .run_with(|ev| {
                if ev.state.step == 5 && !captured {
                    captured = true;
                    Checkpoint {
                        config_hash: trajectory_hash(&domain, &cohomology),
                        domain: domain.clone(),
                        cohomology,
                        t: ev.state.t,
                        step: ev.state.step,
                        dt_next: ev.dt_next,
                        summary: CumulativeSummary::default(),
                        monitor: ev.monitor.snapshot(),
                        coeffs: ev.state.phi.dense_coeffs(),
                    }
                    .write_to(&path)?;
                }
                Ok(())
            })
            .unwrap();
        assert!(captured);

        let ck = Checkpoint::read_from(&path).unwrap();
        ck.verify_trajectory(&domain, &cohomology).unwrap();
        let state = FlowState::at(
            PotentialField::from_dense_coeffs(ck.domain.clone(), ck.coeffs.clone()),
            ck.cohomology.mu(),
            ck.t,
            ck.step,
        )
        .unwrap();
        let monitor = TrapMonitor::restore(&ck.monitor).unwrap();
        let resumed = FlowDriver::resume(state, monitor, ck.dt_next, 0.0, config)
            .unwrap()
            .run()
            .unwrap();

        assert_eq!(full.outcome, resumed.outcome);
        assert_eq!(full.state.step, resumed.state.step);
        assert_eq!(full.state.t.to_bits(), resumed.state.t.to_bits());
        assert_eq!(
            full.state.calabi.to_bits(),
            resumed.state.calabi.to_bits(),
            "continuation must be exact, not merely close"
        );
        for (a, b) in full.state.phi.values().iter().zip(resumed.state.phi.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        // One more step from each agrees too: the caches were rebuilt
        // faithfully, not just the raw potential.
        let fa = step_imex(&full.state, 0.0, 1e-4).unwrap();
        let fb = step_imex(&resumed.state, 0.0, 1e-4).unwrap();
        assert_eq!(fa.calabi.to_bits(), fb.calabi.to_bits());
    }
}
