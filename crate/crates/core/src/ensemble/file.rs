//! Binary ensemble container.
//!
//! All integers and floats are little-endian. Layout, in order:
//!
//! | field              | type        | notes                                   |
//! |--------------------|-------------|-----------------------------------------|
//! | magic              | `[u8; 8]`   | `b"GRIDENS\0"`                          |
//! | format major       | `u16`       | readers reject a newer major            |
//! | format minor       | `u16`       |                                         |
//! | n_realizations     | `u64`       | `N`                                     |
//! | n_steps            | `u64`       | `K`; each realization holds `K + 1` states |
//! | dt                 | `f64`       | seconds                                 |
//! | t_end              | `f64`       | seconds                                 |
//! | variable order     | `[u8; 4]`   | `b"TWP\0"`: theta, omega, pm_prime      |
//! | master_seed        | `u64`       |                                         |
//! | grid params        | `6 x f64`   | p_max, h_inertia, damping, p_m_mean, omega_b, omega_s |
//! | ou params          | `2 x f64`   | sigma, lambda                           |
//! | init theta, omega  | `2 x f64`   |                                         |
//! | init pm mode       | `u8`        | 0 = sample stationary, 1 = fixed        |
//! | init pm value      | `f64`       | 0 unless fixed                          |
//! | data               | `N (K+1) 3 x f64` | realization-major, then time, then variable |
//! | checksum           | `u64`       | XXH64 (seed 0) of every preceding byte  |

use std::fs::File;
use std::hash::Hasher;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use twox_hash::XxHash64;

use super::Ensemble;
use crate::error::{Error, Result};
use crate::sde::{GridParams, InitialPm, OuParams, SimConfig};

pub const FORMAT_MAJOR: u16 = 1;
pub const FORMAT_MINOR: u16 = 0;

const MAGIC: &[u8; 8] = b"GRIDENS\0";
const VAR_ORDER: &[u8; 4] = b"TWP\0";
const HEADER_LEN: usize = 8 + 2 + 2 + 8 + 8 + 8 + 8 + 4 + 8 + 6 * 8 + 2 * 8 + 2 * 8 + 1 + 8;

struct HashingWriter<W: Write> {
    inner: W,
    hasher: XxHash64,
}

impl<W: Write> HashingWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.hasher.write(bytes);
        self.inner.write_all(bytes)
    }
}

fn header_bytes(ens: &Ensemble) -> Vec<u8> {
    let mut h = Vec::with_capacity(HEADER_LEN);
    let sim = ens.sim();
    let g = ens.grid();
    let ou = ens.ou();
    h.extend_from_slice(MAGIC);
    h.extend_from_slice(&FORMAT_MAJOR.to_le_bytes());
    h.extend_from_slice(&FORMAT_MINOR.to_le_bytes());
    h.extend_from_slice(&(ens.n_realizations() as u64).to_le_bytes());
    h.extend_from_slice(&(ens.n_steps() as u64).to_le_bytes());
    for v in [sim.dt, sim.t_end] {
        h.extend_from_slice(&v.to_le_bytes());
    }
    h.extend_from_slice(VAR_ORDER);
    h.extend_from_slice(&sim.seed.to_le_bytes());
    for v in [
        g.p_max,
        g.h_inertia,
        g.damping,
        g.p_m_mean,
        g.omega_b,
        g.omega_s,
        ou.sigma,
        ou.lambda,
        sim.init_theta,
        sim.init_omega,
    ] {
        h.extend_from_slice(&v.to_le_bytes());
    }
    let (mode, value) = match sim.init_pm {
        InitialPm::SampleStationary => (0u8, 0.0),
        InitialPm::Fixed(v) => (1u8, v),
    };
    h.push(mode);
    h.extend_from_slice(&value.to_le_bytes());
    debug_assert_eq!(h.len(), HEADER_LEN);
    h
}

pub fn save_ensemble(ens: &Ensemble, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut w = HashingWriter {
        inner: BufWriter::with_capacity(1 << 20, file),
        hasher: XxHash64::with_seed(0),
    };
    w.put(&header_bytes(ens))?;
    let mut buf = Vec::with_capacity(8 * 4096);
    for chunk in ens.data().chunks(4096) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.put(&buf)?;
    }
    let sum = w.hasher.finish();
    w.inner.write_all(&sum.to_le_bytes())?;
    w.inner.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        s
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take(2).try_into().unwrap())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take(8).try_into().unwrap())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take(8).try_into().unwrap())
    }
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<Ensemble> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;

    if bytes.len() < 12 {
        return Err(Error::ChecksumMismatch);
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::BadFormat("not an ensemble file".into()));
    }
    let major = u16::from_le_bytes([bytes[8], bytes[9]]);
    if major != FORMAT_MAJOR {
        return Err(Error::FormatVersionMismatch {
            found: major,
            supported: FORMAT_MAJOR,
        });
    }
    if bytes.len() < HEADER_LEN + 8 {
        return Err(Error::ChecksumMismatch);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let mut hasher = XxHash64::with_seed(0);
    hasher.write(body);
    if hasher.finish() != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(Error::ChecksumMismatch);
    }

    let mut c = Cursor {
        bytes: body,
        pos: 10,
    };
    let _minor = c.u16();
    let n = c.u64() as usize;
    let k = c.u64() as usize;
    let dt = c.f64();
    let t_end = c.f64();
    if c.take(4) != VAR_ORDER {
        return Err(Error::BadFormat("unexpected variable order".into()));
    }
    let seed = c.u64();
    let grid = GridParams {
        p_max: c.f64(),
        h_inertia: c.f64(),
        damping: c.f64(),
        p_m_mean: c.f64(),
        omega_b: c.f64(),
        omega_s: c.f64(),
    };
    let ou = OuParams {
        sigma: c.f64(),
        lambda: c.f64(),
    };
    let init_theta = c.f64();
    let init_omega = c.f64();
    let mode = c.take(1)[0];
    let pm_value = c.f64();
    let init_pm = match mode {
        0 => InitialPm::SampleStationary,
        1 => InitialPm::Fixed(pm_value),
        m => return Err(Error::BadFormat(format!("unknown initial pm mode {m}"))),
    };
    let sim = SimConfig {
        dt,
        t_end,
        seed,
        init_theta,
        init_omega,
        init_pm,
    };
    if sim.n_steps() != k {
        return Err(Error::BadFormat("step count disagrees with dt and t_end".into()));
    }
    let expected = n
        .checked_mul(k + 1)
        .and_then(|v| v.checked_mul(24))
        .ok_or_else(|| Error::BadFormat("dimensions overflow".into()))?;
    if body.len() - c.pos != expected {
        return Err(Error::BadFormat(format!(
            "expected {expected} data bytes, found {}",
            body.len() - c.pos
        )));
    }
    let data = body[c.pos..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ensemble::from_parts(grid, ou, sim, n, data)
}
