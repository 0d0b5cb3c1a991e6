//! QSL1 binary snapshots of a wavefunction.
//!
//! Layout, little-endian: `"QSL1"`, `u32` version, `u64` n_points, `f64`
//! x_min, dx, mass, length_unit_m, mass_unit_kg, then `n_points` `(re, im)`
//! `f64` pairs.

use std::fs;
use std::path::Path;

use grwlab_core::{Complex64, Grid1D, UnitSystem, WaveFunction};

use crate::error::{IoError, Result};

pub const MAGIC: &[u8; 4] = b"QSL1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 8 + 5 * 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub psi: WaveFunction,
    pub units: UnitSystem,
}

pub fn encode(psi: &WaveFunction, units: &UnitSystem) -> Vec<u8> {
    let g = psi.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * g.n_points());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.n_points() as u64).to_le_bytes());
    for v in [g.x_min(), g.dx(), psi.mass(), units.length_unit_m, units.mass_unit_kg] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for z in psi.amps() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        let Some(bytes) = self.buf.get(self.pos..end) else {
            return Err(IoError::Format {
                offset: self.buf.len() as u64,
                msg: format!("truncated while reading {what} (needed {N} bytes at offset {})", self.pos),
            });
        };
        self.pos = end;
        Ok(bytes.try_into().expect("slice has length N"))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(what)?))
    }

    fn fail(&self, offset: usize, msg: String) -> IoError {
        IoError::Format {
            offset: offset as u64,
            msg,
        }
    }
}

pub fn decode(buf: &[u8]) -> Result<Snapshot> {
    let mut c = Cursor { buf, pos: 0 };
    let magic: [u8; 4] = c.take("magic")?;
    if &magic != MAGIC {
        return Err(c.fail(0, format!("bad magic {magic:?}")));
    }
    let version = u32::from_le_bytes(c.take("version")?);
    if version != VERSION {
        return Err(c.fail(4, format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(c.take("n_points")?);
    let x_min = c.f64("x_min")?;
    let dx = c.f64("dx")?;
    let mass = c.f64("mass")?;
    let length_unit_m = c.f64("length_unit_m")?;
    let mass_unit_kg = c.f64("mass_unit_kg")?;
    let expected = (HEADER_LEN as u64).checked_add(n.saturating_mul(16));
    if expected != Some(buf.len() as u64) {
        let offset = if (buf.len() as u64) < expected.unwrap_or(u64::MAX) {
            buf.len()
        } else {
            expected.unwrap_or(u64::MAX) as usize
        };
        return Err(c.fail(
            offset,
            format!("{n} points need {} bytes, file has {}", expected.unwrap_or(u64::MAX), buf.len()),
        ));
    }
    let grid = Grid1D::new(n as usize, x_min, dx).map_err(|e| c.fail(8, e.to_string()))?;
    let units = UnitSystem::new(length_unit_m, mass_unit_kg).map_err(|e| c.fail(40, e.to_string()))?;
    let mut amps = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let re = c.f64("amplitude")?;
        let im = c.f64("amplitude")?;
        amps.push(Complex64::new(re, im));
    }
    let psi = WaveFunction::from_parts(grid, amps, mass).map_err(|e| c.fail(32, e.to_string()))?;
    Ok(Snapshot { psi, units })
}

pub fn write_snapshot(psi: &WaveFunction, units: &UnitSystem, path: &Path) -> Result<()> {
    fs::write(path, encode(psi, units)).map_err(|e| IoError::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let buf = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode(&buf)
}
