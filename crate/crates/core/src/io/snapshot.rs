//! Binary snapshot: `b"EBPE"`, version byte, `u32` LE `(nx, ny, nz)`, `f64`
//! LE time, a flag byte (bit 0: `Z_rho` block present), then the blocks
//! `v1, v2, T, rho[, Z_rho]` as row-major `f64` LE arrays.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field2, Field3, Grid};
use crate::timestep::{step_from_time, State};

pub const MAGIC: &[u8; 4] = b"EBPE";
pub const VERSION: u8 = 0x01;
const FLAG_Z_RHO: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub time: f64,
    pub v1: Field3,
    pub v2: Field3,
    pub temp: Field3,
    pub rho: Field2,
    pub z_rho: Option<Field2>,
}

impl Snapshot {
    pub fn from_state(state: &State, z_rho: Option<&Field2>) -> Self {
        let (nx, ny, levels) = state.temp.shape();
        Self {
            nx,
            ny,
            nz: levels - 1,
            time: state.time,
            v1: state.v1.clone(),
            v2: state.v2.clone(),
            temp: state.temp.clone(),
            rho: state.rho.clone(),
            z_rho: z_rho.cloned(),
        }
    }

    /// State with the step counter recovered from the time and `dt`.
    pub fn to_state(&self, dt: f64) -> State {
        State {
            v1: self.v1.clone(),
            v2: self.v2.clone(),
            temp: self.temp.clone(),
            rho: self.rho.clone(),
            time: self.time,
            step: step_from_time(self.time, dt),
        }
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if (self.nx, self.ny, self.nz) != grid.dims() {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", grid.dims()),
                found: format!("{:?}", (self.nx, self.ny, self.nz)),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n3 = self.v1.data.len();
        let n2 = self.rho.data.len();
        let mut out = Vec::with_capacity(22 + 8 * (3 * n3 + 2 * n2));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        for d in [self.nx, self.ny, self.nz] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.time.to_le_bytes());
        out.push(if self.z_rho.is_some() { FLAG_Z_RHO } else { 0 });
        let blocks: [&[f64]; 4] = [&self.v1.data, &self.v2.data, &self.temp.data, &self.rho.data];
        for block in blocks.into_iter().chain(self.z_rho.as_ref().map(|z| z.data.as_slice())) {
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = r.take(1)?[0];
        if version != VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let nx = r.u32()? as usize;
        let ny = r.u32()? as usize;
        let nz = r.u32()? as usize;
        Grid::new(nx, ny, nz).map_err(|e| Error::Snapshot(format!("invalid dimensions: {e}")))?;
        let time = r.f64()?;
        let flags = r.take(1)?[0];
        if flags & !FLAG_Z_RHO != 0 {
            return Err(Error::Snapshot(format!("unknown flags {flags:#04x}")));
        }
        let n3 = nx * ny * (nz + 1);
        let n2 = nx * ny;
        let v1 = Field3::from_vec(nx, ny, nz + 1, r.block(n3)?)?;
        let v2 = Field3::from_vec(nx, ny, nz + 1, r.block(n3)?)?;
        let temp = Field3::from_vec(nx, ny, nz + 1, r.block(n3)?)?;
        let rho = Field2::from_vec(nx, ny, r.block(n2)?)?;
        let z_rho = if flags & FLAG_Z_RHO != 0 {
            Some(Field2::from_vec(nx, ny, r.block(n2)?)?)
        } else {
            None
        };
        if r.pos != bytes.len() {
            return Err(Error::Snapshot(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            nx,
            ny,
            nz,
            time,
            v1,
            v2,
            temp,
            rho,
            z_rho,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Snapshot(format!(
                "truncated: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn block(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn write_snapshot(path: &Path, state: &State, z_rho: Option<&Field2>) -> Result<()> {
    fs::write(path, Snapshot::from_state(state, z_rho).to_bytes())?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    Snapshot::from_bytes(&fs::read(path)?)
}
