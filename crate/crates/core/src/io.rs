//! File formats: `.snf` field rasters and coefficient state files.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{render, CoefficientState, FieldLayout, Grid, RenderField};

const SNF_MAGIC: &[u8; 4] = b"SNF1";
const STATE_MAGIC: &[u8; 4] = b"HPST";

/// Multi-channel `f32` raster: channel-major, then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Snf {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Snf {
    pub fn from_grids(grids: &[Grid]) -> Result<Self> {
        let first = grids.first().ok_or_else(|| Error::Argument("no channels to export".into()))?;
        let (width, height) = (first.width, first.height);
        let mut data = Vec::with_capacity(grids.len() * width * height);
        for g in grids {
            if (g.width, g.height) != (width, height) {
                return Err(Error::Shape(format!(
                    "channel is {}x{}, expected {width}x{height}",
                    g.width, g.height
                )));
            }
            data.extend(g.data.iter().map(|&v| v as f32));
        }
        Ok(Self {
            width,
            height,
            channels: grids.len(),
            data,
        })
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        if self.data.len() != self.width * self.height * self.channels {
            return Err(Error::Shape("raster data does not match its dimensions".into()));
        }
        w.write_all(SNF_MAGIC)?;
        for d in [self.width, self.height, self.channels] {
            let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
            w.write_all(&d.to_le_bytes())?;
        }
        let mut bytes = Vec::with_capacity(4 * self.data.len());
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SNF_MAGIC {
            return Err(Error::Format("not an SNF1 file".into()));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = read_u32(r)? as usize;
        }
        let [width, height, channels] = dims;
        let n = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::Format("SNF dimensions overflow".into()))?;
        let data = read_f32s(r, n)?;
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Renders each field at the end of the slab into one `.snf` channel.
pub fn export_fields(state: &CoefficientState, fields: &[RenderField], upsample: usize) -> Result<Snf> {
    let grids = fields
        .iter()
        .map(|&f| render(state, f, upsample, 1.0))
        .collect::<Result<Vec<_>>>()?;
    Snf::from_grids(&grids)
}

#[derive(Serialize, Deserialize)]
struct StateHeader {
    version: u32,
    layout: FieldLayout,
    width: usize,
    height: usize,
    t0: f64,
    dt: f64,
}

/// Writes a coefficient state: magic `HPST`, `u32` LE header length, JSON
/// header, then both slices as `f64` LE.
pub fn write_state<W: Write>(state: &CoefficientState, w: &mut W) -> Result<()> {
    let header = serde_json::to_vec(&StateHeader {
        version: 1,
        layout: state.layout().clone(),
        width: state.width(),
        height: state.height(),
        t0: state.t0(),
        dt: state.dt(),
    })?;
    w.write_all(STATE_MAGIC)?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    let mut bytes = Vec::with_capacity(16 * state.slice(0).len());
    for k in 0..2 {
        for v in state.slice(k) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_state<R: Read>(r: &mut R) -> Result<CoefficientState> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != STATE_MAGIC {
        return Err(Error::Format("not a coefficient state file".into()));
    }
    let len = read_u32(r)? as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header)?;
    let h: StateHeader = serde_json::from_slice(&header)?;
    if h.version != 1 {
        return Err(Error::Format(format!("unsupported state version {}", h.version)));
    }
    h.layout.validate()?;
    let n = h.layout.channels() * h.width * h.height;
    let start = read_f64s(r, n)?;
    let end = read_f64s(r, n)?;
    CoefficientState::from_slices(h.layout, h.width, h.height, h.t0, h.dt, start, end)
}

pub fn save_state(state: &CoefficientState, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_state(state, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_state(path: &Path) -> Result<CoefficientState> {
    read_state(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; 4 * n];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; 8 * n];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}
