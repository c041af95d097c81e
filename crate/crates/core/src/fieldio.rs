//! Flat binary field files.
//!
//! Layout: four little-endian `u64` header words `(nx, ny, nz, ncomp)`
//! followed by `ncomp * nx * ny * nz` little-endian `f64` values,
//! component-major, each component row-major with `z` fastest.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub dims: [usize; 3],
    pub components: Vec<Vec<f64>>,
}

impl FieldFile {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let len = self.dims.iter().product::<usize>();
        for c in &self.components {
            if c.len() != len {
                return Err(Error::Format(format!("component has {} values, expected {len}", c.len())));
            }
        }
        for d in self.dims.iter().copied().chain([self.components.len()]) {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * len * self.components.len());
        for x in self.components.iter().flatten() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; 32];
        r.read_exact(&mut header).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
        let word = |i: usize| u64::from_le_bytes(header[8 * i..8 * i + 8].try_into().unwrap()) as usize;
        let dims = [word(0), word(1), word(2)];
        let ncomp = word(3);
        if dims.contains(&0) || ncomp == 0 || dims.iter().any(|&d| d > 4096) || ncomp > 64 {
            return Err(Error::Format(format!("implausible header {dims:?} x {ncomp}")));
        }
        let len = dims.iter().product::<usize>();
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * len * ncomp {
            return Err(Error::Format(format!("payload has {} bytes, header implies {}", bytes.len(), 8 * len * ncomp)));
        }
        let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let components = values.chunks(len).map(<[f64]>::to_vec).collect();
        Ok(Self { dims, components })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Single-component file (the gridded potential / density format).
    pub fn scalar(grid: &Grid, values: Vec<f64>) -> Self {
        Self { dims: [grid.n(); 3], components: vec![values] }
    }

    /// Five-component file holding `(n, v1, v2, v3, q)` in physical space.
    pub fn from_state(state: &SpectralField) -> Self {
        Self { dims: [state.grid().n(); 3], components: state.to_physical().into() }
    }

    fn check_grid(&self, grid: &Grid, ncomp: usize) -> Result<()> {
        if self.dims != [grid.n(); 3] {
            return Err(Error::GridMismatch(format!("file dims {:?}, grid n = {}", self.dims, grid.n())));
        }
        if self.components.len() != ncomp {
            return Err(Error::Format(format!("expected {ncomp} components, found {}", self.components.len())));
        }
        Ok(())
    }

    pub fn into_scalar(self, grid: &Grid) -> Result<Vec<f64>> {
        self.check_grid(grid, 1)?;
        Ok(self.components.into_iter().next().unwrap())
    }

    pub fn into_state(self, grid: &Grid) -> Result<SpectralField> {
        self.check_grid(grid, 5)?;
        let c = &self.components;
        Ok(SpectralField::from_physical(grid, [&c[0], &c[1], &c[2], &c[3], &c[4]]))
    }
}
