//! Phase-space grids and their binary file format.
//!
//! Layout: `b"HMFG"`, format version (u32 LE), `n_theta` and `n_v` (u64 LE),
//! `v_max` (f64 LE), then `n_theta * n_v` f64 LE values, θ-major.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HmfError, Result};

pub const GRID_MAGIC: &[u8; 4] = b"HMFG";
pub const GRID_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8;

/// Values on `θ_i = 2π i / n_theta` (periodic) times `v_j` uniform on
/// `[-v_max, v_max]` (both ends included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub n_theta: usize,
    pub n_v: usize,
    pub v_max: f64,
    pub values: Vec<f64>,
}

impl PhaseSpaceGrid {
    pub fn zeros(n_theta: usize, n_v: usize, v_max: f64) -> Result<Self> {
        if n_theta < 4 || n_v < 4 {
            return Err(HmfError::InvalidArgument(format!(
                "grid needs at least 4x4 nodes, got {n_theta}x{n_v}"
            )));
        }
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(HmfError::InvalidArgument(format!(
                "v_max must be positive, got {v_max}"
            )));
        }
        Ok(Self {
            n_theta,
            n_v,
            v_max,
            values: vec![0.0; n_theta * n_v],
        })
    }

    /// Samples `f(θ, v)` at every node.
    pub fn from_fn(
        n_theta: usize,
        n_v: usize,
        v_max: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut g = Self::zeros(n_theta, n_v, v_max)?;
        for i in 0..n_theta {
            let theta = g.theta(i);
            for j in 0..n_v {
                let v = g.v(j);
                g.values[i * n_v + j] = f(theta, v);
            }
        }
        Ok(g)
    }

    pub fn d_theta(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / (self.n_v - 1) as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.d_theta() * i as f64
    }

    pub fn v(&self, j: usize) -> f64 {
        -self.v_max + self.dv() * j as f64
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_v + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_v..(i + 1) * self.n_v]
    }

    /// Node index of the mirror image `(-θ, -v)`.
    pub fn mirror(&self, i: usize, j: usize) -> (usize, usize) {
        ((self.n_theta - i) % self.n_theta, self.n_v - 1 - j)
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.n_theta != other.n_theta || self.n_v != other.n_v || self.v_max != other.v_max {
            return Err(HmfError::GridMismatch(format!(
                "{}x{} (v_max {}) vs {}x{} (v_max {})",
                self.n_theta, self.n_v, self.v_max, other.n_theta, other.n_v, other.v_max
            )));
        }
        Ok(())
    }

    /// Cell area `dθ dv`.
    pub fn cell(&self) -> f64 {
        self.d_theta() * self.dv()
    }

    /// `∬ f` by the rectangle rule (exact for trigonometric data in θ).
    pub fn integral(&self) -> f64 {
        crate::quadrature::pairwise_sum(&self.values) * self.cell()
    }

    pub fn l1_norm(&self) -> f64 {
        let abs: Vec<f64> = self.values.iter().map(|x| x.abs()).collect();
        crate::quadrature::pairwise_sum(&abs) * self.cell()
    }

    /// `∬ |f - g|`.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .collect();
        Ok(crate::quadrature::pairwise_sum(&d) * self.cell())
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(GRID_MAGIC);
        header.extend_from_slice(&GRID_VERSION.to_le_bytes());
        header.extend_from_slice(&(self.n_theta as u64).to_le_bytes());
        header.extend_from_slice(&(self.n_v as u64).to_le_bytes());
        header.extend_from_slice(&self.v_max.to_le_bytes());
        w.write_all(&header)?;
        let mut payload = Vec::with_capacity(8 * self.values.len());
        for x in &self.values {
            payload.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&payload)?;
        w.flush()
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| HmfError::io("<grid stream>", e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != GRID_MAGIC {
            let found = bytes.get(..4.min(bytes.len())).unwrap_or_default();
            return Err(HmfError::BadMagic {
                expected: String::from_utf8_lossy(GRID_MAGIC).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(HmfError::Truncated {
                expected: HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != GRID_VERSION {
            return Err(HmfError::BadVersion {
                expected: GRID_VERSION,
                found: version,
            });
        }
        let n_theta = u64_at(8);
        let n_v = u64_at(16);
        let v_max = f64::from_bits(u64_at(24));
        let payload = &bytes[HEADER_LEN..];
        let expected = n_theta.checked_mul(n_v).ok_or_else(|| {
            HmfError::InvalidArgument(format!("grid shape {n_theta}x{n_v} overflows"))
        })?;
        let found = (payload.len() / 8) as u64;
        if found != expected || !payload.len().is_multiple_of(8) {
            return Err(HmfError::Truncated { expected, found });
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let mut grid = Self::zeros(n_theta as usize, n_v as usize, v_max)?;
        grid.values = values;
        Ok(grid)
    }
}

/// Writes `grid` to `path` in the binary format.
pub fn write_grid(grid: &PhaseSpaceGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| HmfError::io(path, e))?;
    grid.write_to(BufWriter::new(file))
        .map_err(|e| HmfError::io(path, e))
}

/// Reads a grid written by [`write_grid`].
pub fn read_grid(path: impl AsRef<Path>) -> Result<PhaseSpaceGrid> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| HmfError::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| HmfError::io(path, e))?;
    PhaseSpaceGrid::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PhaseSpaceGrid {
        PhaseSpaceGrid::from_fn(8, 9, 3.0, |t, v| t.sin() + v * 1e-3).unwrap()
    }

    #[test]
    fn node_coordinates() {
        let g = sample();
        assert_eq!(g.v(0), -3.0);
        assert_eq!(g.v(8), 3.0);
        assert_eq!(g.v(4), 0.0);
        assert!((g.theta(4) - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(g.mirror(0, 0), (0, 8));
        assert_eq!(g.mirror(3, 2), (5, 6));
    }

    #[test]
    fn bytes_round_trip() {
        let g = sample();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 8 * 72);
        assert_eq!(PhaseSpaceGrid::from_bytes(&buf).unwrap(), g);
    }

    #[test]
    fn corrupted_magic_names_expected() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        buf[0] = b'X';
        let err = PhaseSpaceGrid::from_bytes(&buf).unwrap_err();
        assert!(err.to_string().contains("HMFG"), "{err}");
    }

    #[test]
    fn short_payload_is_truncation() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(matches!(
            PhaseSpaceGrid::from_bytes(&buf),
            Err(HmfError::Truncated {
                expected: 72,
                found: 71
            })
        ));
    }

    #[test]
    fn wrong_version() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        buf[4] = 9;
        assert!(matches!(
            PhaseSpaceGrid::from_bytes(&buf),
            Err(HmfError::BadVersion { found: 9, .. })
        ));
    }
}
