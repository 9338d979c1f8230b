//! Sinograms: per-angle 1D projections, plus the CALS on-disk format.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::AngleGrid;

/// Whether projection values are free reals or 8-bit projector levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinogramDomain {
    Real,
    Quantized8,
}

/// Projection set P(x, theta): one row of `n_x` detector samples per angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    n_x: usize,
    grid: AngleGrid,
    domain: SinogramDomain,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn new(n_x: usize, grid: AngleGrid, domain: SinogramDomain, data: Vec<f64>) -> Result<Self> {
        if n_x == 0 {
            return Err(Error::param("n_x", "detector sample count must be non-zero"));
        }
        if data.len() != n_x * grid.count() {
            return Err(Error::DimensionMismatch {
                what: "sinogram data length",
                expected: n_x * grid.count(),
                actual: data.len(),
            });
        }
        for &v in &data {
            if !v.is_finite() {
                return Err(Error::param("data", "sinogram values must be finite"));
            }
            if domain == SinogramDomain::Quantized8 && (v.fract() != 0.0 || !(0.0..=255.0).contains(&v))
            {
                return Err(Error::param(
                    "data",
                    format!("value {v} is not an integer in [0, 255]"),
                ));
            }
        }
        Ok(Sinogram {
            n_x,
            grid,
            domain,
            data,
        })
    }

    pub fn zeros(n_x: usize, grid: AngleGrid, domain: SinogramDomain) -> Self {
        let count = grid.count();
        Sinogram {
            n_x,
            grid,
            domain,
            data: vec![0.0; n_x * count],
        }
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn domain(&self) -> SinogramDomain {
        self.domain
    }

    pub fn row(&self, angle_idx: usize) -> &[f64] {
        let s = angle_idx * self.n_x;
        &self.data[s..s + self.n_x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies `f` to every entry; the result is a real-domain sinogram.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Sinogram {
        Sinogram {
            n_x: self.n_x,
            grid: self.grid.clone(),
            domain: SinogramDomain::Real,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn from_rows_unchecked(
        n_x: usize,
        grid: AngleGrid,
        domain: SinogramDomain,
        data: Vec<f64>,
    ) -> Sinogram {
        debug_assert_eq!(data.len(), n_x * grid.count());
        Sinogram {
            n_x,
            grid,
            domain,
            data,
        }
    }

    /// Writes the CALS binary format: magic "CALS", u32 n_x, u32 count,
    /// f32 start_deg, f32 range_deg, u8 domain tag, then row-major f32
    /// little-endian data.
    pub fn write_cals(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(fs::File::create(path)?);
        f.write_all(b"CALS")?;
        f.write_all(&(self.n_x as u32).to_le_bytes())?;
        f.write_all(&(self.grid.count() as u32).to_le_bytes())?;
        f.write_all(&(self.grid.start_deg() as f32).to_le_bytes())?;
        f.write_all(&(self.grid.range_deg() as f32).to_le_bytes())?;
        let tag: u8 = match self.domain {
            SinogramDomain::Real => 0,
            SinogramDomain::Quantized8 => 1,
        };
        f.write_all(&[tag])?;
        for &v in &self.data {
            f.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the CALS binary format written by [`Sinogram::write_cals`].
    pub fn read_cals(path: &Path) -> Result<Self> {
        let mut raw = Vec::new();
        fs::File::open(path)?.read_to_end(&mut raw)?;
        if raw.len() < 21 {
            return Err(Error::format("CALS", "file shorter than header"));
        }
        if &raw[0..4] != b"CALS" {
            return Err(Error::format("CALS", "bad magic bytes"));
        }
        let n_x = u32::from_le_bytes(raw[4..8].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(raw[8..12].try_into().unwrap()) as usize;
        let start = f32::from_le_bytes(raw[12..16].try_into().unwrap()) as f64;
        let range = f32::from_le_bytes(raw[16..20].try_into().unwrap()) as f64;
        let domain = match raw[20] {
            0 => SinogramDomain::Real,
            1 => SinogramDomain::Quantized8,
            t => return Err(Error::format("CALS", format!("unknown domain tag {t}"))),
        };
        let need = n_x
            .checked_mul(count)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::format("CALS", "size overflow"))?;
        if raw.len() != 21 + need {
            return Err(Error::format(
                "CALS",
                format!("expected {} data bytes, found {}", need, raw.len() - 21),
            ));
        }
        let mut data = Vec::with_capacity(n_x * count);
        for chunk in raw[21..].chunks_exact(4) {
            data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
        }
        let grid = AngleGrid::new(start, range, count)?;
        Sinogram::new(n_x, grid, domain, data)
    }

    /// Debug CSV export: one row per angle, detector samples as columns.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(fs::File::create(path)?);
        for a in 0..self.grid.count() {
            let row: Vec<String> = self.row(a).iter().map(|v| format!("{v}")).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(count: usize) -> AngleGrid {
        AngleGrid::half_turn(count).unwrap()
    }

    #[test]
    fn quantized_invariant() {
        let g = grid(2);
        assert!(Sinogram::new(2, g.clone(), SinogramDomain::Quantized8, vec![0.0, 255.0, 3.0, 7.0]).is_ok());
        assert!(Sinogram::new(2, g.clone(), SinogramDomain::Quantized8, vec![0.0, 255.5, 3.0, 7.0]).is_err());
        assert!(Sinogram::new(2, g, SinogramDomain::Quantized8, vec![0.0, 256.0, 3.0, 7.0]).is_err());
    }

    #[test]
    fn cals_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.cals");
        let g = AngleGrid::new(0.0, 360.0, 3).unwrap();
        // f32-representable values survive the round trip exactly
        let data = vec![0.0, 1.5, -2.25, 100.0, 0.125, 9.0];
        let s = Sinogram::new(2, g, SinogramDomain::Real, data.clone()).unwrap();
        s.write_cals(&path).unwrap();
        let r = Sinogram::read_cals(&path).unwrap();
        assert_eq!(r.n_x(), 2);
        assert_eq!(r.grid().count(), 3);
        assert_eq!(r.grid().range_deg(), 360.0);
        assert_eq!(r.domain(), SinogramDomain::Real);
        assert_eq!(r.as_slice(), data.as_slice());
    }

    #[test]
    fn cals_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cals");
        std::fs::write(&path, b"nope").unwrap();
        assert!(Sinogram::read_cals(&path).is_err());
        std::fs::write(&path, b"CALX0000000000000000000000").unwrap();
        assert!(Sinogram::read_cals(&path).is_err());
    }

    #[test]
    fn csv_has_one_row_per_angle() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = Sinogram::zeros(4, grid(3), SinogramDomain::Real);
        s.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap(), "0,0,0,0");
    }
}
