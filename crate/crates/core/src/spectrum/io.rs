//! Binary containers: `SVSP` for spectra, `MOTN` for dense motion. All
//! values little-endian.
//!
//! SVSP layout: magic, version u32, R u32, n u32, K u32, T u32, fps f32,
//! occupied `n×3 u16`, vertex_to_voxel `N×u32`, coefficients `n×K×6 f32`
//! (Re x/y/z then Im x/y/z). `N` is implied by the file length.
//!
//! MOTN layout: magic, N u32, T u32, fps f32, displacements `T×N×3 f32`.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use super::{Coeff3, SparseVoxelSpectrum};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{MotionSequence, TriMesh};
use crate::voxel::SparseVoxelGrid;

pub const SVSP_MAGIC: &[u8; 4] = b"SVSP";
pub const SVSP_VERSION: u32 = 1;
pub const MOTN_MAGIC: &[u8; 4] = b"MOTN";

const SVSP_HEADER: usize = 4 + 4 * 5 + 4;
const MOTN_HEADER: usize = 4 + 4 * 2 + 4;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let out = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::parse(self.format, "file truncated"))?;
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// The stored content of an SVSP file, before it is attached to a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SvspFile {
    pub resolution: u32,
    pub bins: usize,
    pub frames: usize,
    pub fps: f64,
    pub occupied: Vec<[u32; 3]>,
    pub vertex_to_voxel: Vec<u32>,
    pub coefficients: Vec<Coeff3>,
}

impl SvspFile {
    pub fn voxel_count(&self) -> usize {
        self.occupied.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_to_voxel.len()
    }

    /// Rebuild the grid from `mesh` at the stored resolution and attach the
    /// coefficients, failing if the layout differs from the stored one.
    pub fn into_spectrum(self, mesh: &TriMesh) -> Result<SparseVoxelSpectrum> {
        let grid = SparseVoxelGrid::build(mesh, self.resolution)?;
        self.into_spectrum_with_grid(Arc::new(grid))
    }

    /// Attach the coefficients to an existing grid with the stored layout.
    pub fn into_spectrum_with_grid(self, grid: Arc<SparseVoxelGrid>) -> Result<SparseVoxelSpectrum> {
        if grid.resolution() != self.resolution
            || grid.occupied() != self.occupied.as_slice()
            || grid.vertex_to_voxel() != self.vertex_to_voxel.as_slice()
        {
            return Err(Error::Mismatch(format!(
                "stored spectrum grid (R = {}, n = {}, N = {}) does not match the mesh grid (R = {}, n = {}, N = {})",
                self.resolution,
                self.voxel_count(),
                self.vertex_count(),
                grid.resolution(),
                grid.voxel_count(),
                grid.vertex_count()
            )));
        }
        SparseVoxelSpectrum::new(grid, self.bins, self.frames, self.fps, self.coefficients)
    }

    pub fn from_spectrum(spectrum: &SparseVoxelSpectrum) -> Self {
        let grid = spectrum.grid();
        Self {
            resolution: grid.resolution(),
            bins: spectrum.bins(),
            frames: spectrum.frames(),
            fps: spectrum.fps(),
            occupied: grid.occupied().to_vec(),
            vertex_to_voxel: grid.vertex_to_voxel().to_vec(),
            coefficients: spectrum.coefficients().to_vec(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let n = self.voxel_count();
        let mut out = Vec::with_capacity(
            SVSP_HEADER + n * 6 + self.vertex_count() * 4 + self.coefficients.len() * 24,
        );
        out.extend_from_slice(SVSP_MAGIC);
        for v in [
            SVSP_VERSION,
            self.resolution,
            n as u32,
            self.bins as u32,
            self.frames as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.fps as f32).to_le_bytes());
        for c in &self.occupied {
            for &x in c {
                out.extend_from_slice(&(x as u16).to_le_bytes());
            }
        }
        for &v in &self.vertex_to_voxel {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for c in &self.coefficients {
            for z in c {
                out.extend_from_slice(&(z.re as f32).to_le_bytes());
            }
            for z in c {
                out.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader {
            bytes,
            pos: 0,
            format: "SVSP",
        };
        if r.take(4)? != SVSP_MAGIC {
            return Err(Error::parse("SVSP", "bad magic"));
        }
        let version = r.u32()?;
        if version != SVSP_VERSION {
            return Err(Error::UnsupportedFormat(format!("SVSP version {version}")));
        }
        let resolution = r.u32()?;
        let n = r.u32()? as usize;
        let bins = r.u32()? as usize;
        let frames = r.u32()? as usize;
        let fps = r.f32()? as f64;
        let fixed = n
            .checked_mul(6)
            .and_then(|a| n.checked_mul(bins)?.checked_mul(24)?.checked_add(a))
            .ok_or_else(|| Error::parse("SVSP", "header sizes overflow"))?;
        let rest = bytes.len() - SVSP_HEADER;
        if rest < fixed || (rest - fixed) % 4 != 0 {
            return Err(Error::parse(
                "SVSP",
                format!("body of {rest} bytes does not fit n = {n}, K = {bins}"),
            ));
        }
        let vertex_count = (rest - fixed) / 4;
        let mut occupied = Vec::with_capacity(n);
        for _ in 0..n {
            occupied.push([r.u16()? as u32, r.u16()? as u32, r.u16()? as u32]);
        }
        let vertex_to_voxel = (0..vertex_count).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let mut coefficients = Vec::with_capacity(n * bins);
        for _ in 0..n * bins {
            let re = [r.f32()?, r.f32()?, r.f32()?];
            let im = [r.f32()?, r.f32()?, r.f32()?];
            coefficients.push(std::array::from_fn(|a| Complex64::new(re[a] as f64, im[a] as f64)));
        }
        Ok(Self {
            resolution,
            bins,
            frames,
            fps,
            occupied,
            vertex_to_voxel,
            coefficients,
        })
    }
}

pub fn write_svsp(spectrum: &SparseVoxelSpectrum, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, SvspFile::from_spectrum(spectrum).encode()).map_err(|e| Error::file(path, e))
}

pub fn read_svsp(path: impl AsRef<Path>) -> Result<SvspFile> {
    let path = path.as_ref();
    SvspFile::decode(&std::fs::read(path).map_err(|e| Error::file(path, e))?)
}

pub fn encode_motion(motion: &MotionSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(MOTN_HEADER + motion.displacements().len() * 12);
    out.extend_from_slice(MOTN_MAGIC);
    out.extend_from_slice(&(motion.vertex_count() as u32).to_le_bytes());
    out.extend_from_slice(&(motion.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(motion.fps() as f32).to_le_bytes());
    for d in motion.displacements() {
        for c in d.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_motion(bytes: &[u8]) -> Result<MotionSequence> {
    let mut r = Reader {
        bytes,
        pos: 0,
        format: "MOTN",
    };
    if r.take(4)? != MOTN_MAGIC {
        return Err(Error::parse("MOTN", "bad magic"));
    }
    let n = r.u32()? as usize;
    let t = r.u32()? as usize;
    let fps = r.f32()? as f64;
    let expected = n
        .checked_mul(t)
        .and_then(|x| x.checked_mul(12))
        .ok_or_else(|| Error::parse("MOTN", "header sizes overflow"))?;
    if bytes.len() - MOTN_HEADER != expected {
        return Err(Error::parse(
            "MOTN",
            format!("expected {expected} payload bytes for N = {n}, T = {t}, found {}", bytes.len() - MOTN_HEADER),
        ));
    }
    let mut d = Vec::with_capacity(n * t);
    for _ in 0..n * t {
        d.push(Vec3::new(r.f32()? as f64, r.f32()? as f64, r.f32()? as f64));
    }
    MotionSequence::new(t, n, fps, d)
}

pub fn write_motion(motion: &MotionSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_motion(motion)).map_err(|e| Error::file(path, e))
}

pub fn read_motion(path: impl AsRef<Path>) -> Result<MotionSequence> {
    let path = path.as_ref();
    decode_motion(&std::fs::read(path).map_err(|e| Error::file(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseVoxelSpectrum {
        let pts = vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0)];
        let grid = Arc::new(SparseVoxelGrid::from_points(&pts, 2).unwrap());
        let n = grid.voxel_count();
        let coeffs = (0..n * 3)
            .map(|i| std::array::from_fn(|a| Complex64::new(i as f64 + a as f64 * 0.25, -(i as f64) * 0.5)))
            .collect();
        SparseVoxelSpectrum::new(grid, 3, 10, 24.0, coeffs).unwrap()
    }

    #[test]
    fn svsp_roundtrip() {
        let s = sample();
        let file = SvspFile::decode(&SvspFile::from_spectrum(&s).encode()).unwrap();
        assert_eq!(file.vertex_count(), 3);
        let back = file.into_spectrum_with_grid(s.grid().clone()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn svsp_header_layout() {
        let bytes = SvspFile::from_spectrum(&sample()).encode();
        assert_eq!(&bytes[..4], b"SVSP");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(f32::from_le_bytes(bytes[24..28].try_into().unwrap()), 24.0);
    }

    #[test]
    fn svsp_rejects_corruption() {
        let bytes = SvspFile::from_spectrum(&sample()).encode();
        assert!(SvspFile::decode(&bytes[..bytes.len() - 2]).is_err());
        assert!(SvspFile::decode(&bytes[..20]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(SvspFile::decode(&bad).is_err());
        let mut v2 = bytes;
        v2[4] = 2;
        assert!(matches!(SvspFile::decode(&v2), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn svsp_rejects_foreign_grid() {
        let file = SvspFile::from_spectrum(&sample());
        let other = SparseVoxelGrid::from_points(&[Vec3::zeros(), Vec3::x(), Vec3::y()], 4).unwrap();
        assert!(matches!(
            file.into_spectrum_with_grid(Arc::new(other)),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn motion_roundtrip() {
        let m = MotionSequence::from_fn(5, 2, 24.0, |t, v| Vec3::new(t as f64 * 0.5, v as f64, -0.25)).unwrap();
        let back = decode_motion(&encode_motion(&m)).unwrap();
        assert_eq!(back, m);
        let bytes = encode_motion(&m);
        assert!(decode_motion(&bytes[..bytes.len() - 1]).is_err());
    }
}
