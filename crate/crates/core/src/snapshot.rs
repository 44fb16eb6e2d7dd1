//! Snapshot containers and the `TTOI` binary file format.
//!
//! Layout of a file (all little-endian):
//!
//! | field   | type          |
//! |---------|---------------|
//! | magic   | `b"TTOI"`     |
//! | version | u32 = 1       |
//! | dtype   | u8 = 1 (f64)  |
//! | layout  | u8 (1 structured, 2 unstructured) |
//! | ndims   | u32           |
//! | dims    | u64 × ndims, time last |
//! | dt, t0  | f64, f64      |
//! | payload | f64 values, one snapshot after another |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cross::EntryOracle;
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub const MAGIC: &[u8; 4] = b"TTOI";
pub const VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    Structured { nx: usize, ny: usize, nz: usize, nq: usize },
    Unstructured { n: usize, nq: usize },
}

impl Layout {
    pub fn state_dims(&self) -> Vec<usize> {
        match *self {
            Layout::Structured { nx, ny, nz, nq } => vec![nx, ny, nz, nq],
            Layout::Unstructured { n, nq } => vec![n, nq],
        }
    }

    pub fn state_len(&self) -> usize {
        self.state_dims().iter().product()
    }

    pub fn is_structured(&self) -> bool {
        matches!(self, Layout::Structured { .. })
    }

    fn code(&self) -> u8 {
        match self {
            Layout::Structured { .. } => 1,
            Layout::Unstructured { .. } => 2,
        }
    }

    /// Same element order viewed as `(N, N_q)` with `N = nx·ny·nz`.
    pub fn flattened(&self) -> Layout {
        match *self {
            Layout::Structured { nx, ny, nz, nq } => Layout::Unstructured { n: nx * ny * nz, nq },
            u => u,
        }
    }
}

/// Time series of states on a uniform time grid. Stored snapshot-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    layout: Layout,
    data: Vec<f64>,
    t0: f64,
    dt: f64,
}

impl SnapshotSet {
    pub fn new(layout: Layout, data: Vec<f64>, t0: f64, dt: f64) -> Result<Self> {
        let n = layout.state_len();
        if n == 0 || data.is_empty() || data.len() % n != 0 {
            return Err(Error::Shape(format!("{} values do not form snapshots of size {n}", data.len())));
        }
        if !(dt > 0.0) || !t0.is_finite() {
            return Err(Error::InvalidInput(format!("snapshot spacing must be positive, got {dt}")));
        }
        Ok(Self { layout, data, t0, dt })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n_state(&self) -> usize {
        self.layout.state_len()
    }
    pub fn n_snapshots(&self) -> usize {
        self.data.len() / self.n_state()
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }
    pub fn times(&self) -> Vec<f64> {
        (0..self.n_snapshots()).map(|k| self.time(k)).collect()
    }
    pub fn snapshot(&self, k: usize) -> &[f64] {
        let n = self.n_state();
        &self.data[k * n..(k + 1) * n]
    }

    /// Logical dims: state dims followed by the snapshot count.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = self.layout.state_dims();
        d.push(self.n_snapshots());
        d
    }

    /// Index of the snapshot at time `t`, if `t` is on the grid.
    pub fn index_of_time(&self, t: f64) -> Option<usize> {
        let s = (t - self.t0) / self.dt;
        let k = s.round();
        if k < 0.0 || (s - k).abs() > 1e-6 || k as usize >= self.n_snapshots() {
            return None;
        }
        Some(k as usize)
    }

    /// Snapshots with `t ≤ t_cut`.
    pub fn up_to(&self, t_cut: f64) -> Result<Self> {
        let s = ((t_cut - self.t0) / self.dt + 1e-6).floor();
        if s < 1.0 {
            return Err(Error::InvalidInput(format!("fewer than two snapshots at or before t = {t_cut}")));
        }
        let k = (s as usize + 1).min(self.n_snapshots());
        let n = self.n_state();
        Self::new(self.layout, self.data[..k * n].to_vec(), self.t0, self.dt)
    }

    /// Reinterpret a structured set as unstructured (no data movement).
    pub fn flattened(&self) -> Self {
        Self { layout: self.layout.flattened(), ..self.clone() }
    }

    /// Dense tensor with modes `[state dims..., time]`.
    pub fn tensor(&self) -> Result<DenseTensor> {
        let (n, k) = (self.n_state(), self.n_snapshots());
        let mut v = vec![0.0; n * k];
        for t in 0..k {
            for (i, x) in self.snapshot(t).iter().enumerate() {
                v[i * k + t] = *x;
            }
        }
        DenseTensor::new(self.dims(), v)
    }

    /// `K × N` matrix, one snapshot per row.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_snapshots(), self.n_state(), &self.data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dims = self.dims();
        let mut b = Vec::with_capacity(header_len(dims.len()) + 8 * self.data.len());
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.push(DTYPE_F64);
        b.push(self.layout.code());
        b.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in &dims {
            b.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        b.extend_from_slice(&self.dt.to_le_bytes());
        b.extend_from_slice(&self.t0.to_le_bytes());
        for v in &self.data {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    /// Write atomically (temporary file in the same directory, then rename).
    pub fn write(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
        {
            let f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut w = BufWriter::new(f);
            w.write_all(&self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
            w.flush().map_err(|e| Error::io(&tmp, e))?;
        }
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(f);
        let h = read_header(&mut r, path)?;
        let count: usize = h.dims.iter().product();
        let mut raw = vec![0u8; count * 8];
        r.read_exact(&mut raw).map_err(|_| fmt_err(path, "payload is truncated"))?;
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(|e| Error::io(path, e))? != 0 {
            return Err(fmt_err(path, "trailing bytes after payload"));
        }
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Self::new(h.layout, data, h.t0, h.dt)
    }
}

/// Parsed file header.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnapshotHeader {
    pub version: u32,
    pub layout: Layout,
    pub dims: Vec<usize>,
    pub dt: f64,
    pub t0: f64,
}

fn header_len(ndims: usize) -> usize {
    4 + 4 + 1 + 1 + 4 + 8 * ndims + 16
}

fn fmt_err(path: &Path, msg: &str) -> Error {
    Error::Format { path: path.to_path_buf(), msg: msg.into() }
}

fn read_header(r: &mut impl Read, path: &Path) -> Result<SnapshotHeader> {
    let mut buf = [0u8; 14];
    r.read_exact(&mut buf).map_err(|_| fmt_err(path, "header is truncated"))?;
    if &buf[0..4] != MAGIC {
        return Err(fmt_err(path, "bad magic bytes"));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(fmt_err(path, &format!("unsupported version {version}")));
    }
    if buf[8] != DTYPE_F64 {
        return Err(fmt_err(path, &format!("unsupported dtype code {}", buf[8])));
    }
    let code = buf[9];
    let ndims = u32::from_le_bytes(buf[10..14].try_into().expect("4 bytes")) as usize;
    if ndims > 64 {
        return Err(fmt_err(path, "implausible dimension count"));
    }
    let mut rest = vec![0u8; 8 * ndims + 16];
    r.read_exact(&mut rest).map_err(|_| fmt_err(path, "header is truncated"))?;
    let word = |k: usize| -> [u8; 8] { rest[8 * k..8 * k + 8].try_into().expect("8 bytes") };
    let dims: Vec<usize> = (0..ndims).map(|k| u64::from_le_bytes(word(k)) as usize).collect();
    let dt = f64::from_le_bytes(word(ndims));
    let t0 = f64::from_le_bytes(word(ndims + 1));
    let layout = match (code, dims.as_slice()) {
        (1, &[nx, ny, nz, nq, _]) => Layout::Structured { nx, ny, nz, nq },
        (2, &[n, nq, _]) => Layout::Unstructured { n, nq },
        _ => return Err(fmt_err(path, &format!("layout code {code} does not match {ndims} dims"))),
    };
    if dims.iter().any(|&d| d == 0) {
        return Err(fmt_err(path, "zero-sized dimension"));
    }
    Ok(SnapshotHeader { version, layout, dims, dt, t0 })
}

pub fn read_header_file(path: &Path) -> Result<SnapshotHeader> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_header(&mut BufReader::new(f), path)
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Entry oracle reading single values from a snapshot file by seeking.
/// Indices are logical: state dims then time.
pub struct FileOracle {
    path: PathBuf,
    file: File,
    dims: Vec<usize>,
    offset: u64,
    n_state: usize,
    calls: usize,
}

impl FileOracle {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        let h = read_header(&mut file, path)?;
        let n_state = h.dims[..h.dims.len() - 1].iter().product();
        Ok(Self { path: path.to_path_buf(), file, offset: header_len(h.dims.len()) as u64, dims: h.dims, n_state, calls: 0 })
    }
}

impl EntryOracle for FileOracle {
    fn shape(&self) -> &[usize] {
        &self.dims
    }

    fn eval_batch(&mut self, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
        self.calls += indices.len();
        let d = self.dims.len();
        let mut out = Vec::with_capacity(indices.len());
        let mut buf = [0u8; 8];
        for idx in indices {
            if idx.len() != d || idx.iter().zip(&self.dims).any(|(i, n)| i >= n) {
                return Err(Error::InvalidInput(format!("index {idx:?} outside {:?}", self.dims)));
            }
            let state = idx[..d - 1].iter().zip(&self.dims).fold(0usize, |acc, (&i, &n)| acc * n + i);
            let pos = self.offset + 8 * (idx[d - 1] * self.n_state + state) as u64;
            self.file.seek(SeekFrom::Start(pos)).map_err(|e| Error::io(&self.path, e))?;
            self.file.read_exact(&mut buf).map_err(|e| Error::io(&self.path, e))?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    }

    fn call_count(&self) -> usize {
        self.calls
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SnapshotSet {
        let layout = Layout::Structured { nx: 3, ny: 2, nz: 1, nq: 1 };
        let data = (0..6 * 4).map(|v| v as f64 * 0.5 - 3.0).collect();
        SnapshotSet::new(layout, data, 0.0, 0.25).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.snap");
        let s = sample();
        s.write(&p).unwrap();
        let bytes1 = std::fs::read(&p).unwrap();
        let back = SnapshotSet::read(&p).unwrap();
        assert_eq!(back, s);
        let q = dir.path().join("b.snap");
        back.write(&q).unwrap();
        assert_eq!(std::fs::read(&q).unwrap(), bytes1);
        assert_eq!(file_sha256(&p).unwrap(), file_sha256(&q).unwrap());
        let h = read_header_file(&p).unwrap();
        assert_eq!(h.dims, vec![3, 2, 1, 1, 4]);
    }

    #[test]
    fn tensor_view_puts_time_last() {
        let s = sample();
        let t = s.tensor().unwrap();
        assert_eq!(t.shape(), &[3, 2, 1, 1, 4]);
        assert_eq!(t.get(&[2, 1, 0, 0, 3]), s.snapshot(3)[5]);
        assert_eq!(s.up_to(0.5).unwrap().n_snapshots(), 3);
        assert_eq!(s.index_of_time(0.75), Some(3));
        assert_eq!(s.index_of_time(0.8), None);
    }

    #[test]
    fn file_oracle_reads_entries() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.snap");
        let s = sample();
        s.write(&p).unwrap();
        let t = s.tensor().unwrap();
        let mut o = FileOracle::open(&p).unwrap();
        let idx = vec![vec![1, 0, 0, 0, 2], vec![2, 1, 0, 0, 0]];
        let v = o.eval_batch(&idx).unwrap();
        assert_eq!(v, vec![t.get(&idx[0]), t.get(&idx[1])]);
        assert_eq!(o.call_count(), 2);
        assert!(o.eval_batch(&[vec![3, 0, 0, 0, 0]]).is_err());
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.snap");
        let mut b = sample().to_bytes();
        b[0] = b'X';
        std::fs::write(&p, &b).unwrap();
        assert!(matches!(SnapshotSet::read(&p), Err(Error::Format { .. })));
        let mut b = sample().to_bytes();
        b.truncate(b.len() - 3);
        std::fs::write(&p, &b).unwrap();
        assert!(matches!(SnapshotSet::read(&p), Err(Error::Format { .. })));
        assert!(matches!(SnapshotSet::read(&dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
