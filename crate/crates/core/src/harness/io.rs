//! File formats: the binary grid container, interferogram-set directories,
//! per-trial records CSV, stats JSON, and state JSON.
//!
//! Grid container layout: an 8-byte magic `PDIGRID\0`, a little-endian u32
//! header length, a JSON header, then raw little-endian sample values.
//! Exact mode stores f64; camera mode stores u16 with a linear scale.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexFieldGrid, GridSpec, RealGrid};
use crate::harness::trial::{EnsembleStats, TrialRecord};
use crate::pdi::{AcquisitionMeta, InterferogramSet};
use crate::qudit::QuditState;

pub const GRID_MAGIC: &[u8; 8] = b"PDIGRID\0";
const GRID_SCHEMA: u32 = 1;

/// What the stored samples mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Intensity,
    Phase,
    Complex,
}

/// Sample encoding: exact f64 or 16-bit camera counts with a linear scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridEncoding {
    F64,
    U16,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GridHeader {
    schema: u32,
    kind: GridKind,
    width_px: usize,
    height_px: usize,
    pitch_um: f64,
    encoding: GridEncoding,
    /// u16 decoding: value = offset + scale * quantized.
    scale: f64,
    offset: f64,
    endianness: String,
}

fn write_container(path: &Path, header: &GridHeader, payload: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(GRID_MAGIC)?;
    let header_bytes = serde_json::to_vec(header)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

fn read_container(path: &Path) -> Result<(GridHeader, Vec<u8>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::FileFormat(format!("{}: truncated magic", path.display())))?;
    if &magic != GRID_MAGIC {
        return Err(Error::FileFormat(format!(
            "{}: bad magic {magic:?} (expected {GRID_MAGIC:?})",
            path.display()
        )));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)
        .map_err(|_| Error::FileFormat(format!("{}: truncated header length", path.display())))?;
    let header_len = u32::from_le_bytes(len) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)
        .map_err(|_| Error::FileFormat(format!("{}: truncated header", path.display())))?;
    let header: GridHeader = serde_json::from_slice(&header_bytes).map_err(|e| {
        Error::FileFormat(format!("{}: header at byte {}: {e}", path.display(), 12))
    })?;
    if header.schema != GRID_SCHEMA {
        return Err(Error::FileFormat(format!(
            "{}: unsupported grid schema {}",
            path.display(),
            header.schema
        )));
    }
    if header.endianness != "little" {
        return Err(Error::FileFormat(format!(
            "{}: unsupported endianness {}",
            path.display(),
            header.endianness
        )));
    }
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    Ok((header, payload))
}

fn expected_payload_len(header: &GridHeader) -> usize {
    let n = header.width_px * header.height_px;
    match (header.kind, header.encoding) {
        (GridKind::Complex, GridEncoding::F64) => n * 16,
        (GridKind::Complex, GridEncoding::U16) => n * 4,
        (_, GridEncoding::F64) => n * 8,
        (_, GridEncoding::U16) => n * 2,
    }
}

fn f64s_to_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut out = Vec::new();
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn bytes_to_f64s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect()
}

fn quantize_u16(values: &[f64]) -> (f64, f64, Vec<u8>) {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = if max > min { (max - min) / u16::MAX as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(values.len() * 2);
    for &v in values {
        let q = if scale > 0.0 {
            ((v - min) / scale).round().clamp(0.0, u16::MAX as f64) as u16
        } else {
            0
        };
        out.extend_from_slice(&q.to_le_bytes());
    }
    (scale, min, out)
}

fn dequantize_u16(bytes: &[u8], scale: f64, offset: f64) -> Vec<f64> {
    bytes
        .chunks_exact(2)
        .map(|c| offset + scale * u16::from_le_bytes(c.try_into().expect("chunk of 2")) as f64)
        .collect()
}

/// Writes a real grid (intensity or phase) in the requested encoding.
pub fn save_real_grid(
    path: &Path,
    grid: &RealGrid,
    kind: GridKind,
    encoding: GridEncoding,
) -> Result<()> {
    if kind == GridKind::Complex {
        return Err(Error::FileFormat("complex kind requires a complex grid".into()));
    }
    let spec = grid.spec();
    let (scale, offset, payload) = match encoding {
        GridEncoding::F64 => (0.0, 0.0, f64s_to_bytes(grid.samples().iter().cloned())),
        GridEncoding::U16 => quantize_u16(grid.samples()),
    };
    let header = GridHeader {
        schema: GRID_SCHEMA,
        kind,
        width_px: spec.width_px,
        height_px: spec.height_px,
        pitch_um: spec.pitch_um,
        encoding,
        scale,
        offset,
        endianness: "little".into(),
    };
    write_container(path, &header, &payload)
}

/// Writes a complex grid in f64 mode (interleaved re, im).
pub fn save_complex_grid(path: &Path, grid: &ComplexFieldGrid) -> Result<()> {
    let spec = grid.spec();
    let payload = f64s_to_bytes(grid.samples().iter().flat_map(|c| [c.re, c.im]));
    let header = GridHeader {
        schema: GRID_SCHEMA,
        kind: GridKind::Complex,
        width_px: spec.width_px,
        height_px: spec.height_px,
        pitch_um: spec.pitch_um,
        encoding: GridEncoding::F64,
        scale: 0.0,
        offset: 0.0,
        endianness: "little".into(),
    };
    write_container(path, &header, &payload)
}

/// A grid loaded from disk.
#[derive(Clone, Debug, PartialEq)]
pub enum LoadedGrid {
    Real(RealGrid, GridKind),
    Complex(ComplexFieldGrid),
}

pub fn load_grid(path: &Path) -> Result<LoadedGrid> {
    let (header, payload) = read_container(path)?;
    if payload.len() != expected_payload_len(&header) {
        return Err(Error::FileFormat(format!(
            "{}: payload is {} bytes, expected {}",
            path.display(),
            payload.len(),
            expected_payload_len(&header)
        )));
    }
    let spec = GridSpec::new(header.width_px, header.height_px, header.pitch_um)?;
    match header.kind {
        GridKind::Complex => {
            if header.encoding != GridEncoding::F64 {
                return Err(Error::FileFormat("complex grids support f64 only".into()));
            }
            let values = bytes_to_f64s(&payload);
            let samples = values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            Ok(LoadedGrid::Complex(ComplexFieldGrid::new(spec, samples)?))
        }
        kind => {
            let values = match header.encoding {
                GridEncoding::F64 => bytes_to_f64s(&payload),
                GridEncoding::U16 => dequantize_u16(&payload, header.scale, header.offset),
            };
            Ok(LoadedGrid::Real(RealGrid::new(spec, values)?, kind))
        }
    }
}

pub fn load_real_grid(path: &Path) -> Result<RealGrid> {
    match load_grid(path)? {
        LoadedGrid::Real(g, _) => Ok(g),
        LoadedGrid::Complex(_) => {
            Err(Error::FileFormat(format!("{}: expected a real grid", path.display())))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SetManifest {
    schema: u32,
    meta: AcquisitionMeta,
    frames: Vec<String>,
}

/// Writes an interferogram set as a directory: a JSON manifest plus one grid
/// file per frame.
pub fn save_interferogram_set(
    dir: &Path,
    set: &InterferogramSet,
    encoding: GridEncoding,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (i, frame) in set.frames().iter().enumerate() {
        let name = format!("frame_{i:03}.grid");
        save_real_grid(&dir.join(&name), frame, GridKind::Intensity, encoding)?;
        names.push(name);
    }
    let manifest = SetManifest { schema: 1, meta: set.meta().clone(), frames: names };
    let mut w = BufWriter::new(File::create(dir.join("interferograms.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.flush()?;
    Ok(())
}

pub fn load_interferogram_set(dir: &Path) -> Result<InterferogramSet> {
    let manifest: SetManifest =
        serde_json::from_reader(BufReader::new(File::open(dir.join("interferograms.json"))?))?;
    if manifest.schema != 1 {
        return Err(Error::FileFormat(format!("unsupported set schema {}", manifest.schema)));
    }
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for name in &manifest.frames {
        frames.push(load_real_grid(&dir.join(name))?);
    }
    InterferogramSet::new(frames, manifest.meta)
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    d: usize,
    coefficients: Vec<[f64; 2]>,
}

/// State JSON: `{"d": 6, "coefficients": [[re, im], ...]}`.
pub fn save_state_json(path: &Path, state: &QuditState) -> Result<()> {
    let doc = StateJson {
        d: state.dimension(),
        coefficients: state.coefficients().iter().map(|c| [c.re, c.im]).collect(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.flush()?;
    Ok(())
}

pub fn load_state_json(path: &Path) -> Result<QuditState> {
    let doc: StateJson = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if doc.coefficients.len() != doc.d {
        return Err(Error::FileFormat(format!(
            "state dimension {} does not match {} coefficients",
            doc.d,
            doc.coefficients.len()
        )));
    }
    QuditState::new(doc.coefficients.iter().map(|c| Complex64::new(c[0], c[1])).collect())
}

/// One row of the per-trial records CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub trial: usize,
    pub fidelity_uncorrected: f64,
    pub fidelity_corrected: Option<f64>,
    pub seed: u64,
}

impl From<&TrialRecord> for RecordRow {
    fn from(r: &TrialRecord) -> Self {
        Self {
            trial: r.trial_index,
            fidelity_uncorrected: r.fidelity_uncorrected,
            fidelity_corrected: r.fidelity_corrected,
            seed: r.trial_seed,
        }
    }
}

/// Writes per-trial rows: trial, fidelity_uncorrected, fidelity_corrected, seed.
pub fn write_records_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(RecordRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RecordRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
pub struct StatsFile {
    pub schema: u32,
    pub uncorrected: EnsembleStats,
    pub corrected: Option<EnsembleStats>,
}

pub fn write_stats_json(
    path: &Path,
    uncorrected: &EnsembleStats,
    corrected: Option<&EnsembleStats>,
) -> Result<()> {
    let doc = StatsFile {
        schema: 1,
        uncorrected: uncorrected.clone(),
        corrected: corrected.cloned(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdi::PdiFilterSpec;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn real_grid_f64_round_trip_is_bit_exact() {
        let dir = tmp();
        let spec = GridSpec::new(16, 12, 43.0).unwrap();
        let grid = RealGrid::from_fn(spec, |x, y| (x as f64 * 0.371).sin() + y as f64).unwrap();
        let path = dir.path().join("g.grid");
        save_real_grid(&path, &grid, GridKind::Intensity, GridEncoding::F64).unwrap();
        match load_grid(&path).unwrap() {
            LoadedGrid::Real(back, GridKind::Intensity) => {
                assert_eq!(back.spec(), spec);
                for (a, b) in grid.samples().iter().zip(back.samples()) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn complex_grid_round_trip() {
        let dir = tmp();
        let spec = GridSpec::new(8, 8, 43.0).unwrap();
        let grid =
            ComplexFieldGrid::from_fn(spec, |x, y| Complex64::new(x as f64, -(y as f64))).unwrap();
        let path = dir.path().join("c.grid");
        save_complex_grid(&path, &grid).unwrap();
        match load_grid(&path).unwrap() {
            LoadedGrid::Complex(back) => assert_eq!(back, grid),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn u16_quantization_error_bounded() {
        let dir = tmp();
        let spec = GridSpec::new(32, 32, 43.0).unwrap();
        let grid = RealGrid::from_fn(spec, |x, y| ((x * 7 + y * 3) % 101) as f64 * 0.9).unwrap();
        let path = dir.path().join("q.grid");
        save_real_grid(&path, &grid, GridKind::Intensity, GridEncoding::U16).unwrap();
        let back = load_real_grid(&path).unwrap();
        let max = grid.samples().iter().cloned().fold(0.0, f64::max);
        let bound = max / 65536.0;
        for (a, b) in grid.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= bound, "{a} vs {b}");
        }
    }

    #[test]
    fn corrupted_magic_rejected() {
        let dir = tmp();
        let path = dir.path().join("bad.grid");
        std::fs::write(&path, b"NOTAGRID????????").unwrap();
        match load_grid(&path) {
            Err(Error::FileFormat(msg)) => assert!(msg.contains("magic"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn interferogram_set_round_trip() {
        let dir = tmp();
        let spec = GridSpec::new(16, 16, 43.0).unwrap();
        let frames: Vec<RealGrid> = (0..4)
            .map(|n| RealGrid::from_fn(spec, |x, y| (n * 256 + y * 16 + x) as f64 * 0.25).unwrap())
            .collect();
        let meta = AcquisitionMeta {
            filter: PdiFilterSpec::default(),
            grid: spec,
            noise: None,
            rng_seed: Some(99),
        };
        let set = InterferogramSet::new(frames, meta).unwrap();
        let set_dir = dir.path().join("set");
        save_interferogram_set(&set_dir, &set, GridEncoding::F64).unwrap();
        let back = load_interferogram_set(&set_dir).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn state_json_round_trip() {
        let dir = tmp();
        let state = crate::qudit::haar_random(6, 3).unwrap();
        let path = dir.path().join("state.json");
        save_state_json(&path, &state).unwrap();
        let back = load_state_json(&path).unwrap();
        for (a, b) in state.coefficients().iter().zip(back.coefficients()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn records_csv_round_trip() {
        let dir = tmp();
        let state = crate::qudit::haar_random(6, 1).unwrap();
        let records = vec![
            TrialRecord {
                trial_index: 0,
                trial_seed: 111,
                true_state: state.clone(),
                screen_seed: None,
                estimated_uncorrected: state.clone(),
                estimated_corrected: None,
                fidelity_uncorrected: 0.1234567890123457,
                fidelity_corrected: None,
            },
            TrialRecord {
                trial_index: 1,
                trial_seed: 222,
                true_state: state.clone(),
                screen_seed: Some(5),
                estimated_uncorrected: state.clone(),
                estimated_corrected: Some(state.clone()),
                fidelity_uncorrected: 0.87,
                fidelity_corrected: Some(0.99999999999),
            },
        ];
        let path = dir.path().join("records.csv");
        write_records_csv(&path, &records).unwrap();
        let rows = read_records_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        for (row, rec) in rows.iter().zip(&records) {
            assert_eq!(row.trial, rec.trial_index);
            assert_eq!(row.seed, rec.trial_seed);
            assert_eq!(row.fidelity_uncorrected.to_bits(), rec.fidelity_uncorrected.to_bits());
            match (row.fidelity_corrected, rec.fidelity_corrected) {
                (None, None) => {}
                (Some(a), Some(b)) => assert_eq!(a.to_bits(), b.to_bits()),
                other => panic!("mismatch {other:?}"),
            }
        }
    }
}
