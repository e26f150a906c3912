//! On-disk artifacts: URF1 channel files, binary PGM images and the CSV
//! reports.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::CostRow;
use crate::error::{Error, Result};
use crate::imaging::ImageGrid;
use crate::recovery::LineEstimate;
use crate::scalar::{lit, to_f64, Real};
use crate::sim::{ArrayGeometry, ChannelSet};
use crate::xampling::XampleOutput;

pub const URF_MAGIC: &[u8; 4] = b"URF1";

/// Header and samples of a URF1 file. Geometry is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct UrfData {
    pub num_elements: usize,
    pub grid_len: usize,
    pub grid_step: f64,
    pub tau: f64,
    pub samples: Vec<f64>,
}

impl UrfData {
    pub fn from_channels<T: Real>(ch: &ChannelSet<T>) -> Self {
        Self {
            num_elements: ch.num_elements(),
            grid_len: ch.grid_len,
            grid_step: to_f64(ch.grid_step),
            tau: to_f64(ch.tau),
            samples: ch.data.iter().map(|&v| to_f64(v)).collect(),
        }
    }

    /// Attaches array geometry; element counts must agree.
    pub fn into_channels<T: Real>(self, geometry: ArrayGeometry<T>) -> Result<ChannelSet<T>> {
        if geometry.num_elements != self.num_elements {
            return Err(Error::InvalidConfig(format!(
                "channel file has {} elements, scene array has {}",
                self.num_elements, geometry.num_elements
            )));
        }
        Ok(ChannelSet {
            grid_step: lit(self.grid_step),
            grid_len: self.grid_len,
            data: self.samples.into_iter().map(lit).collect(),
            geometry,
            tau: lit(self.tau),
        })
    }
}

pub fn write_urf<W: Write>(mut w: W, data: &UrfData) -> Result<()> {
    let n = u32::try_from(data.num_elements).map_err(|_| urf_err("element count exceeds u32"))?;
    let g = u32::try_from(data.grid_len).map_err(|_| urf_err("grid length exceeds u32"))?;
    if data.samples.len() != data.num_elements * data.grid_len {
        return Err(urf_err("sample count does not match header"));
    }
    w.write_all(URF_MAGIC)?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&g.to_le_bytes())?;
    w.write_all(&data.grid_step.to_le_bytes())?;
    w.write_all(&data.tau.to_le_bytes())?;
    let mut buf = Vec::with_capacity(data.samples.len() * 8);
    for v in &data.samples {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_urf<R: Read>(mut r: R) -> Result<UrfData> {
    let mut head = [0u8; 28];
    r.read_exact(&mut head).map_err(|_| urf_err("truncated header"))?;
    if &head[..4] != URF_MAGIC {
        return Err(urf_err("bad magic"));
    }
    let num_elements = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let grid_len = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let grid_step = f64::from_le_bytes(head[12..20].try_into().unwrap());
    let tau = f64::from_le_bytes(head[20..28].try_into().unwrap());
    if !(grid_step > 0.0) || !(tau > 0.0) {
        return Err(urf_err("grid step and tau must be positive"));
    }
    let count = num_elements
        .checked_mul(grid_len)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| urf_err("header sizes overflow"))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != count {
        return Err(urf_err(&format!("expected {count} sample bytes, found {}", body.len())));
    }
    let samples = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(UrfData { num_elements, grid_len, grid_step, tau, samples })
}

pub fn save_urf(path: &Path, data: &UrfData) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_urf(&mut w, data)?;
    w.flush()?;
    Ok(())
}

pub fn load_urf(path: &Path) -> Result<UrfData> {
    read_urf(std::io::BufReader::new(std::fs::File::open(path)?))
}

fn urf_err(detail: &str) -> Error {
    Error::Format { what: "URF1 file", detail: detail.to_string() }
}

fn pgm_err(detail: &str) -> Error {
    Error::Format { what: "PGM image", detail: detail.to_string() }
}

pub fn write_pgm<W: Write>(mut w: W, img: &ImageGrid) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", img.num_lines, img.axial_samples)?;
    w.write_all(&img.pixels)?;
    Ok(())
}

/// Width, height and pixels of an 8-bit P5 image.
pub fn read_pgm<R: Read>(mut r: R) -> Result<(usize, usize, Vec<u8>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(pgm_err("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(pgm_err("expected P5 magic"));
    }
    let dim = |s: &str| s.parse::<usize>().map_err(|_| pgm_err("bad dimension"));
    let (w, h) = (dim(&fields[1])?, dim(&fields[2])?);
    if fields[3] != "255" {
        return Err(pgm_err("only 8-bit images are supported"));
    }
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != w * h {
        return Err(pgm_err(&format!("expected {} pixel bytes, found {}", w * h, body.len())));
    }
    Ok((w, h, body.to_vec()))
}

pub fn save_pgm(path: &Path, img: &ImageGrid) -> Result<()> {
    let mut buf = Vec::with_capacity(img.pixels.len() + 32);
    write_pgm(&mut buf, img)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    read_pgm(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub line_index: usize,
    pub t_l_s: f64,
    pub b_l: f64,
    pub residual: f64,
}

/// Flattens per-line estimates into CSV records, one per recovered pulse.
pub fn estimate_records<T: Real>(lines: &[LineEstimate<T>]) -> Vec<EstimateRecord> {
    lines
        .iter()
        .enumerate()
        .flat_map(|(i, e)| {
            e.delays.iter().zip(&e.amplitudes).map(move |(&t, &b)| EstimateRecord {
                line_index: i,
                t_l_s: to_f64(t),
                b_l: to_f64(b),
                residual: to_f64(e.residual),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub q: usize,
    /// Element index, or `all` for the summed sample vector.
    pub m: String,
    pub value: f64,
}

pub fn sample_records<T: Real>(out: &XampleOutput<T>) -> Vec<SampleRecord> {
    let mut rows = Vec::with_capacity(out.c_qm.len() + out.c.len());
    for q in 0..out.c_qm.nrows() {
        for m in 0..out.c_qm.ncols() {
            rows.push(SampleRecord { q, m: m.to_string(), value: to_f64(out.c_qm[(q, m)]) });
        }
    }
    for (q, &v) in out.c.iter().enumerate() {
        rows.push(SampleRecord { q, m: "all".into(), value: to_f64(v) });
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSampleRecord {
    pub line_index: usize,
    pub t_s: f64,
    pub value: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub line_index: usize,
    pub true_count: usize,
    pub detected_count: usize,
    pub delay_rmse_s: f64,
    pub amplitude_rel_error: f64,
    pub reference_peak_row: usize,
    pub xampled_peak_row: usize,
    /// Peak rows within two pixels.
    pub peak_row_agree: bool,
}

pub fn write_csv<S: Serialize, P: AsRef<Path>>(path: P, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Header-only CSV for an empty report.
pub fn write_csv_with_header<S: Serialize, P: AsRef<Path>>(path: P, header: &[&str], rows: &[S]) -> Result<()> {
    if !rows.is_empty() {
        return write_csv(path, rows);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    w.flush()?;
    Ok(())
}

pub fn read_csv<D: for<'de> Deserialize<'de>, P: AsRef<Path>>(path: P) -> Result<Vec<D>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

pub const ESTIMATE_HEADER: &[&str] = &["line_index", "t_l_s", "b_l", "residual"];

pub fn write_cost<P: AsRef<Path>>(path: P, rows: &[CostRow]) -> Result<()> {
    write_csv(path, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_urf() -> UrfData {
        UrfData {
            num_elements: 2,
            grid_len: 3,
            grid_step: 3.125e-9,
            tau: 1e-6,
            samples: vec![0.0, 1.5, -2.0, 3.0, f64::MIN_POSITIVE, 1e300],
        }
    }

    #[test]
    fn urf_layout() {
        let mut buf = Vec::new();
        write_urf(&mut buf, &sample_urf()).unwrap();
        assert_eq!(buf.len(), 28 + 6 * 8);
        assert_eq!(&buf[..4], b"URF1");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[8..12], &3u32.to_le_bytes());
        assert_eq!(&buf[28..36], &0.0f64.to_le_bytes());
        assert_eq!(&buf[36..44], &1.5f64.to_le_bytes());
        assert_eq!(read_urf(&buf[..]).unwrap(), sample_urf());
    }

    #[test]
    fn urf_rejects_damage() {
        let mut buf = Vec::new();
        write_urf(&mut buf, &sample_urf()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_urf(&bad[..]), Err(Error::Format { .. })));
        assert!(read_urf(&buf[..buf.len() - 1]).is_err());
        assert!(read_urf(&buf[..10]).is_err());
    }

    #[test]
    fn urf_geometry_mismatch() {
        let g = ArrayGeometry::new(3, 3e-4, 1540.0).unwrap();
        assert!(sample_urf().into_channels::<f64>(g).is_err());
        let g = ArrayGeometry::new(2, 3e-4, 1540.0).unwrap();
        let ch = sample_urf().into_channels::<f64>(g).unwrap();
        assert_eq!(ch.row(1), &[3.0, f64::MIN_POSITIVE, 1e300]);
    }

    #[test]
    fn pgm_layout() {
        let img = ImageGrid {
            num_lines: 2,
            axial_samples: 3,
            axial_step: 5e-8,
            dynamic_range_db: 50.0,
            pixels: vec![255, 0, 0, 217, 128, 0],
        };
        let mut buf = Vec::new();
        write_pgm(&mut buf, &img).unwrap();
        assert_eq!(&buf[..11], b"P5\n2 3\n255\n");
        assert_eq!(&buf[11..], &img.pixels[..]);
        assert_eq!(read_pgm(&buf[..]).unwrap(), (2, 3, img.pixels.clone()));
        assert!(read_pgm(&buf[..buf.len() - 1]).is_err());
        assert!(read_pgm(&b"P2\n1 1\n255\n0"[..]).is_err());
    }

    #[test]
    fn estimate_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let lines = vec![
            LineEstimate {
                delays: vec![1e-5, 2e-5],
                amplitudes: vec![1.0, -0.5],
                model_order: 2,
                residual: 1e-4,
                ..LineEstimate::empty()
            },
            LineEstimate::empty(),
            LineEstimate { delays: vec![3e-5], amplitudes: vec![2.0], model_order: 1, ..LineEstimate::empty() },
        ];
        let recs = estimate_records(&lines);
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].line_index, 2);
        let path = dir.path().join("e.csv");
        write_csv_with_header(&path, ESTIMATE_HEADER, &recs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("line_index,t_l_s,b_l,residual\n"));
        let back: Vec<EstimateRecord> = read_csv(&path).unwrap();
        assert_eq!(back, recs);
        write_csv_with_header::<EstimateRecord, _>(&path, ESTIMATE_HEADER, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "line_index,t_l_s,b_l,residual\n");
    }

    proptest! {
        #[test]
        fn urf_roundtrip(n in 1usize..4, g in 1usize..20, seed in any::<u64>()) {
            let samples: Vec<f64> = (0..n * g).map(|i| ((seed as f64) * 1e-12 + i as f64).sin()).collect();
            let d = UrfData { num_elements: n, grid_len: g, grid_step: 1e-9, tau: 2e-6, samples };
            let mut buf = Vec::new();
            write_urf(&mut buf, &d).unwrap();
            prop_assert_eq!(read_urf(&buf[..]).unwrap(), d);
        }
    }
}
