//! Flat little-endian `f64` dumps with JSON headers, CSV tables and PNG previews.
//!
//! A field stored at `name.bin` has its header at `name.json`. Complex fields
//! are written as the real plane followed by the imaginary plane.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boundary_cgo::Sinogram;
use crate::contrast::DirectSample;
use crate::error::{Error, Result};
use crate::forward::{BoundaryOpHeader, BoundaryOpMatrix};
use crate::grids::{KGrid, KGridHeader, ZGrid, ZGridHeader};
use crate::linalg::DenseMatrix;
use crate::phantoms::ConductivityImage;
use crate::pipeline::IterationMetrics;
use crate::scattering::{t_from_tau, Convention, ScatteringField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageHeader {
    pub format: String,
    pub grid: ZGridHeader,
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringHeader {
    pub format: String,
    pub grid: KGridHeader,
    pub convention: Convention,
    /// Half-open index ranges of valid points.
    pub valid: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixHeader {
    pub format: String,
    #[serde(flatten)]
    pub op: BoundaryOpHeader,
}

const IMAGE_FORMAT: &str = "tvdbar-image";
const SCATTERING_FORMAT: &str = "tvdbar-scattering";
const MATRIX_FORMAT: &str = "tvdbar-boundary-op";

/// Header path belonging to a binary dump.
pub fn header_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn write_f64(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_f64(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} holds {} bytes, not a whole number of f64 values",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn check_format(found: &str, expected: &str, path: &Path) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{} is a `{found}` header, expected `{expected}`",
            path.display()
        )))
    }
}

fn check_len(path: &Path, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{} holds {got} values, header implies {expected}",
            path.display()
        )))
    }
}

pub fn write_image(path: &Path, image: &ConductivityImage) -> Result<()> {
    write_f64(path, image.values())?;
    write_json(
        &header_path(path),
        &ImageHeader {
            format: IMAGE_FORMAT.into(),
            grid: image.grid().header(),
            background: image.background(),
        },
    )
}

pub fn read_image(path: &Path) -> Result<ConductivityImage> {
    let hp = header_path(path);
    let header: ImageHeader = read_json(&hp)?;
    check_format(&header.format, IMAGE_FORMAT, &hp)?;
    let grid = Arc::new(ZGrid::new(header.grid.ell, header.grid.s)?);
    let values = read_f64(path)?;
    check_len(path, values.len(), grid.len())?;
    ConductivityImage::new(grid, values, header.background)
}

fn ranges(mask: &[bool]) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &v) in mask.iter().chain(std::iter::once(&false)).enumerate() {
        match (v, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push([s, i]);
                start = None;
            }
            _ => {}
        }
    }
    out
}

pub fn write_scattering(path: &Path, field: &ScatteringField, convention: Convention) -> Result<()> {
    let values = match convention {
        Convention::Tau => field.tau().to_vec(),
        Convention::T => field.t_values(),
    };
    let mut planes: Vec<f64> = values.iter().map(|v| v.re).collect();
    planes.extend(values.iter().map(|v| v.im));
    write_f64(path, &planes)?;
    write_json(
        &header_path(path),
        &ScatteringHeader {
            format: SCATTERING_FORMAT.into(),
            grid: field.grid().header(),
            convention,
            valid: ranges(field.valid()),
        },
    )
}

pub fn read_scattering(path: &Path) -> Result<ScatteringField> {
    let hp = header_path(path);
    let header: ScatteringHeader = read_json(&hp)?;
    check_format(&header.format, SCATTERING_FORMAT, &hp)?;
    let grid = Arc::new(KGrid::new(header.grid.m, header.grid.r, header.grid.r_tilde)?);
    let planes = read_f64(path)?;
    let n = grid.len();
    check_len(path, planes.len(), 2 * n)?;
    let tau: Vec<Complex64> = (0..n)
        .map(|i| {
            let v = Complex64::new(planes[i], planes[n + i]);
            match header.convention {
                Convention::Tau => v,
                Convention::T if grid.is_zero(i) => Complex64::new(0.0, 0.0),
                Convention::T => v / t_from_tau(grid.point(i), Complex64::new(1.0, 0.0)),
            }
        })
        .collect();
    let mut valid = vec![false; n];
    for [a, b] in header.valid {
        if a > b || b > n {
            return Err(Error::ShapeMismatch(format!("valid range {a}..{b} outside the k-grid")));
        }
        valid[a..b].iter_mut().for_each(|v| *v = true);
    }
    ScatteringField::new(grid, tau, valid)
}

pub fn write_matrix(path: &Path, op: &BoundaryOpMatrix) -> Result<()> {
    write_f64(path, op.matrix.as_slice())?;
    write_json(
        &header_path(path),
        &MatrixHeader {
            format: MATRIX_FORMAT.into(),
            op: op.header(),
        },
    )
}

pub fn read_matrix(path: &Path) -> Result<BoundaryOpMatrix> {
    let hp = header_path(path);
    let header: MatrixHeader = read_json(&hp)?;
    check_format(&header.format, MATRIX_FORMAT, &hp)?;
    let values = read_f64(path)?;
    let n = header.op.size;
    check_len(path, values.len(), n * n)?;
    BoundaryOpMatrix::from_header(&header.op, DenseMatrix::from_row_major(n, values)?)
}

/// Matrix rows as comma-separated values in shortest round-trip form.
pub fn write_matrix_csv(path: &Path, op: &BoundaryOpMatrix) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let n = op.matrix.n();
    for i in 0..n {
        let row: Vec<String> = op.matrix.row(i).iter().map(f64::to_string).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// One line per entry: `m,l,re,im`.
pub fn write_sinogram_csv(path: &Path, sino: &Sinogram) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "m,l,re,im")?;
    for m in 0..sino.size {
        for l in 0..sino.size {
            let v = sino.get(m, l);
            writeln!(w, "{m},{l},{:e},{:e}", v.re, v.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_samples_csv(path: &Path, samples: &[DirectSample]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "s,t,value,failed")?;
    for p in samples {
        writeln!(w, "{:.9},{:.9},{:e},{}", p.s, p.t, p.value, p.failed)?;
    }
    w.flush()?;
    Ok(())
}

/// Metrics table, one row per iteration.
pub fn metrics_csv(rows: &[(usize, IterationMetrics)]) -> String {
    let mut out = String::from("j,db_l2,tv_l2,ce_l2,db_ssim,tv_ssim,ce_ssim\n");
    for (j, m) in rows {
        out += &format!(
            "{j},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            m.db.l2, m.tv.l2, m.ce.l2, m.db.ssim, m.tv.ssim, m.ce.ssim
        );
    }
    out
}

/// Grayscale preview on the fixed scale `[lo, hi]`; values outside are clamped.
pub fn write_png(path: &Path, image: &ConductivityImage, lo: f64, hi: f64) -> Result<()> {
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!("empty color range [{lo}, {hi}]")));
    }
    let grid = image.grid();
    let n = grid.n();
    let mut clamped = 0usize;
    let mut pixels = vec![0u8; n * n];
    for row in 0..n {
        // top row of the picture is the largest y
        let y = n - 1 - row;
        for x in 0..n {
            let v = image.values()[y * n + x];
            let t = (v - lo) / (hi - lo);
            if !(0.0..=1.0).contains(&t) {
                clamped += 1;
            }
            pixels[row * n + x] = (t.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    if clamped > 0 {
        log::warn!("{}: {clamped} pixels clamped to [{lo}, {hi}]", path.display());
    }
    let file = fs::File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), n as u32, n as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(&pixels)?;
    writer.finish()?;
    Ok(())
}
