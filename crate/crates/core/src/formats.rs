//! On-disk formats: scene text files, the NFSAR1 binary image format, 16-bit
//! PGM heatmaps and CSV number formatting.
//!
//! Scene file:
//!
//! ```text
//! NFSAR-SCENE 1
//! # comments start with '#'
//! label paper1
//! # azimuth_m, range_m, amplitude_dbsm, phase_deg
//! -8.0, 17.0, -10.0, 0.0
//! ```
//!
//! NFSAR1 image: magic `NFSAR1\n`, then little-endian `u32 n_azimuth`,
//! `u32 n_range`, `f64 spacing_azimuth_m`, `f64 spacing_range_m`,
//! `f64 origin_azimuth_m`, `f64 origin_range_m`, then row-major samples as
//! interleaved `(re, im)` f64 pairs.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::image::ComplexImage;
use crate::simulate::{Scatterer, SceneSpec};

pub const SCENE_HEADER: &str = "NFSAR-SCENE 1";
pub const NFSAR1_MAGIC: &[u8; 7] = b"NFSAR1\n";
pub const NFSAR1_HEADER_LEN: usize = 7 + 4 + 4 + 8 * 4;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses a scene file. Line numbers in errors are 1-based.
pub fn parse_scene(text: &str) -> Result<SceneSpec> {
    let mut scene = SceneSpec::default();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != SCENE_HEADER {
                return Err(parse_err(
                    lineno,
                    format!("expected header '{SCENE_HEADER}', found '{line}'"),
                ));
            }
            seen_header = true;
            continue;
        }
        if let Some(label) = line.strip_prefix("label") {
            if label.is_empty() || label.starts_with(char::is_whitespace) {
                scene.label = label.trim().to_string();
                continue;
            }
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_err(
                lineno,
                format!("expected 4 comma-separated fields, found {}", fields.len()),
            ));
        }
        let mut values = [0.0; 4];
        for (k, (slot, field)) in values.iter_mut().zip(&fields).enumerate() {
            let name = ["azimuth_m", "range_m", "amplitude_dbsm", "phase_deg"][k];
            *slot = field
                .parse::<f64>()
                .map_err(|_| parse_err(lineno, format!("invalid {name} '{field}'")))?;
            if !slot.is_finite() {
                return Err(parse_err(lineno, format!("{name} must be finite")));
            }
        }
        if values[1] <= 0.0 {
            return Err(parse_err(lineno, "range_m must be positive"));
        }
        scene.scatterers.push(Scatterer::new(
            values[0],
            values[1],
            values[2],
            values[3].to_radians(),
        ));
    }
    if !seen_header {
        return Err(parse_err(1, format!("missing header '{SCENE_HEADER}'")));
    }
    Ok(scene)
}

pub fn write_scene(scene: &SceneSpec) -> String {
    let mut out = format!("{SCENE_HEADER}\n");
    if !scene.label.is_empty() {
        out.push_str(&format!("label {}\n", scene.label));
    }
    out.push_str("# azimuth_m, range_m, amplitude_dbsm, phase_deg\n");
    for s in &scene.scatterers {
        out.push_str(&format!(
            "{:?}, {:?}, {:?}, {:?}\n",
            s.azimuth_m,
            s.range_m,
            s.amplitude_dbsm,
            s.phase_rad.to_degrees()
        ));
    }
    out
}

pub fn encode_nfsar1(image: &ComplexImage) -> Vec<u8> {
    let g = image.grid();
    let mut out = Vec::with_capacity(NFSAR1_HEADER_LEN + 16 * g.len());
    out.extend_from_slice(NFSAR1_MAGIC);
    out.extend_from_slice(&(g.n_azimuth as u32).to_le_bytes());
    out.extend_from_slice(&(g.n_range as u32).to_le_bytes());
    for v in [
        g.spacing_azimuth_m,
        g.spacing_range_m,
        g.origin_azimuth_m,
        g.origin_range_m,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for z in image.as_slice() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Decodes an NFSAR1 buffer. The buffer length must match the header exactly.
pub fn decode_nfsar1(bytes: &[u8]) -> Result<ComplexImage> {
    if bytes.len() < NFSAR1_HEADER_LEN {
        return Err(Error::Format(format!(
            "NFSAR1 file is {} bytes, shorter than the {NFSAR1_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..7] != NFSAR1_MAGIC {
        return Err(Error::Format("bad NFSAR1 magic".into()));
    }
    let n_azimuth = read_u32(bytes, 7) as usize;
    let n_range = read_u32(bytes, 11) as usize;
    let grid = GridSpec {
        n_azimuth,
        n_range,
        spacing_azimuth_m: read_f64(bytes, 15),
        spacing_range_m: read_f64(bytes, 23),
        origin_azimuth_m: read_f64(bytes, 31),
        origin_range_m: read_f64(bytes, 39),
    };
    grid.validate()?;
    let expected = n_azimuth
        .checked_mul(n_range)
        .and_then(|n| n.checked_mul(16))
        .and_then(|n| n.checked_add(NFSAR1_HEADER_LEN))
        .ok_or_else(|| Error::Format("NFSAR1 dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "NFSAR1 payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let samples: Vec<Complex64> = bytes[NFSAR1_HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| Complex64::new(read_f64(c, 0), read_f64(c, 8)))
        .collect();
    let data = Array2::from_shape_vec((n_azimuth, n_range), samples)
        .map_err(|e| Error::Format(e.to_string()))?;
    ComplexImage::from_array(grid, data)
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_nfsar1(path: &Path, image: &ComplexImage) -> Result<()> {
    write_atomic(path, &encode_nfsar1(image))
}

pub fn read_nfsar1(path: &Path) -> Result<ComplexImage> {
    decode_nfsar1(&std::fs::read(path)?)
}

/// Pixel value for a magnitude on a dB scale spanning `range_db` below
/// `peak_db`.
pub fn db_to_pixel(db: f64, peak_db: f64, range_db: f64) -> u16 {
    let t = ((db - (peak_db - range_db)) / range_db).clamp(0.0, 1.0);
    if t.is_nan() {
        return 0;
    }
    (65535.0 * t).round() as u16
}

/// 16-bit binary PGM of `|values|` in dB; rows are azimuth. Width and height
/// come from the array shape `(height, width)`.
pub fn encode_pgm_db(magnitudes: &Array2<f64>, range_db: f64) -> Vec<u8> {
    let (h, w) = magnitudes.dim();
    let peak = magnitudes.iter().copied().fold(0.0, f64::max);
    let peak_db = 20.0 * peak.log10();
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    out.reserve(2 * w * h);
    for &m in magnitudes.iter() {
        let px = if peak > 0.0 && m > 0.0 {
            db_to_pixel(20.0 * m.log10(), peak_db, range_db)
        } else {
            0
        };
        out.extend_from_slice(&px.to_be_bytes());
    }
    out
}

pub fn image_pgm(image: &ComplexImage, range_db: f64) -> Vec<u8> {
    encode_pgm_db(&image.data().mapv(|z| z.norm()), range_db)
}

/// Formats a number with six significant digits in fixed notation, falling
/// back to scientific notation for very large or small magnitudes.
pub fn csv_number(x: f64) -> String {
    if !x.is_finite() {
        return "NA".into();
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may have carried into a new leading digit
    let rounded: f64 = s.parse().unwrap();
    let new_exp = rounded.abs().log10().floor() as i32;
    if new_exp != exp && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{x:.decimals$}");
    }
    s
}
