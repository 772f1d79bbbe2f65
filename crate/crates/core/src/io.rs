//! File formats: binary PGM masks, detached-header NRRD volumes, raw float
//! grids with a JSON sidecar, and exponent tables as CSV plus sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Alphabet, MaskGrid, ScalarField, Shape, VesselClass, ARTERY, BOTH, VEIN};
use crate::murray::{Bin, ExponentTable};

/// PGM grey levels for A/V labels 0..=3.
pub const AV_LEVELS: [u8; 4] = [0, 100, 200, 255];

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

/// Splits a netpbm header into `count` tokens, skipping comments, and
/// returns them with the offset of the raster.
fn pnm_header(bytes: &[u8], count: usize) -> Option<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return None;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    (i < bytes.len()).then_some((tokens, i + 1))
}

/// Reads a P5 mask. Levels `{0, 255}` give a binary mask; any of 100 or 200
/// gives an artery/vein label map.
pub fn read_pgm(path: &Path, spacing: &[f64]) -> Result<MaskGrid> {
    let what = path.display().to_string();
    let bytes = read(path)?;
    let (tok, offset) = pnm_header(&bytes, 4).ok_or_else(|| Error::format(&what, "truncated PGM header"))?;
    if tok[0] != "P5" {
        return Err(Error::format(&what, format!("magic {} is not P5", tok[0])));
    }
    let num = |s: &str, field: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(&what, format!("{field} `{s}` is not an integer")))
    };
    let (w, h, maxval) = (num(&tok[1], "width")?, num(&tok[2], "height")?, num(&tok[3], "maxval")?);
    if maxval != 255 {
        return Err(Error::format(&what, format!("maxval {maxval}, expected 255")));
    }
    let shape = Shape::from_dims(&[h, w])?;
    let raster = &bytes[offset..];
    if raster.len() < shape.len() {
        return Err(Error::format(
            &what,
            format!("{} raster bytes for {w}x{h}", raster.len()),
        ));
    }
    let raster = &raster[..shape.len()];
    let av = raster.iter().any(|&v| v == AV_LEVELS[1] || v == AV_LEVELS[2]);
    let labels = raster
        .iter()
        .map(|&v| match (v, av) {
            (0, _) => Ok(0),
            (255, false) => Ok(1),
            (100, true) => Ok(ARTERY),
            (200, true) => Ok(VEIN),
            (255, true) => Ok(BOTH),
            _ => Err(Error::format(&what, format!("grey level {v} is not a mask label"))),
        })
        .collect::<Result<Vec<u8>>>()?;
    let alphabet = if av { Alphabet::ArteryVein } else { Alphabet::Binary };
    MaskGrid::new(shape, spacing, alphabet, labels)
}

pub fn write_pgm(path: &Path, mask: &MaskGrid) -> Result<()> {
    if mask.ndim() != 2 {
        return Err(Error::invalid("mask", "PGM holds 2D masks only"));
    }
    let [_, h, w] = mask.shape().dims3();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(mask.labels().iter().map(|&l| match mask.alphabet() {
        Alphabet::Binary => {
            if l > 0 {
                255
            } else {
                0
            }
        }
        Alphabet::ArteryVein => AV_LEVELS[l as usize],
    }));
    fs::write(path, out)?;
    Ok(())
}

/// Reads a detached `.nhdr` header with uint8 raw little-endian data.
/// Non-zero voxels are foreground.
pub fn read_nrrd(path: &Path) -> Result<MaskGrid> {
    let what = path.display().to_string();
    let text = String::from_utf8(read(path)?).map_err(|_| Error::format(&what, "header is not UTF-8"))?;
    let mut lines = text.lines();
    if !lines.next().is_some_and(|l| l.starts_with("NRRD")) {
        return Err(Error::format(&what, "missing NRRD magic"));
    }
    let mut sizes = None;
    let mut spacings = None;
    let mut data = None;
    for line in lines {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        let value = value.trim();
        let floats = |v: &str| {
            v.split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
        };
        match key.trim() {
            "type" if !matches!(value, "uint8" | "uchar" | "unsigned char" | "uint8_t") => {
                return Err(Error::format(&what, format!("type {value}, expected uint8")));
            }
            "encoding" if value != "raw" => {
                return Err(Error::format(&what, format!("encoding {value}, expected raw")));
            }
            "sizes" => {
                let v = value
                    .split_whitespace()
                    .map(|t| t.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>();
                sizes = Some(v.map_err(|_| Error::format(&what, "sizes are not integers"))?);
            }
            "spacings" => spacings = Some(floats(value).map_err(|_| Error::format(&what, "spacings are not numbers"))?),
            "data file" | "datafile" => data = Some(value.to_string()),
            _ => {}
        }
    }
    let sizes = sizes.ok_or_else(|| Error::format(&what, "missing field `sizes`"))?;
    let spacings = spacings.ok_or_else(|| Error::format(&what, "missing field `spacings`"))?;
    let data = data.ok_or_else(|| Error::format(&what, "missing field `data file`"))?;
    if sizes.len() != 3 || spacings.len() != 3 {
        return Err(Error::format(&what, "expected 3 sizes and 3 spacings"));
    }
    // NRRD lists the fastest axis first
    let shape = Shape::new_3d(sizes[2], sizes[1], sizes[0]);
    let spacing = [spacings[2], spacings[1], spacings[0]];
    let raw_path = path.parent().unwrap_or(Path::new(".")).join(&data);
    let raw = read(&raw_path)?;
    if raw.len() != shape.len() {
        return Err(Error::format(
            raw_path.display().to_string(),
            format!("{} bytes for {} voxels", raw.len(), shape.len()),
        ));
    }
    let labels = raw.iter().map(|&v| (v > 0) as u8).collect();
    MaskGrid::new(shape, &spacing, Alphabet::Binary, labels)
}

/// Writes `path` (a `.nhdr`) and its `.raw` data next to it.
pub fn write_nrrd(path: &Path, mask: &MaskGrid) -> Result<()> {
    if mask.ndim() != 3 {
        return Err(Error::invalid("mask", "NRRD output holds 3D volumes only"));
    }
    let [d, h, w] = mask.shape().dims3();
    let s = mask.spacing();
    let raw = path.with_extension("raw");
    let name = raw.file_name().and_then(|n| n.to_str()).unwrap_or("data.raw");
    let header = format!(
        "NRRD0004\ntype: uint8\ndimension: 3\nsizes: {w} {h} {d}\nspacings: {} {} {}\nencoding: raw\nendian: little\ndata file: {name}\n",
        s[2], s[1], s[0]
    );
    fs::write(path, header)?;
    fs::write(&raw, mask.labels().iter().map(|&l| (l > 0) as u8).collect::<Vec<u8>>())?;
    Ok(())
}

/// Reads a 2D PGM or a 3D `.nhdr`, by extension. PGM needs `spacing`.
pub fn read_mask(path: &Path, spacing: Option<&[f64]>) -> Result<MaskGrid> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("nhdr") => {
            let m = read_nrrd(path)?;
            match spacing {
                Some(s) => m.with_spacing(s),
                None => Ok(m),
            }
        }
        _ => {
            let s = spacing.ok_or_else(|| Error::invalid("spacing", "PGM masks need an explicit spacing"))?;
            let s = if s.len() == 1 { vec![s[0]; 2] } else { s.to_vec() };
            read_pgm(path, &s)
        }
    }
}

pub fn write_mask(path: &Path, mask: &MaskGrid) -> Result<()> {
    match mask.ndim() {
        2 => write_pgm(path, mask),
        _ => write_nrrd(path, mask),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GridMeta {
    dims: Vec<usize>,
    spacing: Vec<f64>,
}

/// Raw little-endian `f32` values plus `<path>.json` with dims and spacing.
pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    let bytes: Vec<u8> = field.values().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    fs::write(path, bytes)?;
    let meta = GridMeta {
        dims: field.shape().dims(),
        spacing: field.spacing(),
    };
    fs::write(sidecar(path), serde_json::to_string(&meta)? + "\n")?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let meta_path = sidecar(path);
    let meta: GridMeta = serde_json::from_slice(&read(&meta_path)?)
        .map_err(|e| Error::format(meta_path.display().to_string(), e.to_string()))?;
    let shape = Shape::from_dims(&meta.dims)?;
    let bytes = read(path)?;
    if bytes.len() != 4 * shape.len() {
        return Err(Error::format(
            path.display().to_string(),
            format!("{} bytes for {} cells", bytes.len(), shape.len()),
        ));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    ScalarField::new(shape, &meta.spacing, values)
}

#[derive(Debug, Serialize, Deserialize)]
struct TableMeta {
    class: VesselClass,
    bin_width_um: f64,
    sigma_log: f64,
    ci_low: f64,
    ci_high: f64,
    n_records: usize,
}

pub const TABLE_HEADER: &str = "width_um,alpha,count";

/// `width_um,alpha,count` rows plus `<path>.json` with the spread and interval.
pub fn write_table(path: &Path, table: &ExponentTable) -> Result<()> {
    let mut csv = String::from(TABLE_HEADER);
    csv.push('\n');
    for b in &table.bins {
        csv.push_str(&format!("{},{},{}\n", b.width_um, b.alpha, b.count));
    }
    fs::write(path, csv)?;
    let meta = TableMeta {
        class: table.class,
        bin_width_um: table.bin_width_um,
        sigma_log: table.sigma_log,
        ci_low: table.ci_low,
        ci_high: table.ci_high,
        n_records: table.n_records,
    };
    fs::write(sidecar(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<ExponentTable> {
    let what = path.display().to_string();
    let text = String::from_utf8(read(path)?).map_err(|_| Error::format(&what, "not UTF-8"))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TABLE_HEADER) {
        return Err(Error::format(&what, format!("header must be `{TABLE_HEADER}`")));
    }
    let mut bins = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |field: &str| Error::format(&what, format!("line {}: bad {field}", n + 2));
        if f.len() != 3 {
            return Err(bad("column count"));
        }
        bins.push(Bin {
            width_um: f[0].parse().map_err(|_| bad("width_um"))?,
            alpha: f[1].parse().map_err(|_| bad("alpha"))?,
            count: f[2].parse().map_err(|_| bad("count"))?,
        });
    }
    let meta_path = sidecar(path);
    let meta: TableMeta = serde_json::from_slice(&read(&meta_path)?)
        .map_err(|e| Error::format(meta_path.display().to_string(), e.to_string()))?;
    let table = ExponentTable {
        class: meta.class,
        bin_width_um: meta.bin_width_um,
        bins,
        sigma_log: meta.sigma_log,
        ci_low: meta.ci_low,
        ci_high: meta.ci_high,
        n_records: meta.n_records,
    };
    table.validate()?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::murray::table_from_samples;

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let m = MaskGrid::from_ascii(&["#..#", ".##.", "...#"])
            .with_spacing(&[2.0, 2.0])
            .unwrap();
        write_pgm(&p, &m).unwrap();
        assert_eq!(read_pgm(&p, &[2.0, 2.0]).unwrap(), m);
        let av = MaskGrid::new(Shape::new_2d(1, 4), &[1.0, 1.0], Alphabet::ArteryVein, vec![0, 1, 2, 3]).unwrap();
        write_pgm(&p, &av).unwrap();
        assert_eq!(read_pgm(&p, &[1.0, 1.0]).unwrap(), av);
    }

    #[test]
    fn pgm_comments_and_bad_levels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.pgm");
        fs::write(&p, b"P5\n# made by hand\n2 1\n255\n\x00\xff").unwrap();
        assert_eq!(read_pgm(&p, &[1.0, 1.0]).unwrap().count(), 1);
        fs::write(&p, b"P5\n2 1\n255\n\x00\x07").unwrap();
        assert!(read_pgm(&p, &[1.0, 1.0])
            .unwrap_err()
            .to_string()
            .contains("grey level 7"));
    }

    #[test]
    fn nrrd_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.nhdr");
        let shape = Shape::new_3d(2, 3, 4);
        let cells: Vec<bool> = (0..shape.len()).map(|i| i % 3 == 0).collect();
        let m = MaskGrid::from_bools(shape, &cells)
            .unwrap()
            .with_spacing(&[0.5, 0.7, 0.7])
            .unwrap();
        write_nrrd(&p, &m).unwrap();
        assert_eq!(read_nrrd(&p).unwrap(), m);
    }

    #[test]
    fn field_round_trip_is_bit_exact_for_f32() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.grid");
        let values: Vec<f64> = (0..12).map(|i| (i as f32 * 0.37) as f64).collect();
        let f = ScalarField::new(Shape::new_2d(3, 4), &[1.0, 2.0], values).unwrap();
        write_field(&p, &f).unwrap();
        assert_eq!(read_field(&p).unwrap(), f);
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let samples: Vec<(f64, f64)> = (0..40)
            .map(|i| (10.0 + (i % 7) as f64, 2.5 + 0.01 * i as f64))
            .collect();
        let t = table_from_samples(&samples, VesselClass::Artery).unwrap();
        write_table(&p, &t).unwrap();
        assert_eq!(read_table(&p).unwrap(), t);
    }
}
