//! Grayscale image input (PGM P2/P5, PNG) and PGM P5 output.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, LabelMask, MembershipField};

/// Reads a grayscale image, returning raw intensities (not rescaled).
/// PGM is recognised by its magic number, anything else goes to the PNG decoder.
pub fn read_image(path: &Path) -> Result<ImageGrid> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        return parse_pgm(&bytes).map_err(|reason| Error::Format {
            path: path.to_path_buf(),
            reason,
        });
    }
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        image::DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        other => other.into_luma8().into_raw().into_iter().map(f64::from).collect(),
    };
    ImageGrid::new(h, w, data)
}

/// Parses binary (P5) or ASCII (P2) PGM with maxval up to 65535.
pub fn parse_pgm(bytes: &[u8]) -> Result<ImageGrid, String> {
    let mut pos = 2;
    let binary = match &bytes[..2.min(bytes.len())] {
        b"P5" => true,
        b"P2" => false,
        _ => return Err("missing P2/P5 magic number".into()),
    };
    let width = next_token(bytes, &mut pos)?;
    let height = next_token(bytes, &mut pos)?;
    let maxval = next_token(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err(format!("invalid dimensions {width}x{height}"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("invalid maxval {maxval}"));
    }
    let count = width * height;
    let data: Vec<f64> = if binary {
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let bpp = if maxval > 255 { 2 } else { 1 };
        let raster = bytes
            .get(pos..pos + count * bpp)
            .ok_or_else(|| format!("raster truncated: need {} bytes", count * bpp))?;
        if bpp == 1 {
            raster.iter().map(|&b| f64::from(b)).collect()
        } else {
            raster
                .chunks_exact(2)
                .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])))
                .collect()
        }
    } else {
        (0..count)
            .map(|_| next_token(bytes, &mut pos).map(|v| v as f64))
            .collect::<Result<_, _>>()?
    };
    if data.iter().any(|&v| v > maxval as f64) {
        return Err("sample exceeds maxval".into());
    }
    ImageGrid::new(height, width, data).map_err(|e| e.to_string())
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<usize, String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err("unexpected end of header or non-numeric token".into());
    }
    std::str::from_utf8(&bytes[start..*pos])
        .unwrap()
        .parse()
        .map_err(|e| format!("bad number: {e}"))
}

/// Encodes 8-bit samples as binary PGM.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    debug_assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    fs::write(path, encode_pgm(width, height, pixels))?;
    Ok(())
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes `round(255 * v)` clamped to `[0, 255]`.
pub fn write_unit_grid(path: &Path, grid: &ImageGrid) -> Result<()> {
    let pixels: Vec<u8> = grid.as_slice().iter().map(|&v| to_byte(v)).collect();
    write_pgm(path, grid.width(), grid.height(), &pixels)
}

/// Phase `k` of `N` is written as intensity `round(255 k / (N - 1))`.
pub fn write_label_mask(path: &Path, mask: &LabelMask) -> Result<()> {
    let top = mask.phases().saturating_sub(1).max(1) as f64;
    let pixels: Vec<u8> = mask
        .labels()
        .iter()
        .map(|&l| to_byte(l as f64 / top))
        .collect();
    write_pgm(path, mask.width(), mask.height(), &pixels)
}

/// Writes one `<stem>_<k>.pgm` map per phase and returns the file names.
pub fn write_memberships(dir: &Path, stem: &str, u: &MembershipField) -> Result<Vec<String>> {
    u.grids()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let name = format!("{stem}_{k}.pgm");
            write_unit_grid(&dir.join(&name), g)?;
            Ok(name)
        })
        .collect()
}

/// Maps the distinct intensities of a ground-truth image, sorted ascending,
/// to phases `0..L`. Fails if there are more than `phases` levels.
pub fn labels_from_levels(grid: &ImageGrid, phases: usize) -> Result<LabelMask> {
    let mut levels: Vec<f64> = grid.as_slice().to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if levels.len() > phases {
        return Err(Error::InvalidInput(format!(
            "ground truth has {} intensity levels but only {phases} phases were requested",
            levels.len()
        )));
    }
    let labels = grid
        .as_slice()
        .iter()
        .map(|v| levels.partition_point(|l| l < v))
        .collect();
    LabelMask::new(grid.height(), grid.width(), phases, labels)
}
