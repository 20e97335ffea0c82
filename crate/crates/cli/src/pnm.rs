//! Binary PGM (P5) and PPM (P6) image I/O, 8-bit only. Loaded values are
//! scaled to `[0, 1]`; grayscale images are replicated to three channels.

use crate::{CmdError, CmdResult};
use hyperneck_core::tensor::TensorMap;
use std::path::Path;

struct Header {
    color: bool,
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> CmdResult<Header> {
    let bad = |what: &str| CmdError::BadInput(format!("{}: {what}", path.display()));
    if bytes.len() < 2 {
        return Err(bad("file too short for a PNM header"));
    }
    let color = match &bytes[0..2] {
        b"P5" => false,
        b"P6" => true,
        _ => return Err(bad("expected binary PGM (P5) or PPM (P6) magic")),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and '#' comment lines between header fields.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let mut value: u64 = 0;
        let mut digits = 0;
        while let Some(&b) = bytes.get(pos) {
            if b.is_ascii_digit() {
                value = value * 10 + (b - b'0') as u64;
                digits += 1;
                pos += 1;
                if value > u32::MAX as u64 {
                    return Err(bad("header value out of range"));
                }
            } else {
                break;
            }
        }
        if digits == 0 {
            return Err(bad("malformed header field"));
        }
        *field = value as u32;
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(bad("missing whitespace before pixel data")),
    }
    Ok(Header {
        color,
        width: fields[0] as usize,
        height: fields[1] as usize,
        maxval: fields[2],
        data_start: pos,
    })
}

/// Loads a binary PGM/PPM file as a batch-1, 3-channel map in `[0, 1]`.
pub fn load_pgm_ppm(path: &Path) -> CmdResult<TensorMap> {
    let bytes = std::fs::read(path)?;
    let header = parse_header(&bytes, path)?;
    if header.maxval == 0 || header.maxval > 255 {
        return Err(CmdError::BadInput(format!(
            "{}: unsupported maxval {} (only 8-bit images are handled)",
            path.display(),
            header.maxval
        )));
    }
    if header.width == 0 || header.height == 0 {
        return Err(CmdError::BadInput(format!(
            "{}: empty image",
            path.display()
        )));
    }
    let pixels = header.width * header.height;
    let expect = pixels * if header.color { 3 } else { 1 };
    let payload = &bytes[header.data_start..];
    if payload.len() != expect {
        return Err(CmdError::BadInput(format!(
            "{}: payload has {} bytes, expected {expect}",
            path.display(),
            payload.len()
        )));
    }
    let scale = 1.0 / header.maxval as f32;
    let mut data = vec![0.0f32; 3 * pixels];
    if header.color {
        for p in 0..pixels {
            for c in 0..3 {
                data[c * pixels + p] = payload[p * 3 + c] as f32 * scale;
            }
        }
    } else {
        for p in 0..pixels {
            let v = payload[p] as f32 * scale;
            data[p] = v;
            data[pixels + p] = v;
            data[2 * pixels + p] = v;
        }
    }
    Ok(TensorMap::new(1, 3, header.height, header.width, data)?)
}

/// Channel-mean heatmap of a single-image map, min-max normalised to
/// 0..255 and written as binary PGM. Constant maps come out all-zero.
pub fn export_heatmap(x: &TensorMap, path: &Path) -> CmdResult<()> {
    if x.batch() != 1 {
        return Err(CmdError::BadInput(format!(
            "heatmap export needs a single image, got batch {}",
            x.batch()
        )));
    }
    let (_, c, h, w) = x.shape();
    let pixels = h * w;
    let mut mean = vec![0.0f64; pixels];
    for ci in 0..c {
        let plane = &x.data()[ci * pixels..(ci + 1) * pixels];
        for (acc, &v) in mean.iter_mut().zip(plane) {
            *acc += v as f64;
        }
    }
    for value in mean.iter_mut() {
        *value /= c as f64;
    }
    let lo = mean.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bytes: Vec<u8> = if hi > lo {
        mean.iter()
            .map(|&v| (((v - lo) / (hi - lo)) * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    } else {
        vec![0u8; pixels]
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut out = Vec::with_capacity(32 + pixels);
    out.extend_from_slice(format!("P5\n{w} {h}\n255\n").as_bytes());
    out.extend_from_slice(&bytes);
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(bytes: &[u8]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pnm");
        std::fs::write(&path, bytes).unwrap();
        (dir, path)
    }

    #[test]
    fn pgm_values_scale_and_replicate() {
        let (_dir, path) = write_temp(b"P5\n2 2\n255\n\x00\xff\x00\xff");
        let x = load_pgm_ppm(&path).unwrap();
        assert_eq!(x.shape(), (1, 3, 2, 2));
        for c in 0..3 {
            assert_eq!(x.at(0, c, 0, 0), 0.0);
            assert_eq!(x.at(0, c, 0, 1), 1.0);
            assert_eq!(x.at(0, c, 1, 0), 0.0);
            assert_eq!(x.at(0, c, 1, 1), 1.0);
        }
    }

    #[test]
    fn ppm_keeps_channel_order() {
        let (_dir, path) = write_temp(b"P6\n1 1\n255\n\xff\x00\x00");
        let x = load_pgm_ppm(&path).unwrap();
        assert_eq!(
            (x.at(0, 0, 0, 0), x.at(0, 1, 0, 0), x.at(0, 2, 0, 0)),
            (1.0, 0.0, 0.0)
        );
    }

    #[test]
    fn header_comments_are_skipped() {
        let (_dir, path) = write_temp(b"P5\n# made by hand\n2 1\n# another\n255\n\x10\x20");
        let x = load_pgm_ppm(&path).unwrap();
        assert_eq!(x.shape(), (1, 3, 1, 2));
        assert!((x.at(0, 0, 0, 0) - 16.0 / 255.0).abs() < 1e-7);
    }

    #[test]
    fn rejects_wide_maxval_and_bad_payloads() {
        let (_dir, path) = write_temp(b"P5\n1 1\n65535\n\x00\x00");
        assert!(load_pgm_ppm(&path).is_err());
        let (_dir, path) = write_temp(b"P5\n2 2\n255\n\x00\x01");
        assert!(load_pgm_ppm(&path).is_err());
        let (_dir, path) = write_temp(b"P4\n2 2\n255\n....");
        assert!(load_pgm_ppm(&path).is_err());
    }

    #[test]
    fn constant_maps_export_as_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.pgm");
        let x = TensorMap::new(1, 2, 2, 2, vec![0.7; 8]).unwrap();
        export_heatmap(&x, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..10], b"P5\n2 2\n255");
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 0, 0, 0]);
    }

    #[test]
    fn two_level_maps_hit_the_full_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("two.pgm");
        let x = TensorMap::new(1, 1, 1, 4, vec![-1.5, 2.5, -1.5, 2.5]).unwrap();
        export_heatmap(&x, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 255, 0, 255]);
    }

    #[test]
    fn quantized_values_survive_a_round_trip() {
        let payload: Vec<u8> = (0..=255).collect();
        let mut file = b"P5\n16 16\n255\n".to_vec();
        file.extend_from_slice(&payload);
        let (_dir, path) = write_temp(&file);
        let x = load_pgm_ppm(&path).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("back.pgm");
        export_heatmap(&x, &out).unwrap();
        let bytes = std::fs::read(&out).unwrap();
        assert_eq!(&bytes[bytes.len() - 256..], payload.as_slice());
    }
}
