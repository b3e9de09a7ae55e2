//! 8-bit raster I/O. Grayscale datasets are stored as binary PGM (P5) and
//! 3-channel ones as PNG; PPM (P6) is written for CAM overlays. All three
//! read back losslessly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a single-channel `[1,H,W]` tensor (or the channel mean of a
/// multi-channel one) as binary PGM.
pub fn write_pgm(path: &Path, image: &Tensor) -> Result<()> {
    let (c, h, w) = image.dims3()?;
    let plane = h * w;
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.reserve(plane);
    for i in 0..plane {
        let v = (0..c).map(|ch| image.data()[ch * plane + i]).sum::<f64>() / c as f64;
        bytes.push(to_byte(v));
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `[3,H,W]` as binary PPM (P6).
pub fn write_ppm(path: &Path, image: &Tensor) -> Result<()> {
    let (c, h, w) = image.dims3()?;
    if c != 3 {
        return Err(Error::dim(format!("PPM needs 3 channels, got {c}")));
    }
    let plane = h * w;
    let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
    for i in 0..plane {
        for ch in 0..3 {
            bytes.push(to_byte(image.data()[ch * plane + i]));
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

fn write_png(path: &Path, image: &Tensor) -> Result<()> {
    let (c, h, w) = image.dims3()?;
    if c != 3 {
        return Err(Error::dim(format!("PNG writer expects 3 channels, got {c}")));
    }
    let plane = h * w;
    let mut buf = Vec::with_capacity(3 * plane);
    for i in 0..plane {
        for ch in 0..3 {
            buf.push(to_byte(image.data()[ch * plane + i]));
        }
    }
    image::save_buffer(path, &buf, w as u32, h as u32, image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::load(path, None, e.to_string()))
}

/// File extension used when writing an image with `channels` channels.
pub fn extension_for(channels: usize) -> &'static str {
    if channels == 3 {
        "png"
    } else {
        "pgm"
    }
}

pub fn write_raster(path: &Path, image: &Tensor) -> Result<()> {
    match image.dims3()?.0 {
        1 => write_pgm(path, image),
        3 => write_png(path, image),
        c => Err(Error::dim(format!("cannot store a {c}-channel raster"))),
    }
}

/// Parsed netpbm header: `(channels, width, height, maxval, offset of pixel
/// data, binary)`.
type PnmHeader = (usize, usize, usize, usize, usize, bool);

fn parse_pnm_header(bytes: &[u8], path: &Path) -> Result<PnmHeader> {
    let mut fields = Vec::with_capacity(4);
    let mut i = 0;
    while fields.len() < 4 {
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
            return Err(Error::load(path, None, "truncated PGM/PPM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    let (channels, binary) = match fields[0].as_str() {
        "P5" => (1, true),
        "P2" => (1, false),
        "P6" => (3, true),
        "P3" => (3, false),
        m => return Err(Error::load(path, None, format!("unsupported netpbm magic {m:?}"))),
    };
    let num = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::load(path, None, format!("bad header field {s:?}")))
    };
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::load(path, None, format!("invalid geometry {w}x{h} maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from binary data
    Ok((channels, w, h, maxval, i + 1, binary))
}

/// Reads binary or ASCII PGM (`[1,H,W]`) and PPM (`[3,H,W]`).
pub fn read_pnm(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (c, w, h, maxval, offset, binary) = parse_pnm_header(&bytes, path)?;
    let n = c * w * h;
    let scale = maxval as f64;
    let interleaved: Vec<f64> = if binary {
        let wide = maxval > 255;
        let need = if wide { 2 * n } else { n };
        let body = bytes
            .get(offset..offset + need)
            .ok_or_else(|| Error::load(path, None, format!("pixel data truncated (need {need} bytes)")))?;
        if wide {
            body.chunks(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / scale)
                .collect()
        } else {
            body.iter().map(|&b| b as f64 / scale).collect()
        }
    } else {
        let text = String::from_utf8_lossy(&bytes[offset.min(bytes.len())..]);
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map(|v| v / scale))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::load(path, None, format!("bad ASCII pixel value: {e}")))?;
        if vals.len() < n {
            return Err(Error::load(path, None, "pixel data truncated"));
        }
        vals[..n].to_vec()
    };
    if interleaved.iter().any(|v| *v > 1.0) {
        return Err(Error::load(path, None, "pixel value exceeds maxval"));
    }
    let plane = w * h;
    let mut data = vec![0.0; n];
    for (i, px) in interleaved.chunks(c).enumerate() {
        for (ch, &v) in px.iter().enumerate() {
            data[ch * plane + i] = v;
        }
    }
    Tensor::new(vec![c, h, w], data)
}

fn read_png(path: &Path) -> Result<Tensor> {
    let img = image::open(path).map_err(|e| Error::load(path, None, e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let plane = w * h;
    let (channels, raw): (usize, Vec<u8>) = if img.color().has_color() {
        (3, img.to_rgb8().into_raw())
    } else {
        (1, img.to_luma8().into_raw())
    };
    let mut data = vec![0.0; channels * plane];
    for (i, px) in raw.chunks(channels).enumerate() {
        for (ch, &b) in px.iter().enumerate() {
            data[ch * plane + i] = b as f64 / 255.0;
        }
    }
    Tensor::new(vec![channels, h, w], data)
}

pub fn read_raster(path: &Path) -> Result<Tensor> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm" | "ppm") => read_pnm(path),
        Some("png") => read_png(path),
        _ => Err(Error::load(path, None, "unsupported raster extension (expected .pgm, .ppm or .png)")),
    }
}

/// `(channels, height, width)` without decoding pixel data.
pub fn raster_dims(path: &Path) -> Result<(usize, usize, usize)> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm" | "ppm") => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let (c, w, h, ..) = parse_pnm_header(&bytes, path)?;
            Ok((c, h, w))
        }
        Some("png") => {
            let t = read_png(path)?;
            t.dims3()
        }
        _ => Err(Error::load(path, None, "unsupported raster extension (expected .pgm, .ppm or .png)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_exact_on_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let data: Vec<f64> = (0..12).map(|i| (i * 20) as f64 / 255.0).collect();
        let t = Tensor::new(vec![1, 3, 4], data).unwrap();
        write_pgm(&p, &t).unwrap();
        assert_eq!(read_pnm(&p).unwrap(), t);
        assert_eq!(raster_dims(&p).unwrap(), (1, 3, 4));
    }

    #[test]
    fn ascii_pgm_with_comment() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.pgm");
        fs::write(&p, "P2\n# comment\n2 1\n4\n0 4\n").unwrap();
        assert_eq!(read_pnm(&p).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn png_rgb_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let data: Vec<f64> = (0..3 * 2 * 5).map(|i| ((i * 7) % 256) as f64 / 255.0).collect();
        let t = Tensor::new(vec![3, 2, 5], data).unwrap();
        write_raster(&p, &t).unwrap();
        assert_eq!(read_raster(&p).unwrap(), t);
    }

    #[test]
    fn ppm_round_trip_keeps_channel_planes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.ppm");
        let data: Vec<f64> = (0..3 * 2 * 3).map(|i| (i * 11) as f64 / 255.0).collect();
        let t = Tensor::new(vec![3, 2, 3], data).unwrap();
        write_ppm(&p, &t).unwrap();
        assert_eq!(read_raster(&p).unwrap(), t);
        assert_eq!(raster_dims(&p).unwrap(), (3, 2, 3));
    }

    #[test]
    fn truncated_pgm_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.pgm");
        fs::write(&p, b"P5\n4 4\n255\n\x01\x02").unwrap();
        assert!(matches!(read_pnm(&p), Err(Error::Load { .. })));
    }
}
