use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{CsdaError, Result};
use crate::nn::Tensor3;

/// Write a 3-channel image in `[0, 1]` as 8-bit RGB PNG.
pub fn write_png(path: &Path, img: &Tensor3) -> Result<()> {
    if img.c != 3 {
        return Err(CsdaError::Domain(format!("PNG export expects 3 channels, got {}", img.c)));
    }
    let file = File::create(path).map_err(|e| CsdaError::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), img.w as u32, img.h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let plane = img.plane();
    let mut buf = Vec::with_capacity(plane * 3);
    for i in 0..plane {
        for c in 0..3 {
            buf.push((img.data[c * plane + i].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    let mut writer = enc.write_header().map_err(|e| CsdaError::load(path, e))?;
    writer.write_image_data(&buf).map_err(|e| CsdaError::load(path, e))?;
    writer.finish().map_err(|e| CsdaError::load(path, e))?;
    Ok(())
}

pub fn read_png(path: &Path) -> Result<Tensor3> {
    let file = File::open(path).map_err(|e| CsdaError::io(path, e))?;
    let mut dec = png::Decoder::new(BufReader::new(file));
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(|e| CsdaError::load(path, e))?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| CsdaError::load(path, "image too large"))?];
    let info = reader.next_frame(&mut buf).map_err(|e| CsdaError::load(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(CsdaError::load(path, format!("unsupported color type {other:?}"))),
    };
    let plane = w * h;
    let mut img = Tensor3::zeros(3, h, w);
    for i in 0..plane {
        for c in 0..3 {
            img.data[c * plane + i] = buf[i * stride + c] as f64 / 255.0;
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_quantises_to_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let img = Tensor3::from_vec(3, 2, 2, (0..12).map(|i| i as f64 / 11.0).collect());
        let p = dir.path().join("x.png");
        write_png(&p, &img).unwrap();
        let back = read_png(&p).unwrap();
        assert_eq!(back.shape(), (3, 2, 2));
        for (a, b) in img.data.iter().zip(&back.data) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
