use std::fs;
use std::io::BufWriter;
use std::path::Path;

use crate::error::Error;
use crate::real::Real;

/// 8-bit RGB PNG of `[0,1]`-clamped values.
pub fn write_png<T: Real>(path: impl AsRef<Path>, width: u32, height: u32, image: &[[T; 3]]) -> Result<(), Error> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width, height);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    let data: Vec<u8> = image
        .iter()
        .flat_map(|p| p.map(|v| (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    writer.write_image_data(&data)?;
    writer.finish()?;
    Ok(())
}

/// Raw little-endian float32, `height × width × 3`, row-major, no header.
pub fn write_raw<T: Real>(path: impl AsRef<Path>, image: &[[T; 3]]) -> Result<(), Error> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(image.len() * 12);
    for p in image {
        for v in p {
            bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<Vec<[f32; 3]>, Error> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes
        .chunks_exact(12)
        .map(|px| {
            [0, 1, 2].map(|ch| {
                let b = &px[4 * ch..4 * ch + 4];
                f32::from_le_bytes([b[0], b[1], b[2], b[3]])
            })
        })
        .collect())
}
