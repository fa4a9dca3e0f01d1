//! File formats.
//!
//! Cubes (and optionally RGB images) use the "HSC1" container, little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "HSC1"
//! 4       4     u32 height
//! 8       4     u32 width
//! 12      4     u32 bands (31 for cubes, 3 for RGB)
//! 16      ...   bands·height·width × f32, band-major then row-major
//! ```
//!
//! RGB images are also read and written as PNG (16-bit on write; 8- or 16-bit
//! RGB/RGBA on read). Response functions are headerless CSV, 31 rows of
//! R,G,B weights.

use std::io::Cursor;
use std::path::Path;

use super::{Planar, ResponseFunction, RgbImage, BANDS};
use crate::binio::{self, put_f32s, put_u32, ByteReader};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HSC1";
pub const HEADER_LEN: usize = 16;

pub fn encode<const C: usize>(img: &Planar<C>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * img.data().len());
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, img.height() as u32);
    put_u32(&mut out, img.width() as u32);
    put_u32(&mut out, C as u32);
    put_f32s(&mut out, img.data().iter().copied());
    out
}

pub fn decode<const C: usize>(bytes: &[u8]) -> Result<Planar<C>> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    let height = r.u32()? as usize;
    let width = r.u32()? as usize;
    let at = r.offset();
    let bands = r.u32()? as usize;
    if bands != C {
        return Err(Error::format(at, format!("expected {C} bands, found {bands}")));
    }
    let start = r.offset();
    let data = r.f32s(C * height * width)?;
    r.finish()?;
    if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::format(
            start + 4 * i as u64,
            format!("value {} is outside [0, 1]", data[i]),
        ));
    }
    Planar::new(height, width, data)
}

pub fn save_hsc<const C: usize>(img: &Planar<C>, path: &Path) -> Result<()> {
    binio::write_file(path, &encode(img))
}

pub fn load_hsc<const C: usize>(path: &Path) -> Result<Planar<C>> {
    decode(&binio::read_file(path)?)
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let (h, w) = (img.height(), img.width());
    let mut raw = Vec::with_capacity(6 * h * w);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let v = (img.at(c, y, x) as f64 * 65535.0).round() as u16;
                raw.extend_from_slice(&v.to_be_bytes());
            }
        }
    }
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Sixteen);
    let png_err = |e: png::EncodingError| Error::format(0, format!("png encoding failed: {e}"));
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&raw).map_err(png_err)?;
    writer.finish().map_err(png_err)?;
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let png_err = |e: png::DecodingError| Error::format(0, format!("png decoding failed: {e}"));
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND);
    let mut reader = dec.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(0, "png image is too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(Error::format(0, format!("png colour type {other:?} is not RGB"))),
    };
    let (h, w) = (info.height as usize, info.width as usize);
    let sample = |i: usize| -> f32 {
        match info.bit_depth {
            png::BitDepth::Sixteen => u16::from_be_bytes([buf[2 * i], buf[2 * i + 1]]) as f32 / 65535.0,
            _ => buf[i] as f32 / 255.0,
        }
    };
    let mut data = vec![0.0f32; 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            let px = (y * w + x) * channels;
            for c in 0..3 {
                data[(c * h + y) * w + x] = sample(px + c);
            }
        }
    }
    RgbImage::new(h, w, data)
}

/// Writes a 16-bit RGB PNG.
pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    binio::write_file(path, &encode_png(img)?)
}

pub fn load_png(path: &Path) -> Result<RgbImage> {
    decode_png(&binio::read_file(path)?)
}

/// Loads RGB from either a PNG or an HSC1 container with three bands,
/// chosen by the file's magic bytes.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let bytes = binio::read_file(path)?;
    if bytes.starts_with(MAGIC) {
        decode(&bytes)
    } else {
        decode_png(&bytes)
    }
}

pub fn write_response(resp: &ResponseFunction, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let csv_err = |e: csv::Error| Error::format(0, format!("csv write failed: {e}"));
    for row in resp.matrix() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format(0, format!("csv write failed: {e}")))
}

pub fn read_response(input: impl std::io::Read) -> Result<ResponseFunction> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut matrix = [[0.0; 3]; BANDS];
    let mut rows = 0;
    for record in r.records() {
        let record = record.map_err(|e| {
            let at = e.position().map_or(0, |p| p.byte());
            Error::format(at, format!("bad response csv: {e}"))
        })?;
        let at = record.position().map_or(0, |p| p.byte());
        if rows == BANDS {
            return Err(Error::format(at, format!("response csv has more than {BANDS} rows")));
        }
        if record.len() != 3 {
            return Err(Error::format(at, format!("response row {} has {} columns, expected 3", rows + 1, record.len())));
        }
        for (c, field) in record.iter().enumerate() {
            matrix[rows][c] = field
                .parse()
                .map_err(|_| Error::format(at, format!("response row {} has non-numeric value {field:?}", rows + 1)))?;
        }
        rows += 1;
    }
    if rows != BANDS {
        return Err(Error::format(0, format!("response csv has {rows} rows, expected {BANDS}")));
    }
    let resp = ResponseFunction::new(matrix)?;
    resp.validate()?;
    Ok(resp)
}

pub fn save_response(resp: &ResponseFunction, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_response(resp, &mut buf)?;
    binio::write_file(path, &buf)
}

pub fn load_response(path: &Path) -> Result<ResponseFunction> {
    read_response(binio::read_file(path)?.as_slice())
}
