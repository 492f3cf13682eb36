//! Minimal uncompressed BMP reader/writer: 8-bit gray (paletted) and 24-bit
//! RGB, bottom-up row order, rows padded to four bytes.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Decoded bitmap as independent top-down planes. Gray images carry one
/// plane; RGB images carry three (R, G, B).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BmpImage {
    pub width: u32,
    pub height: u32,
    /// Row-major, top-down, one `width * height` buffer per plane.
    pub planes: Vec<Vec<u8>>,
}

impl BmpImage {
    pub fn gray(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != (width * height) as usize {
            return Err(Error::InvalidInput("plane size mismatch".into()));
        }
        Ok(Self {
            width,
            height,
            planes: vec![data],
        })
    }

    pub fn is_gray(&self) -> bool {
        self.planes.len() == 1
    }
}

fn read_u16(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn read_u32(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

fn row_stride(width: u32, bytes_per_pixel: u32) -> usize {
    ((width * bytes_per_pixel + 3) & !3) as usize
}

/// Parse an uncompressed 8-bit or 24-bit BMP.
pub fn decode(mut reader: impl Read) -> Result<BmpImage> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    if buf.len() < 54 || &buf[0..2] != b"BM" {
        return Err(Error::Format("not a BMP file".into()));
    }
    let data_offset = read_u32(&buf, 10) as usize;
    let header_size = read_u32(&buf, 14);
    if header_size < 40 {
        return Err(Error::Format(format!(
            "unsupported DIB header size {header_size}"
        )));
    }
    let width = read_u32(&buf, 18) as i32;
    let height_raw = read_u32(&buf, 22) as i32;
    let bpp = read_u16(&buf, 28);
    let compression = read_u32(&buf, 30);
    if compression != 0 {
        return Err(Error::Format(format!(
            "compressed BMP (method {compression}) not supported"
        )));
    }
    if width <= 0 || height_raw == 0 {
        return Err(Error::Format("degenerate BMP dimensions".into()));
    }
    let bottom_up = height_raw > 0;
    let width = width as u32;
    let height = height_raw.unsigned_abs();

    let map_row = |r: u32| -> u32 {
        if bottom_up {
            height - 1 - r
        } else {
            r
        }
    };

    match bpp {
        8 => {
            let stride = row_stride(width, 1);
            let need = data_offset + stride * height as usize;
            if buf.len() < need {
                return Err(Error::Format("BMP pixel data truncated".into()));
            }
            // Palette lookup: map each index through its palette gray value.
            let palette_off = 14 + header_size as usize;
            let palette_entries = read_u32(&buf, 46) as usize;
            let palette_entries = if palette_entries == 0 {
                256
            } else {
                palette_entries
            };
            let mut gray_of = [0u8; 256];
            for (i, g) in gray_of.iter_mut().enumerate() {
                if i < palette_entries && palette_off + i * 4 + 2 < data_offset {
                    // BGR0 entries; use the green channel as the gray value
                    // (entries we write are i,i,i so any channel matches).
                    *g = buf[palette_off + i * 4 + 1];
                } else {
                    *g = i as u8;
                }
            }
            let mut plane = vec![0u8; (width * height) as usize];
            for r in 0..height {
                let src = data_offset + map_row(r) as usize * stride;
                for c in 0..width as usize {
                    plane[(r * width) as usize + c] = gray_of[buf[src + c] as usize];
                }
            }
            Ok(BmpImage {
                width,
                height,
                planes: vec![plane],
            })
        }
        24 => {
            let stride = row_stride(width, 3);
            let need = data_offset + stride * height as usize;
            if buf.len() < need {
                return Err(Error::Format("BMP pixel data truncated".into()));
            }
            let mut planes = vec![vec![0u8; (width * height) as usize]; 3];
            for r in 0..height {
                let src = data_offset + map_row(r) as usize * stride;
                for c in 0..width as usize {
                    let px = src + c * 3;
                    let dst = (r * width) as usize + c;
                    planes[2][dst] = buf[px]; // blue
                    planes[1][dst] = buf[px + 1]; // green
                    planes[0][dst] = buf[px + 2]; // red
                }
            }
            Ok(BmpImage {
                width,
                height,
                planes,
            })
        }
        other => Err(Error::Format(format!("unsupported BMP bit depth {other}"))),
    }
}

/// Write a BMP; 8-bit gray with an identity palette for one plane, 24-bit
/// RGB for three. Rows are emitted bottom-up.
pub fn encode(image: &BmpImage, mut writer: impl Write) -> Result<()> {
    let w = image.width;
    let h = image.height;
    for plane in &image.planes {
        if plane.len() != (w * h) as usize {
            return Err(Error::InvalidInput("plane size mismatch".into()));
        }
    }
    match image.planes.len() {
        1 => {
            let stride = row_stride(w, 1);
            let data_offset = 14 + 40 + 256 * 4;
            let file_size = data_offset + stride * h as usize;
            writer.write_all(&bmp_headers(file_size, data_offset, w, h, 8, 256))?;
            for i in 0..=255u8 {
                writer.write_all(&[i, i, i, 0])?;
            }
            let pad = vec![0u8; stride - w as usize];
            for r in (0..h).rev() {
                let row = &image.planes[0][(r * w) as usize..((r + 1) * w) as usize];
                writer.write_all(row)?;
                writer.write_all(&pad)?;
            }
        }
        3 => {
            let stride = row_stride(w, 3);
            let data_offset = 14 + 40;
            let file_size = data_offset + stride * h as usize;
            writer.write_all(&bmp_headers(file_size, data_offset, w, h, 24, 0))?;
            let mut row = vec![0u8; stride];
            for r in (0..h).rev() {
                for c in 0..w as usize {
                    let src = (r * w) as usize + c;
                    row[c * 3] = image.planes[2][src];
                    row[c * 3 + 1] = image.planes[1][src];
                    row[c * 3 + 2] = image.planes[0][src];
                }
                writer.write_all(&row)?;
            }
        }
        n => {
            return Err(Error::InvalidInput(format!(
                "BMP encoding supports 1 or 3 planes, got {n}"
            )))
        }
    }
    Ok(())
}

fn bmp_headers(
    file_size: usize,
    data_offset: usize,
    w: u32,
    h: u32,
    bpp: u16,
    palette: u32,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(54);
    out.extend_from_slice(b"BM");
    out.extend_from_slice(&(file_size as u32).to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&(data_offset as u32).to_le_bytes());
    out.extend_from_slice(&40u32.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&bpp.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // BI_RGB
    out.extend_from_slice(&0u32.to_le_bytes()); // image size (may be 0 for BI_RGB)
    out.extend_from_slice(&2835u32.to_le_bytes());
    out.extend_from_slice(&2835u32.to_le_bytes());
    out.extend_from_slice(&palette.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out
}
