//! The protected container: a fixed header followed by the fragment streams.
//!
//! Header layout (all integers little-endian), 8-byte aligned:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SEFR"
//! 4       1     format version (1)
//! 5       1     scheme tag
//! 6       1     cipher suite tag
//! 7       1     plane count (bitmap schemes; 0 otherwise)
//! 8       4     chunk side (agnostic scheme; 0 otherwise)
//! 12      4     image width (bitmap schemes; 0 otherwise)
//! 16      4     image height
//! 20      1     selection count (bitmap schemes; 0 otherwise)
//! 21      3     zero padding
//! 24      8     original input length in bytes
//! 32      8     unit count (chunks, or planes for bitmap schemes)
//! 40      16    reserved IV field (zero; future per-run random IVs)
//! 56      2*n   selection positions (row, col) pairs
//! ...           zero padding to the next 8-byte boundary
//! ```
//!
//! Stream lengths are fully derivable from the header, so a reader can
//! validate a container before touching any cryptographic material. Streams
//! follow in fixed order: private A, then public B, then public C (the
//! bitmap schemes use A and B only).

use std::io::{Read, Seek, SeekFrom, Write};

use crate::bitpack::{DCT_FIELD_BITS, FRAG_A_BITS, FRAG_B_BITS, FRAG_C_BITS};
use crate::cipher::CipherSuiteId;
use crate::dct::SelectedCoeffSet;
use crate::error::{Error, Result};
use crate::model::SchemeId;

pub const MAGIC: [u8; 4] = *b"SEFR";
pub const VERSION: u8 = 1;

/// Identifies one fragment stream of a container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamId {
    /// Private fragment stream (always cipher-protected).
    A,
    /// First public fragment stream (masked second-level detail, or the
    /// public pixels of the bitmap schemes).
    B,
    /// Second public fragment stream (masked first-level detail).
    C,
}

impl StreamId {
    pub fn label(self) -> &'static str {
        match self {
            StreamId::A => "A",
            StreamId::B => "B",
            StreamId::C => "C",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(StreamId::A),
            "B" | "b" => Ok(StreamId::B),
            "C" | "c" => Ok(StreamId::C),
            other => Err(Error::InvalidInput(format!("unknown stream id {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerHeader {
    pub scheme: SchemeId,
    pub cipher: CipherSuiteId,
    pub chunk_side: u32,
    pub image_width: u32,
    pub image_height: u32,
    pub plane_count: u8,
    pub original_len: u64,
    pub unit_count: u64,
    pub iv_reserved: [u8; 16],
    pub sel: Option<SelectedCoeffSet>,
}

impl ContainerHeader {
    pub fn agnostic(
        scheme: SchemeId,
        chunk_side: u32,
        original_len: u64,
        chunk_count: u64,
    ) -> Self {
        debug_assert_eq!(scheme, SchemeId::Dwt2L2);
        Self {
            scheme,
            cipher: CipherSuiteId::Aes128Ctr,
            chunk_side,
            image_width: 0,
            image_height: 0,
            plane_count: 0,
            original_len,
            unit_count: chunk_count,
            iv_reserved: [0; 16],
            sel: None,
        }
    }

    pub fn bitmap(
        scheme: SchemeId,
        width: u32,
        height: u32,
        planes: u8,
        original_len: u64,
        sel: SelectedCoeffSet,
    ) -> Self {
        Self {
            scheme,
            cipher: CipherSuiteId::Aes128Ctr,
            chunk_side: 0,
            image_width: width,
            image_height: height,
            plane_count: planes,
            original_len,
            unit_count: planes as u64,
            iv_reserved: [0; 16],
            sel: Some(sel),
        }
    }

    pub fn encoded_len(&self) -> usize {
        let sel_bytes = self.sel.as_ref().map_or(0, |s| s.len() * 2);
        (56 + sel_bytes).div_ceil(8) * 8
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.scheme.tag());
        out.push(self.cipher.tag());
        out.push(self.plane_count);
        out.extend_from_slice(&self.chunk_side.to_le_bytes());
        out.extend_from_slice(&self.image_width.to_le_bytes());
        out.extend_from_slice(&self.image_height.to_le_bytes());
        out.push(self.sel.as_ref().map_or(0, |s| s.len() as u8));
        out.extend_from_slice(&[0; 3]);
        out.extend_from_slice(&self.original_len.to_le_bytes());
        out.extend_from_slice(&self.unit_count.to_le_bytes());
        out.extend_from_slice(&self.iv_reserved);
        if let Some(sel) = &self.sel {
            for (r, c) in sel.positions() {
                out.push(*r);
                out.push(*c);
            }
        }
        while out.len() % 8 != 0 {
            out.push(0);
        }
        out
    }

    pub fn decode(reader: &mut impl Read) -> Result<Self> {
        let mut fixed = [0u8; 56];
        reader
            .read_exact(&mut fixed)
            .map_err(|e| Error::Format(format!("container header truncated: {e}")))?;
        if fixed[0..4] != MAGIC {
            return Err(Error::Format("bad magic, not a protected container".into()));
        }
        if fixed[4] != VERSION {
            return Err(Error::Format(format!(
                "unsupported container version {}",
                fixed[4]
            )));
        }
        let scheme = SchemeId::from_tag(fixed[5])?;
        let cipher = CipherSuiteId::from_tag(fixed[6])?;
        let plane_count = fixed[7];
        let chunk_side = u32::from_le_bytes(fixed[8..12].try_into().unwrap());
        let image_width = u32::from_le_bytes(fixed[12..16].try_into().unwrap());
        let image_height = u32::from_le_bytes(fixed[16..20].try_into().unwrap());
        let sel_count = fixed[20] as usize;
        let original_len = u64::from_le_bytes(fixed[24..32].try_into().unwrap());
        let unit_count = u64::from_le_bytes(fixed[32..40].try_into().unwrap());
        let iv_reserved: [u8; 16] = fixed[40..56].try_into().unwrap();

        let sel = if sel_count > 0 {
            let mut raw = vec![0u8; sel_count * 2];
            reader
                .read_exact(&mut raw)
                .map_err(|e| Error::Format(format!("selection table truncated: {e}")))?;
            let positions = raw.chunks_exact(2).map(|p| (p[0], p[1])).collect();
            Some(SelectedCoeffSet::new(positions).map_err(|e| Error::Format(e.to_string()))?)
        } else {
            None
        };
        let consumed = 56 + sel_count * 2;
        let pad = consumed.div_ceil(8) * 8 - consumed;
        if pad > 0 {
            let mut sink = [0u8; 8];
            reader
                .read_exact(&mut sink[..pad])
                .map_err(|e| Error::Format(format!("header padding truncated: {e}")))?;
        }

        let header = Self {
            scheme,
            cipher,
            chunk_side,
            image_width,
            image_height,
            plane_count,
            original_len,
            unit_count,
            iv_reserved,
            sel,
        };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<()> {
        match self.scheme {
            SchemeId::Dwt2L2 => {
                if self.chunk_side < 8 || self.chunk_side % 8 != 0 {
                    return Err(Error::Format(format!("bad chunk side {}", self.chunk_side)));
                }
                if self.sel.is_some() || self.plane_count != 0 {
                    return Err(Error::Format(
                        "agnostic container carries bitmap fields".into(),
                    ));
                }
            }
            SchemeId::DctL1 | SchemeId::DctL2 => {
                if self.image_width == 0
                    || self.image_height == 0
                    || self.image_width % 8 != 0
                    || self.image_height % 8 != 0
                {
                    return Err(Error::Format(format!(
                        "bitmap dimensions {}x{} must be multiples of 8",
                        self.image_width, self.image_height
                    )));
                }
                if !(self.plane_count == 1 || self.plane_count == 3) {
                    return Err(Error::Format(format!(
                        "bad plane count {}",
                        self.plane_count
                    )));
                }
                if self.sel.is_none() {
                    return Err(Error::Format(
                        "bitmap container lacks a selection table".into(),
                    ));
                }
                if self.unit_count != self.plane_count as u64 {
                    return Err(Error::Format("unit count must equal plane count".into()));
                }
            }
        }
        // Header fields come from untrusted bytes on the read path; the size
        // arithmetic must not wrap.
        let per_unit: u64 = self
            .stream_ids()
            .iter()
            .map(|s| self.unit_stream_bytes(*s))
            .sum();
        let total = self
            .unit_count
            .checked_mul(per_unit)
            .and_then(|v| v.checked_add(self.encoded_len() as u64));
        if total.is_none() {
            return Err(Error::Format("container size arithmetic overflows".into()));
        }
        Ok(())
    }

    /// Blocks per unit (chunk or plane).
    pub fn blocks_per_unit(&self) -> u64 {
        match self.scheme {
            SchemeId::Dwt2L2 => {
                let per_side = self.chunk_side as u64 / 8;
                per_side * per_side
            }
            SchemeId::DctL1 | SchemeId::DctL2 => {
                (self.image_width as u64 / 8) * (self.image_height as u64 / 8)
            }
        }
    }

    /// Per-unit byte length of one stream (streams are byte-padded per unit).
    pub fn unit_stream_bytes(&self, stream: StreamId) -> u64 {
        let blocks = self.blocks_per_unit();
        let bits = match (self.scheme, stream) {
            (SchemeId::Dwt2L2, StreamId::A) => FRAG_A_BITS as u64 * blocks,
            (SchemeId::Dwt2L2, StreamId::B) => FRAG_B_BITS as u64 * blocks,
            (SchemeId::Dwt2L2, StreamId::C) => FRAG_C_BITS as u64 * blocks,
            (_, StreamId::A) => {
                (DCT_FIELD_BITS * self.sel.as_ref().map_or(0, |s| s.len())) as u64 * blocks
            }
            (_, StreamId::B) => 512 * blocks,
            (_, StreamId::C) => 0,
        };
        bits.div_ceil(8)
    }

    pub fn stream_ids(&self) -> &'static [StreamId] {
        match self.scheme {
            SchemeId::Dwt2L2 => &[StreamId::A, StreamId::B, StreamId::C],
            _ => &[StreamId::A, StreamId::B],
        }
    }

    pub fn stream_len(&self, stream: StreamId) -> u64 {
        self.unit_stream_bytes(stream) * self.unit_count
    }

    /// Absolute byte offset of a stream within the container.
    pub fn stream_offset(&self, stream: StreamId) -> u64 {
        let mut off = self.encoded_len() as u64;
        for s in self.stream_ids() {
            if *s == stream {
                return off;
            }
            off += self.stream_len(*s);
        }
        off
    }

    pub fn container_len(&self) -> u64 {
        self.encoded_len() as u64
            + self
                .stream_ids()
                .iter()
                .map(|s| self.stream_len(*s))
                .sum::<u64>()
    }
}

/// A fully materialized container.
#[derive(Debug, Clone)]
pub struct ProtectedContainer {
    pub header: ContainerHeader,
    pub streams: Vec<Vec<u8>>,
}

impl ProtectedContainer {
    pub fn stream(&self, id: StreamId) -> Result<&[u8]> {
        let idx = self
            .header
            .stream_ids()
            .iter()
            .position(|s| *s == id)
            .ok_or_else(|| {
                Error::Availability(format!("container has no stream {}", id.label()))
            })?;
        Ok(&self.streams[idx])
    }

    pub fn read_from(reader: &mut (impl Read + Seek)) -> Result<Self> {
        let header = ContainerHeader::decode(reader)?;
        // Validate the declared size against the actual bytes before any
        // stream allocation.
        let pos = reader.stream_position()?;
        let end = reader.seek(SeekFrom::End(0))?;
        if end != header.container_len() {
            return Err(Error::Format(format!(
                "container is {end} bytes, header declares {}",
                header.container_len()
            )));
        }
        reader.seek(SeekFrom::Start(pos))?;
        let mut streams = Vec::new();
        for id in header.stream_ids() {
            let len = header.stream_len(*id) as usize;
            let mut buf = vec![0u8; len];
            reader
                .read_exact(&mut buf)
                .map_err(|e| Error::Format(format!("stream {} truncated: {e}", id.label())))?;
            streams.push(buf);
        }
        Ok(Self { header, streams })
    }

    pub fn write_to(&self, writer: &mut impl Write) -> Result<()> {
        writer.write_all(&self.header.encode())?;
        for s in &self.streams {
            writer.write_all(s)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header.container_len() as usize);
        self.write_to(&mut out).expect("vec write cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(&mut std::io::Cursor::new(bytes))
    }
}
