//! Bit-exact fragment serialization.
//!
//! A two-level coefficient block packs into three fixed-width fragments:
//! 40 bits of second-level approximation (the private fragment), 124 bits of
//! second-level detail (public fragment B) and 480 bits of first-level detail
//! (public fragment C). Signed values are stored offset-binary in 10-bit
//! fields, except the four second-level HH positions which take 11 bits.
//! The DCT private fragment stores six values sign+magnitude, 11 bits apiece.

use crate::error::{Error, Result};
use crate::model::{CoeffBlock, CoeffLayout};

pub const FRAG_A_BITS: usize = 40;
pub const FRAG_B_BITS: usize = 124;
pub const FRAG_C_BITS: usize = 480;
pub const BLOCK_TOTAL_BITS: usize = FRAG_A_BITS + FRAG_B_BITS + FRAG_C_BITS;
pub const DCT_FIELD_BITS: usize = 11;

/// Growable bit buffer, MSB-first within every emitted field. Bits gather in
/// a 64-bit accumulator and flush to the byte buffer in whole bytes.
#[derive(Debug, Default, Clone)]
pub struct BitSink {
    buf: Vec<u8>,
    acc: u64,
    acc_bits: u32,
}

impl BitSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_bits(bits: usize) -> Self {
        Self {
            buf: Vec::with_capacity(bits.div_ceil(8)),
            acc: 0,
            acc_bits: 0,
        }
    }

    pub fn bit_len(&self) -> usize {
        self.buf.len() * 8 + self.acc_bits as usize
    }

    #[inline]
    fn flush_full_bytes(&mut self) {
        while self.acc_bits >= 8 {
            self.acc_bits -= 8;
            self.buf.push((self.acc >> self.acc_bits) as u8);
        }
    }

    #[inline]
    pub fn write_bits(&mut self, value: u64, width: usize) {
        debug_assert!(width <= 64);
        debug_assert!(width == 64 || value < (1u64 << width));
        // Split so the accumulator never overflows 64 bits.
        if width > 32 {
            self.write_bits(value >> 32, width - 32);
            self.write_bits(value & 0xFFFF_FFFF, 32);
            return;
        }
        self.acc = (self.acc << width) | value;
        self.acc_bits += width as u32;
        self.flush_full_bytes();
    }

    pub fn write_bits_u128(&mut self, value: u128, width: usize) {
        debug_assert!(width <= 128);
        if width > 64 {
            self.write_bits((value >> 64) as u64, width - 64);
            self.write_bits(value as u64, 64);
        } else {
            self.write_bits(value as u64, width);
        }
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        if self.acc_bits == 0 {
            self.buf.extend_from_slice(bytes);
        } else {
            for b in bytes {
                self.write_bits(*b as u64, 8);
            }
        }
    }

    /// Zero-pad to the next byte boundary (stream end only).
    pub fn align_to_byte(&mut self) {
        let rem = self.acc_bits % 8;
        if rem != 0 {
            self.write_bits(0, (8 - rem) as usize);
        }
    }

    pub fn into_bytes(mut self) -> Vec<u8> {
        self.align_to_byte();
        self.buf
    }
}

/// Bit cursor over a byte slice, MSB-first.
#[derive(Debug, Clone)]
pub struct BitSource<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> BitSource<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn at_bit(data: &'a [u8], bit: usize) -> Self {
        Self { data, pos: bit }
    }

    pub fn remaining_bits(&self) -> usize {
        self.data.len() * 8 - self.pos
    }

    #[inline]
    pub fn read_bits(&mut self, width: usize) -> Result<u64> {
        debug_assert!(width <= 64);
        if width > self.remaining_bits() {
            return Err(Error::InvalidInput(format!(
                "bit stream exhausted: wanted {width} bits, {} left",
                self.remaining_bits()
            )));
        }
        if width > 32 {
            let hi = self.read_bits(width - 32)?;
            let lo = self.read_bits(32)?;
            return Ok((hi << 32) | lo);
        }
        let mut out = 0u64;
        let mut want = width;
        while want > 0 {
            let byte = self.data[self.pos / 8] as u64;
            let avail = 8 - self.pos % 8;
            let take = want.min(avail);
            let shifted = (byte >> (avail - take)) & ((1u64 << take) - 1);
            out = (out << take) | shifted;
            self.pos += take;
            want -= take;
        }
        Ok(out)
    }

    pub fn read_bits_u128(&mut self, width: usize) -> Result<u128> {
        debug_assert!(width <= 128);
        if width > 64 {
            let hi = self.read_bits(width - 64)? as u128;
            let lo = self.read_bits(64)? as u128;
            Ok((hi << 64) | lo)
        } else {
            Ok(self.read_bits(width)? as u128)
        }
    }
}

/// 40-bit private fragment of one block (low 40 bits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FragA(pub u64);

/// 124-bit first public fragment of one block (low 124 bits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FragB(pub u128);

/// 480-bit second public fragment of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FragC(pub [u8; 60]);

impl FragA {
    pub fn to_bytes(self) -> [u8; 5] {
        let b = self.0.to_be_bytes();
        [b[3], b[4], b[5], b[6], b[7]]
    }

    pub fn from_bytes(bytes: [u8; 5]) -> Self {
        let mut b = [0u8; 8];
        b[3..].copy_from_slice(&bytes);
        FragA(u64::from_be_bytes(b))
    }
}

impl FragB {
    /// Canonical 16-byte form: the 124 bits MSB-first, low nibble zero.
    pub fn to_padded_bytes(self) -> [u8; 16] {
        (self.0 << 4).to_be_bytes()
    }
}

impl std::ops::BitXor for FragA {
    type Output = FragA;
    fn bitxor(self, rhs: FragA) -> FragA {
        FragA(self.0 ^ rhs.0)
    }
}

impl std::ops::BitXor for FragB {
    type Output = FragB;
    fn bitxor(self, rhs: FragB) -> FragB {
        FragB(self.0 ^ rhs.0)
    }
}

impl std::ops::BitXor for FragC {
    type Output = FragC;
    fn bitxor(self, rhs: FragC) -> FragC {
        let mut out = [0u8; 60];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(rhs.0.iter())) {
            *o = a ^ b;
        }
        FragC(out)
    }
}

/// Canonical coefficient order of the packed fragments. Each entry is
/// (row, col, field width).
struct FieldPlan {
    a: [(usize, usize, usize); 4],
    b: [(usize, usize, usize); 12],
    c: [(usize, usize, usize); 48],
}

fn field_plan() -> &'static FieldPlan {
    use std::sync::OnceLock;
    static PLAN: OnceLock<FieldPlan> = OnceLock::new();
    PLAN.get_or_init(|| {
        let mut a = [(0, 0, 10); 4];
        let mut i = 0;
        for r in 0..2 {
            for c in 0..2 {
                a[i] = (r, c, 10);
                i += 1;
            }
        }
        let mut b = [(0, 0, 0); 12];
        i = 0;
        for r in 0..2 {
            for c in 2..4 {
                b[i] = (r, c, 10); // 2ndHL
                i += 1;
            }
        }
        for r in 2..4 {
            for c in 0..2 {
                b[i] = (r, c, 10); // 2ndLH
                i += 1;
            }
        }
        for r in 2..4 {
            for c in 2..4 {
                b[i] = (r, c, 11); // 2ndHH
                i += 1;
            }
        }
        let mut cc = [(0, 0, 10); 48];
        i = 0;
        for r in 0..4 {
            for col in 4..8 {
                cc[i] = (r, col, 10); // 1stHL
                i += 1;
            }
        }
        for r in 4..8 {
            for col in 0..4 {
                cc[i] = (r, col, 10); // 1stLH
                i += 1;
            }
        }
        for r in 4..8 {
            for col in 4..8 {
                cc[i] = (r, col, 10); // 1stHH
                i += 1;
            }
        }
        FieldPlan { a, b, c: cc }
    })
}

fn band_name(row: usize, col: usize) -> &'static str {
    if row < 4 && col < 4 {
        match (row < 2, col < 2) {
            (true, true) => "2ndLL",
            (true, false) => "2ndHL",
            (false, true) => "2ndLH",
            (false, false) => "2ndHH",
        }
    } else if row < 4 {
        "1stHL"
    } else if col < 4 {
        "1stLH"
    } else {
        "1stHH"
    }
}

fn encode_offset(value: i32, width: usize, row: usize, col: usize) -> Result<u64> {
    let half = 1i32 << (width - 1);
    if value < -half || value >= half {
        return Err(Error::CoeffRange {
            band: band_name(row, col),
            row,
            col,
            value,
            bound: half - 1,
        });
    }
    Ok((value + half) as u64)
}

#[inline]
fn decode_offset(raw: u64, width: usize) -> i32 {
    raw as i32 - (1i32 << (width - 1))
}

/// Pack a two-level coefficient block into its three fragments.
pub fn pack_dwt_block(coeffs: &CoeffBlock) -> Result<(FragA, FragB, FragC)> {
    if coeffs.layout != CoeffLayout::DwtLevel2 {
        return Err(Error::InvalidInput(
            "expected a two-level coefficient block".into(),
        ));
    }
    let plan = field_plan();
    let mut a = 0u64;
    for (r, c, w) in plan.a {
        a = (a << w) | encode_offset(coeffs.values[r][c], w, r, c)?;
    }
    let mut b = 0u128;
    for (r, c, w) in plan.b {
        b = (b << w) | encode_offset(coeffs.values[r][c], w, r, c)? as u128;
    }
    // 48 ten-bit fields: accumulate four at a time (40 bits = 5 bytes).
    let mut c_bytes = [0u8; 60];
    for (group, chunk) in plan.c.chunks_exact(4).enumerate() {
        let mut acc = 0u64;
        for (r, c, w) in chunk {
            acc = (acc << w) | encode_offset(coeffs.values[*r][*c], *w, *r, *c)?;
        }
        let be = acc.to_be_bytes();
        c_bytes[group * 5..group * 5 + 5].copy_from_slice(&be[3..8]);
    }
    Ok((FragA(a), FragB(b), FragC(c_bytes)))
}

/// Exact inverse of `pack_dwt_block`.
pub fn unpack_dwt_block(a: FragA, b: FragB, c: FragC) -> CoeffBlock {
    let plan = field_plan();
    let mut out = CoeffBlock::zero(CoeffLayout::DwtLevel2);
    let mut acc = a.0;
    for (r, col, w) in plan.a.iter().rev() {
        out.values[*r][*col] = decode_offset(acc & ((1 << w) - 1), *w);
        acc >>= w;
    }
    let mut acc = b.0;
    for (r, col, w) in plan.b.iter().rev() {
        out.values[*r][*col] = decode_offset((acc & ((1 << w) - 1)) as u64, *w);
        acc >>= w;
    }
    for (group, chunk) in plan.c.chunks_exact(4).enumerate() {
        let mut be = [0u8; 8];
        be[3..8].copy_from_slice(&c.0[group * 5..group * 5 + 5]);
        let mut acc = u64::from_be_bytes(be);
        for (r, col, w) in chunk.iter().rev() {
            out.values[*r][*col] = decode_offset(acc & ((1 << w) - 1), *w);
            acc >>= w;
        }
    }
    out
}

/// Packed DCT private fragment: `count` sign+magnitude 11-bit fields in the
/// low `11 * count` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DctPrivate {
    bits: u128,
    count: usize,
}

impl DctPrivate {
    pub fn bits(&self) -> u128 {
        self.bits
    }

    pub fn bit_len(&self) -> usize {
        self.count * DCT_FIELD_BITS
    }

    /// Canonical byte form, MSB-first, zero-padded at the tail.
    pub fn to_padded_bytes(&self) -> Vec<u8> {
        let bits = self.bit_len();
        let nbytes = bits.div_ceil(8);
        let shifted = self.bits << (nbytes * 8 - bits);
        shifted.to_be_bytes()[16 - nbytes..].to_vec()
    }
}

/// Encode selected DCT coefficients, sign bit first then 10-bit magnitude.
/// The leading (DC) field additionally admits -1024, encoded as the otherwise
/// unused negative zero.
pub fn pack_dct_private(values: &[i32]) -> Result<DctPrivate> {
    if values.is_empty() || values.len() * DCT_FIELD_BITS > 128 {
        return Err(Error::InvalidInput(format!(
            "dct private fragment supports 1..=11 values, got {}",
            values.len()
        )));
    }
    let mut bits = 0u128;
    for (i, v) in values.iter().enumerate() {
        let field = encode_sign_magnitude(*v, i == 0).ok_or(Error::CoeffRange {
            band: if i == 0 { "DC" } else { "AC" },
            row: 0,
            col: i,
            value: *v,
            bound: if i == 0 { 1024 } else { 1023 },
        })?;
        bits = (bits << DCT_FIELD_BITS) | field as u128;
    }
    Ok(DctPrivate {
        bits,
        count: values.len(),
    })
}

/// Inverse of `pack_dct_private`.
pub fn unpack_dct_private(frag: &DctPrivate) -> Vec<i32> {
    let mut out = vec![0i32; frag.count];
    let mut acc = frag.bits;
    for slot in out.iter_mut().rev() {
        *slot = decode_sign_magnitude((acc & 0x7FF) as u16);
        acc >>= DCT_FIELD_BITS;
    }
    out
}

pub fn dct_private_from_bits(bits: u128, count: usize) -> DctPrivate {
    DctPrivate { bits, count }
}

fn encode_sign_magnitude(v: i32, allow_min: bool) -> Option<u16> {
    if v >= 0 {
        (v <= 1023).then_some(v as u16)
    } else if v == -1024 {
        allow_min.then_some(0x400)
    } else {
        (v >= -1023).then_some(0x400 | (-v) as u16)
    }
}

fn decode_sign_magnitude(field: u16) -> i32 {
    let mag = (field & 0x3FF) as i32;
    if field & 0x400 != 0 {
        if mag == 0 {
            -1024
        } else {
            -mag
        }
    } else {
        mag
    }
}
