//! Shared domain types: key material, scheme identifiers, byte matrices and
//! the 8x8 block addressing used by every pipeline.

use crate::error::{Error, Result};

pub const BLOCK_SIDE: usize = 8;
pub const BLOCK_PIXELS: usize = 64;

/// 128-bit user secret driving both the block cipher and keystream derivation.
///
/// Deliberately opaque: no `Debug` of the raw bytes, no serialization hooks.
/// Key bytes must never end up in a fragment, container header or manifest.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    bytes: [u8; 16],
}

impl SecretKey {
    pub fn new(bytes: [u8; 16]) -> Self {
        Self { bytes }
    }

    pub fn from_slice(slice: &[u8]) -> Result<Self> {
        let bytes: [u8; 16] = slice.try_into().map_err(|_| {
            Error::InvalidInput(format!("key must be 16 bytes, got {}", slice.len()))
        })?;
        Ok(Self { bytes })
    }

    pub fn bytes(&self) -> &[u8; 16] {
        &self.bytes
    }

    /// Copy with bit `bit` (0..128, MSB-first across the key) flipped.
    pub fn with_flipped_bit(&self, bit: usize) -> Self {
        assert!(bit < 128);
        let mut bytes = self.bytes;
        bytes[bit / 8] ^= 0x80 >> (bit % 8);
        Self { bytes }
    }
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// Which protection pipeline a container was produced with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeId {
    /// Two-level integer wavelet fragmentation, lossless, format-agnostic.
    Dwt2L2,
    /// Block-DCT split: private fragment encrypted, public pixels plain.
    DctL1,
    /// Block-DCT split with the public pixels additionally keystream-masked.
    DctL2,
}

impl SchemeId {
    pub fn tag(self) -> u8 {
        match self {
            SchemeId::Dwt2L2 => 0,
            SchemeId::DctL1 => 1,
            SchemeId::DctL2 => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(SchemeId::Dwt2L2),
            1 => Ok(SchemeId::DctL1),
            2 => Ok(SchemeId::DctL2),
            other => Err(Error::Format(format!("unknown scheme tag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Dwt2L2 => "dwt2",
            SchemeId::DctL1 => "dct1",
            SchemeId::DctL2 => "dct2",
        }
    }
}

/// Square byte matrix; the unit the agnostic pipeline cuts files into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteMatrix {
    side: usize,
    data: Vec<u8>,
}

impl ByteMatrix {
    pub fn new(side: usize, data: Vec<u8>) -> Result<Self> {
        if side < 8 || side % 8 != 0 {
            return Err(Error::InvalidInput(format!(
                "matrix side must be a multiple of 8 and >= 8, got {side}"
            )));
        }
        if data.len() != side * side {
            return Err(Error::InvalidInput(format!(
                "matrix data length {} does not match side {side}",
                data.len()
            )));
        }
        Ok(Self { side, data })
    }

    pub fn zeroed(side: usize) -> Result<Self> {
        Self::new(side, vec![0; side * side])
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.side + col]
    }
}

/// Identifies one 8x8 block within a protection run. Doubles as the nonce
/// material that separates keystreams of identical blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockAddress {
    pub chunk_index: u64,
    pub block_row: u32,
    pub block_col: u32,
}

impl BlockAddress {
    pub fn new(chunk_index: u64, block_row: u32, block_col: u32) -> Self {
        Self {
            chunk_index,
            block_row,
            block_col,
        }
    }

    /// Canonical big-endian encoding used inside hash inputs.
    pub fn to_be_bytes(self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[..8].copy_from_slice(&self.chunk_index.to_be_bytes());
        out[8..12].copy_from_slice(&self.block_row.to_be_bytes());
        out[12..16].copy_from_slice(&self.block_col.to_be_bytes());
        out
    }
}

/// One 8x8 block of unsigned bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBlock {
    pub values: [[u8; BLOCK_SIDE]; BLOCK_SIDE],
}

impl PixelBlock {
    pub fn constant(v: u8) -> Self {
        Self {
            values: [[v; BLOCK_SIDE]; BLOCK_SIDE],
        }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut values = [[0u8; BLOCK_SIDE]; BLOCK_SIDE];
        for (r, row) in values.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f(r, c);
            }
        }
        Self { values }
    }
}

/// Coefficient-domain layout of an 8x8 block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffLayout {
    Spatial,
    DwtLevel1,
    DwtLevel2,
    Dct,
}

/// 8x8 signed coefficient block tagged with its layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoeffBlock {
    pub values: [[i32; BLOCK_SIDE]; BLOCK_SIDE],
    pub layout: CoeffLayout,
}

impl CoeffBlock {
    pub fn zero(layout: CoeffLayout) -> Self {
        Self {
            values: [[0; BLOCK_SIDE]; BLOCK_SIDE],
            layout,
        }
    }
}

/// Cut a square chunk into 8x8 blocks in row-major block order.
///
/// Concatenating the returned blocks (by `stitch_blocks`) reproduces the
/// chunk exactly.
pub fn tile_chunk(chunk: &ByteMatrix) -> Vec<(BlockAddress, PixelBlock)> {
    tile_chunk_indexed(chunk, 0)
}

/// `tile_chunk` with an explicit chunk index for the block addresses.
pub fn tile_chunk_indexed(chunk: &ByteMatrix, chunk_index: u64) -> Vec<(BlockAddress, PixelBlock)> {
    let per_side = chunk.side() / BLOCK_SIDE;
    let mut out = Vec::with_capacity(per_side * per_side);
    for br in 0..per_side {
        for bc in 0..per_side {
            let block = extract_block(chunk.data(), chunk.side(), br, bc);
            out.push((BlockAddress::new(chunk_index, br as u32, bc as u32), block));
        }
    }
    out
}

/// Copy the 8x8 block at block coordinates (`block_row`, `block_col`) out of a
/// row-major `side`-wide byte buffer.
#[inline]
pub fn extract_block(data: &[u8], side: usize, block_row: usize, block_col: usize) -> PixelBlock {
    let mut values = [[0u8; BLOCK_SIDE]; BLOCK_SIDE];
    let base = block_row * BLOCK_SIDE * side + block_col * BLOCK_SIDE;
    for (r, row) in values.iter_mut().enumerate() {
        let off = base + r * side;
        row.copy_from_slice(&data[off..off + BLOCK_SIDE]);
    }
    PixelBlock { values }
}

/// Write an 8x8 block back into a row-major `side`-wide byte buffer.
#[inline]
pub fn place_block(
    data: &mut [u8],
    side: usize,
    block_row: usize,
    block_col: usize,
    block: &PixelBlock,
) {
    let base = block_row * BLOCK_SIDE * side + block_col * BLOCK_SIDE;
    for (r, row) in block.values.iter().enumerate() {
        let off = base + r * side;
        data[off..off + BLOCK_SIDE].copy_from_slice(row);
    }
}

/// Inverse of `tile_chunk`: reassemble blocks (row-major block order) into a
/// square chunk.
pub fn stitch_blocks(side: usize, blocks: &[(BlockAddress, PixelBlock)]) -> Result<ByteMatrix> {
    let per_side = side / BLOCK_SIDE;
    if blocks.len() != per_side * per_side {
        return Err(Error::InvalidInput(format!(
            "expected {} blocks for side {side}, got {}",
            per_side * per_side,
            blocks.len()
        )));
    }
    let mut m = ByteMatrix::zeroed(side)?;
    for (addr, block) in blocks {
        place_block(
            m.data_mut(),
            side,
            addr.block_row as usize,
            addr.block_col as usize,
            block,
        );
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_block_chunk_is_identity() {
        let data: Vec<u8> = (0..64).collect();
        let chunk = ByteMatrix::new(8, data.clone()).unwrap();
        let blocks = tile_chunk(&chunk);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].0, BlockAddress::new(0, 0, 0));
        let flat: Vec<u8> = blocks[0].1.values.iter().flatten().copied().collect();
        assert_eq!(flat, data);
    }

    #[test]
    fn chunk_1024_has_16384_blocks() {
        let chunk = ByteMatrix::zeroed(1024).unwrap();
        assert_eq!(tile_chunk(&chunk).len(), 16384);
    }

    #[test]
    fn block_0_1_of_16x16_holds_columns_8_to_15() {
        // Bytes 0..255 laid out row-major in a 16x16 chunk, checked against a
        // naive double-loop extractor.
        let data: Vec<u8> = (0..=255).collect();
        let chunk = ByteMatrix::new(16, data).unwrap();
        let blocks = tile_chunk(&chunk);
        assert_eq!(blocks.len(), 4);
        let (addr, block) = &blocks[1];
        assert_eq!(*addr, BlockAddress::new(0, 0, 1));
        for r in 0..8 {
            for c in 0..8 {
                let naive = chunk.get(r, c + 8);
                assert_eq!(block.values[r][c], naive, "mismatch at ({r},{c})");
            }
        }
    }

    #[test]
    fn rejects_bad_sides() {
        assert!(ByteMatrix::new(12, vec![0; 144]).is_err());
        assert!(ByteMatrix::new(0, vec![]).is_err());
        assert!(ByteMatrix::new(16, vec![0; 10]).is_err());
    }

    #[test]
    fn addresses_unique_and_total() {
        let chunk = ByteMatrix::zeroed(32).unwrap();
        let blocks = tile_chunk_indexed(&chunk, 7);
        let mut seen = std::collections::HashSet::new();
        for (addr, _) in &blocks {
            assert_eq!(addr.chunk_index, 7);
            assert!(seen.insert(*addr), "duplicate address {addr:?}");
        }
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn flipped_key_bit_differs_in_one_bit() {
        let key = SecretKey::new([0xA5; 16]);
        let other = key.with_flipped_bit(13);
        let diff: u32 = key
            .bytes()
            .iter()
            .zip(other.bytes())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        assert_eq!(diff, 1);
    }

    proptest! {
        #[test]
        fn tile_then_stitch_is_identity(side_blocks in 1usize..6, seed in any::<u64>()) {
            let side = side_blocks * 8;
            let mut state = seed;
            let data: Vec<u8> = (0..side * side)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (state >> 56) as u8
                })
                .collect();
            let chunk = ByteMatrix::new(side, data).unwrap();
            let blocks = tile_chunk(&chunk);
            let back = stitch_blocks(side, &blocks).unwrap();
            prop_assert_eq!(back, chunk);
        }
    }
}
