//! Bitmap protection via block-DCT fragmentation. Level 1 encrypts the
//! selected low-frequency coefficients and leaves the public pixel rendering
//! plain (visual disguise only); level 2 additionally XOR-masks the 64 public
//! bytes of every block with a SHA-512 keystream, so the public fragment
//! carries no statistical trace of the image.

use sha2::{Digest, Sha512};

use crate::bitpack::DctPrivate;
use crate::dct::{dct8_forward, rebuild_dct_block, split_dct_block, SelectedCoeffSet};
use crate::error::Result;
use crate::model::{BlockAddress, PixelBlock, BLOCK_PIXELS};

const TAG_DCT_MASK: u8 = 0x03;

/// Protection level of a DCT block artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DctLevel {
    /// Public pixels stored plain.
    Level1,
    /// Public pixels masked with a per-block keystream.
    Level2,
}

/// One protected 8x8 block: the packed private fragment (cipher-protected at
/// plane granularity) and the 64 public pixel bytes, masked or plain
/// depending on the level.
#[derive(Debug, Clone)]
pub struct DctBlockArtifact {
    pub priv_plain: DctPrivate,
    pub public64: [u8; BLOCK_PIXELS],
    pub level: DctLevel,
}

/// Per-block mask for level 2: SHA-512 over the key, the block address and
/// the plain private fragment. The digest is exactly the 512 bits the public
/// pixels occupy.
pub fn derive_public_mask(
    key: &crate::model::SecretKey,
    address: BlockAddress,
    priv_plain: &DctPrivate,
) -> [u8; BLOCK_PIXELS] {
    let mut h = Sha512::new();
    h.update([TAG_DCT_MASK]);
    h.update(key.bytes());
    h.update(address.to_be_bytes());
    h.update(priv_plain.to_padded_bytes());
    let digest = h.finalize();
    digest[..].try_into().unwrap()
}

fn xor64(a: &mut [u8; BLOCK_PIXELS], b: &[u8; BLOCK_PIXELS]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x ^= y;
    }
}

/// Split one block and leave the public pixels plain.
pub fn protect_dct_level1(block: &PixelBlock, sel: &SelectedCoeffSet) -> Result<DctBlockArtifact> {
    let coeffs = dct8_forward(block, true);
    let (private, public64) = split_dct_block(&coeffs, sel)?;
    Ok(DctBlockArtifact {
        priv_plain: crate::bitpack::pack_dct_private(&private)?,
        public64,
        level: DctLevel::Level1,
    })
}

/// Split one block and mask the public pixels.
pub fn protect_dct_level2(
    key: &crate::model::SecretKey,
    address: BlockAddress,
    block: &PixelBlock,
    sel: &SelectedCoeffSet,
) -> Result<DctBlockArtifact> {
    let mut artifact = protect_dct_level1(block, sel)?;
    let mask = derive_public_mask(key, address, &artifact.priv_plain);
    xor64(&mut artifact.public64, &mask);
    artifact.level = DctLevel::Level2;
    Ok(artifact)
}

/// Rebuild the pixel block from an artifact whose private fragment has been
/// decrypted. Reconstruction is exact up to the two documented byte-rounding
/// points of the split.
pub fn unprotect_dct(
    key: &crate::model::SecretKey,
    address: BlockAddress,
    artifact: &DctBlockArtifact,
    sel: &SelectedCoeffSet,
) -> PixelBlock {
    let mut public = artifact.public64;
    if artifact.level == DctLevel::Level2 {
        let mask = derive_public_mask(key, address, &artifact.priv_plain);
        xor64(&mut public, &mask);
    }
    let private = crate::bitpack::unpack_dct_private(&artifact.priv_plain);
    rebuild_dct_block(&private, &public, sel)
}
