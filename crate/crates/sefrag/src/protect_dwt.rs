//! Per-block protection for the wavelet scheme: the private fragment is
//! routed to the stream cipher at chunk granularity, while the two public
//! fragments are XOR-masked with keystreams derived from SHA-256 and SHA-512.
//!
//! Keystream inputs are framed canonically: a domain-tag byte, the 16-byte
//! key, the big-endian block address, then the sibling fragment bits. The
//! block address is always included so identical blocks never share a
//! keystream.

use sha2::{Digest, Sha256, Sha512};

use crate::bitpack::{pack_dwt_block, unpack_dwt_block, FragA, FragB, FragC};
use crate::error::Result;
use crate::model::{BlockAddress, CoeffBlock, SecretKey};

const TAG_KEYSTREAM_B: u8 = 0x01;
const TAG_KEYSTREAM_C: u8 = 0x02;

/// The three per-block fragments after masking, with the address they belong
/// to. The private fragment rides along in plain packed form; the cipher
/// layer encrypts whole per-chunk private streams.
#[derive(Debug, Clone, Copy)]
pub struct FragmentTriple {
    pub address: BlockAddress,
    pub priv_plain: FragA,
    pub frag_b_masked: FragB,
    pub frag_c_masked: FragC,
}

/// 124-bit keystream for the first public fragment: SHA-256 over the key,
/// address and plain private fragment, truncated MSB-first.
pub fn derive_keystream_b(key: &SecretKey, address: BlockAddress, priv_plain: FragA) -> FragB {
    let mut h = Sha256::new();
    h.update([TAG_KEYSTREAM_B]);
    h.update(key.bytes());
    h.update(address.to_be_bytes());
    h.update(priv_plain.to_bytes());
    let digest = h.finalize();
    let first16: [u8; 16] = digest[..16].try_into().unwrap();
    FragB(u128::from_be_bytes(first16) >> 4)
}

/// 480-bit keystream for the second public fragment: SHA-512 over the key,
/// address and the already-masked first fragment, truncated MSB-first.
pub fn derive_keystream_c(key: &SecretKey, address: BlockAddress, frag_b_masked: FragB) -> FragC {
    let mut h = Sha512::new();
    h.update([TAG_KEYSTREAM_C]);
    h.update(key.bytes());
    h.update(address.to_be_bytes());
    h.update(frag_b_masked.to_padded_bytes());
    let digest = h.finalize();
    FragC(digest[..60].try_into().unwrap())
}

/// Pack and mask one coefficient block.
pub fn protect_block(
    key: &SecretKey,
    address: BlockAddress,
    coeffs: &CoeffBlock,
) -> Result<FragmentTriple> {
    let (priv_plain, frag_b, frag_c) = pack_dwt_block(coeffs)?;
    let frag_b_masked = frag_b ^ derive_keystream_b(key, address, priv_plain);
    let frag_c_masked = frag_c ^ derive_keystream_c(key, address, frag_b_masked);
    Ok(FragmentTriple {
        address,
        priv_plain,
        frag_b_masked,
        frag_c_masked,
    })
}

/// Exact inverse of `protect_block`, given the decrypted private fragment.
/// Unmasks the second fragment from the still-masked first one, then the
/// first from the private bits, then unpacks.
pub fn unprotect_block(
    key: &SecretKey,
    address: BlockAddress,
    priv_plain: FragA,
    frag_b_masked: FragB,
    frag_c_masked: FragC,
) -> CoeffBlock {
    let frag_c = frag_c_masked ^ derive_keystream_c(key, address, frag_b_masked);
    let frag_b = frag_b_masked ^ derive_keystream_b(key, address, priv_plain);
    unpack_dwt_block(priv_plain, frag_b, frag_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dwt::dwt2_two_level_forward;
    use crate::model::PixelBlock;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use sha2::{Digest, Sha256, Sha512};

    #[test]
    fn sha_primitives_match_published_vectors() {
        // FIPS 180-4 / NIST CAVS short message vectors.
        let d = Sha256::digest(b"abc");
        assert_eq!(
            hex::encode(d),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let d = Sha256::digest(b"");
        assert_eq!(
            hex::encode(d),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        let d = Sha512::digest(b"abc");
        assert_eq!(
            hex::encode(d),
            "ddaf35a193617abacc417349ae20413112e6fa4e89a97ea20a9eeee64b55d39a\
             2192992a274fc1a836ba3c23a3feebbd454d4423643ce80e2a9ac94fa54ca49f"
        );
        let d = Sha512::digest(b"");
        assert_eq!(
            hex::encode(d),
            "cf83e1357eefb8bdf1542850d66d8007d620e4050b5715dc83f4a921d36ce9ce\
             47d0d13c5d85f2b0ff8318d2877eec2f63b931bd47417a81a538327af927da3e"
        );
    }

    fn hamming_b(a: FragB, b: FragB) -> u32 {
        (a.0 ^ b.0).count_ones()
    }

    fn hamming_c(a: FragC, b: FragC) -> u32 {
        a.0.iter()
            .zip(b.0.iter())
            .map(|(x, y)| (x ^ y).count_ones())
            .sum()
    }

    #[test]
    fn identical_blocks_different_addresses_decorrelate() {
        let key = SecretKey::new([9; 16]);
        let priv_plain = FragA(0x12_3456_789A);
        let k1 = derive_keystream_b(&key, BlockAddress::new(0, 0, 0), priv_plain);
        let k2 = derive_keystream_b(&key, BlockAddress::new(0, 0, 1), priv_plain);
        let d = hamming_b(k1, k2);
        assert!((38..=86).contains(&d), "address separation hamming {d}");

        let kc1 = derive_keystream_c(&key, BlockAddress::new(0, 0, 0), FragB(7));
        let kc2 = derive_keystream_c(&key, BlockAddress::new(1, 0, 0), FragB(7));
        let d = hamming_c(kc1, kc2);
        assert!((170..=310).contains(&d), "address separation hamming {d}");
    }

    #[test]
    fn one_bit_key_change_flips_half_the_keystream() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let addr = BlockAddress::new(3, 5, 7);
        let mut sum_b = 0u64;
        let mut sum_c = 0u64;
        let trials = 10_000;
        for _ in 0..trials {
            let key = SecretKey::new(rng.gen());
            let flipped = key.with_flipped_bit(rng.gen_range(0..128));
            let frag = FragA(rng.gen::<u64>() & 0xFF_FFFF_FFFF);
            sum_b += hamming_b(
                derive_keystream_b(&key, addr, frag),
                derive_keystream_b(&flipped, addr, frag),
            ) as u64;
            let fb = FragB(rng.gen::<u128>() >> 4);
            sum_c += hamming_c(
                derive_keystream_c(&key, addr, fb),
                derive_keystream_c(&flipped, addr, fb),
            ) as u64;
        }
        let mean_b = sum_b as f64 / trials as f64;
        let mean_c = sum_c as f64 / trials as f64;
        assert!(
            (mean_b - 62.0).abs() < 10.0,
            "keystream B avalanche {mean_b}"
        );
        assert!(
            (mean_c - 240.0).abs() < 10.0,
            "keystream C avalanche {mean_c}"
        );
    }

    #[test]
    fn protect_unprotect_is_identity() {
        let key = SecretKey::new([0x5A; 16]);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for i in 0..5_000 {
            let block = PixelBlock::from_fn(|_, _| rng.gen());
            let coeffs = dwt2_two_level_forward(&block).unwrap();
            let addr = BlockAddress::new(i % 7, rng.gen_range(0..128), rng.gen_range(0..128));
            let triple = protect_block(&key, addr, &coeffs).unwrap();
            let back = unprotect_block(
                &key,
                addr,
                triple.priv_plain,
                triple.frag_b_masked,
                triple.frag_c_masked,
            );
            assert_eq!(back, coeffs);
        }
    }

    #[test]
    fn keystreams_are_deterministic() {
        let key = SecretKey::new([1; 16]);
        let addr = BlockAddress::new(11, 22, 33);
        let frag = FragA(0xDEAD_BEEF_00);
        assert_eq!(
            derive_keystream_b(&key, addr, frag),
            derive_keystream_b(&key, addr, frag)
        );
        assert_eq!(
            derive_keystream_c(&key, addr, FragB(42)),
            derive_keystream_c(&key, addr, FragB(42))
        );
    }

    #[test]
    fn single_bit_flip_in_masked_c_yields_single_coeff_bit_error() {
        let key = SecretKey::new([3; 16]);
        let addr = BlockAddress::new(0, 1, 2);
        let block = PixelBlock::from_fn(|r, c| (r * 31 + c * 17) as u8);
        let coeffs = dwt2_two_level_forward(&block).unwrap();
        let triple = protect_block(&key, addr, &coeffs).unwrap();

        let mut tampered = triple.frag_c_masked;
        tampered.0[13] ^= 0x10;
        let good = unprotect_block(
            &key,
            addr,
            triple.priv_plain,
            triple.frag_b_masked,
            triple.frag_c_masked,
        );
        let bad = unprotect_block(
            &key,
            addr,
            triple.priv_plain,
            triple.frag_b_masked,
            tampered,
        );
        // Exactly one bit of the unpacked coefficient stream differs.
        let (_, gb, gc) = pack_dwt_block(&good).unwrap();
        let bad_c = tampered ^ derive_keystream_c(&key, addr, triple.frag_b_masked);
        let diff: u32 =
            gc.0.iter()
                .zip(bad_c.0.iter())
                .map(|(a, b)| (a ^ b).count_ones())
                .sum();
        assert_eq!(diff, 1);
        // And the first public fragment is untouched.
        let (_, bb, _) = pack_dwt_block(&bad).unwrap();
        assert_eq!(gb, bb);
    }
}
