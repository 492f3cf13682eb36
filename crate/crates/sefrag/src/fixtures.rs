//! Deterministic synthetic inputs for the benchmark harness and test suites:
//! a natural-statistics image generator, text-like bytes, and stub media
//! files with the right magic numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::ByteMatrix;

/// Smooth multi-scale cosine field with mild noise, normalized to mean ~127.5
/// and standard deviation ~48: the first- and second-order statistics the
/// image metrics expect from a photographic input (strong adjacent-pixel
/// correlation, mid-gray mean).
pub fn natural_image(side: usize, seed: u64) -> ByteMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Photographic content is smooth at the 8x8 block scale: almost all
    // energy sits in spatial frequencies of a few cycles per image, and the
    // 8-bit quantization turns slow gradients into integer plateaus.
    let components: Vec<(f64, f64, f64, f64)> = (0..10)
        .map(|i| {
            let freq = 1.3f64.powi(i % 5) * 0.17;
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp = 1.0 / (1.0 + (i % 5) as f64).sqrt();
            (freq, angle, phase, amp)
        })
        .collect();
    let mut field = vec![0f64; side * side];
    for r in 0..side {
        for c in 0..side {
            let x = c as f64 / side as f64;
            let y = r as f64 / side as f64;
            let mut v = 0.0;
            for (freq, angle, phase, amp) in &components {
                let t = x * angle.cos() + y * angle.sin();
                v += amp * (std::f64::consts::TAU * freq * 8.0 * t + phase).cos();
            }
            field[r * side + c] = v;
        }
    }
    let mean = field.iter().sum::<f64>() / field.len() as f64;
    let var = field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / field.len() as f64;
    let scale = 50.0 / var.sqrt().max(1e-12);
    // Piecewise-smooth rendering: coarse posterization carves the field into
    // flat regions (variance concentrated at region boundaries, as photos
    // concentrate it at edges), then one box blur softens the edges.
    let levels: Vec<f64> = field
        .iter()
        .map(|v| {
            let g = (v - mean) * scale + 127.5;
            ((g / 24.0).round() * 24.0).clamp(0.0, 255.0)
        })
        .collect();
    let mut data = vec![0u8; side * side];
    for r in 0..side {
        for c in 0..side {
            let mut acc = 0.0;
            let mut n = 0.0;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let rr = r as i64 + dr;
                    let cc = c as i64 + dc;
                    if rr >= 0 && rr < side as i64 && cc >= 0 && cc < side as i64 {
                        acc += levels[rr as usize * side + cc as usize];
                        n += 1.0;
                    }
                }
            }
            data[r * side + c] = (acc / n).round().clamp(0.0, 255.0) as u8;
        }
    }
    ByteMatrix::new(side, data).expect("side validated by caller")
}

/// English-like filler text.
pub fn text_bytes(len: usize, seed: u64) -> Vec<u8> {
    const WORDS: &[&str] = &[
        "the", "of", "and", "to", "in", "that", "it", "was", "for", "on", "are", "with", "as",
        "his", "they", "be", "at", "one", "have", "this", "from", "or", "had", "by", "hot", "word",
        "but", "what", "some", "we", "can", "out", "other", "were", "all", "there", "when", "up",
        "use", "your", "how", "said", "an", "each", "she", "which", "do", "their", "time", "if",
        "will", "way", "about", "many", "then", "them", "write", "would", "like", "so", "these",
        "her", "long", "make", "thing", "see", "him", "two", "has", "look", "more", "day", "could",
        "go", "come", "did", "number", "sound", "no", "most", "people", "my", "over", "know",
        "water", "than", "call", "first", "who", "may", "down", "side", "been", "now", "find",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(len + 16);
    let mut col = 0usize;
    while out.len() < len {
        let word = WORDS[rng.gen_range(0..WORDS.len())];
        out.extend_from_slice(word.as_bytes());
        col += word.len() + 1;
        if col > 72 {
            out.push(b'\n');
            col = 0;
        } else if rng.gen_ratio(1, 12) {
            out.extend_from_slice(b". ");
        } else {
            out.push(b' ');
        }
    }
    out.truncate(len);
    out
}

/// Uniform random bytes.
pub fn random_bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0u8; len];
    rng.fill(out.as_mut_slice());
    out
}

/// Media container kinds for stub files.
#[derive(Debug, Clone, Copy)]
pub enum MediaKind {
    Mp4,
    Mkv,
    Rmvb,
}

/// A stub media file: the container's magic bytes followed by
/// compressed-looking (incompressible) payload.
pub fn media_bytes(kind: MediaKind, len: usize, seed: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    match kind {
        MediaKind::Mp4 => {
            out.extend_from_slice(&[0x00, 0x00, 0x00, 0x20]);
            out.extend_from_slice(b"ftypisom");
            out.extend_from_slice(&[0x00, 0x00, 0x02, 0x00]);
            out.extend_from_slice(b"isomiso2avc1mp41");
        }
        MediaKind::Mkv => {
            out.extend_from_slice(&[0x1A, 0x45, 0xDF, 0xA3]);
        }
        MediaKind::Rmvb => {
            out.extend_from_slice(b".RMF");
            out.extend_from_slice(&[0x00, 0x00, 0x00, 0x12, 0x00, 0x01]);
        }
    }
    let body = random_bytes(len.saturating_sub(out.len()), seed ^ 0x6d65_6469);
    out.extend_from_slice(&body);
    out.truncate(len);
    out
}
