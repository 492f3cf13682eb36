//! Floating-point 8x8 block DCT via the constant basis matrix, coefficient
//! selection, and the pixel-domain split/rebuild used by the bitmap schemes.

use crate::error::{Error, Result};
use crate::model::{PixelBlock, BLOCK_SIDE};

/// Orthonormal 8x8 DCT basis, `basis[u][x] = alpha(u) * cos(pi*(2x+1)*u/16)`.
#[derive(Debug, Clone)]
pub struct Dct8Basis {
    pub c: [[f64; 8]; 8],
}

impl Dct8Basis {
    fn compute() -> Self {
        let mut c = [[0f64; 8]; 8];
        for (u, row) in c.iter_mut().enumerate() {
            let alpha = if u == 0 { (1f64 / 8.0).sqrt() } else { 0.5 };
            for (x, v) in row.iter_mut().enumerate() {
                *v =
                    alpha * (std::f64::consts::PI * (2.0 * x as f64 + 1.0) * u as f64 / 16.0).cos();
            }
        }
        Self { c }
    }
}

/// Shared basis instance.
pub fn basis() -> &'static Dct8Basis {
    use std::sync::OnceLock;
    static BASIS: OnceLock<Dct8Basis> = OnceLock::new();
    BASIS.get_or_init(Dct8Basis::compute)
}

/// Ordered DCT coefficient positions kept in the private fragment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedCoeffSet {
    positions: Vec<(u8, u8)>,
}

impl SelectedCoeffSet {
    /// The recommended low-frequency selection: DC plus the five strongest AC
    /// positions.
    pub fn recommended() -> Self {
        Self {
            positions: vec![(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2)],
        }
    }

    pub fn new(positions: Vec<(u8, u8)>) -> Result<Self> {
        if positions.is_empty() || positions.len() > 11 {
            return Err(Error::InvalidInput(format!(
                "selection must contain 1..=11 positions, got {}",
                positions.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for (r, c) in &positions {
            if *r >= 8 || *c >= 8 {
                return Err(Error::InvalidInput(format!(
                    "position ({r},{c}) outside 8x8"
                )));
            }
            if !seen.insert((*r, *c)) {
                return Err(Error::InvalidInput(format!("duplicate position ({r},{c})")));
            }
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[(u8, u8)] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn contains_dc(&self) -> bool {
        self.positions.contains(&(0, 0))
    }
}

impl Default for SelectedCoeffSet {
    fn default() -> Self {
        Self::recommended()
    }
}

/// Forward 8x8 DCT as two matrix products. With `centered`, 128 is subtracted
/// from every pixel first.
pub fn dct8_forward(block: &PixelBlock, centered: bool) -> [[f64; 8]; 8] {
    let mut input = [[0f64; 8]; 8];
    let offset = if centered { 128.0 } else { 0.0 };
    for (r, row) in block.values.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            input[r][c] = *v as f64 - offset;
        }
    }
    dct8_forward_real(&input)
}

/// Forward DCT over real-valued input.
pub fn dct8_forward_real(input: &[[f64; 8]; 8]) -> [[f64; 8]; 8] {
    let c = &basis().c;
    let mut tmp = [[0f64; 8]; 8];
    // tmp = C * X
    for u in 0..8 {
        for y in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                acc += c[u][x] * input[x][y];
            }
            tmp[u][y] = acc;
        }
    }
    // out = tmp * C^T
    let mut out = [[0f64; 8]; 8];
    for u in 0..8 {
        for v in 0..8 {
            let mut acc = 0.0;
            for y in 0..8 {
                acc += tmp[u][y] * c[v][y];
            }
            out[u][v] = acc;
        }
    }
    out
}

/// Inverse 8x8 DCT: `C^T * Y * C`.
pub fn dct8_inverse(coeffs: &[[f64; 8]; 8]) -> [[f64; 8]; 8] {
    let c = &basis().c;
    let mut tmp = [[0f64; 8]; 8];
    // tmp = C^T * Y
    for x in 0..8 {
        for v in 0..8 {
            let mut acc = 0.0;
            for u in 0..8 {
                acc += c[u][x] * coeffs[u][v];
            }
            tmp[x][v] = acc;
        }
    }
    let mut out = [[0f64; 8]; 8];
    for x in 0..8 {
        for y in 0..8 {
            let mut acc = 0.0;
            for v in 0..8 {
                acc += tmp[x][v] * c[v][y];
            }
            out[x][y] = acc;
        }
    }
    out
}

/// Round half away from zero; the rounding mode at both documented
/// truncation points.
#[inline]
pub fn round_half_away(v: f64) -> i32 {
    v.round() as i32
}

/// Split a centered DCT coefficient block into the rounded private values at
/// the selected positions and the public pixel rendering of the remainder.
///
/// In the public rendering the selected positions are zeroed and, when the DC
/// position is selected, the DC slot is set to 1024 so the pixel-domain
/// output sits around mid-gray and survives the unsigned byte rounding.
pub fn split_dct_block(
    coeffs: &[[f64; 8]; 8],
    sel: &SelectedCoeffSet,
) -> Result<(Vec<i32>, [u8; 64])> {
    let mut private = Vec::with_capacity(sel.len());
    for (i, (r, c)) in sel.positions().iter().enumerate() {
        let v = round_half_away(coeffs[*r as usize][*c as usize]);
        let (lo, hi) = if i == 0 && *r == 0 && *c == 0 {
            (-1024, 1023)
        } else {
            (-1023, 1023)
        };
        if v < lo || v > hi {
            return Err(Error::CoeffRange {
                band: "dct private",
                row: *r as usize,
                col: *c as usize,
                value: v,
                bound: hi,
            });
        }
        private.push(v);
    }
    let mut public = *coeffs;
    for (r, c) in sel.positions() {
        public[*r as usize][*c as usize] = 0.0;
    }
    if sel.contains_dc() {
        public[0][0] = 1024.0;
    }
    let pixels = dct8_inverse(&public);
    let mut out = [0u8; 64];
    for (r, row) in pixels.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            out[r * BLOCK_SIDE + c] = round_half_away(*v).clamp(0, 255) as u8;
        }
    }
    Ok((private, out))
}

/// Rebuild a pixel block from the private values and public pixels: forward
/// DCT of the public pixels, private values swapped back into the selected
/// positions, inverse, re-center, byte rounding.
pub fn rebuild_dct_block(
    private: &[i32],
    public_pixels: &[u8; 64],
    sel: &SelectedCoeffSet,
) -> PixelBlock {
    debug_assert_eq!(private.len(), sel.len());
    let mut input = [[0f64; 8]; 8];
    for r in 0..8 {
        for c in 0..8 {
            input[r][c] = public_pixels[r * BLOCK_SIDE + c] as f64;
        }
    }
    let mut coeffs = dct8_forward_real(&input);
    for ((r, c), v) in sel.positions().iter().zip(private) {
        coeffs[*r as usize][*c as usize] = *v as f64;
    }
    let pixels = dct8_inverse(&coeffs);
    PixelBlock::from_fn(|r, c| (round_half_away(pixels[r][c] + 128.0)).clamp(0, 255) as u8)
}
