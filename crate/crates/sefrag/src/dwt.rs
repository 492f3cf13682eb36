//! Reversible integer 5/3 lifting wavelet: 1-D forward/inverse, separable 2-D,
//! the two-level dyadic decomposition of 8x8 blocks, and the coefficient range
//! bounds that size the fragment storage fields.
//!
//! The predict step subtracts the floored average of the two even neighbours
//! from each odd sample; the update step adds the floored, offset average of
//! the two surrounding details to each even sample. Boundaries use
//! whole-sample symmetric extension (x(-1)=x(1), x(N)=x(N-2)), so the map is
//! an exact integer-to-integer bijection.

use crate::error::{Error, Result};
use crate::model::{CoeffBlock, CoeffLayout, PixelBlock, BLOCK_SIDE};

/// Output of the 1-D analysis step: approximation (even) samples followed by
/// detail (odd) samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftingSignal {
    pub approx: Vec<i32>,
    pub detail: Vec<i32>,
}

/// Headroom guard for 1-D inputs; two lifting levels over byte data stay far
/// below this.
const LIFT_INPUT_BOUND: i32 = 1 << 20;

/// Allocation-free analysis: approximation into `approx[..n/2]`, detail into
/// `detail[..n/2]`.
#[inline]
fn lift_forward_into(signal: &[i32], approx: &mut [i32], detail: &mut [i32]) {
    let n = signal.len();
    let half = n / 2;
    for k in 0..half {
        let left = signal[2 * k];
        // x(N) = x(N-2)
        let right = if 2 * k + 2 < n {
            signal[2 * k + 2]
        } else {
            signal[n - 2]
        };
        detail[k] = signal[2 * k + 1] - ((left + right) >> 1);
    }
    for k in 0..half {
        // d(-1) = d(0)
        let prev = detail[k.saturating_sub(1)];
        approx[k] = signal[2 * k] + ((prev + detail[k] + 2) >> 2);
    }
}

/// Allocation-free synthesis into `out[..2 * approx.len()]`.
#[inline]
fn lift_inverse_into(approx: &[i32], detail: &[i32], out: &mut [i32]) {
    let half = approx.len();
    let n = half * 2;
    for k in 0..half {
        let prev = detail[k.saturating_sub(1)];
        out[2 * k] = approx[k] - ((prev + detail[k] + 2) >> 2);
    }
    for k in 0..half {
        let left = out[2 * k];
        let right = if 2 * k + 2 < n {
            out[2 * k + 2]
        } else {
            out[n - 2]
        };
        out[2 * k + 1] = detail[k] + ((left + right) >> 1);
    }
}

pub fn lift_forward_1d(signal: &[i32]) -> Result<LiftingSignal> {
    let n = signal.len();
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "lifting needs an even length >= 2, got {n}"
        )));
    }
    if signal.iter().any(|v| v.abs() > LIFT_INPUT_BOUND) {
        return Err(Error::InvalidInput(
            "lifting input exceeds headroom bound".into(),
        ));
    }
    let half = n / 2;
    let mut approx = vec![0i32; half];
    let mut detail = vec![0i32; half];
    lift_forward_into(signal, &mut approx, &mut detail);
    Ok(LiftingSignal { approx, detail })
}

pub fn lift_inverse_1d(ls: &LiftingSignal) -> Result<Vec<i32>> {
    let half = ls.approx.len();
    if half == 0 || ls.detail.len() != half {
        return Err(Error::InvalidInput(format!(
            "mismatched lifting halves: {} approx vs {} detail",
            half,
            ls.detail.len()
        )));
    }
    let mut out = vec![0i32; half * 2];
    lift_inverse_into(&ls.approx, &ls.detail, &mut out);
    Ok(out)
}

/// One separable 2-D analysis level on the top-left `n` x `n` region of the
/// block: rows first, then columns. Quadrants land LL top-left, HL top-right,
/// LH bottom-left, HH bottom-right.
pub fn dwt2_level(block: &mut [[i32; BLOCK_SIDE]; BLOCK_SIDE], n: usize) -> Result<()> {
    if n != 8 && n != 4 {
        return Err(Error::InvalidInput(format!(
            "2-D level size must be 8 or 4, got {n}"
        )));
    }
    let half = n / 2;
    let mut line = [0i32; BLOCK_SIDE];
    let mut approx = [0i32; BLOCK_SIDE / 2];
    let mut detail = [0i32; BLOCK_SIDE / 2];
    for row in block.iter_mut().take(n) {
        lift_forward_into(&row[..n], &mut approx[..half], &mut detail[..half]);
        row[..half].copy_from_slice(&approx[..half]);
        row[half..n].copy_from_slice(&detail[..half]);
    }
    for col in 0..n {
        for (r, v) in line.iter_mut().enumerate().take(n) {
            *v = block[r][col];
        }
        lift_forward_into(&line[..n], &mut approx[..half], &mut detail[..half]);
        for r in 0..half {
            block[r][col] = approx[r];
            block[r + half][col] = detail[r];
        }
    }
    Ok(())
}

/// Inverse of `dwt2_level`: columns first, then rows.
pub fn dwt2_level_inverse(block: &mut [[i32; BLOCK_SIDE]; BLOCK_SIDE], n: usize) -> Result<()> {
    if n != 8 && n != 4 {
        return Err(Error::InvalidInput(format!(
            "2-D level size must be 8 or 4, got {n}"
        )));
    }
    let half = n / 2;
    let mut approx = [0i32; BLOCK_SIDE / 2];
    let mut detail = [0i32; BLOCK_SIDE / 2];
    let mut out = [0i32; BLOCK_SIDE];
    for col in 0..n {
        for r in 0..half {
            approx[r] = block[r][col];
            detail[r] = block[r + half][col];
        }
        lift_inverse_into(&approx[..half], &detail[..half], &mut out[..n]);
        for (r, v) in out.iter().enumerate().take(n) {
            block[r][col] = *v;
        }
    }
    for row in block.iter_mut().take(n) {
        approx[..half].copy_from_slice(&row[..half]);
        detail[..half].copy_from_slice(&row[half..n]);
        lift_inverse_into(&approx[..half], &detail[..half], &mut out[..n]);
        row[..n].copy_from_slice(&out[..n]);
    }
    Ok(())
}

/// Two dyadic levels: level 1 on the 128-centered block, level 2 on the 4x4
/// approximation region. The top-left 4x4 then holds the four 2x2 second-level
/// sub-bands; the other three 4x4 quadrants are the first-level detail bands.
pub fn dwt2_two_level_forward(block: &PixelBlock) -> Result<CoeffBlock> {
    let mut values = [[0i32; BLOCK_SIDE]; BLOCK_SIDE];
    for (r, row) in block.values.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            values[r][c] = *v as i32 - 128;
        }
    }
    dwt2_level(&mut values, 8)?;
    dwt2_level(&mut values, 4)?;
    Ok(CoeffBlock {
        values,
        layout: CoeffLayout::DwtLevel2,
    })
}

/// Exact inverse of `dwt2_two_level_forward`. Rejects coefficient blocks that
/// violate the range bounds or decode outside the byte range; either means the
/// fragments were corrupted.
pub fn dwt2_two_level_inverse(coeffs: &CoeffBlock) -> Result<PixelBlock> {
    if coeffs.layout != CoeffLayout::DwtLevel2 {
        return Err(Error::InvalidInput(
            "expected a two-level coefficient block".into(),
        ));
    }
    validate_ranges(coeffs)?;
    let mut values = coeffs.values;
    dwt2_level_inverse(&mut values, 4)?;
    dwt2_level_inverse(&mut values, 8)?;
    let mut out = [[0u8; BLOCK_SIDE]; BLOCK_SIDE];
    for (r, row) in values.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let b = v + 128;
            if !(0..=255).contains(&b) {
                return Err(Error::CoeffRange {
                    band: "reconstructed byte",
                    row: r,
                    col: c,
                    value: b,
                    bound: 255,
                });
            }
            out[r][c] = b as u8;
        }
    }
    Ok(PixelBlock { values: out })
}

/// Per-position absolute bounds for the coefficients of a two-level block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeTable {
    /// Max |value| for each position of the top-left 4x4 second-level region.
    pub level2: [[i32; 4]; 4],
    /// Max |value| for the first-level HL and LH bands.
    pub level1_hl_lh: i32,
    /// Max |value| for the first-level HH band.
    pub level1_hh: i32,
}

impl RangeTable {
    /// Bound for an arbitrary position of a two-level coefficient block.
    pub fn bound_at(&self, row: usize, col: usize) -> i32 {
        if row < 4 && col < 4 {
            self.level2[row][col]
        } else if row < 4 || col < 4 {
            self.level1_hl_lh
        } else {
            self.level1_hh
        }
    }
}

/// Row weights of the four level-2 outputs (s0, s1, d0, d1) over the four
/// level-1 approximation samples, as published for the range derivation. The
/// s1 column keeps the published right-edge convention, which bounds the
/// implemented transform from above at every position.
const LEVEL2_ROWS: [[f64; 4]; 4] = [
    [0.75, 0.5, -0.25, 0.0],
    [-0.125, 0.25, 0.75, 0.125],
    [-0.5, 1.0, -0.5, 0.0],
    [0.0, 0.0, -1.0, 1.0],
];

/// Row weights of the eight level-1 outputs (s0..s3, d0..d3) over the eight
/// inputs, with whole-sample symmetric extension.
const LEVEL1_ROWS: [[f64; 8]; 8] = [
    [0.75, 0.5, -0.25, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-0.125, 0.25, 0.75, 0.25, -0.125, 0.0, 0.0, 0.0],
    [0.0, 0.0, -0.125, 0.25, 0.75, 0.25, -0.125, 0.0],
    [0.0, 0.0, 0.0, 0.0, -0.125, 0.25, 0.625, 0.25],
    [-0.5, 1.0, -0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, -0.5, 1.0, -0.5, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, -0.5, 1.0, -0.5, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0],
];

/// Derive the per-position bounds of the composed two-level map by summing
/// absolute weights against the +/-128 input range (rounding offsets ignored,
/// result rounded up to the next integer). All arithmetic is over dyadic
/// rationals, so the f64 evaluation is exact.
pub fn derive_range_table() -> RangeTable {
    // Compose: one level-2 output row over the original 8 inputs is the
    // level-2 weights applied to the first four level-1 approximation rows.
    let mut composed = [[0f64; 8]; 4];
    for (a, l2row) in LEVEL2_ROWS.iter().enumerate() {
        for (i, w) in l2row.iter().enumerate() {
            for (p, l1w) in LEVEL1_ROWS[i].iter().enumerate() {
                composed[a][p] += w * l1w;
            }
        }
    }
    let row_abs_sum: Vec<f64> = composed
        .iter()
        .map(|row| row.iter().map(|w| w.abs()).sum())
        .collect();
    // The 2-D weight of input (p,q) in output (a,b) is the product of the two
    // 1-D weights, so the absolute sum separates per axis.
    let mut level2 = [[0i32; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            level2[a][b] = (128.0 * row_abs_sum[a] * row_abs_sum[b]).ceil() as i32;
        }
    }
    // First-level band bounds from the same weight rows: detail rows have
    // |weight| sum 2, approximation rows 1.5. The double-detail band is
    // published as 511; the exact integer maximum over byte inputs is 510
    // because the centered range [-128,127] is asymmetric.
    let d_sum: f64 = LEVEL1_ROWS[4].iter().map(|w| w.abs()).sum();
    let s_sum: f64 = LEVEL1_ROWS[1].iter().map(|w| w.abs()).sum();
    RangeTable {
        level2,
        level1_hl_lh: (128.0 * s_sum * d_sum).ceil() as i32,
        level1_hh: (128.0 * d_sum * d_sum) as i32 - 1,
    }
}

/// Check a two-level coefficient block against the range table.
pub fn validate_ranges(coeffs: &CoeffBlock) -> Result<()> {
    let table = range_table();
    for (r, row) in coeffs.values.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let bound = table.bound_at(r, c);
            if v.abs() > bound {
                let band = if r < 4 && c < 4 {
                    "level-2 region"
                } else if r < 4 {
                    "1stHL"
                } else if c < 4 {
                    "1stLH"
                } else {
                    "1stHH"
                };
                return Err(Error::CoeffRange {
                    band,
                    row: r,
                    col: c,
                    value: *v,
                    bound,
                });
            }
        }
    }
    Ok(())
}

/// Cached copy of `derive_range_table`.
pub fn range_table() -> &'static RangeTable {
    use std::sync::OnceLock;
    static TABLE: OnceLock<RangeTable> = OnceLock::new();
    TABLE.get_or_init(derive_range_table)
}
