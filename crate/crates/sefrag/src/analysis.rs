//! Statistical battery measuring how well a public fragment hides its
//! original: entropy, histogram uniformity, correlations, bit difference, key
//! sensitivity, mutual information, and the image-fidelity pair PSNR/SSIM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::SecretKey;

/// Upper 1% critical value of the chi-square distribution with 255 degrees
/// of freedom (byte histogram against uniform).
pub const CHI2_CRIT_1PCT_DF255: f64 = 310.457;

/// Borrowed image view over a row-major byte buffer.
#[derive(Debug, Clone, Copy)]
pub struct ImageView<'a> {
    pub data: &'a [u8],
    pub width: usize,
    pub height: usize,
}

impl<'a> ImageView<'a> {
    pub fn new(data: &'a [u8], width: usize, height: usize) -> Result<Self> {
        if data.len() < width * height || width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "buffer of {} bytes cannot back a {width}x{height} view",
                data.len()
            )));
        }
        Ok(Self {
            data: &data[..width * height],
            width,
            height,
        })
    }

    #[inline]
    fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    Horizontal,
    Vertical,
    Diagonal,
}

pub fn histogram(data: &[u8]) -> [u64; 256] {
    let mut h = [0u64; 256];
    for b in data {
        h[*b as usize] += 1;
    }
    h
}

/// Normalized 256-bin probability density of the byte values.
pub fn pdf(data: &[u8]) -> Result<[f64; 256]> {
    if data.is_empty() {
        return Err(Error::InvalidInput("pdf of empty input".into()));
    }
    let h = histogram(data);
    let n = data.len() as f64;
    let mut out = [0f64; 256];
    for (o, c) in out.iter_mut().zip(h.iter()) {
        *o = *c as f64 / n;
    }
    Ok(out)
}

/// Shannon entropy in bits per byte symbol.
pub fn entropy(data: &[u8]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("entropy of empty input".into()));
    }
    let h = histogram(data);
    let n = data.len() as f64;
    let mut acc = 0.0;
    for c in h {
        if c > 0 {
            let p = c as f64 / n;
            acc -= p * p.log2();
        }
    }
    Ok(acc)
}

/// Chi-square statistic of the byte histogram against the uniform
/// distribution, and whether it passes at the 1% significance level.
pub fn chi2_uniformity(data: &[u8]) -> Result<(f64, bool)> {
    if data.is_empty() {
        return Err(Error::InvalidInput("chi-square of empty input".into()));
    }
    let h = histogram(data);
    let expected = data.len() as f64 / 256.0;
    let stat: f64 = h
        .iter()
        .map(|c| {
            let d = *c as f64 - expected;
            d * d / expected
        })
        .sum();
    Ok((stat, stat <= CHI2_CRIT_1PCT_DF255))
}

/// Pearson correlation coefficient with population normalization.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "correlation needs two equal sequences of length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let ex = x.iter().sum::<f64>() / n;
    let ey = y.iter().sum::<f64>() / n;
    let mut dx = 0.0;
    let mut dy = 0.0;
    let mut cov = 0.0;
    for (a, b) in x.iter().zip(y) {
        let da = a - ex;
        let db = b - ey;
        dx += da * da;
        dy += db * db;
        cov += da * db;
    }
    if dx == 0.0 || dy == 0.0 {
        return Err(Error::Undefined(
            "zero variance in correlation input".into(),
        ));
    }
    Ok((cov / n) / ((dx / n).sqrt() * (dy / n).sqrt()))
}

pub fn byte_correlation(a: &[u8], b: &[u8]) -> Result<f64> {
    let x: Vec<f64> = a.iter().map(|v| *v as f64).collect();
    let y: Vec<f64> = b.iter().map(|v| *v as f64).collect();
    correlation(&x, &y)
}

/// Correlation over randomly sampled adjacent pixel pairs.
pub fn adjacent_correlation(
    image: ImageView,
    direction: Direction,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    let (max_r, max_c) = match direction {
        Direction::Horizontal => (image.height, image.width - 1),
        Direction::Vertical => (image.height - 1, image.width),
        Direction::Diagonal => (image.height - 1, image.width - 1),
    };
    if max_r == 0 || max_c == 0 || n_pairs == 0 {
        return Err(Error::InvalidInput(
            "image too small for adjacent sampling".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n_pairs);
    let mut y = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let r = rng.gen_range(0..max_r);
        let c = rng.gen_range(0..max_c);
        let (r2, c2) = match direction {
            Direction::Horizontal => (r, c + 1),
            Direction::Vertical => (r + 1, c),
            Direction::Diagonal => (r + 1, c + 1),
        };
        x.push(image.get(r, c) as f64);
        y.push(image.get(r2, c2) as f64);
    }
    correlation(&x, &y)
}

/// Hamming distance as a percentage of the bit length.
pub fn bit_difference(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidInput(format!(
            "bit difference needs equal non-empty inputs, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let diff: u64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x ^ y).count_ones() as u64)
        .sum();
    Ok(100.0 * diff as f64 / (a.len() as f64 * 8.0))
}

/// Key sensitivity: bit difference between two protected outputs produced
/// under keys differing in exactly one bit.
pub fn key_sensitivity(
    key: &SecretKey,
    flipped_bit: usize,
    protect: impl Fn(&SecretKey) -> Result<Vec<u8>>,
) -> Result<f64> {
    let other = key.with_flipped_bit(flipped_bit);
    let a = protect(key)?;
    let b = protect(&other)?;
    bit_difference(&a, &b)
}

/// Normalized mutual information over the byte joint histogram:
/// I(A;B) / sqrt(H(A) * H(B)).
pub fn nmi(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidInput(format!(
            "nmi needs equal non-empty inputs, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut joint = vec![0u64; 256 * 256];
    for (x, y) in a.iter().zip(b) {
        joint[((*x as usize) << 8) | *y as usize] += 1;
    }
    let ha = entropy(a)?;
    let hb = entropy(b)?;
    if ha == 0.0 || hb == 0.0 {
        return Err(Error::Undefined("nmi undefined for constant input".into()));
    }
    let hx = histogram(a);
    let hy = histogram(b);
    let n = a.len() as f64;
    let mut info = 0.0;
    for x in 0..256 {
        if hx[x] == 0 {
            continue;
        }
        let px = hx[x] as f64 / n;
        for y in 0..256 {
            let c = joint[(x << 8) | y];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / n;
            let py = hy[y] as f64 / n;
            info += pxy * (pxy / (px * py)).log2();
        }
    }
    Ok(info / (ha * hb).sqrt())
}

/// Peak signal-to-noise ratio in dB; infinity for identical images.
pub fn psnr(a: ImageView, b: ImageView) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::InvalidInput("psnr needs equal dimensions".into()));
    }
    let mse: f64 = a
        .data
        .iter()
        .zip(b.data)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// Mean structural similarity over an 8x8 uniform sliding window with the
/// conventional stabilizing constants.
pub fn ssim(a: ImageView, b: ImageView) -> Result<f64> {
    const WIN: usize = 8;
    const C1: f64 = 6.5025; // (0.01 * 255)^2
    const C2: f64 = 58.5225; // (0.03 * 255)^2
    if a.width != b.width || a.height != b.height {
        return Err(Error::InvalidInput("ssim needs equal dimensions".into()));
    }
    if a.width < WIN || a.height < WIN {
        return Err(Error::InvalidInput(
            "image smaller than the ssim window".into(),
        ));
    }
    let w = a.width;
    let h = a.height;
    // Summed-area tables for x, y, x^2, y^2, xy.
    let stride = w + 1;
    let mut sx = vec![0f64; stride * (h + 1)];
    let mut sy = vec![0f64; stride * (h + 1)];
    let mut sxx = vec![0f64; stride * (h + 1)];
    let mut syy = vec![0f64; stride * (h + 1)];
    let mut sxy = vec![0f64; stride * (h + 1)];
    for r in 0..h {
        for c in 0..w {
            let x = a.get(r, c) as f64;
            let y = b.get(r, c) as f64;
            let i = (r + 1) * stride + (c + 1);
            let up = r * stride + (c + 1);
            let left = (r + 1) * stride + c;
            let diag = r * stride + c;
            sx[i] = x + sx[up] + sx[left] - sx[diag];
            sy[i] = y + sy[up] + sy[left] - sy[diag];
            sxx[i] = x * x + sxx[up] + sxx[left] - sxx[diag];
            syy[i] = y * y + syy[up] + syy[left] - syy[diag];
            sxy[i] = x * y + sxy[up] + sxy[left] - sxy[diag];
        }
    }
    let window_sum = |t: &[f64], r: usize, c: usize| {
        t[(r + WIN) * stride + (c + WIN)] - t[r * stride + (c + WIN)] - t[(r + WIN) * stride + c]
            + t[r * stride + c]
    };
    let n = (WIN * WIN) as f64;
    let mut total = 0.0;
    let mut count = 0u64;
    for r in 0..=(h - WIN) {
        for c in 0..=(w - WIN) {
            let mx = window_sum(&sx, r, c) / n;
            let my = window_sum(&sy, r, c) / n;
            let vx = window_sum(&sxx, r, c) / n - mx * mx;
            let vy = window_sum(&syy, r, c) / n - my * my;
            let cov = window_sum(&sxy, r, c) / n - mx * my;
            let s = ((2.0 * mx * my + C1) * (2.0 * cov + C2))
                / ((mx * mx + my * my + C1) * (vx + vy + C2));
            total += s;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SampleStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub std: f64,
}

impl SampleStats {
    pub fn from_bytes(data: &[u8]) -> Self {
        Self::from_values(data.iter().map(|v| *v as f64))
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut n = 0u64;
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            sum_sq += v * v;
            n += 1;
        }
        if n == 0 {
            return Self::default();
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        Self {
            min,
            mean,
            max,
            std: var.sqrt(),
        }
    }
}

/// Battery configuration.
#[derive(Debug, Clone)]
pub struct BatteryConfig {
    /// Adjacent-pair sample count (4096 by default, 10000 for the denser
    /// bitmap protocol).
    pub pairs: usize,
    pub seed: u64,
    /// Interpret the inputs as an image of these dimensions; enables the
    /// visual metrics.
    pub image: Option<(usize, usize)>,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            pairs: 4096,
            seed: 0,
            image: None,
        }
    }
}

/// One full measurement of original vs protected fragment.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub original_bytes: usize,
    pub protected_bytes: usize,
    pub entropy_original: f64,
    pub entropy_protected: f64,
    pub pdf_protected: Vec<f64>,
    pub chi2: f64,
    pub chi2_uniform_1pct: bool,
    pub dif_percent: f64,
    pub ks_percent: Option<f64>,
    pub nmi: f64,
    pub rho: Option<f64>,
    pub rho_sq: Option<f64>,
    pub adj_original: Option<[f64; 3]>,
    pub adj_protected: Option<[f64; 3]>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub stats_original: SampleStats,
    pub stats_protected: SampleStats,
}

/// Run every applicable metric for one original/protected pair. Byte-level
/// metrics compare equal-length prefixes; the visual metrics run only when
/// `config.image` is set. `protected_alt` is the same input protected under a
/// one-bit-different key and feeds the key-sensitivity row.
pub fn run_battery(
    original: &[u8],
    protected: &[u8],
    protected_alt: Option<&[u8]>,
    config: &BatteryConfig,
) -> Result<AnalysisReport> {
    if original.is_empty() || protected.is_empty() {
        return Err(Error::InvalidInput("battery needs non-empty inputs".into()));
    }
    let common = original.len().min(protected.len());
    let (chi2, chi2_ok) = chi2_uniformity(protected)?;
    let rho = match byte_correlation(&original[..common], &protected[..common]) {
        Ok(r) => Some(r),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    let ks_percent = protected_alt
        .map(|alt| bit_difference(protected, &alt[..protected.len().min(alt.len())]))
        .transpose()?;

    let mut report = AnalysisReport {
        original_bytes: original.len(),
        protected_bytes: protected.len(),
        entropy_original: entropy(original)?,
        entropy_protected: entropy(protected)?,
        pdf_protected: pdf(protected)?.to_vec(),
        chi2,
        chi2_uniform_1pct: chi2_ok,
        dif_percent: bit_difference(&original[..common], &protected[..common])?,
        ks_percent,
        nmi: nmi(&original[..common], &protected[..common])?,
        rho_sq: rho.map(|r| r * r),
        rho,
        adj_original: None,
        adj_protected: None,
        psnr: None,
        ssim: None,
        stats_original: SampleStats::from_bytes(original),
        stats_protected: SampleStats::from_bytes(protected),
    };

    if let Some((w, h)) = config.image {
        let orig = ImageView::new(original, w, h)?;
        let prot = ImageView::new(protected, w, h)?;
        let mut adj_o = [0f64; 3];
        let mut adj_p = [0f64; 3];
        for (i, dir) in [
            Direction::Horizontal,
            Direction::Vertical,
            Direction::Diagonal,
        ]
        .into_iter()
        .enumerate()
        {
            adj_o[i] = adjacent_correlation(orig, dir, config.pairs, config.seed + i as u64)?;
            adj_p[i] = adjacent_correlation(prot, dir, config.pairs, config.seed + i as u64)?;
        }
        report.adj_original = Some(adj_o);
        report.adj_protected = Some(adj_p);
        report.psnr = Some(psnr(orig, prot)?);
        report.ssim = Some(ssim(orig, prot)?);
    }
    Ok(report)
}

/// Min/mean/max/std over repeated trials of one metric.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrialStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub std: f64,
}

impl TrialStats {
    pub fn from_values(values: &[f64]) -> Self {
        let s = SampleStats::from_values(values.iter().copied());
        Self {
            min: s.min,
            mean: s.mean,
            max: s.max,
            std: s.std,
        }
    }
}

/// Trial-aggregated battery: each trial protects the input under a fresh
/// random key (and a one-bit-flipped sibling for the sensitivity row).
#[derive(Debug, Clone)]
pub struct BatteryStats {
    pub trials: usize,
    pub entropy: TrialStats,
    pub dif: TrialStats,
    pub ks: TrialStats,
    pub nmi: TrialStats,
    pub rho: TrialStats,
    pub rho_sq: TrialStats,
    pub adj_h: Option<TrialStats>,
    pub adj_v: Option<TrialStats>,
    pub adj_d: Option<TrialStats>,
    pub psnr: Option<TrialStats>,
    pub ssim: Option<TrialStats>,
    pub chi2_failures: usize,
}

/// Run `trials` batteries with per-trial random keys drawn from `base_seed`.
pub fn run_trials(
    original: &[u8],
    trials: usize,
    base_seed: u64,
    config: &BatteryConfig,
    protect: impl Fn(&SecretKey) -> Result<Vec<u8>>,
) -> Result<BatteryStats> {
    if trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    let mut entropy_v = Vec::with_capacity(trials);
    let mut dif_v = Vec::with_capacity(trials);
    let mut ks_v = Vec::with_capacity(trials);
    let mut nmi_v = Vec::with_capacity(trials);
    let mut rho_v = Vec::with_capacity(trials);
    let mut adj = [Vec::new(), Vec::new(), Vec::new()];
    let mut psnr_v = Vec::new();
    let mut ssim_v = Vec::new();
    let mut chi2_failures = 0usize;
    for t in 0..trials {
        let key = SecretKey::new(rng.gen());
        let flipped = key.with_flipped_bit(rng.gen_range(0..128));
        let protected = protect(&key)?;
        let protected_alt = protect(&flipped)?;
        let mut cfg = config.clone();
        cfg.seed = base_seed.wrapping_add(t as u64 * 1009);
        let report = run_battery(original, &protected, Some(&protected_alt), &cfg)?;
        entropy_v.push(report.entropy_protected);
        dif_v.push(report.dif_percent);
        ks_v.push(report.ks_percent.expect("alt provided"));
        nmi_v.push(report.nmi);
        if let Some(r) = report.rho {
            rho_v.push(r);
        }
        if let Some(a) = report.adj_protected {
            for i in 0..3 {
                adj[i].push(a[i]);
            }
        }
        if let Some(p) = report.psnr {
            psnr_v.push(p);
        }
        if let Some(s) = report.ssim {
            ssim_v.push(s);
        }
        if !report.chi2_uniform_1pct {
            chi2_failures += 1;
        }
    }
    let opt = |v: &Vec<f64>| {
        if v.is_empty() {
            None
        } else {
            Some(TrialStats::from_values(v))
        }
    };
    Ok(BatteryStats {
        trials,
        entropy: TrialStats::from_values(&entropy_v),
        dif: TrialStats::from_values(&dif_v),
        ks: TrialStats::from_values(&ks_v),
        nmi: TrialStats::from_values(&nmi_v),
        rho: TrialStats::from_values(&rho_v),
        rho_sq: TrialStats::from_values(&rho_v.iter().map(|r| r * r).collect::<Vec<_>>()),
        adj_h: opt(&adj[0]),
        adj_v: opt(&adj[1]),
        adj_d: opt(&adj[2]),
        psnr: opt(&psnr_v),
        ssim: opt(&ssim_v),
        chi2_failures,
    })
}

/// Large-input averaging mode: sample `n_chunks` random chunk-aligned
/// windows of `chunk_len` bytes, run the battery on each original/protected
/// pair, and aggregate. The protected buffer must be positionally aligned
/// with the original (same length or longer).
pub fn run_chunk_trials(
    original: &[u8],
    protected: &[u8],
    chunk_len: usize,
    n_chunks: usize,
    seed: u64,
    config: &BatteryConfig,
) -> Result<BatteryStats> {
    if chunk_len == 0 || original.len() < chunk_len || protected.len() < chunk_len {
        return Err(Error::InvalidInput(
            "inputs shorter than one sampling chunk".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = original.len().min(protected.len());
    let positions: Vec<usize> = (0..n_chunks)
        .map(|_| rng.gen_range(0..=(span - chunk_len)))
        .collect();
    let mut entropy_v = Vec::new();
    let mut dif_v = Vec::new();
    let mut nmi_v = Vec::new();
    let mut rho_v = Vec::new();
    let mut chi2_failures = 0usize;
    for (t, pos) in positions.into_iter().enumerate() {
        let mut cfg = config.clone();
        cfg.seed = seed.wrapping_add(t as u64 * 7919);
        cfg.image = None;
        let report = run_battery(
            &original[pos..pos + chunk_len],
            &protected[pos..pos + chunk_len],
            None,
            &cfg,
        )?;
        entropy_v.push(report.entropy_protected);
        dif_v.push(report.dif_percent);
        nmi_v.push(report.nmi);
        if let Some(r) = report.rho {
            rho_v.push(r);
        }
        if !report.chi2_uniform_1pct {
            chi2_failures += 1;
        }
    }
    Ok(BatteryStats {
        trials: n_chunks,
        entropy: TrialStats::from_values(&entropy_v),
        dif: TrialStats::from_values(&dif_v),
        ks: TrialStats::default(),
        nmi: TrialStats::from_values(&nmi_v),
        rho: TrialStats::from_values(&rho_v),
        rho_sq: TrialStats::from_values(&rho_v.iter().map(|r| r * r).collect::<Vec<_>>()),
        adj_h: None,
        adj_v: None,
        adj_d: None,
        psnr: None,
        ssim: None,
        chi2_failures,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".to_string(),
        Some(x) => format!("{x:.4}"),
        None => "-".to_string(),
    }
}

/// Human-readable single-measurement report.
pub fn report_text(r: &AnalysisReport) -> String {
    let mut out = String::new();
    use std::fmt::Write;
    let _ = writeln!(
        out,
        "bytes            original {}  protected {}",
        r.original_bytes, r.protected_bytes
    );
    let _ = writeln!(
        out,
        "entropy          original {:.4}  protected {:.4}",
        r.entropy_original, r.entropy_protected
    );
    let _ = writeln!(
        out,
        "chi2 (df=255)    {:.2}  uniform@1%: {}",
        r.chi2,
        if r.chi2_uniform_1pct { "pass" } else { "FAIL" }
    );
    let _ = writeln!(out, "Dif              {:.4} %", r.dif_percent);
    let _ = writeln!(out, "KS               {} %", fmt_opt(r.ks_percent));
    let _ = writeln!(out, "NMI              {:.4}", r.nmi);
    let _ = writeln!(out, "rho              {}", fmt_opt(r.rho));
    let _ = writeln!(out, "rho^2            {}", fmt_opt(r.rho_sq));
    if let (Some(o), Some(p)) = (r.adj_original, r.adj_protected) {
        let _ = writeln!(
            out,
            "adj rho-h        original {:.4}  protected {:.4}",
            o[0], p[0]
        );
        let _ = writeln!(
            out,
            "adj rho-v        original {:.4}  protected {:.4}",
            o[1], p[1]
        );
        let _ = writeln!(
            out,
            "adj rho-d        original {:.4}  protected {:.4}",
            o[2], p[2]
        );
    }
    if r.psnr.is_some() {
        let _ = writeln!(out, "PSNR             {} dB", fmt_opt(r.psnr));
        let _ = writeln!(out, "SSIM             {}", fmt_opt(r.ssim));
    }
    let so = r.stats_original;
    let sp = r.stats_protected;
    let _ = writeln!(
        out,
        "sample original  min {:.0} mean {:.2} max {:.0} std {:.2}",
        so.min, so.mean, so.max, so.std
    );
    let _ = writeln!(
        out,
        "sample protected min {:.0} mean {:.2} max {:.0} std {:.2}",
        sp.min, sp.mean, sp.max, sp.std
    );
    out
}

/// CSV rendering of a single measurement (one header row, one value row).
pub fn report_csv(r: &AnalysisReport) -> String {
    let mut head = vec![
        "original_bytes",
        "protected_bytes",
        "entropy_original",
        "entropy_protected",
        "chi2",
        "chi2_uniform_1pct",
        "dif_percent",
        "ks_percent",
        "nmi",
        "rho",
        "rho_sq",
    ]
    .into_iter()
    .map(str::to_string)
    .collect::<Vec<_>>();
    let mut row = vec![
        r.original_bytes.to_string(),
        r.protected_bytes.to_string(),
        format!("{:.6}", r.entropy_original),
        format!("{:.6}", r.entropy_protected),
        format!("{:.4}", r.chi2),
        r.chi2_uniform_1pct.to_string(),
        format!("{:.6}", r.dif_percent),
        fmt_opt(r.ks_percent),
        format!("{:.6}", r.nmi),
        fmt_opt(r.rho),
        fmt_opt(r.rho_sq),
    ];
    if let (Some(o), Some(p)) = (r.adj_original, r.adj_protected) {
        for (i, tag) in ["h", "v", "d"].iter().enumerate() {
            head.push(format!("adj_rho_{tag}_original"));
            row.push(format!("{:.6}", o[i]));
            head.push(format!("adj_rho_{tag}_protected"));
            row.push(format!("{:.6}", p[i]));
        }
    }
    if r.psnr.is_some() {
        head.push("psnr_db".into());
        row.push(fmt_opt(r.psnr));
        head.push("ssim".into());
        row.push(fmt_opt(r.ssim));
    }
    format!("{}\n{}\n", head.join(","), row.join(","))
}

/// Table of min/mean/max/std rows for a trial run, in the shape of the
/// statistical result tables.
pub fn stats_table_text(s: &BatteryStats) -> String {
    let mut out = String::new();
    use std::fmt::Write;
    let _ = writeln!(
        out,
        "{} trials; chi2 failures at 1%: {}",
        s.trials, s.chi2_failures
    );
    let _ = writeln!(
        out,
        "{:<10} {:>10} {:>10} {:>10} {:>10}",
        "", "Min", "Mean", "Max", "Std"
    );
    let mut row = |name: &str, t: &TrialStats| {
        let _ = writeln!(
            out,
            "{:<10} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            name, t.min, t.mean, t.max, t.std
        );
    };
    if let Some(t) = &s.psnr {
        row("PSNR", t);
    }
    if let Some(t) = &s.ssim {
        row("SSIM", t);
    }
    row("Dif", &s.dif);
    row("KS", &s.ks);
    row("entropy", &s.entropy);
    row("rho2", &s.rho_sq);
    row("rho", &s.rho);
    if let Some(t) = &s.adj_h {
        row("rho-h", t);
    }
    if let Some(t) = &s.adj_v {
        row("rho-v", t);
    }
    if let Some(t) = &s.adj_d {
        row("rho-d", t);
    }
    row("NMI", &s.nmi);
    out
}

/// CSV dump of a byte histogram, for external plotting.
pub fn pdf_dump_csv(data: &[u8]) -> Result<String> {
    let p = pdf(data)?;
    let mut out = String::from("byte,probability\n");
    use std::fmt::Write;
    for (i, v) in p.iter().enumerate() {
        let _ = writeln!(out, "{i},{v:.8}");
    }
    Ok(out)
}

/// CSV dump of sampled adjacent-pixel pairs, for scatter plots.
pub fn adjacent_pairs_dump_csv(
    image: ImageView,
    direction: Direction,
    n_pairs: usize,
    seed: u64,
) -> Result<String> {
    let (max_r, max_c) = match direction {
        Direction::Horizontal => (image.height, image.width - 1),
        Direction::Vertical => (image.height - 1, image.width),
        Direction::Diagonal => (image.height - 1, image.width - 1),
    };
    if max_r == 0 || max_c == 0 {
        return Err(Error::InvalidInput("image too small".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("x,y\n");
    use std::fmt::Write;
    for _ in 0..n_pairs {
        let r = rng.gen_range(0..max_r);
        let c = rng.gen_range(0..max_c);
        let (r2, c2) = match direction {
            Direction::Horizontal => (r, c + 1),
            Direction::Vertical => (r + 1, c),
            Direction::Diagonal => (r + 1, c + 1),
        };
        let _ = writeln!(out, "{},{}", image.get(r, c), image.get(r2, c2));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn entropy_edge_cases() {
        assert_eq!(entropy(&vec![42u8; 1 << 20]).unwrap(), 0.0);
        let all: Vec<u8> = (0..=255u8).cycle().take(1 << 20).collect();
        assert!((entropy(&all).unwrap() - 8.0).abs() < 1e-12);
        assert!(entropy(&[]).is_err());
    }

    #[test]
    fn correlation_edge_cases() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((correlation(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((correlation(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(
            correlation(&x, &[5.0, 5.0, 5.0, 5.0]),
            Err(Error::Undefined(_))
        ));
        assert!(correlation(&x, &x[..2]).is_err());
    }

    #[test]
    fn bit_difference_extremes() {
        let a = fixtures::random_bytes(4096, 1);
        let inv: Vec<u8> = a.iter().map(|v| !v).collect();
        assert_eq!(bit_difference(&a, &a).unwrap(), 0.0);
        assert_eq!(bit_difference(&a, &inv).unwrap(), 100.0);
        assert!(bit_difference(&a, &inv[..10]).is_err());
    }

    #[test]
    fn nmi_extremes() {
        let a = fixtures::random_bytes(1 << 20, 2);
        assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let b = fixtures::random_bytes(1 << 20, 3);
        let independent = nmi(&a, &b).unwrap();
        assert!(independent < 0.01, "independent NMI {independent}");
    }

    #[test]
    fn psnr_and_ssim_for_identical_images() {
        let img = fixtures::natural_image(64, 5);
        let v = ImageView::new(img.data(), 64, 64).unwrap();
        assert!(psnr(v, v).unwrap().is_infinite());
        assert!((ssim(v, v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjacent_correlation_behaviour() {
        let img = fixtures::natural_image(256, 6);
        let v = ImageView::new(img.data(), 256, 256).unwrap();
        for dir in [
            Direction::Horizontal,
            Direction::Vertical,
            Direction::Diagonal,
        ] {
            let rho = adjacent_correlation(v, dir, 4096, 9).unwrap();
            assert!(rho > 0.8, "{dir:?} correlation {rho}");
        }
        let noise = fixtures::random_bytes(256 * 256, 7);
        let nv = ImageView::new(&noise, 256, 256).unwrap();
        for dir in [
            Direction::Horizontal,
            Direction::Vertical,
            Direction::Diagonal,
        ] {
            let rho = adjacent_correlation(nv, dir, 4096, 10).unwrap();
            assert!(rho.abs() < 0.06, "{dir:?} noise correlation {rho}");
        }
        let flat = vec![9u8; 64 * 64];
        let fv = ImageView::new(&flat, 64, 64).unwrap();
        assert!(matches!(
            adjacent_correlation(fv, Direction::Horizontal, 128, 0),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let img = fixtures::natural_image(128, 8);
        let v = ImageView::new(img.data(), 128, 128).unwrap();
        let a = adjacent_correlation(v, Direction::Diagonal, 2048, 77).unwrap();
        let b = adjacent_correlation(v, Direction::Diagonal, 2048, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chi2_accepts_uniform_rejects_skewed() {
        let uniform = fixtures::random_bytes(1 << 20, 11);
        let (_, ok) = chi2_uniformity(&uniform).unwrap();
        assert!(ok);
        let skewed = fixtures::text_bytes(1 << 20, 12);
        let (stat, ok) = chi2_uniformity(&skewed).unwrap();
        assert!(!ok, "text should fail uniformity (chi2 {stat})");
    }

    #[test]
    fn battery_on_identical_inputs() {
        let data = fixtures::random_bytes(1 << 16, 13);
        let report = run_battery(&data, &data, None, &BatteryConfig::default()).unwrap();
        assert_eq!(report.dif_percent, 0.0);
        assert!((report.nmi - 1.0).abs() < 1e-9);
        assert!((report.rho.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn key_sensitivity_is_tight_over_many_key_pairs() {
        // Repeated one-bit key flips: the bit difference of the masked pools
        // stays pinned at 50% with a small spread.
        let input = fixtures::text_bytes(128 << 10, 50);
        let cfg = BatteryConfig::default();
        let stats = run_trials(&input, 200, 51, &cfg, |k| {
            let mut job =
                crate::pipeline::ProtectJob::new(crate::model::SchemeId::Dwt2L2, k.clone());
            job.chunk_side = 256;
            let (container, _) = crate::pipeline::protect_bytes(&job, &input)?;
            Ok(crate::pipeline::public_fragment_pool(&container))
        })
        .unwrap();
        assert!(
            (stats.ks.mean - 50.0).abs() < 0.1,
            "KS mean {}",
            stats.ks.mean
        );
        assert!(stats.ks.std <= 0.1, "KS std {}", stats.ks.std);
    }

    #[test]
    fn chunk_trials_average_sampled_windows() {
        // Media-sized inputs are measured as the average over randomly
        // sampled chunks rather than one monolithic pass.
        let original = fixtures::media_bytes(fixtures::MediaKind::Mp4, 1 << 20, 40);
        let protected = fixtures::random_bytes(1 << 20, 41);
        let stats = run_chunk_trials(
            &original,
            &protected,
            256 << 10,
            20,
            9,
            &BatteryConfig::default(),
        )
        .unwrap();
        assert_eq!(stats.trials, 20);
        assert!(
            (stats.dif.mean - 50.0).abs() < 0.5,
            "dif mean {}",
            stats.dif.mean
        );
        assert!(stats.entropy.min > 7.99);
        // Independent uniform streams: NMI is pure joint-histogram sampling
        // bias, about 0.18 bits over 256 KiB windows.
        assert!(stats.nmi.max < 0.05, "nmi max {}", stats.nmi.max);
        assert!(run_chunk_trials(
            &original,
            &protected,
            2 << 20,
            3,
            0,
            &BatteryConfig::default()
        )
        .is_err());
    }

    // Naive double-loop oracles; every optimized metric must agree to 1e-9 on
    // small inputs.
    mod oracle {
        pub fn entropy(data: &[u8]) -> f64 {
            let mut acc = 0.0;
            for sym in 0u16..256 {
                let count = data.iter().filter(|b| **b as u16 == sym).count();
                if count > 0 {
                    let p = count as f64 / data.len() as f64;
                    acc -= p * p.log2();
                }
            }
            acc
        }

        pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
            let n = x.len() as f64;
            let ex = x.iter().sum::<f64>() / n;
            let ey = y.iter().sum::<f64>() / n;
            let cov = x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - ex) * (b - ey))
                .sum::<f64>()
                / n;
            let dx = x.iter().map(|a| (a - ex) * (a - ex)).sum::<f64>() / n;
            let dy = y.iter().map(|b| (b - ey) * (b - ey)).sum::<f64>() / n;
            cov / (dx * dy).sqrt()
        }

        pub fn bit_difference(a: &[u8], b: &[u8]) -> f64 {
            let mut diff = 0u64;
            for (x, y) in a.iter().zip(b) {
                for bit in 0..8 {
                    if (x >> bit) & 1 != (y >> bit) & 1 {
                        diff += 1;
                    }
                }
            }
            100.0 * diff as f64 / (a.len() as f64 * 8.0)
        }

        pub fn nmi(a: &[u8], b: &[u8]) -> f64 {
            let n = a.len() as f64;
            let mut joint = std::collections::HashMap::new();
            let mut ha = std::collections::HashMap::new();
            let mut hb = std::collections::HashMap::new();
            for (x, y) in a.iter().zip(b) {
                *joint.entry((*x, *y)).or_insert(0u64) += 1;
                *ha.entry(*x).or_insert(0u64) += 1;
                *hb.entry(*y).or_insert(0u64) += 1;
            }
            let ent = |m: &std::collections::HashMap<u8, u64>| {
                -m.values()
                    .map(|c| {
                        let p = *c as f64 / n;
                        p * p.log2()
                    })
                    .sum::<f64>()
            };
            let mut info = 0.0;
            for ((x, y), c) in &joint {
                let pxy = *c as f64 / n;
                let px = ha[x] as f64 / n;
                let py = hb[y] as f64 / n;
                info += pxy * (pxy / (px * py)).log2();
            }
            info / (ent(&ha) * ent(&hb)).sqrt()
        }

        pub fn psnr(a: &[u8], b: &[u8]) -> f64 {
            let mse = a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = *x as f64 - *y as f64;
                    d * d
                })
                .sum::<f64>()
                / a.len() as f64;
            10.0 * (255.0 * 255.0 / mse).log10()
        }

        pub fn ssim(a: &[u8], b: &[u8], w: usize, h: usize) -> f64 {
            let win = 8;
            let (c1, c2) = (6.5025, 58.5225);
            let mut total = 0.0;
            let mut count = 0u64;
            for r in 0..=(h - win) {
                for c in 0..=(w - win) {
                    let mut xs = Vec::new();
                    let mut ys = Vec::new();
                    for dr in 0..win {
                        for dc in 0..win {
                            xs.push(a[(r + dr) * w + (c + dc)] as f64);
                            ys.push(b[(r + dr) * w + (c + dc)] as f64);
                        }
                    }
                    let n = xs.len() as f64;
                    let mx = xs.iter().sum::<f64>() / n;
                    let my = ys.iter().sum::<f64>() / n;
                    let vx = xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / n;
                    let vy = ys.iter().map(|y| (y - my) * (y - my)).sum::<f64>() / n;
                    let cov = xs
                        .iter()
                        .zip(&ys)
                        .map(|(x, y)| (x - mx) * (y - my))
                        .sum::<f64>()
                        / n;
                    total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                        / ((mx * mx + my * my + c1) * (vx + vy + c2));
                    count += 1;
                }
            }
            total / count as f64
        }
    }

    #[test]
    fn optimized_metrics_match_naive_oracles() {
        let a = fixtures::random_bytes(1024, 20);
        let mut b = fixtures::natural_image(32, 21).into_data();
        b[100] ^= 0x55;
        let af: Vec<f64> = a.iter().map(|v| *v as f64).collect();
        let bf: Vec<f64> = b.iter().map(|v| *v as f64).collect();

        assert!((entropy(&a).unwrap() - oracle::entropy(&a)).abs() < 1e-9);
        assert!((correlation(&af, &bf).unwrap() - oracle::correlation(&af, &bf)).abs() < 1e-9);
        assert!((bit_difference(&a, &b).unwrap() - oracle::bit_difference(&a, &b)).abs() < 1e-9);
        assert!((nmi(&a, &b).unwrap() - oracle::nmi(&a, &b)).abs() < 1e-9);

        let va = ImageView::new(&a, 32, 32).unwrap();
        let vb = ImageView::new(&b, 32, 32).unwrap();
        assert!((psnr(va, vb).unwrap() - oracle::psnr(&a, &b)).abs() < 1e-9);
        assert!((ssim(va, vb).unwrap() - oracle::ssim(&a, &b, 32, 32)).abs() < 1e-9);
    }
}
