//! Throughput measurement of the protection pipelines against a full AES-128
//! baseline on the same data. Reported numbers always cover the whole
//! pipeline (transform + mask + pack + cipher); isolated stage timings are
//! labelled as such and never stand in for end-to-end speed.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cipher::{ChunkNonce, CipherSession};
use crate::dct::{dct8_forward, SelectedCoeffSet};
use crate::dwt::dwt2_two_level_forward;
use crate::error::{Error, Result};
use crate::model::{PixelBlock, SchemeId, SecretKey};
use crate::pipeline::{protect_stream, ProtectJob, StageNanos};

/// One end-to-end measurement.
#[derive(Debug, Clone)]
pub struct BenchResult {
    pub scheme: SchemeId,
    pub input_bytes: u64,
    pub workers: usize,
    pub wall_ms: f64,
    pub throughput_mbps: f64,
    pub stages: StageNanos,
    pub aes_baseline_mbps: f64,
    pub cpu_model: String,
    pub repetitions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Dwt,
    Dct,
    Sha256,
    Sha512,
    Aes,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Dwt => "dwt2d",
            Stage::Dct => "dct8x8",
            Stage::Sha256 => "sha256",
            Stage::Sha512 => "sha512",
            Stage::Aes => "aes128ctr",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StageBench {
    pub stage: Stage,
    pub input_bytes: u64,
    pub wall_ms: f64,
    pub throughput_mbps: f64,
}

pub fn cpu_model() -> String {
    std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|v| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown".to_string())
}

fn mbps(bytes: u64, nanos: u64) -> f64 {
    if nanos == 0 {
        return f64::INFINITY;
    }
    bytes as f64 / (1024.0 * 1024.0) / (nanos as f64 / 1e9)
}

/// AES-128-CTR over the whole input: the full-encryption baseline every
/// selective scheme is judged against.
pub fn aes_baseline_mbps(key: &SecretKey, data: &[u8], repetitions: usize) -> f64 {
    let mut best_nanos = u64::MAX;
    for rep in 0..repetitions.max(1) {
        let mut session = CipherSession::new(key.clone());
        let t = Instant::now();
        let out = session
            .encrypt_stream(ChunkNonce::from_chunk_index(rep as u64), data)
            .expect("fresh nonce");
        let nanos = t.elapsed().as_nanos() as u64;
        std::hint::black_box(&out);
        best_nanos = best_nanos.min(nanos);
    }
    mbps(data.len() as u64, best_nanos)
}

/// Measure one protection run end to end (median of `repetitions`).
pub fn bench_protect_once(
    scheme: SchemeId,
    size: usize,
    workers: usize,
    repetitions: usize,
    seed: u64,
) -> Result<BenchResult> {
    if size < 1 << 20 {
        return Err(Error::InvalidInput("benchmark sizes start at 1 MiB".into()));
    }
    let key = SecretKey::new([0xB7; 16]);
    let data = crate::fixtures::random_bytes(size, seed);
    let mut job = ProtectJob::new(SchemeId::Dwt2L2, key.clone());
    job.workers = workers;
    if scheme != SchemeId::Dwt2L2 {
        return Err(Error::InvalidInput(
            "stage benchmarks cover the agnostic scheme; bitmap schemes go through bench_stage"
                .into(),
        ));
    }
    // Warm-up round, excluded from timing.
    let mut sink = std::io::Cursor::new(Vec::with_capacity(size * 2));
    protect_stream(&job, data.as_slice(), data.len() as u64, &mut sink, None)?;

    let mut runs = Vec::with_capacity(repetitions.max(1));
    for _ in 0..repetitions.max(1) {
        let mut sink = std::io::Cursor::new(Vec::with_capacity(size * 2));
        let summary = protect_stream(&job, data.as_slice(), data.len() as u64, &mut sink, None)?;
        runs.push((summary.wall_nanos, summary.stages));
    }
    // Median run; wall and stage breakdown must come from the same run.
    runs.sort_unstable_by_key(|(wall, _)| *wall);
    let (median, stages) = runs[runs.len() / 2];
    Ok(BenchResult {
        scheme,
        input_bytes: size as u64,
        workers,
        wall_ms: median as f64 / 1e6,
        throughput_mbps: mbps(size as u64, median),
        stages,
        aes_baseline_mbps: aes_baseline_mbps(&key, &data, repetitions),
        cpu_model: cpu_model(),
        repetitions: repetitions.max(1),
    })
}

/// Sweep sizes and worker counts.
pub fn bench_protect(
    scheme: SchemeId,
    sizes: &[usize],
    workers: &[usize],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<BenchResult>> {
    let mut out = Vec::new();
    for &size in sizes {
        for &w in workers {
            out.push(bench_protect_once(scheme, size, w, repetitions, seed)?);
        }
    }
    Ok(out)
}

/// Isolate one computational stage on synthetic in-range data.
pub fn bench_stage(stage: Stage, size: usize, seed: u64) -> Result<StageBench> {
    if size == 0 {
        return Err(Error::InvalidInput(
            "stage benchmark needs a non-zero size".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nanos = match stage {
        Stage::Dwt => {
            let blocks: Vec<PixelBlock> = (0..size / 64)
                .map(|_| PixelBlock::from_fn(|_, _| rng.gen()))
                .collect();
            let t = Instant::now();
            for b in &blocks {
                std::hint::black_box(dwt2_two_level_forward(b)?);
            }
            t.elapsed().as_nanos() as u64
        }
        Stage::Dct => {
            let blocks: Vec<PixelBlock> = (0..size / 64)
                .map(|_| PixelBlock::from_fn(|_, _| rng.gen()))
                .collect();
            let sel = SelectedCoeffSet::recommended();
            let t = Instant::now();
            for b in &blocks {
                let coeffs = dct8_forward(b, true);
                std::hint::black_box(crate::dct::split_dct_block(&coeffs, &sel)?);
            }
            t.elapsed().as_nanos() as u64
        }
        Stage::Sha256 => {
            use sha2::{Digest, Sha256};
            // One hash per 64-byte block, matching the pipeline's usage.
            let msgs: Vec<[u8; 38]> = (0..size / 64)
                .map(|_| {
                    let mut m = [0u8; 38];
                    rng.fill(&mut m[..]);
                    m
                })
                .collect();
            let t = Instant::now();
            for m in &msgs {
                std::hint::black_box(Sha256::digest(m));
            }
            t.elapsed().as_nanos() as u64
        }
        Stage::Sha512 => {
            use sha2::{Digest, Sha512};
            let msgs: Vec<[u8; 49]> = (0..size / 64)
                .map(|_| {
                    let mut m = [0u8; 49];
                    rng.fill(&mut m[..]);
                    m
                })
                .collect();
            let t = Instant::now();
            for m in &msgs {
                std::hint::black_box(Sha512::digest(m));
            }
            t.elapsed().as_nanos() as u64
        }
        Stage::Aes => {
            let data = crate::fixtures::random_bytes(size, seed);
            let key = SecretKey::new([0xB7; 16]);
            let mut session = CipherSession::new(key);
            let t = Instant::now();
            let out = session.encrypt_stream(ChunkNonce::from_chunk_index(0), &data)?;
            let nanos = t.elapsed().as_nanos() as u64;
            std::hint::black_box(&out);
            nanos
        }
    };
    Ok(StageBench {
        stage,
        input_bytes: size as u64,
        wall_ms: nanos as f64 / 1e6,
        throughput_mbps: mbps(size as u64, nanos),
    })
}

/// CSV with one row per (size, workers): end-to-end plus stage breakdown and
/// the AES baseline.
pub fn results_csv(results: &[BenchResult]) -> String {
    let mut out = String::from(
        "scheme,input_bytes,workers,wall_ms,throughput_mbps,transform_ms,pack_ms,mask_ms,cipher_ms,aes_baseline_mbps,cpu_model,repetitions\n",
    );
    use std::fmt::Write;
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{:.2},{:.3},{:.3},{:.3},{:.3},{:.2},{},{}",
            r.scheme.name(),
            r.input_bytes,
            r.workers,
            r.wall_ms,
            r.throughput_mbps,
            r.stages.transform as f64 / 1e6,
            r.stages.pack as f64 / 1e6,
            r.stages.mask as f64 / 1e6,
            r.stages.cipher as f64 / 1e6,
            r.aes_baseline_mbps,
            r.cpu_model,
            r.repetitions,
        );
    }
    out
}

/// Stage table in the shape of the per-stage evaluation tables: one row per
/// stage, one column per input size.
pub fn stage_table_csv(stages: &[Vec<StageBench>]) -> String {
    let mut out = String::from("stage");
    use std::fmt::Write;
    if let Some(first) = stages.first() {
        for s in first {
            let _ = write!(out, ",{}B_ms", s.input_bytes);
        }
    }
    out.push('\n');
    for row in stages {
        let _ = write!(
            out,
            "{}",
            row.first().map(|s| s.stage.name()).unwrap_or("?")
        );
        for s in row {
            let _ = write!(out, ",{:.3}", s.wall_ms);
        }
        out.push('\n');
    }
    out
}
