//! Operator front end: protect, restore, analyze, bench.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 integrity/corruption, 5 policy.

use std::collections::BTreeMap;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sefrag::analysis::{self, BatteryConfig};
use sefrag::bench::{self, Stage};
use sefrag::container::{ProtectedContainer, StreamId};
use sefrag::dispersion::{
    disperse, fetch_and_restore, local_storage_footprint, total_storage_footprint,
    DispersalManifest, StorageTarget, TargetRole,
};
use sefrag::model::{SchemeId, SecretKey};
use sefrag::pipeline::{protect_bitmap, protect_stream, restore_stream, ProtectJob};
use sefrag::Error;

#[derive(Parser)]
#[command(
    name = "sefrag",
    version,
    about = "Fragmentation-based selective encryption"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Protect a file into a container, optionally dispersing its fragments.
    Protect {
        input: PathBuf,
        /// dwt2 (agnostic, lossless), dct1 or dct2 (bitmaps)
        #[arg(long, default_value = "dwt2")]
        scheme: String,
        /// Chunk side in bytes for the agnostic scheme
        #[arg(long, default_value_t = 1024)]
        chunk: u32,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// File holding the 128-bit key (32 hex chars or 16 raw bytes);
        /// falls back to $SEFRAG_KEY, then to an interactive prompt
        #[arg(long)]
        key_file: Option<PathBuf>,
        /// Container output path (default: INPUT.sefr)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Disperse fragments: A=LOC,B=LOC,C=LOC where LOC is local:DIR,
        /// pubdir:DIR or http://host:port (token from $SEFRAG_BLOB_TOKEN)
        #[arg(long)]
        place: Option<String>,
        /// Allow the private fragment on a public target
        #[arg(long)]
        allow_private_public: bool,
        /// Manifest output path (default: INPUT.manifest.toml)
        #[arg(long)]
        manifest_out: Option<PathBuf>,
    },
    /// Restore the original file from a container or dispersal manifest.
    Restore {
        /// Container (.sefr) or manifest (.toml) path
        source: PathBuf,
        #[arg(long)]
        key_file: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Output path (default: SOURCE.restored)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the statistical battery of an original/protected pair.
    Analyze {
        original: PathBuf,
        /// Container (.sefr) or raw protected bytes
        protected: PathBuf,
        /// Write PREFIX.txt and PREFIX.csv instead of stdout only
        #[arg(long)]
        out_prefix: Option<PathBuf>,
        /// Adjacent-pair sample count
        #[arg(long, default_value_t = 4096)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also dump histogram and adjacent-pair scatter CSVs
        #[arg(long)]
        dumps: bool,
    },
    /// Benchmark protection throughput against the AES-128 baseline.
    Bench {
        #[arg(long, default_value = "dwt2")]
        scheme: String,
        /// Comma-separated input sizes in bytes
        #[arg(long, default_value = "1048576,4194304")]
        sizes: String,
        /// Comma-separated worker counts
        #[arg(long, default_value = "1")]
        workers: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the end-to-end CSV here
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run the isolated per-stage table
        #[arg(long)]
        stages: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::Undefined(_) => 2,
        Error::Io { .. } => 3,
        Error::Format(_)
        | Error::Integrity(_)
        | Error::CoeffRange { .. }
        | Error::Availability(_)
        | Error::NonceReuse(_) => 4,
        Error::Policy(_) => 5,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Protect {
            input,
            scheme,
            chunk,
            workers,
            key_file,
            out,
            place,
            allow_private_public,
            manifest_out,
        } => cmd_protect(
            &input,
            &scheme,
            chunk,
            workers,
            key_file.as_deref(),
            out,
            place,
            allow_private_public,
            manifest_out,
        ),
        Cmd::Restore {
            source,
            key_file,
            workers,
            out,
        } => cmd_restore(&source, key_file.as_deref(), workers, out),
        Cmd::Analyze {
            original,
            protected,
            out_prefix,
            pairs,
            seed,
            dumps,
        } => cmd_analyze(&original, &protected, out_prefix, pairs, seed, dumps),
        Cmd::Bench {
            scheme,
            sizes,
            workers,
            reps,
            seed,
            out,
            stages,
        } => cmd_bench(&scheme, &sizes, &workers, reps, seed, out, stages),
    }
}

fn parse_scheme(s: &str) -> Result<SchemeId, Error> {
    match s {
        "dwt2" => Ok(SchemeId::Dwt2L2),
        "dct1" => Ok(SchemeId::DctL1),
        "dct2" => Ok(SchemeId::DctL2),
        other => Err(Error::InvalidInput(format!(
            "unknown scheme {other:?} (expected dwt2, dct1 or dct2)"
        ))),
    }
}

/// Key sourcing order: explicit file, then environment, then prompt. Keys are
/// never accepted as bare command-line arguments.
fn load_key(key_file: Option<&Path>) -> Result<SecretKey, Error> {
    if let Some(path) = key_file {
        let bytes = std::fs::read(path)?;
        return parse_key_material(&bytes);
    }
    if let Ok(hex_key) = std::env::var("SEFRAG_KEY") {
        return parse_key_material(hex_key.trim().as_bytes());
    }
    eprint!("key (32 hex chars): ");
    let mut line = String::new();
    std::io::stdin().read_line(&mut line)?;
    parse_key_material(line.trim().as_bytes())
}

fn parse_key_material(bytes: &[u8]) -> Result<SecretKey, Error> {
    if bytes.len() == 16 {
        return SecretKey::from_slice(bytes);
    }
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::InvalidInput("key must be 16 raw bytes or 32 hex chars".into()))?
        .trim();
    let raw = hex::decode(text)
        .map_err(|_| Error::InvalidInput("key must be 16 raw bytes or 32 hex chars".into()))?;
    SecretKey::from_slice(&raw)
}

/// LOC forms: `local:DIR` (trusted directory), `pubdir:DIR` (public
/// directory), `http://host:port` (public remote).
fn parse_target(loc: &str) -> Result<StorageTarget, Error> {
    if let Some(dir) = loc.strip_prefix("local:") {
        Ok(StorageTarget::local(loc, dir, TargetRole::Trusted))
    } else if let Some(dir) = loc.strip_prefix("pubdir:") {
        Ok(StorageTarget::local(loc, dir, TargetRole::Public))
    } else if loc.starts_with("http://") {
        let token = std::env::var("SEFRAG_BLOB_TOKEN").ok();
        Ok(StorageTarget::remote(loc, loc, token, TargetRole::Public))
    } else {
        Err(Error::InvalidInput(format!(
            "unrecognized placement location {loc:?}"
        )))
    }
}

fn parse_placement(spec: &str) -> Result<(BTreeMap<StreamId, String>, Vec<StorageTarget>), Error> {
    let mut placement = BTreeMap::new();
    let mut targets: Vec<StorageTarget> = Vec::new();
    for part in spec.split(',') {
        let (stream, loc) = part.split_once('=').ok_or_else(|| {
            Error::InvalidInput(format!("placement entry {part:?} is not STREAM=LOCATION"))
        })?;
        let id = StreamId::from_label(stream.trim())?;
        let loc = loc.trim();
        if !targets.iter().any(|t| t.name == loc) {
            targets.push(parse_target(loc)?);
        }
        placement.insert(id, loc.to_string());
    }
    Ok((placement, targets))
}

#[allow(clippy::too_many_arguments)]
fn cmd_protect(
    input: &Path,
    scheme: &str,
    chunk: u32,
    workers: usize,
    key_file: Option<&Path>,
    out: Option<PathBuf>,
    place: Option<String>,
    allow_private_public: bool,
    manifest_out: Option<PathBuf>,
) -> Result<(), Error> {
    let scheme = parse_scheme(scheme)?;
    let key = load_key(key_file)?;
    let mut job = ProtectJob::new(scheme, key.clone());
    job.chunk_side = chunk;
    job.workers = workers;

    let out_path = out.unwrap_or_else(|| with_suffix(input, "sefr"));
    let original_len = std::fs::metadata(input)?.len();

    match scheme {
        SchemeId::Dwt2L2 => {
            let reader = std::fs::File::open(input)?;
            let writer = std::fs::File::create(&out_path)?;
            let summary = protect_stream(
                &job,
                std::io::BufReader::new(reader),
                original_len,
                writer,
                None,
            )?;
            let h = &summary.header;
            println!(
                "protected {} -> {} ({} bytes, {} chunks of side {})",
                input.display(),
                out_path.display(),
                summary.container_bytes,
                h.unit_count,
                h.chunk_side
            );
            if original_len > 0 {
                for id in h.stream_ids() {
                    println!(
                        "  fragment {}: {} bytes ({:.2}% of original)",
                        id.label(),
                        h.stream_len(*id),
                        100.0 * h.stream_len(*id) as f64 / original_len as f64
                    );
                }
            }
        }
        SchemeId::DctL1 | SchemeId::DctL2 => {
            let image = sefrag::bmp::decode(std::fs::File::open(input)?)?;
            let (container, _) = protect_bitmap(&job, &image, original_len)?;
            let mut writer = BufWriter::new(std::fs::File::create(&out_path)?);
            container.write_to(&mut writer)?;
            writer.flush()?;
            // Reconstruction-quality note.
            let restored = sefrag::pipeline::restore_bitmap(&key, &container, workers)?;
            let mut worst = f64::INFINITY;
            for (a, b) in image.planes.iter().zip(&restored.planes) {
                let va = analysis::ImageView::new(a, image.width as usize, image.height as usize)?;
                let vb = analysis::ImageView::new(b, image.width as usize, image.height as usize)?;
                worst = worst.min(analysis::psnr(va, vb)?);
            }
            let pixels = image.planes.len() as u64 * (image.width * image.height) as u64;
            println!(
                "protected {} -> {} ({} bytes; private overhead {:.2}% of pixel data; round-trip PSNR {:.2} dB)",
                input.display(),
                out_path.display(),
                container.header.container_len(),
                100.0 * container.header.stream_len(StreamId::A) as f64 / pixels as f64,
                worst
            );
        }
    }

    if let Some(spec) = place {
        let (placement, targets) = parse_placement(&spec)?;
        let container = ProtectedContainer::read_from(&mut std::fs::File::open(&out_path)?)?;
        let manifest = disperse(&container, &placement, &targets, allow_private_public)?;
        let manifest_path = manifest_out.unwrap_or_else(|| with_suffix(input, "manifest.toml"));
        std::fs::write(&manifest_path, manifest.to_toml_string())?;
        println!("dispersed; manifest at {}", manifest_path.display());
        if container.header.original_len > 0 {
            println!(
                "  trusted-local footprint {:.2}%  total footprint {:.2}%",
                100.0 * local_storage_footprint(&manifest)?,
                100.0 * total_storage_footprint(&manifest)?
            );
        }
        for record in &manifest.streams {
            println!(
                "  stream {} -> {} ({} bytes, blob {})",
                record.stream,
                record.target,
                record.byte_len,
                &record.blob_id[..16]
            );
        }
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

fn looks_like_container(path: &Path) -> Result<bool, Error> {
    let mut magic = [0u8; 4];
    let mut f = std::fs::File::open(path)?;
    match f.read_exact(&mut magic) {
        Ok(()) => Ok(&magic == b"SEFR"),
        Err(_) => Ok(false),
    }
}

fn cmd_restore(
    source: &Path,
    key_file: Option<&Path>,
    workers: usize,
    out: Option<PathBuf>,
) -> Result<(), Error> {
    let key = load_key(key_file)?;
    let out_path = out.unwrap_or_else(|| with_suffix(source, "restored"));

    let report = if looks_like_container(source)? {
        let mut container_file = std::fs::File::open(source)?;
        let header = {
            let mut f = std::fs::File::open(source)?;
            sefrag::container::ContainerHeader::decode(&mut f)?
        };
        match header.scheme {
            SchemeId::Dwt2L2 => {
                let writer = BufWriter::new(std::fs::File::create(&out_path)?);
                restore_stream(&key, &mut container_file, writer, workers)?
            }
            _ => {
                let container = ProtectedContainer::read_from(&mut container_file)?;
                let image = sefrag::pipeline::restore_bitmap(&key, &container, workers)?;
                let mut writer = BufWriter::new(std::fs::File::create(&out_path)?);
                sefrag::bmp::encode(&image, &mut writer)?;
                writer.flush()?;
                sefrag::pipeline::RestoreReport::default()
            }
        }
    } else {
        let text = std::fs::read_to_string(source)?;
        let manifest = DispersalManifest::from_toml_str(&text)?;
        let targets = manifest.targets(std::env::var("SEFRAG_BLOB_TOKEN").ok())?;
        let writer = BufWriter::new(std::fs::File::create(&out_path)?);
        let fetch = fetch_and_restore(&key, &manifest, &targets, writer, workers)?;
        for issue in &fetch.stream_issues {
            match issue.located_block {
                Some(addr) => eprintln!(
                    "warning: stream {} damaged at rest; block (chunk {}, row {}, col {})",
                    issue.stream.label(),
                    addr.chunk_index,
                    addr.block_row,
                    addr.block_col
                ),
                None => eprintln!(
                    "warning: stream {} damaged at rest (not localized to one block)",
                    issue.stream.label()
                ),
            }
        }
        fetch.restore
    };

    println!("restored -> {}", out_path.display());
    if !report.corrupted.is_empty() {
        for c in &report.corrupted {
            eprintln!(
                "corrupt block: chunk {} row {} col {} ({})",
                c.address.chunk_index, c.address.block_row, c.address.block_col, c.detail
            );
        }
        return Err(Error::Integrity(format!(
            "{} corrupted block(s); remaining data restored to {}",
            report.corrupted.len(),
            out_path.display()
        )));
    }
    Ok(())
}

fn cmd_analyze(
    original: &Path,
    protected: &Path,
    out_prefix: Option<PathBuf>,
    pairs: usize,
    seed: u64,
    dumps: bool,
) -> Result<(), Error> {
    let original_bytes = std::fs::read(original)?;
    // For containers, the measured object is the masked public fragment pool.
    let protected_bytes = if looks_like_container(protected)? {
        let container = ProtectedContainer::read_from(&mut std::fs::File::open(protected)?)?;
        if container.header.scheme == SchemeId::DctL1 {
            eprintln!(
                "note: level-1 public fragments are stored plain (visual disguise only); \
                 these metrics describe an unmasked stream and claim no confidentiality"
            );
        }
        sefrag::pipeline::public_fragment_pool(&container)
    } else {
        std::fs::read(protected)?
    };

    // Image mode when the original is a decodable bitmap: the first plane
    // defines the dimensions, and the fragment pool is viewed at that size.
    let mut config = BatteryConfig {
        pairs,
        seed,
        image: None,
    };
    let mut original_view = original_bytes.clone();
    if let Ok(image) = sefrag::bmp::decode(original_bytes.as_slice()) {
        config.image = Some((image.width as usize, image.height as usize));
        original_view = image.planes[0].clone();
    }

    let report = analysis::run_battery(&original_view, &protected_bytes, None, &config)?;
    let text = analysis::report_text(&report);
    print!("{text}");

    if let Some(prefix) = out_prefix {
        let txt_path = prefix.with_extension("txt");
        let csv_path = prefix.with_extension("csv");
        std::fs::write(&txt_path, &text)?;
        std::fs::write(&csv_path, analysis::report_csv(&report))?;
        println!(
            "report -> {} and {}",
            txt_path.display(),
            csv_path.display()
        );
        if dumps {
            let pdf_path = prefix.with_extension("pdf.csv");
            std::fs::write(&pdf_path, analysis::pdf_dump_csv(&protected_bytes)?)?;
            if let Some((w, h)) = config.image {
                let v = analysis::ImageView::new(&protected_bytes, w, h)?;
                let scatter_path = prefix.with_extension("scatter.csv");
                std::fs::write(
                    &scatter_path,
                    analysis::adjacent_pairs_dump_csv(
                        v,
                        analysis::Direction::Horizontal,
                        pairs,
                        seed,
                    )?,
                )?;
            }
            println!("dumps -> {}", pdf_path.display());
        }
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| Error::InvalidInput(format!("bad {what} entry {p:?}")))
        })
        .collect()
}

fn cmd_bench(
    scheme: &str,
    sizes: &str,
    workers: &str,
    reps: usize,
    seed: u64,
    out: Option<PathBuf>,
    stages: bool,
) -> Result<(), Error> {
    let scheme = parse_scheme(scheme)?;
    let sizes: Vec<usize> = parse_list(sizes, "size")?;
    let workers: Vec<usize> = parse_list(workers, "worker count")?;
    let results = bench::bench_protect(scheme, &sizes, &workers, reps, seed)?;
    let csv = bench::results_csv(&results);
    print!("{csv}");
    for r in &results {
        println!(
            "# {} bytes, {} workers: {:.2} MB/s end-to-end vs AES-128 baseline {:.2} MB/s",
            r.input_bytes, r.workers, r.throughput_mbps, r.aes_baseline_mbps
        );
    }
    if let Some(path) = &out {
        std::fs::write(path, &csv)?;
        println!("# csv -> {}", path.display());
    }
    if stages {
        let rows: Result<Vec<Vec<_>>, Error> = [
            Stage::Dwt,
            Stage::Dct,
            Stage::Sha256,
            Stage::Sha512,
            Stage::Aes,
        ]
        .iter()
        .map(|s| {
            sizes
                .iter()
                .map(|size| bench::bench_stage(*s, *size, seed))
                .collect()
        })
        .collect();
        let table = bench::stage_table_csv(&rows?);
        print!("{table}");
        if let Some(path) = &out {
            let stage_path = path.with_extension("stages.csv");
            std::fs::write(&stage_path, &table)?;
            println!("# stage csv -> {}", stage_path.display());
        }
    }
    Ok(())
}
