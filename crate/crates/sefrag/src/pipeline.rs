//! End-to-end orchestration: input -> chunks -> blocks -> protected fragments
//! -> container, and back.
//!
//! The agnostic pipeline streams: the reader fills one chunk while the cipher
//! thread encrypts and writes the previous one, so at most two chunks are
//! resident regardless of input size. Within a chunk, blocks are split into
//! contiguous worker ranges aligned so every per-worker sub-stream starts on
//! a byte boundary; results are concatenated in block order, which makes the
//! output byte-identical for any worker count.

use std::io::{Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::sync::mpsc;
use std::time::Instant;

use crate::bitpack::{BitSink, BitSource, FragA, FragB, FragC, DCT_FIELD_BITS, FRAG_B_BITS};
use crate::bmp::BmpImage;
use crate::cipher::{decrypt_stream, ChunkNonce, CipherSession};
use crate::container::{ContainerHeader, ProtectedContainer, StreamId};
use crate::dct::SelectedCoeffSet;
use crate::dwt::{dwt2_two_level_forward, dwt2_two_level_inverse};
use crate::error::{Error, Result};
use crate::model::{
    extract_block, place_block, BlockAddress, PixelBlock, SchemeId, SecretKey, BLOCK_PIXELS,
    BLOCK_SIDE,
};
use crate::protect_dct::{
    protect_dct_level1, protect_dct_level2, unprotect_dct, DctBlockArtifact, DctLevel,
};
use crate::protect_dwt::unprotect_block;

/// Blocks processed per stage pass; bounds per-worker intermediates.
const BATCH_BLOCKS: usize = 512;

/// What to protect and how.
#[derive(Debug, Clone)]
pub struct ProtectJob {
    pub scheme: SchemeId,
    pub chunk_side: u32,
    pub key: SecretKey,
    pub workers: usize,
    pub sel: SelectedCoeffSet,
}

impl ProtectJob {
    pub fn new(scheme: SchemeId, key: SecretKey) -> Self {
        Self {
            scheme,
            chunk_side: 1024,
            key,
            workers: 1,
            sel: SelectedCoeffSet::recommended(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::InvalidInput("worker count must be >= 1".into()));
        }
        if self.chunk_side < 8 || self.chunk_side % 8 != 0 {
            return Err(Error::InvalidInput(format!(
                "chunk side must be a multiple of 8 and >= 8, got {}",
                self.chunk_side
            )));
        }
        Ok(())
    }
}

/// Accumulated per-stage wall time. For multi-worker runs the block stages
/// are the per-thread totals divided by the worker count, i.e. the wall-time
/// attribution under even load.
#[derive(Debug, Default, Clone, Copy)]
pub struct StageNanos {
    pub transform: u64,
    pub pack: u64,
    pub mask: u64,
    pub cipher: u64,
}

impl StageNanos {
    fn add(&mut self, other: &StageNanos) {
        self.transform += other.transform;
        self.pack += other.pack;
        self.mask += other.mask;
        self.cipher += other.cipher;
    }

    fn scale_block_stages(&mut self, workers: usize) {
        let w = workers.max(1) as u64;
        self.transform /= w;
        self.pack /= w;
        self.mask /= w;
    }

    pub fn block_stage_total(&self) -> u64 {
        self.transform + self.pack + self.mask
    }
}

#[derive(Debug, Clone)]
pub struct ProtectSummary {
    pub header: ContainerHeader,
    pub bytes_in: u64,
    pub container_bytes: u64,
    pub wall_nanos: u64,
    pub stages: StageNanos,
}

/// A block that failed range validation on restore; its 64 bytes were
/// replaced with mid-gray filler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptBlock {
    pub address: BlockAddress,
    pub detail: String,
}

#[derive(Debug, Default, Clone)]
pub struct RestoreReport {
    pub corrupted: Vec<CorruptBlock>,
    pub bytes_written: u64,
}

/// Contiguous block ranges, one per worker, each starting at a multiple of
/// `align` blocks so per-worker bit streams begin on byte boundaries.
fn partition_aligned(total: usize, workers: usize, align: usize) -> Vec<Range<usize>> {
    if total == 0 {
        return Vec::new();
    }
    let workers = workers.max(1);
    let per = total.div_ceil(workers).div_ceil(align) * align;
    let mut out = Vec::new();
    let mut start = 0;
    while start < total {
        let end = (start + per).min(total);
        out.push(start..end);
        start = end;
    }
    out
}

struct ChunkArtifacts {
    index: u64,
    a_plain: Vec<u8>,
    b_masked: Vec<u8>,
    c_masked: Vec<u8>,
    stages: StageNanos,
}

/// Transform, pack and mask every block of one chunk. Pure function of
/// (key, chunk index, bytes); worker count only affects wall time.
fn protect_chunk(
    key: &SecretKey,
    chunk_index: u64,
    bytes: &[u8],
    side: usize,
    workers: usize,
) -> Result<ChunkArtifacts> {
    let per_side = side / BLOCK_SIDE;
    let total_blocks = per_side * per_side;
    let ranges = partition_aligned(total_blocks, workers, 2);

    let results: Vec<Result<(Vec<u8>, Vec<u8>, Vec<u8>, StageNanos)>> =
        run_on_workers(&ranges, |range| {
            let mut a = Vec::with_capacity((range.end - range.start) * 5);
            let mut b = BitSink::with_capacity_bits((range.end - range.start) * FRAG_B_BITS);
            let mut c = Vec::with_capacity((range.end - range.start) * 60);
            let mut stages = StageNanos::default();
            let mut batch_coeffs = Vec::with_capacity(BATCH_BLOCKS);
            let mut batch_frags = Vec::with_capacity(BATCH_BLOCKS);
            let mut start = range.start;
            while start < range.end {
                let end = (start + BATCH_BLOCKS).min(range.end);
                batch_coeffs.clear();
                batch_frags.clear();

                let t = Instant::now();
                for idx in start..end {
                    let block = extract_block(bytes, side, idx / per_side, idx % per_side);
                    batch_coeffs.push(dwt2_two_level_forward(&block)?);
                }
                stages.transform += t.elapsed().as_nanos() as u64;

                let t = Instant::now();
                for coeffs in &batch_coeffs {
                    batch_frags.push(crate::bitpack::pack_dwt_block(coeffs)?);
                }
                stages.pack += t.elapsed().as_nanos() as u64;

                let t = Instant::now();
                for (i, (fa, fb, fc)) in batch_frags.iter().enumerate() {
                    let idx = start + i;
                    let addr = BlockAddress::new(
                        chunk_index,
                        (idx / per_side) as u32,
                        (idx % per_side) as u32,
                    );
                    let kb = crate::protect_dwt::derive_keystream_b(key, addr, *fa);
                    let b_masked = *fb ^ kb;
                    let kc = crate::protect_dwt::derive_keystream_c(key, addr, b_masked);
                    let c_masked = *fc ^ kc;
                    a.extend_from_slice(&fa.to_bytes());
                    b.write_bits_u128(b_masked.0, FRAG_B_BITS);
                    c.extend_from_slice(&c_masked.0);
                }
                stages.mask += t.elapsed().as_nanos() as u64;

                start = end;
            }
            Ok((a, b.into_bytes(), c, stages))
        });

    let mut a_plain = Vec::with_capacity(total_blocks * 5);
    let mut b_masked = Vec::with_capacity((total_blocks * FRAG_B_BITS).div_ceil(8));
    let mut c_masked = Vec::with_capacity(total_blocks * 60);
    let mut stages = StageNanos::default();
    for r in results {
        let (a, b, c, s) = r?;
        a_plain.extend_from_slice(&a);
        b_masked.extend_from_slice(&b);
        c_masked.extend_from_slice(&c);
        stages.add(&s);
    }
    stages.scale_block_stages(workers);
    Ok(ChunkArtifacts {
        index: chunk_index,
        a_plain,
        b_masked,
        c_masked,
        stages,
    })
}

/// Run one closure per range on scoped worker threads (inline when a single
/// range). Results come back in range order.
fn run_on_workers<T: Send>(
    ranges: &[Range<usize>],
    work: impl Fn(Range<usize>) -> T + Sync,
) -> Vec<T> {
    if ranges.len() <= 1 {
        return ranges.iter().cloned().map(work).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .iter()
            .cloned()
            .map(|range| scope.spawn(|| work(range)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

/// Protect an agnostic byte stream into a container written at `out`.
///
/// `input_len` must be the exact stream length; it is recorded in the header
/// and determines every section offset up front, which is what lets the
/// writer stream chunk by chunk.
pub fn protect_stream<R: Read, W: Write + Seek + Send>(
    job: &ProtectJob,
    mut input: R,
    input_len: u64,
    mut out: W,
    progress: Option<&(dyn Fn(u64, u64) + Sync)>,
) -> Result<ProtectSummary> {
    job.validate()?;
    if job.scheme != SchemeId::Dwt2L2 {
        return Err(Error::InvalidInput(
            "bitmap schemes protect images; use protect_bitmap".into(),
        ));
    }
    let started = Instant::now();
    let side = job.chunk_side as usize;
    let chunk_bytes = side * side;
    let chunk_count = input_len.div_ceil(chunk_bytes as u64);
    let header = ContainerHeader::agnostic(job.scheme, job.chunk_side, input_len, chunk_count);
    let header_bytes = header.encode();

    let off_a = header.stream_offset(StreamId::A);
    let off_b = header.stream_offset(StreamId::B);
    let off_c = header.stream_offset(StreamId::C);
    let per_a = header.unit_stream_bytes(StreamId::A);
    let per_b = header.unit_stream_bytes(StreamId::B);
    let per_c = header.unit_stream_bytes(StreamId::C);

    out.seek(SeekFrom::Start(0))?;
    out.write_all(&header_bytes)?;

    let mut stages = StageNanos::default();
    if chunk_count > 0 {
        // Hand the writer to the cipher stage; bound the queue at one chunk
        // so reader + cipher hold at most two.
        let (tx, rx) = mpsc::sync_channel::<ChunkArtifacts>(1);
        let key = job.key.clone();
        let cipher_stages: Result<StageNanos> = std::thread::scope(|scope| {
            let writer_handle = scope.spawn(move || -> Result<StageNanos> {
                let mut session = CipherSession::new(key);
                let mut nanos = StageNanos::default();
                while let Ok(chunk) = rx.recv() {
                    let t = Instant::now();
                    let a_cipher = session.encrypt_stream(
                        ChunkNonce::from_chunk_index(chunk.index),
                        &chunk.a_plain,
                    )?;
                    nanos.cipher += t.elapsed().as_nanos() as u64;
                    debug_assert_eq!(a_cipher.len() as u64, per_a);
                    debug_assert_eq!(chunk.b_masked.len() as u64, per_b);
                    debug_assert_eq!(chunk.c_masked.len() as u64, per_c);
                    out.seek(SeekFrom::Start(off_a + chunk.index * per_a))?;
                    out.write_all(&a_cipher)?;
                    out.seek(SeekFrom::Start(off_b + chunk.index * per_b))?;
                    out.write_all(&chunk.b_masked)?;
                    out.seek(SeekFrom::Start(off_c + chunk.index * per_c))?;
                    out.write_all(&chunk.c_masked)?;
                    nanos.add(&chunk.stages);
                    if let Some(cb) = progress {
                        cb(chunk.index + 1, chunk_count);
                    }
                }
                Ok(nanos)
            });

            let mut feed = || -> Result<()> {
                let mut buf = vec![0u8; chunk_bytes];
                let mut remaining = input_len;
                for chunk_index in 0..chunk_count {
                    let want = remaining.min(chunk_bytes as u64) as usize;
                    buf[want..].fill(0);
                    read_exact_at(&mut input, &mut buf[..want], input_len - remaining)?;
                    remaining -= want as u64;
                    let artifacts = protect_chunk(&job.key, chunk_index, &buf, side, job.workers)?;
                    if tx.send(artifacts).is_err() {
                        break; // writer bailed; its error surfaces below
                    }
                }
                Ok(())
            };
            let feed_result = feed();
            drop(tx);
            let writer_result = writer_handle.join().unwrap();
            feed_result?;
            writer_result
        });
        stages = cipher_stages?;
    }

    Ok(ProtectSummary {
        container_bytes: header.container_len(),
        header,
        bytes_in: input_len,
        wall_nanos: started.elapsed().as_nanos() as u64,
        stages,
    })
}

fn read_exact_at(input: &mut impl Read, buf: &mut [u8], offset: u64) -> Result<()> {
    let mut done = 0;
    while done < buf.len() {
        match input.read(&mut buf[done..]) {
            Ok(0) => {
                return Err(Error::io_at(
                    std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "input ended early"),
                    offset + done as u64,
                ))
            }
            Ok(n) => done += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io_at(e, offset + done as u64)),
        }
    }
    Ok(())
}

/// Restore the original bytes from an agnostic container.
///
/// Blocks whose coefficients fail range validation are replaced with mid-gray
/// filler and reported; every other block is still restored.
pub fn restore_stream<R: Read + Seek, W: Write>(
    key: &SecretKey,
    mut container: R,
    mut out: W,
    workers: usize,
) -> Result<RestoreReport> {
    container.seek(SeekFrom::Start(0))?;
    let header = ContainerHeader::decode(&mut container)?;
    if header.scheme != SchemeId::Dwt2L2 {
        return Err(Error::InvalidInput(
            "bitmap container; use restore_bitmap".into(),
        ));
    }
    let end = container.seek(SeekFrom::End(0))?;
    if end != header.container_len() {
        return Err(Error::Format(format!(
            "container is {end} bytes, header declares {}",
            header.container_len()
        )));
    }
    let side = header.chunk_side as usize;
    let per_side = side / BLOCK_SIDE;
    let total_blocks = (per_side * per_side) as usize;
    let per_a = header.unit_stream_bytes(StreamId::A);
    let per_b = header.unit_stream_bytes(StreamId::B);
    let per_c = header.unit_stream_bytes(StreamId::C);
    let off_a = header.stream_offset(StreamId::A);
    let off_b = header.stream_offset(StreamId::B);
    let off_c = header.stream_offset(StreamId::C);

    let mut report = RestoreReport::default();
    let mut remaining = header.original_len;
    let mut a_buf = vec![0u8; per_a as usize];
    let mut b_buf = vec![0u8; per_b as usize];
    let mut c_buf = vec![0u8; per_c as usize];
    let mut chunk = vec![0u8; side * side];

    for chunk_index in 0..header.unit_count {
        read_section(&mut container, off_a + chunk_index * per_a, &mut a_buf)?;
        read_section(&mut container, off_b + chunk_index * per_b, &mut b_buf)?;
        read_section(&mut container, off_c + chunk_index * per_c, &mut c_buf)?;
        let a_plain = decrypt_stream(key, ChunkNonce::from_chunk_index(chunk_index), &a_buf);

        let ranges = partition_aligned(total_blocks, workers, 2);
        let results: Vec<(Vec<u8>, Vec<CorruptBlock>)> = run_on_workers(&ranges, |range| {
            let mut bytes = vec![0u8; (range.end - range.start) * BLOCK_PIXELS];
            let mut corrupted = Vec::new();
            let mut b_src = BitSource::at_bit(&b_buf, range.start * FRAG_B_BITS);
            for idx in range.clone() {
                let address = BlockAddress::new(
                    chunk_index,
                    (idx / per_side) as u32,
                    (idx % per_side) as u32,
                );
                let fa = FragA::from_bytes(a_plain[idx * 5..idx * 5 + 5].try_into().unwrap());
                let fb = FragB(b_src.read_bits_u128(FRAG_B_BITS).expect("sized by header"));
                let fc = FragC(c_buf[idx * 60..idx * 60 + 60].try_into().unwrap());
                let coeffs = unprotect_block(key, address, fa, fb, fc);
                let local = idx - range.start;
                match dwt2_two_level_inverse(&coeffs) {
                    Ok(block) => {
                        for (r, row) in block.values.iter().enumerate() {
                            let off = local * BLOCK_PIXELS + r * BLOCK_SIDE;
                            bytes[off..off + BLOCK_SIDE].copy_from_slice(row);
                        }
                    }
                    Err(e) => {
                        bytes[local * BLOCK_PIXELS..(local + 1) * BLOCK_PIXELS].fill(128);
                        corrupted.push(CorruptBlock {
                            address,
                            detail: e.to_string(),
                        });
                    }
                }
            }
            (bytes, corrupted)
        });

        let mut cursor = 0usize;
        for (bytes, corrupted) in results {
            for local in 0..bytes.len() / BLOCK_PIXELS {
                let idx = cursor + local;
                let block_bytes = &bytes[local * BLOCK_PIXELS..(local + 1) * BLOCK_PIXELS];
                let mut block = PixelBlock::constant(0);
                for r in 0..BLOCK_SIDE {
                    block.values[r]
                        .copy_from_slice(&block_bytes[r * BLOCK_SIDE..(r + 1) * BLOCK_SIDE]);
                }
                place_block(&mut chunk, side, idx / per_side, idx % per_side, &block);
            }
            cursor += bytes.len() / BLOCK_PIXELS;
            report.corrupted.extend(corrupted);
        }

        let take = remaining.min((side * side) as u64) as usize;
        out.write_all(&chunk[..take])?;
        report.bytes_written += take as u64;
        remaining -= take as u64;
    }
    Ok(report)
}

fn read_section(reader: &mut (impl Read + Seek), offset: u64, buf: &mut [u8]) -> Result<()> {
    reader.seek(SeekFrom::Start(offset))?;
    reader
        .read_exact(buf)
        .map_err(|e| Error::io_at(e, offset))?;
    Ok(())
}

/// Convenience: protect a byte slice into an in-memory container.
pub fn protect_bytes(
    job: &ProtectJob,
    input: &[u8],
) -> Result<(ProtectedContainer, ProtectSummary)> {
    let mut out = std::io::Cursor::new(Vec::new());
    let summary = protect_stream(job, input, input.len() as u64, &mut out, None)?;
    let container = ProtectedContainer::from_bytes(out.get_ref())?;
    Ok((container, summary))
}

/// Convenience: restore a container from bytes.
pub fn restore_bytes(
    key: &SecretKey,
    container: &[u8],
    workers: usize,
) -> Result<(Vec<u8>, RestoreReport)> {
    let mut out = Vec::new();
    let report = restore_stream(key, std::io::Cursor::new(container), &mut out, workers)?;
    Ok((out, report))
}

// ---------------------------------------------------------------------------
// Bitmap (DCT) pipeline
// ---------------------------------------------------------------------------

/// Protect a decoded bitmap with one of the DCT schemes. Each plane is a
/// cipher unit (its own nonce); blocks are row-major within a plane.
pub fn protect_bitmap(
    job: &ProtectJob,
    image: &BmpImage,
    original_len: u64,
) -> Result<(ProtectedContainer, ProtectSummary)> {
    job.validate()?;
    let level = match job.scheme {
        SchemeId::DctL1 => DctLevel::Level1,
        SchemeId::DctL2 => DctLevel::Level2,
        SchemeId::Dwt2L2 => {
            return Err(Error::InvalidInput(
                "agnostic scheme; use protect_stream".into(),
            ))
        }
    };
    if image.width % 8 != 0 || image.height % 8 != 0 {
        return Err(Error::InvalidInput(format!(
            "bitmap dimensions {}x{} must be multiples of 8",
            image.width, image.height
        )));
    }
    let started = Instant::now();
    let header = ContainerHeader::bitmap(
        job.scheme,
        image.width,
        image.height,
        image.planes.len() as u8,
        original_len,
        job.sel.clone(),
    );
    let blocks_w = image.width as usize / 8;
    let blocks_per_plane = header.blocks_per_unit() as usize;
    let priv_bits = DCT_FIELD_BITS * job.sel.len();

    let mut a_stream = Vec::new();
    let mut b_stream = Vec::new();
    let mut stages = StageNanos::default();
    let mut session = CipherSession::new(job.key.clone());
    for (plane_idx, plane) in image.planes.iter().enumerate() {
        let ranges = partition_aligned(blocks_per_plane, job.workers, 8);
        let results: Vec<Result<(Vec<u8>, Vec<u8>, StageNanos)>> =
            run_on_workers(&ranges, |range| {
                let mut priv_sink =
                    BitSink::with_capacity_bits((range.end - range.start) * priv_bits);
                let mut pub_bytes = Vec::with_capacity((range.end - range.start) * BLOCK_PIXELS);
                let mut nanos = StageNanos::default();
                for idx in range {
                    let address = BlockAddress::new(
                        plane_idx as u64,
                        (idx / blocks_w) as u32,
                        (idx % blocks_w) as u32,
                    );
                    let block =
                        extract_block(plane, image.width as usize, idx / blocks_w, idx % blocks_w);
                    let t = Instant::now();
                    let artifact = match level {
                        DctLevel::Level1 => protect_dct_level1(&block, &job.sel)?,
                        DctLevel::Level2 => {
                            protect_dct_level2(&job.key, address, &block, &job.sel)?
                        }
                    };
                    nanos.transform += t.elapsed().as_nanos() as u64;
                    priv_sink.write_bits_u128(artifact.priv_plain.bits(), priv_bits);
                    pub_bytes.extend_from_slice(&artifact.public64);
                }
                Ok((priv_sink.into_bytes(), pub_bytes, nanos))
            });
        let mut plane_priv = Vec::new();
        for r in results {
            let (p, b, s) = r?;
            plane_priv.extend_from_slice(&p);
            b_stream.extend_from_slice(&b);
            stages.add(&s);
        }
        let t = Instant::now();
        let enc =
            session.encrypt_stream(ChunkNonce::from_chunk_index(plane_idx as u64), &plane_priv)?;
        stages.cipher += t.elapsed().as_nanos() as u64;
        a_stream.extend_from_slice(&enc);
    }
    stages.scale_block_stages(job.workers);
    debug_assert_eq!(a_stream.len() as u64, header.stream_len(StreamId::A));
    debug_assert_eq!(b_stream.len() as u64, header.stream_len(StreamId::B));
    let summary = ProtectSummary {
        bytes_in: image.planes.len() as u64 * (image.width * image.height) as u64,
        container_bytes: header.container_len(),
        wall_nanos: started.elapsed().as_nanos() as u64,
        stages,
        header: header.clone(),
    };
    Ok((
        ProtectedContainer {
            header,
            streams: vec![a_stream, b_stream],
        },
        summary,
    ))
}

/// Rebuild the bitmap from a DCT container. Reconstruction is bounded-loss,
/// not exact; see the split/rebuild rounding notes.
pub fn restore_bitmap(
    key: &SecretKey,
    container: &ProtectedContainer,
    workers: usize,
) -> Result<BmpImage> {
    let header = &container.header;
    let level = match header.scheme {
        SchemeId::DctL1 => DctLevel::Level1,
        SchemeId::DctL2 => DctLevel::Level2,
        SchemeId::Dwt2L2 => {
            return Err(Error::InvalidInput(
                "agnostic container; use restore_stream".into(),
            ))
        }
    };
    let sel = header.sel.as_ref().expect("validated bitmap header");
    let blocks_w = header.image_width as usize / 8;
    let blocks_per_plane = header.blocks_per_unit() as usize;
    let priv_bits = DCT_FIELD_BITS * sel.len();
    let per_a = header.unit_stream_bytes(StreamId::A) as usize;
    let per_b = header.unit_stream_bytes(StreamId::B) as usize;
    let a_stream = container.stream(StreamId::A)?;
    let b_stream = container.stream(StreamId::B)?;

    let mut planes = Vec::new();
    for plane_idx in 0..header.plane_count as usize {
        let a_plain = decrypt_stream(
            key,
            ChunkNonce::from_chunk_index(plane_idx as u64),
            &a_stream[plane_idx * per_a..(plane_idx + 1) * per_a],
        );
        let pub_slice = &b_stream[plane_idx * per_b..(plane_idx + 1) * per_b];
        let mut plane = vec![0u8; (header.image_width * header.image_height) as usize];
        let ranges = partition_aligned(blocks_per_plane, workers, 8);
        let results: Vec<Vec<u8>> = run_on_workers(&ranges, |range| {
            let mut out = vec![0u8; (range.end - range.start) * BLOCK_PIXELS];
            let mut src = BitSource::at_bit(&a_plain, range.start * priv_bits);
            for idx in range.clone() {
                let address = BlockAddress::new(
                    plane_idx as u64,
                    (idx / blocks_w) as u32,
                    (idx % blocks_w) as u32,
                );
                let bits = src.read_bits_u128(priv_bits).expect("sized by header");
                let artifact = DctBlockArtifact {
                    priv_plain: crate::bitpack::dct_private_from_bits(bits, sel.len()),
                    public64: pub_slice[idx * BLOCK_PIXELS..(idx + 1) * BLOCK_PIXELS]
                        .try_into()
                        .unwrap(),
                    level,
                };
                let block = unprotect_dct(key, address, &artifact, sel);
                let local = idx - range.start;
                for (r, row) in block.values.iter().enumerate() {
                    let off = local * BLOCK_PIXELS + r * BLOCK_SIDE;
                    out[off..off + BLOCK_SIDE].copy_from_slice(row);
                }
            }
            out
        });
        let mut cursor = 0usize;
        for bytes in results {
            for local in 0..bytes.len() / BLOCK_PIXELS {
                let idx = cursor + local;
                let mut block = PixelBlock::constant(0);
                for r in 0..BLOCK_SIDE {
                    block.values[r].copy_from_slice(
                        &bytes[local * BLOCK_PIXELS + r * BLOCK_SIDE
                            ..local * BLOCK_PIXELS + (r + 1) * BLOCK_SIDE],
                    );
                }
                place_block(
                    &mut plane,
                    header.image_width as usize,
                    idx / blocks_w,
                    idx % blocks_w,
                    &block,
                );
            }
            cursor += bytes.len() / BLOCK_PIXELS;
        }
        planes.push(plane);
    }
    Ok(BmpImage {
        width: header.image_width,
        height: header.image_height,
        planes,
    })
}

/// Concatenated masked public streams of a container; the pool the
/// statistical battery runs against.
pub fn public_fragment_pool(container: &ProtectedContainer) -> Vec<u8> {
    let mut pool = Vec::new();
    for id in [StreamId::B, StreamId::C] {
        if container.header.stream_ids().contains(&id) {
            pool.extend_from_slice(container.stream(id).expect("listed stream"));
        }
    }
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn key() -> SecretKey {
        SecretKey::new(*b"0123456789abcdef")
    }

    #[test]
    fn empty_input_round_trips() {
        let job = ProtectJob::new(SchemeId::Dwt2L2, key());
        let (container, summary) = protect_bytes(&job, &[]).unwrap();
        assert_eq!(summary.header.unit_count, 0);
        assert_eq!(container.streams.iter().map(Vec::len).sum::<usize>(), 0);
        let (bytes, report) = restore_bytes(&key(), &container.to_bytes(), 1).unwrap();
        assert!(bytes.is_empty());
        assert!(report.corrupted.is_empty());
    }

    #[test]
    fn small_inputs_round_trip_exactly() {
        let mut job = ProtectJob::new(SchemeId::Dwt2L2, key());
        job.chunk_side = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for len in [1usize, 63, 4096, 4097, 8192, 10_000] {
            let input: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let (container, _) = protect_bytes(&job, &input).unwrap();
            let (bytes, report) = restore_bytes(&key(), &container.to_bytes(), 1).unwrap();
            assert_eq!(bytes, input, "length {len}");
            assert!(report.corrupted.is_empty());
        }
    }

    #[test]
    fn single_block_chunks_round_trip() {
        // Side 8 means one block per chunk, hitting the odd-count padding of
        // the 124-bit stream on every chunk boundary.
        let mut job = ProtectJob::new(SchemeId::Dwt2L2, key());
        job.chunk_side = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for len in [1usize, 64, 65, 640] {
            let input: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let (container, _) = protect_bytes(&job, &input).unwrap();
            assert_eq!(
                container.stream(StreamId::B).unwrap().len() as u64,
                16 * container.header.unit_count
            );
            let (bytes, report) = restore_bytes(&key(), &container.to_bytes(), 2).unwrap();
            assert_eq!(bytes, input, "length {len}");
            assert!(report.corrupted.is_empty());
        }
    }

    #[test]
    fn output_is_identical_across_worker_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let input: Vec<u8> = (0..300_000).map(|_| rng.gen()).collect();
        let mut reference = None;
        for workers in [1usize, 2, 4, 8] {
            let mut job = ProtectJob::new(SchemeId::Dwt2L2, key());
            job.chunk_side = 256;
            job.workers = workers;
            let (container, _) = protect_bytes(&job, &input).unwrap();
            let bytes = container.to_bytes();
            match &reference {
                None => reference = Some(bytes),
                Some(r) => assert_eq!(r, &bytes, "workers={workers}"),
            }
        }
    }

    #[test]
    fn fragment_stream_sizes_match_layout_arithmetic() {
        let job = ProtectJob::new(SchemeId::Dwt2L2, key());
        let input = vec![7u8; 1 << 20];
        let (container, _) = protect_bytes(&job, &input).unwrap();
        assert_eq!(container.stream(StreamId::A).unwrap().len(), 81920);
        assert_eq!(container.stream(StreamId::B).unwrap().len(), 253952);
        assert_eq!(container.stream(StreamId::C).unwrap().len(), 983040);
    }

    #[test]
    fn wrong_key_fails_to_restore_content() {
        let job = ProtectJob::new(SchemeId::Dwt2L2, key());
        let input = b"attack at dawn, bring 8x8 blocks".repeat(100);
        let (container, _) = protect_bytes(&job, &input).unwrap();
        let wrong = SecretKey::new([0xFF; 16]);
        let (bytes, _) = restore_bytes(&wrong, &container.to_bytes(), 1).unwrap();
        assert_ne!(bytes, input);
    }

    #[test]
    fn tampered_c_stream_confines_damage_to_one_block() {
        let mut job = ProtectJob::new(SchemeId::Dwt2L2, key());
        job.chunk_side = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let input: Vec<u8> = (0..64 * 64).map(|_| rng.gen()).collect();
        let (container, _) = protect_bytes(&job, &input).unwrap();
        let mut bytes = container.to_bytes();
        // Flip one bit inside block 5 of stream C.
        let off = container.header.stream_offset(StreamId::C) as usize + 5 * 60 + 3;
        bytes[off] ^= 0x08;
        let (restored, _report) = restore_bytes(&key(), &bytes, 1).unwrap();
        let mut diff_blocks = std::collections::HashSet::new();
        for (i, (a, b)) in input.iter().zip(&restored).enumerate() {
            if a != b {
                let row = (i / 64) / 8;
                let col = (i % 64) / 8;
                diff_blocks.insert((row, col));
            }
        }
        assert!(diff_blocks.len() <= 1, "corruption spread: {diff_blocks:?}");
        assert_eq!(diff_blocks.into_iter().next(), Some((0, 5)));
    }

    #[test]
    fn dct_bitmap_round_trip_quality() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let w = 64u32;
        let h = 64u32;
        // Smooth plane with mild noise.
        let plane: Vec<u8> = (0..w * h)
            .map(|i| {
                let x = (i % w) as f64;
                let y = (i / w) as f64;
                let v =
                    128.0 + 60.0 * ((x / 19.0).sin() * (y / 23.0).cos()) + rng.gen_range(-4.0..4.0);
                v.clamp(0.0, 255.0) as u8
            })
            .collect();
        let image = BmpImage::gray(w, h, plane).unwrap();
        for scheme in [SchemeId::DctL1, SchemeId::DctL2] {
            let mut job = ProtectJob::new(scheme, key());
            job.workers = 2;
            let (container, _) = protect_bitmap(&job, &image, 0).unwrap();
            let restored = restore_bitmap(&key(), &container, 2).unwrap();
            assert_eq!(restored.width, w);
            let mse: f64 = image.planes[0]
                .iter()
                .zip(&restored.planes[0])
                .map(|(a, b)| {
                    let d = *a as f64 - *b as f64;
                    d * d
                })
                .sum::<f64>()
                / (w * h) as f64;
            let psnr = 10.0 * (255.0f64 * 255.0 / mse).log10();
            assert!(psnr >= 60.0, "{scheme:?} psnr {psnr}");
        }
    }

    #[test]
    fn dct_rgb_planes_round_trip_independently() {
        let base = crate::fixtures::natural_image(64, 65).into_data();
        // Three smoothly related color planes.
        let planes: Vec<Vec<u8>> = (0..3u32)
            .map(|p| {
                base.iter()
                    .map(|v| ((*v as u32 * (195 + 20 * p)) / 255) as u8)
                    .collect()
            })
            .collect();
        let image = BmpImage {
            width: 64,
            height: 64,
            planes,
        };
        let job = ProtectJob::new(SchemeId::DctL2, key());
        let (container, _) = protect_bitmap(&job, &image, 0).unwrap();
        assert_eq!(container.header.plane_count, 3);
        let restored = restore_bitmap(&key(), &container, 2).unwrap();
        for (p, (orig, back)) in image.planes.iter().zip(&restored.planes).enumerate() {
            let mse: f64 = orig
                .iter()
                .zip(back)
                .map(|(a, b)| {
                    let d = *a as f64 - *b as f64;
                    d * d
                })
                .sum::<f64>()
                / orig.len() as f64;
            let psnr = 10.0 * (255.0f64 * 255.0 / mse).log10();
            assert!(psnr >= 50.0, "plane {p} psnr {psnr}");
        }
    }

    #[test]
    fn dct_container_streams_sized_correctly() {
        let image = BmpImage::gray(64, 32, vec![100; 64 * 32]).unwrap();
        let job = ProtectJob::new(SchemeId::DctL2, key());
        let (container, _) = protect_bitmap(&job, &image, 0).unwrap();
        let blocks = 8 * 4;
        assert_eq!(
            container.stream(StreamId::A).unwrap().len(),
            (blocks * 66usize).div_ceil(8)
        );
        assert_eq!(container.stream(StreamId::B).unwrap().len(), blocks * 64);
    }

    #[test]
    fn progress_reports_every_chunk() {
        use std::sync::atomic::{AtomicU64, Ordering};
        let mut job = ProtectJob::new(SchemeId::Dwt2L2, key());
        job.chunk_side = 64;
        let input = vec![3u8; 64 * 64 * 5 + 100];
        let calls = AtomicU64::new(0);
        let last = AtomicU64::new(0);
        let cb = |done: u64, total: u64| {
            assert_eq!(total, 6);
            calls.fetch_add(1, Ordering::SeqCst);
            last.store(done, Ordering::SeqCst);
        };
        let mut sink = std::io::Cursor::new(Vec::new());
        protect_stream(
            &job,
            input.as_slice(),
            input.len() as u64,
            &mut sink,
            Some(&cb),
        )
        .unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 6);
        assert_eq!(last.load(Ordering::SeqCst), 6);
    }

    #[test]
    fn key_bytes_never_appear_in_container() {
        let secret = SecretKey::new(*b"sixteen byte key");
        let mut job = ProtectJob::new(SchemeId::Dwt2L2, secret.clone());
        job.chunk_side = 64;
        let input = vec![0u8; 8192];
        let (container, _) = protect_bytes(&job, &input).unwrap();
        let bytes = container.to_bytes();
        let needle = secret.bytes();
        let found = bytes.windows(16).any(|w| w == needle);
        assert!(!found, "key bytes leaked into container");
    }
}
