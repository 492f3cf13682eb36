//! Fragment placement across storage targets and the manifest that ties a
//! dispersed container back together.
//!
//! Each fragment stream becomes one content-addressed blob on its target.
//! The manifest records, per stream, the whole-stream digest plus a small set
//! of locator digests: digest `j` covers every block record whose global
//! block index has bit `j` set. For a corruption confined to one block, the
//! set of failing locator digests spells out that block's index exactly, so
//! the restore report can name the block without any per-block overhead.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bitpack::BitSource;
use crate::blob::{content_id, BlobBackend, HttpBlobClient, LocalDirBackend};
use crate::container::{ContainerHeader, ProtectedContainer, StreamId};
use crate::error::{Error, Result};
use crate::model::{BlockAddress, SchemeId, SecretKey};
use crate::pipeline::{restore_stream, CorruptBlock, RestoreReport};

/// Trust classification of a storage target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetRole {
    Trusted,
    Public,
}

/// Where a target lives.
#[derive(Debug, Clone)]
pub enum TargetKind {
    LocalDir(PathBuf),
    RemoteBlob {
        base_url: String,
        token: Option<String>,
    },
}

/// One storage destination.
#[derive(Debug, Clone)]
pub struct StorageTarget {
    pub name: String,
    pub kind: TargetKind,
    pub role: TargetRole,
}

impl StorageTarget {
    pub fn local(name: &str, dir: impl Into<PathBuf>, role: TargetRole) -> Self {
        Self {
            name: name.into(),
            kind: TargetKind::LocalDir(dir.into()),
            role,
        }
    }

    pub fn remote(name: &str, base_url: &str, token: Option<String>, role: TargetRole) -> Self {
        Self {
            name: name.into(),
            kind: TargetKind::RemoteBlob {
                base_url: base_url.into(),
                token,
            },
            role,
        }
    }

    fn backend(&self) -> Result<Box<dyn BlobBackend>> {
        match &self.kind {
            TargetKind::LocalDir(dir) => Ok(Box::new(LocalDirBackend::new(dir.clone()))),
            TargetKind::RemoteBlob { base_url, token } => {
                Ok(Box::new(HttpBlobClient::new(base_url, token.clone())?))
            }
        }
    }

    /// Human-readable location for the manifest; never includes credentials.
    fn location(&self) -> String {
        match &self.kind {
            TargetKind::LocalDir(dir) => format!("dir:{}", dir.display()),
            TargetKind::RemoteBlob { base_url, .. } => base_url.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamRecord {
    pub stream: String,
    pub target: String,
    pub role: TargetRole,
    pub location: String,
    pub blob_id: String,
    pub byte_len: u64,
    /// Locator digests; entry `j` covers block records whose index has bit
    /// `j` set (hex SHA-256).
    pub locator: Vec<String>,
}

/// Everything needed to fetch and reassemble a dispersed container. Contains
/// no key material; the header bytes are public metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersalManifest {
    pub container_id: String,
    pub header_hex: String,
    pub streams: Vec<StreamRecord>,
}

impl DispersalManifest {
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Format(format!("manifest parse error: {e}")))
    }

    pub fn header(&self) -> Result<ContainerHeader> {
        let bytes = hex::decode(&self.header_hex)
            .map_err(|e| Error::Format(format!("manifest header hex: {e}")))?;
        ContainerHeader::decode(&mut bytes.as_slice())
    }

    pub fn record(&self, stream: StreamId) -> Result<&StreamRecord> {
        self.streams
            .iter()
            .find(|r| r.stream == stream.label())
            .ok_or_else(|| Error::Availability(format!("manifest lacks stream {}", stream.label())))
    }

    /// Reconstruct the storage targets from the recorded locations, so a
    /// restore can run from the manifest alone. Bearer tokens are never
    /// stored; remote targets take `token`.
    pub fn targets(&self, token: Option<String>) -> Result<Vec<StorageTarget>> {
        let mut out: Vec<StorageTarget> = Vec::new();
        for record in &self.streams {
            if out.iter().any(|t| t.name == record.target) {
                continue;
            }
            let kind = if let Some(dir) = record.location.strip_prefix("dir:") {
                TargetKind::LocalDir(PathBuf::from(dir))
            } else if record.location.starts_with("http://") {
                TargetKind::RemoteBlob {
                    base_url: record.location.clone(),
                    token: token.clone(),
                }
            } else {
                return Err(Error::Format(format!(
                    "unrecognized target location {:?}",
                    record.location
                )));
            };
            out.push(StorageTarget {
                name: record.target.clone(),
                kind,
                role: record.role,
            });
        }
        Ok(out)
    }
}

/// Bit width of one block record in a stream.
fn record_bits(header: &ContainerHeader, stream: StreamId) -> usize {
    use crate::bitpack::{DCT_FIELD_BITS, FRAG_A_BITS, FRAG_B_BITS, FRAG_C_BITS};
    match (header.scheme, stream) {
        (SchemeId::Dwt2L2, StreamId::A) => FRAG_A_BITS,
        (SchemeId::Dwt2L2, StreamId::B) => FRAG_B_BITS,
        (SchemeId::Dwt2L2, StreamId::C) => FRAG_C_BITS,
        (_, StreamId::A) => DCT_FIELD_BITS * header.sel.as_ref().map_or(0, |s| s.len()),
        (_, _) => 512,
    }
}

/// Canonical zero-padded byte form of block record `global_index`.
fn extract_record(
    header: &ContainerHeader,
    stream: StreamId,
    bytes: &[u8],
    global_index: u64,
) -> Vec<u8> {
    let bits = record_bits(header, stream);
    let per_unit = header.blocks_per_unit();
    let unit = global_index / per_unit;
    let local = (global_index % per_unit) as usize;
    let unit_bytes = header.unit_stream_bytes(stream) as usize;
    let base = unit as usize * unit_bytes;
    let slice = &bytes[base..base + unit_bytes];
    let mut src = BitSource::at_bit(slice, local * bits);
    let mut out = Vec::with_capacity(bits.div_ceil(8));
    let mut remaining = bits;
    let mut sink = crate::bitpack::BitSink::with_capacity_bits(bits);
    while remaining > 0 {
        let take = remaining.min(32);
        sink.write_bits(src.read_bits(take).expect("sized by header"), take);
        remaining -= take;
    }
    out.extend_from_slice(&sink.into_bytes());
    out
}

/// Number of locator digests for `n` blocks: enough bits to spell any value
/// in `1..=n` (groups are keyed by block index + 1, so every block lands in
/// at least one group).
fn locator_count(n: u64) -> usize {
    (u64::BITS - n.leading_zeros()) as usize
}

/// Compute the locator digest set of one stream.
fn locator_digests(header: &ContainerHeader, stream: StreamId, bytes: &[u8]) -> Vec<String> {
    let total = header.blocks_per_unit() * header.unit_count;
    if total == 0 {
        return Vec::new();
    }
    let k = locator_count(total);
    let mut hashers: Vec<Sha256> = (0..k).map(|_| Sha256::new()).collect();
    for idx in 0..total {
        let record = extract_record(header, stream, bytes, idx);
        for (j, h) in hashers.iter_mut().enumerate() {
            if ((idx + 1) >> j) & 1 == 1 {
                h.update(&record);
            }
        }
    }
    hashers
        .into_iter()
        .map(|h| hex::encode(h.finalize()))
        .collect()
}

/// Locate the corrupted block of a stream whose whole digest failed. Exact
/// for single-block corruption; `None` when the failure pattern does not
/// resolve to one block (multi-block damage or padding-only damage).
fn locate_corruption(
    header: &ContainerHeader,
    stream: StreamId,
    bytes: &[u8],
    expected: &[String],
) -> Option<u64> {
    let total = header.blocks_per_unit() * header.unit_count;
    if total == 0 || expected.len() != locator_count(total) {
        return None;
    }
    let actual = locator_digests(header, stream, bytes);
    let mut pattern = 0u64;
    for (j, (a, e)) in actual.iter().zip(expected).enumerate() {
        if a != e {
            pattern |= 1 << j;
        }
    }
    if pattern >= 1 && pattern <= total {
        Some(pattern - 1)
    } else {
        None
    }
}

fn block_address(header: &ContainerHeader, global_index: u64) -> BlockAddress {
    let per_unit = header.blocks_per_unit();
    let unit = global_index / per_unit;
    let local = global_index % per_unit;
    let per_row = match header.scheme {
        SchemeId::Dwt2L2 => header.chunk_side as u64 / 8,
        _ => header.image_width as u64 / 8,
    };
    BlockAddress::new(unit, (local / per_row) as u32, (local % per_row) as u32)
}

fn resolve<'a>(targets: &'a [StorageTarget], name: &str) -> Result<&'a StorageTarget> {
    targets
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::Availability(format!("no storage target named {name:?}")))
}

/// Write each fragment stream of a container to its placed target and return
/// the manifest.
///
/// The private stream may only go to a trusted target; `allow_private_public`
/// is the explicit operator override.
pub fn disperse(
    container: &ProtectedContainer,
    placement: &BTreeMap<StreamId, String>,
    targets: &[StorageTarget],
    allow_private_public: bool,
) -> Result<DispersalManifest> {
    for id in container.header.stream_ids() {
        if !placement.contains_key(id) {
            return Err(Error::InvalidInput(format!(
                "placement missing stream {}",
                id.label()
            )));
        }
    }
    let a_target = resolve(targets, &placement[&StreamId::A])?;
    if a_target.role != TargetRole::Trusted && !allow_private_public {
        return Err(Error::Policy(format!(
            "refusing to place private fragment on public target {:?} without an explicit override",
            a_target.name
        )));
    }

    let container_bytes = container.to_bytes();
    // Uploads run concurrently, one thread per stream; the manifest is
    // assembled after all transfers settle.
    let records: Vec<Result<StreamRecord>> = std::thread::scope(|scope| {
        let handles: Vec<_> = container
            .header
            .stream_ids()
            .iter()
            .map(|id| {
                scope.spawn(move || -> Result<StreamRecord> {
                    let target = resolve(targets, &placement[id])?;
                    let bytes = container.stream(*id)?;
                    let blob_id = content_id(bytes);
                    target
                        .backend()?
                        .put(&blob_id, bytes)
                        .map_err(|e| e.with_target_context(&target.name))?;
                    Ok(StreamRecord {
                        stream: id.label().to_string(),
                        target: target.name.clone(),
                        role: target.role,
                        location: target.location(),
                        blob_id,
                        byte_len: bytes.len() as u64,
                        locator: locator_digests(&container.header, *id, bytes),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    Ok(DispersalManifest {
        container_id: content_id(&container_bytes),
        header_hex: hex::encode(container.header.encode()),
        streams: records.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// Per-stream integrity findings from a fetch.
#[derive(Debug, Clone)]
pub struct StreamIssue {
    pub stream: StreamId,
    /// Block pinpointed by the locator digests, if the damage resolved to
    /// exactly one.
    pub located_block: Option<BlockAddress>,
}

#[derive(Debug, Clone, Default)]
pub struct FetchReport {
    pub restore: RestoreReport,
    pub stream_issues: Vec<StreamIssue>,
}

impl FetchReport {
    /// All corrupted blocks this fetch knows about: located at-rest damage
    /// merged with range violations seen during restore.
    pub fn corrupted_blocks(&self) -> Vec<BlockAddress> {
        let mut out: Vec<BlockAddress> = self
            .stream_issues
            .iter()
            .filter_map(|i| i.located_block)
            .collect();
        for c in &self.restore.corrupted {
            out.push(c.address);
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Download the streams named by a manifest, verify digests, reassemble the
/// container and restore it.
///
/// A missing stream is an availability error and nothing is written. A
/// corrupted public stream does not abort: restore proceeds and the report
/// names the damaged blocks.
pub fn fetch_and_restore(
    key: &SecretKey,
    manifest: &DispersalManifest,
    targets: &[StorageTarget],
    out: impl Write,
    workers: usize,
) -> Result<FetchReport> {
    let header = manifest.header()?;
    // Downloads run concurrently, one thread per stream.
    let fetched: Vec<Result<(Vec<u8>, Option<StreamIssue>)>> = {
        let header = &header;
        std::thread::scope(|scope| {
            let handles: Vec<_> = header
                .stream_ids()
                .iter()
                .map(|id| {
                    scope.spawn(move || -> Result<(Vec<u8>, Option<StreamIssue>)> {
                        let record = manifest.record(*id)?;
                        let target = resolve(targets, &record.target)?;
                        let backend = target.backend()?;
                        let bytes = match backend.get(&record.blob_id) {
                            Ok(bytes) => bytes,
                            Err(Error::Integrity(_)) => {
                                // Digest mismatch: fetch the raw bytes anyway
                                // and let the locator digests name the damage.
                                match &target.kind {
                                    TargetKind::LocalDir(dir) => {
                                        LocalDirBackend::new(dir.clone()).raw_read(&record.blob_id)?
                                    }
                                    TargetKind::RemoteBlob { .. } => {
                                        return Err(Error::Integrity(format!(
                                            "stream {} failed digest verification on remote target {}",
                                            id.label(),
                                            target.name
                                        )))
                                    }
                                }
                            }
                            Err(Error::Availability(m)) => {
                                return Err(Error::Availability(format!(
                                    "stream {} on target {}: {m}",
                                    id.label(),
                                    target.name
                                )))
                            }
                            Err(e) => return Err(e.with_target_context(&target.name)),
                        };
                        if bytes.len() as u64 != header.stream_len(*id) {
                            return Err(Error::Integrity(format!(
                                "stream {} has {} bytes, header demands {}",
                                id.label(),
                                bytes.len(),
                                header.stream_len(*id)
                            )));
                        }
                        let issue = if content_id(&bytes) != record.blob_id {
                            let located = locate_corruption(header, *id, &bytes, &record.locator)
                                .map(|idx| block_address(header, idx));
                            Some(StreamIssue {
                                stream: *id,
                                located_block: located,
                            })
                        } else {
                            None
                        };
                        Ok((bytes, issue))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    };
    let mut streams = Vec::new();
    let mut issues = Vec::new();
    for result in fetched {
        let (bytes, issue) = result?;
        streams.push(bytes);
        issues.extend(issue);
    }

    let container = ProtectedContainer {
        header: header.clone(),
        streams,
    };
    let restore = match header.scheme {
        SchemeId::Dwt2L2 => {
            let bytes = container.to_bytes();
            restore_stream(key, std::io::Cursor::new(bytes), out, workers)?
        }
        _ => {
            let image = crate::pipeline::restore_bitmap(key, &container, workers)?;
            let mut report = RestoreReport::default();
            let mut w = out;
            let mut buf = Vec::new();
            crate::bmp::encode(&image, &mut buf)?;
            w.write_all(&buf)?;
            report.bytes_written = buf.len() as u64;
            report
        }
    };
    // At-rest damage that restore could not see from range checks alone is
    // still reported, but located blocks double as corruption evidence.
    let mut report = FetchReport {
        restore,
        stream_issues: issues,
    };
    for issue in &report.stream_issues {
        if let Some(addr) = issue.located_block {
            if !report.restore.corrupted.iter().any(|c| c.address == addr) {
                report.restore.corrupted.push(CorruptBlock {
                    address: addr,
                    detail: format!("located by stream {} digests", issue.stream.label()),
                });
            }
        }
    }
    Ok(report)
}

/// Fraction of the original size held on trusted targets (header bytes are
/// local metadata and count toward the trusted footprint).
pub fn local_storage_footprint(manifest: &DispersalManifest) -> Result<f64> {
    let header = manifest.header()?;
    if header.original_len == 0 {
        return Err(Error::InvalidInput(
            "footprint of an empty container".into(),
        ));
    }
    let mut local_bytes = header.encoded_len() as u64;
    for record in &manifest.streams {
        if record.role == TargetRole::Trusted {
            local_bytes += record.byte_len;
        }
    }
    Ok(local_bytes as f64 / header.original_len as f64)
}

/// Fraction of the original size across all targets plus the header.
pub fn total_storage_footprint(manifest: &DispersalManifest) -> Result<f64> {
    let header = manifest.header()?;
    if header.original_len == 0 {
        return Err(Error::InvalidInput(
            "footprint of an empty container".into(),
        ));
    }
    let total: u64 =
        header.encoded_len() as u64 + manifest.streams.iter().map(|r| r.byte_len).sum::<u64>();
    Ok(total as f64 / header.original_len as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{protect_bytes, ProtectJob};

    fn placement_abc(a: &str, b: &str, c: &str) -> BTreeMap<StreamId, String> {
        let mut m = BTreeMap::new();
        m.insert(StreamId::A, a.to_string());
        m.insert(StreamId::B, b.to_string());
        m.insert(StreamId::C, c.to_string());
        m
    }

    fn make_container(len: usize, side: u32) -> (ProtectedContainer, Vec<u8>, SecretKey) {
        let key = SecretKey::new([0x42; 16]);
        let mut job = ProtectJob::new(SchemeId::Dwt2L2, key.clone());
        job.chunk_side = side;
        let input = crate::fixtures::text_bytes(len, 99);
        let (container, _) = protect_bytes(&job, &input).unwrap();
        (container, input, key)
    }

    #[test]
    fn locator_count_scales() {
        assert_eq!(locator_count(1), 1);
        assert_eq!(locator_count(2), 2);
        assert_eq!(locator_count(3), 2);
        assert_eq!(locator_count(64), 7);
        assert_eq!(locator_count(127), 7);
        assert_eq!(locator_count(16384), 15);
    }

    #[test]
    fn every_block_is_locatable_including_zero() {
        let (container, _, _) = make_container(9_000, 64);
        let header = &container.header;
        let bytes = container.stream(StreamId::C).unwrap();
        let expected = locator_digests(header, StreamId::C, bytes);
        let total = header.blocks_per_unit() * header.unit_count;
        for block in [0, 1, total / 2, total - 1] {
            let mut tampered = bytes.to_vec();
            tampered[(block * 60 + 7) as usize] ^= 1;
            assert_eq!(
                locate_corruption(header, StreamId::C, &tampered, &expected),
                Some(block),
                "block {block} not located"
            );
        }
        // Undamaged stream resolves to nothing.
        assert_eq!(
            locate_corruption(header, StreamId::C, bytes, &expected),
            None
        );
    }

    #[test]
    fn manifest_round_trips_through_toml() {
        let (container, _, _) = make_container(10_000, 64);
        let dir = tempfile::tempdir().unwrap();
        let targets = vec![
            StorageTarget::local("t", dir.path().join("t"), TargetRole::Trusted),
            StorageTarget::local("p", dir.path().join("p"), TargetRole::Public),
        ];
        let manifest =
            disperse(&container, &placement_abc("t", "p", "p"), &targets, false).unwrap();
        let text = manifest.to_toml_string();
        let back = DispersalManifest::from_toml_str(&text).unwrap();
        assert_eq!(back.container_id, manifest.container_id);
        assert_eq!(back.streams.len(), 3);
        assert_eq!(back.header().unwrap(), container.header);
    }

    #[test]
    fn private_fragment_refused_on_public_target() {
        let (container, _, _) = make_container(5_000, 64);
        let dir = tempfile::tempdir().unwrap();
        let targets = vec![StorageTarget::local(
            "pub",
            dir.path().join("pub"),
            TargetRole::Public,
        )];
        let err = disperse(
            &container,
            &placement_abc("pub", "pub", "pub"),
            &targets,
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Policy(_)), "{err:?}");
        // Explicit override allows it.
        disperse(
            &container,
            &placement_abc("pub", "pub", "pub"),
            &targets,
            true,
        )
        .unwrap();
    }

    #[test]
    fn disperse_fetch_round_trip() {
        let (container, input, key) = make_container(40_000, 64);
        let dir = tempfile::tempdir().unwrap();
        let targets = vec![
            StorageTarget::local("local", dir.path().join("local"), TargetRole::Trusted),
            StorageTarget::local("cloud1", dir.path().join("c1"), TargetRole::Public),
            StorageTarget::local("cloud2", dir.path().join("c2"), TargetRole::Public),
        ];
        let manifest = disperse(
            &container,
            &placement_abc("local", "cloud1", "cloud2"),
            &targets,
            false,
        )
        .unwrap();
        let mut out = Vec::new();
        let report = fetch_and_restore(&key, &manifest, &targets, &mut out, 2).unwrap();
        assert_eq!(out, input);
        assert!(report.stream_issues.is_empty());
        assert!(report.restore.corrupted.is_empty());
    }

    #[test]
    fn missing_private_stream_is_availability_error() {
        let (container, _, key) = make_container(20_000, 64);
        let dir = tempfile::tempdir().unwrap();
        let targets = vec![
            StorageTarget::local("local", dir.path().join("local"), TargetRole::Trusted),
            StorageTarget::local("cloud", dir.path().join("cloud"), TargetRole::Public),
        ];
        let manifest = disperse(
            &container,
            &placement_abc("local", "cloud", "cloud"),
            &targets,
            false,
        )
        .unwrap();
        let a_id = &manifest.record(StreamId::A).unwrap().blob_id;
        LocalDirBackend::new(dir.path().join("local"))
            .remove(a_id)
            .unwrap();
        let mut out = Vec::new();
        let err = fetch_and_restore(&key, &manifest, &targets, &mut out, 1).unwrap_err();
        assert!(matches!(err, Error::Availability(_)), "{err:?}");
        assert!(out.is_empty(), "no partial plaintext may be emitted");
    }

    #[test]
    fn single_bit_flip_is_located_exactly() {
        let (container, input, key) = make_container(30_000, 64);
        let dir = tempfile::tempdir().unwrap();
        let targets = vec![
            StorageTarget::local("local", dir.path().join("local"), TargetRole::Trusted),
            StorageTarget::local("cloud", dir.path().join("cloud"), TargetRole::Public),
        ];
        let manifest = disperse(
            &container,
            &placement_abc("local", "local", "cloud"),
            &targets,
            false,
        )
        .unwrap();
        // Flip one bit in block 17 of stream C at rest.
        let record = manifest.record(StreamId::C).unwrap();
        let backend = LocalDirBackend::new(dir.path().join("cloud"));
        let mut bytes = backend.raw_read(&record.blob_id).unwrap();
        bytes[17 * 60 + 5] ^= 0x20;
        backend.raw_write(&record.blob_id, &bytes).unwrap();

        let mut out = Vec::new();
        let report = fetch_and_restore(&key, &manifest, &targets, &mut out, 1).unwrap();
        let per_row = 64 / 8;
        let expected = BlockAddress::new(0, 17 / per_row, 17 % per_row);
        assert_eq!(report.corrupted_blocks(), vec![expected]);
        // Damage is confined to that block's 64 bytes.
        let mut bad_blocks = std::collections::HashSet::new();
        for (i, (a, b)) in input.iter().zip(&out).enumerate() {
            if a != b {
                bad_blocks.insert(((i / 64) / 8, (i % 64) / 8));
            }
        }
        assert!(bad_blocks.len() <= 1);
    }

    #[test]
    fn footprints_match_layout_arithmetic() {
        let (container, _, _) = make_container(1 << 20, 1024);
        let dir = tempfile::tempdir().unwrap();
        let targets = vec![
            StorageTarget::local("local", dir.path().join("local"), TargetRole::Trusted),
            StorageTarget::local("c1", dir.path().join("c1"), TargetRole::Public),
            StorageTarget::local("c2", dir.path().join("c2"), TargetRole::Public),
        ];
        let manifest = disperse(
            &container,
            &placement_abc("local", "c1", "c2"),
            &targets,
            false,
        )
        .unwrap();
        let local = local_storage_footprint(&manifest).unwrap();
        assert!((local - 0.0781).abs() < 0.005, "A-local footprint {local}");
        let total = total_storage_footprint(&manifest).unwrap();
        assert!((total - 1.258).abs() < 0.01, "total footprint {total}");

        // A+B local layout.
        let manifest2 = disperse(
            &container,
            &placement_abc("local", "local", "c2"),
            &targets,
            false,
        )
        .unwrap();
        let local2 = local_storage_footprint(&manifest2).unwrap();
        assert!(
            (local2 - 0.3203).abs() < 0.005,
            "A+B-local footprint {local2}"
        );
    }

    #[test]
    fn key_bytes_never_reach_targets_or_manifest() {
        let secret = SecretKey::new(*b"do-not-store-me!");
        let mut job = ProtectJob::new(SchemeId::Dwt2L2, secret.clone());
        job.chunk_side = 64;
        let input = crate::fixtures::text_bytes(20_000, 55);
        let (container, _) = protect_bytes(&job, &input).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let targets = vec![
            StorageTarget::local("t", dir.path().join("t"), TargetRole::Trusted),
            StorageTarget::local("p", dir.path().join("p"), TargetRole::Public),
        ];
        let manifest =
            disperse(&container, &placement_abc("t", "p", "p"), &targets, false).unwrap();
        let needle = secret.bytes();
        let scan = |bytes: &[u8]| bytes.windows(16).any(|w| w == needle);
        assert!(
            !scan(manifest.to_toml_string().as_bytes()),
            "key in manifest"
        );
        for sub in ["t", "p"] {
            for entry in std::fs::read_dir(dir.path().join(sub)).unwrap() {
                let bytes = std::fs::read(entry.unwrap().path()).unwrap();
                assert!(!scan(&bytes), "key leaked into a stored blob");
            }
        }
    }

    #[test]
    fn remote_targets_work_end_to_end() {
        let (container, input, key) = make_container(15_000, 64);
        let dir = tempfile::tempdir().unwrap();
        let server1 =
            crate::blob::BlobServer::start(dir.path().join("s1"), Some("tok1".into())).unwrap();
        let server2 = crate::blob::BlobServer::start(dir.path().join("s2"), None).unwrap();
        let targets = vec![
            StorageTarget::local("local", dir.path().join("local"), TargetRole::Trusted),
            StorageTarget::remote(
                "cloud1",
                &server1.base_url(),
                Some("tok1".into()),
                TargetRole::Public,
            ),
            StorageTarget::remote("cloud2", &server2.base_url(), None, TargetRole::Public),
        ];
        let manifest = disperse(
            &container,
            &placement_abc("local", "cloud1", "cloud2"),
            &targets,
            false,
        )
        .unwrap();
        let mut out = Vec::new();
        fetch_and_restore(&key, &manifest, &targets, &mut out, 1).unwrap();
        assert_eq!(out, input);
        // The manifest must not leak the bearer token.
        assert!(!manifest.to_toml_string().contains("tok1"));
    }
}
