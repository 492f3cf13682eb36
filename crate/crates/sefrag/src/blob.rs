//! Content-addressed blob storage: a local-directory backend, a minimal HTTP
//! blob client (PUT/GET/HEAD `/blobs/{id}` with digest verification and an
//! optional bearer token), and a bundled loopback server that serves a
//! directory over the same protocol for tests and local "clouds".

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn valid_id(id: &str) -> bool {
    id.len() == 64
        && id
            .bytes()
            .all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

/// Storage operations every backend provides. Blob ids are the SHA-256 of
/// the content, so a successful `get` is always digest-checked.
pub trait BlobBackend {
    fn put(&self, id: &str, bytes: &[u8]) -> Result<()>;
    fn get(&self, id: &str) -> Result<Vec<u8>>;
    fn head(&self, id: &str) -> Result<Option<u64>>;
}

/// Blobs as files named by their content id inside one directory.
pub struct LocalDirBackend {
    dir: PathBuf,
}

impl LocalDirBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path_of(&self, id: &str) -> Result<PathBuf> {
        if !valid_id(id) {
            return Err(Error::InvalidInput(format!("invalid blob id {id:?}")));
        }
        Ok(self.dir.join(id))
    }
}

impl BlobBackend for LocalDirBackend {
    fn put(&self, id: &str, bytes: &[u8]) -> Result<()> {
        if content_id(bytes) != id {
            return Err(Error::Integrity(format!(
                "blob id {id} does not match content"
            )));
        }
        let path = self.path_of(id)?;
        std::fs::create_dir_all(&self.dir)?;
        if path.exists() {
            let existing = std::fs::read(&path)?;
            if existing != bytes {
                return Err(Error::Integrity(format!(
                    "blob {id} exists with different content"
                )));
            }
            return Ok(());
        }
        let tmp = self.dir.join(format!(".{id}.tmp"));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    fn get(&self, id: &str) -> Result<Vec<u8>> {
        let path = self.path_of(id)?;
        let bytes = std::fs::read(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Availability(format!("blob {id} not found"))
            } else {
                e.into()
            }
        })?;
        if content_id(&bytes) != id {
            return Err(Error::Integrity(format!(
                "blob {id} failed digest verification"
            )));
        }
        Ok(bytes)
    }

    fn head(&self, id: &str) -> Result<Option<u64>> {
        let path = self.path_of(id)?;
        match std::fs::metadata(&path) {
            Ok(m) => Ok(Some(m.len())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

/// Raw access used by integrity tests: read/overwrite stored blob bytes
/// without digest checks.
impl LocalDirBackend {
    pub fn raw_read(&self, id: &str) -> Result<Vec<u8>> {
        Ok(std::fs::read(self.path_of(id)?)?)
    }

    pub fn raw_write(&self, id: &str, bytes: &[u8]) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(self.path_of(id)?, bytes)?;
        Ok(())
    }

    pub fn remove(&self, id: &str) -> Result<()> {
        std::fs::remove_file(self.path_of(id)?)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// HTTP client
// ---------------------------------------------------------------------------

/// Minimal HTTP/1.1 blob client for `http://host:port` bases.
pub struct HttpBlobClient {
    host: String,
    port: u16,
    token: Option<String>,
}

impl HttpBlobClient {
    pub fn new(base_url: &str, token: Option<String>) -> Result<Self> {
        let rest = base_url.strip_prefix("http://").ok_or_else(|| {
            Error::InvalidInput(format!("unsupported url {base_url:?} (http:// only)"))
        })?;
        let rest = rest.trim_end_matches('/');
        let (host, port) = match rest.rsplit_once(':') {
            Some((h, p)) => (
                h.to_string(),
                p.parse::<u16>()
                    .map_err(|_| Error::InvalidInput(format!("bad port in {base_url:?}")))?,
            ),
            None => (rest.to_string(), 80),
        };
        Ok(Self { host, port, token })
    }

    fn request(
        &self,
        method: &str,
        id: &str,
        body: Option<&[u8]>,
    ) -> Result<(u16, Vec<(String, String)>, Vec<u8>)> {
        let mut stream = TcpStream::connect((self.host.as_str(), self.port))?;
        let mut req = format!(
            "{method} /blobs/{id} HTTP/1.1\r\nHost: {}\r\nConnection: close\r\n",
            self.host
        );
        if let Some(token) = &self.token {
            req.push_str(&format!("Authorization: Bearer {token}\r\n"));
        }
        if let Some(body) = body {
            req.push_str(&format!("Content-Length: {}\r\n", body.len()));
            req.push_str(&format!(
                "X-Content-Digest: sha256:{}\r\n",
                content_id(body)
            ));
        }
        req.push_str("\r\n");
        stream.write_all(req.as_bytes())?;
        if let Some(body) = body {
            stream.write_all(body)?;
        }
        stream.flush()?;

        let mut reader = BufReader::new(stream);
        let mut status_line = String::new();
        reader.read_line(&mut status_line)?;
        let status: u16 = status_line
            .split_whitespace()
            .nth(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad http status line {status_line:?}")))?;
        let mut headers = Vec::new();
        let mut content_length = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line)?;
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                let k = k.trim().to_ascii_lowercase();
                let v = v.trim().to_string();
                if k == "content-length" {
                    content_length = v.parse().unwrap_or(0);
                }
                headers.push((k, v));
            }
        }
        let mut body = vec![0u8; content_length];
        if method != "HEAD" && content_length > 0 {
            reader.read_exact(&mut body)?;
        }
        Ok((status, headers, body))
    }
}

impl BlobBackend for HttpBlobClient {
    fn put(&self, id: &str, bytes: &[u8]) -> Result<()> {
        if content_id(bytes) != id {
            return Err(Error::Integrity(format!(
                "blob id {id} does not match content"
            )));
        }
        let (status, _, body) = self.request("PUT", id, Some(bytes))?;
        match status {
            200 | 201 => Ok(()),
            409 => Err(Error::Integrity(format!(
                "blob {id} exists with different content"
            ))),
            401 => Err(Error::Policy("blob server rejected credentials".into())),
            s => Err(Error::Io {
                source: std::io::Error::other(format!(
                    "PUT /blobs/{id} failed with status {s}: {}",
                    String::from_utf8_lossy(&body)
                )),
                offset: None,
            }),
        }
    }

    fn get(&self, id: &str) -> Result<Vec<u8>> {
        let (status, headers, body) = self.request("GET", id, None)?;
        match status {
            200 => {
                if content_id(&body) != id {
                    return Err(Error::Integrity(format!(
                        "blob {id} failed digest verification"
                    )));
                }
                if let Some((_, v)) = headers.iter().find(|(k, _)| k == "x-content-digest") {
                    if v.trim_start_matches("sha256:") != id {
                        return Err(Error::Integrity(format!(
                            "blob {id}: server digest header mismatch"
                        )));
                    }
                }
                Ok(body)
            }
            404 => Err(Error::Availability(format!("blob {id} not found"))),
            401 => Err(Error::Policy("blob server rejected credentials".into())),
            s => Err(Error::Io {
                source: std::io::Error::other(format!("GET /blobs/{id} failed with status {s}")),
                offset: None,
            }),
        }
    }

    fn head(&self, id: &str) -> Result<Option<u64>> {
        let (status, headers, _) = self.request("HEAD", id, None)?;
        match status {
            200 => {
                let len = headers
                    .iter()
                    .find(|(k, _)| k == "content-length")
                    .and_then(|(_, v)| v.parse().ok())
                    .unwrap_or(0);
                Ok(Some(len))
            }
            404 => Ok(None),
            401 => Err(Error::Policy("blob server rejected credentials".into())),
            s => Err(Error::Io {
                source: std::io::Error::other(format!("HEAD /blobs/{id} failed with status {s}")),
                offset: None,
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Loopback server
// ---------------------------------------------------------------------------

/// Directory-backed blob server bound to 127.0.0.1. One thread per
/// connection; stops when dropped.
pub struct BlobServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl BlobServer {
    pub fn start(dir: impl Into<PathBuf>, token: Option<String>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let listener = TcpListener::bind(("127.0.0.1", 0))?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = stop.clone();
        let handle = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if stop_flag.load(Ordering::SeqCst) {
                    break;
                }
                match conn {
                    Ok(stream) => {
                        let dir = dir.clone();
                        let token = token.clone();
                        std::thread::spawn(move || {
                            let _ = handle_connection(stream, &dir, token.as_deref());
                        });
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(Self {
            addr,
            stop,
            handle: Some(handle),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BlobServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn respond(
    stream: &mut TcpStream,
    status: u16,
    reason: &str,
    headers: &[(&str, String)],
    body: &[u8],
) -> std::io::Result<()> {
    respond_len(stream, status, reason, headers, body, body.len())
}

/// `content_length` may exceed the sent body for HEAD responses.
fn respond_len(
    stream: &mut TcpStream,
    status: u16,
    reason: &str,
    headers: &[(&str, String)],
    body: &[u8],
    content_length: usize,
) -> std::io::Result<()> {
    let mut out = format!("HTTP/1.1 {status} {reason}\r\nConnection: close\r\n");
    for (k, v) in headers {
        out.push_str(&format!("{k}: {v}\r\n"));
    }
    out.push_str(&format!("Content-Length: {content_length}\r\n\r\n"));
    stream.write_all(out.as_bytes())?;
    stream.write_all(body)?;
    stream.flush()
}

fn handle_connection(
    mut stream: TcpStream,
    dir: &Path,
    token: Option<&str>,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();

    let mut content_length = 0usize;
    let mut auth = None;
    let mut digest_header = None;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            match k.trim().to_ascii_lowercase().as_str() {
                "content-length" => content_length = v.trim().parse().unwrap_or(0),
                "authorization" => auth = Some(v.trim().to_string()),
                "x-content-digest" => digest_header = Some(v.trim().to_string()),
                _ => {}
            }
        }
    }

    if let Some(expected) = token {
        if auth.as_deref() != Some(&format!("Bearer {expected}")) {
            return respond(&mut stream, 401, "Unauthorized", &[], b"bad token");
        }
    }

    let id = match path.strip_prefix("/blobs/") {
        Some(id) if valid_id(id) => id.to_string(),
        _ => return respond(&mut stream, 400, "Bad Request", &[], b"bad path"),
    };
    let blob_path = dir.join(&id);

    match method.as_str() {
        "PUT" => {
            let mut body = vec![0u8; content_length];
            reader.read_exact(&mut body)?;
            let actual = content_id(&body);
            if actual != id {
                return respond(
                    &mut stream,
                    400,
                    "Bad Request",
                    &[],
                    b"content does not match id",
                );
            }
            if let Some(d) = digest_header {
                if d.trim_start_matches("sha256:") != actual {
                    return respond(
                        &mut stream,
                        400,
                        "Bad Request",
                        &[],
                        b"digest header mismatch",
                    );
                }
            }
            if blob_path.exists() {
                let existing = std::fs::read(&blob_path)?;
                if existing != body {
                    return respond(
                        &mut stream,
                        409,
                        "Conflict",
                        &[],
                        b"exists with different content",
                    );
                }
                return respond(&mut stream, 200, "OK", &[], b"");
            }
            let tmp = dir.join(format!(".{id}.tmp"));
            std::fs::write(&tmp, &body)?;
            std::fs::rename(&tmp, &blob_path)?;
            respond(&mut stream, 201, "Created", &[], b"")
        }
        "GET" => match std::fs::read(&blob_path) {
            Ok(body) => {
                let headers = [("X-Content-Digest", format!("sha256:{id}"))];
                respond(&mut stream, 200, "OK", &headers, &body)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                respond(&mut stream, 404, "Not Found", &[], b"")
            }
            Err(_) => respond(&mut stream, 500, "Internal Server Error", &[], b""),
        },
        "HEAD" => match std::fs::metadata(&blob_path) {
            Ok(m) => {
                let headers = [("X-Content-Digest", format!("sha256:{id}"))];
                respond_len(&mut stream, 200, "OK", &headers, &[], m.len() as usize)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                respond(&mut stream, 404, "Not Found", &[], b"")
            }
            Err(_) => respond(&mut stream, 500, "Internal Server Error", &[], b""),
        },
        _ => respond(&mut stream, 405, "Method Not Allowed", &[], b""),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Both backends must behave identically under this suite.
    fn conformance(backend: &dyn BlobBackend) {
        let data = b"fragment bytes".to_vec();
        let id = content_id(&data);
        assert_eq!(backend.head(&id).unwrap(), None);
        assert!(matches!(backend.get(&id), Err(Error::Availability(_))));
        backend.put(&id, &data).unwrap();
        assert_eq!(backend.get(&id).unwrap(), data);
        assert_eq!(backend.head(&id).unwrap(), Some(data.len() as u64));
        // Idempotent re-put of identical content.
        backend.put(&id, &data).unwrap();
        // Wrong id is rejected client-side.
        assert!(backend.put(&content_id(b"other"), &data).is_err());
    }

    #[test]
    fn local_dir_conformance() {
        let dir = tempfile::tempdir().unwrap();
        conformance(&LocalDirBackend::new(dir.path()));
    }

    #[test]
    fn http_conformance_and_auth() {
        let dir = tempfile::tempdir().unwrap();
        let server = BlobServer::start(dir.path(), Some("sesame".into())).unwrap();
        let client = HttpBlobClient::new(&server.base_url(), Some("sesame".into())).unwrap();
        conformance(&client);

        let bad = HttpBlobClient::new(&server.base_url(), Some("wrong".into())).unwrap();
        let id = content_id(b"x");
        assert!(matches!(bad.put(&id, b"x"), Err(Error::Policy(_))));
        let none = HttpBlobClient::new(&server.base_url(), None).unwrap();
        assert!(matches!(none.head(&id), Err(Error::Policy(_))));
    }

    #[test]
    fn http_conflicting_put_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let server = BlobServer::start(dir.path(), None).unwrap();
        let client = HttpBlobClient::new(&server.base_url(), None).unwrap();
        let data = b"original".to_vec();
        let id = content_id(&data);
        client.put(&id, &data).unwrap();
        // Overwrite at rest, then try to re-put the original id with the
        // same content: the server still holds the tampered bytes.
        LocalDirBackend::new(dir.path())
            .raw_write(&id, b"tampered!")
            .unwrap();
        assert!(matches!(client.put(&id, &data), Err(Error::Integrity(_))));
        // A digest-checked get refuses the tampered content.
        assert!(matches!(client.get(&id), Err(Error::Integrity(_))));
    }

    #[test]
    fn get_detects_at_rest_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let backend = LocalDirBackend::new(dir.path());
        let data = vec![7u8; 1000];
        let id = content_id(&data);
        backend.put(&id, &data).unwrap();
        let mut tampered = data.clone();
        tampered[500] ^= 1;
        backend.raw_write(&id, &tampered).unwrap();
        assert!(matches!(backend.get(&id), Err(Error::Integrity(_))));
    }

    #[test]
    fn unreachable_target_is_retryable() {
        // Nothing listens on the discard port; the transport error must be
        // classified as retryable, unlike integrity or policy failures.
        let client = HttpBlobClient::new("http://127.0.0.1:9", None).unwrap();
        let err = client.head(&content_id(b"x")).unwrap_err();
        assert!(err.is_retryable(), "{err:?}");
        assert!(!Error::Integrity("x".into()).is_retryable());
        assert!(!Error::Policy("x".into()).is_retryable());
    }
}
