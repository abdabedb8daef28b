//! Shared plumbing for the little-endian binary formats (`.rfmlp` checkpoints
//! and `.rfemb` embedding stores).
//!
//! Both formats end in a CRC32 (IEEE polynomial, as computed by zlib) over
//! every byte that precedes the checksum field, magic included.

use std::io::{self, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: Vec<u8>, found: Vec<u8> },
    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },
    #[error("file truncated while reading {what}")]
    Truncated { what: &'static str },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("{0} unexpected trailing bytes after checksum")]
    TrailingBytes(usize),
    #[error("store dimension is zero")]
    ZeroDim,
    #[error("invalid UTF-8 in {what}")]
    InvalidUtf8 { what: &'static str },
    #[error("invalid content: {0}")]
    Invalid(String),
}

/// Writer adapter that hashes every byte it forwards.
pub struct CrcWriter<W: Write> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> CrcWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner, hasher: crc32fast::Hasher::new() }
    }

    pub fn put(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.hasher.update(bytes);
        self.inner.write_all(bytes)
    }

    pub fn put_u8(&mut self, v: u8) -> io::Result<()> {
        self.put(&[v])
    }

    pub fn put_u16(&mut self, v: u16) -> io::Result<()> {
        self.put(&v.to_le_bytes())
    }

    pub fn put_u32(&mut self, v: u32) -> io::Result<()> {
        self.put(&v.to_le_bytes())
    }

    pub fn put_str(&mut self, s: &str) -> io::Result<()> {
        let len = u32::try_from(s.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "string longer than u32::MAX"))?;
        self.put_u32(len)?;
        self.put(s.as_bytes())
    }

    pub fn put_f64s(&mut self, values: &[f64]) -> io::Result<()> {
        let mut buf = Vec::with_capacity(8 * values.len().min(8192));
        for chunk in values.chunks(8192) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            self.put(&buf)?;
        }
        Ok(())
    }

    pub fn put_f32s(&mut self, values: &[f32]) -> io::Result<()> {
        let mut buf = Vec::with_capacity(4 * values.len().min(16384));
        for chunk in values.chunks(16384) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            self.put(&buf)?;
        }
        Ok(())
    }

    /// Appends the checksum (not itself hashed) and returns the inner writer.
    pub fn finish(mut self) -> io::Result<W> {
        let crc = self.hasher.finalize();
        self.inner.write_all(&crc.to_le_bytes())?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Reader adapter mirroring [`CrcWriter`]; short reads surface as
/// [`FormatError::Truncated`].
pub struct CrcReader<R: Read> {
    inner: R,
    hasher: crc32fast::Hasher,
}

impl<R: Read> CrcReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, hasher: crc32fast::Hasher::new() }
    }

    pub fn take(&mut self, buf: &mut [u8], what: &'static str) -> Result<(), FormatError> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => FormatError::Truncated { what },
            _ => FormatError::Io(e),
        })?;
        self.hasher.update(buf);
        Ok(())
    }

    pub fn magic(&mut self, expected: &[u8]) -> Result<(), FormatError> {
        let mut found = vec![0u8; expected.len()];
        self.take(&mut found, "magic")?;
        if found != expected {
            return Err(FormatError::BadMagic { expected: expected.to_vec(), found });
        }
        Ok(())
    }

    pub fn version(&mut self, supported: u16) -> Result<(), FormatError> {
        let found = self.u16("format version")?;
        if found != supported {
            return Err(FormatError::UnsupportedVersion { found, supported });
        }
        Ok(())
    }

    pub fn u8(&mut self, what: &'static str) -> Result<u8, FormatError> {
        let mut b = [0u8; 1];
        self.take(&mut b, what)?;
        Ok(b[0])
    }

    pub fn u16(&mut self, what: &'static str) -> Result<u16, FormatError> {
        let mut b = [0u8; 2];
        self.take(&mut b, what)?;
        Ok(u16::from_le_bytes(b))
    }

    pub fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        let mut b = [0u8; 4];
        self.take(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn string(&mut self, what: &'static str) -> Result<String, FormatError> {
        let len = self.u32(what)? as usize;
        let mut bytes = Vec::new();
        bytes.try_reserve_exact(len).map_err(|_| FormatError::Truncated { what })?;
        bytes.resize(len, 0);
        self.take(&mut bytes, what)?;
        String::from_utf8(bytes).map_err(|_| FormatError::InvalidUtf8 { what })
    }

    pub fn f64s(&mut self, count: usize, what: &'static str) -> Result<Vec<f64>, FormatError> {
        let mut out = Vec::with_capacity(count.min(1 << 20));
        let mut buf = vec![0u8; 8 * count.min(8192)];
        let mut left = count;
        while left > 0 {
            let n = left.min(8192);
            let bytes = &mut buf[..8 * n];
            self.take(bytes, what)?;
            out.extend(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())));
            left -= n;
        }
        Ok(out)
    }

    pub fn f32s_into(&mut self, out: &mut Vec<f32>, count: usize, what: &'static str) -> Result<(), FormatError> {
        let mut buf = vec![0u8; 4 * count.min(16384)];
        let mut left = count;
        while left > 0 {
            let n = left.min(16384);
            let bytes = &mut buf[..4 * n];
            self.take(bytes, what)?;
            out.extend(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())));
            left -= n;
        }
        Ok(())
    }

    /// Reads the stored checksum, compares it, and requires end of input.
    pub fn finish(mut self) -> Result<(), FormatError> {
        let computed = self.hasher.clone().finalize();
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => FormatError::Truncated { what: "checksum" },
            _ => FormatError::Io(e),
        })?;
        let stored = u32::from_le_bytes(b);
        let mut rest = Vec::new();
        self.inner.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(FormatError::TrailingBytes(rest.len()));
        }
        if stored != computed {
            return Err(FormatError::Checksum { stored, computed });
        }
        Ok(())
    }
}

/// CRC32 of a whole byte slice, as recorded in report manifests.
pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}
