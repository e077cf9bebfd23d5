//! Binary container for the compressed maps of one configuration.
//!
//! Layout: the magic `RSWZ1`, then one record per map until end of file:
//! `patch_id u32, m u32, n u32, k u32, seed u64, fingerprint [u8; 32]`,
//! followed by `U` (m×k), `S` (k) and `V` (n×k) as little-endian `f64`,
//! matrices column-major. `k` is the number of stored columns.

use std::path::Path;

use reduced_schwarz::dense::Mat;
use reduced_schwarz::lowrank::SvdTriple;
use reduced_schwarz::schwarz::{Fingerprint, ReducedMap};

use crate::error::CliError;
use crate::output::atomic_write;

pub const MAGIC: &[u8; 5] = b"RSWZ1";

pub fn encode(maps: &[ReducedMap]) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for m in maps {
        let t = &m.triple;
        let k = t.rank();
        for v in [m.patch_id, t.u.rows(), t.v.rows(), k] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&m.seed.to_le_bytes());
        out.extend_from_slice(&m.fingerprint.0);
        for v in t.u.as_col_major().iter().chain(&t.s).chain(t.v.as_col_major()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            CliError::Io(format!("archive truncated at byte {} (needed {n} more)", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>, CliError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| CliError::Io("archive dimensions overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<ReducedMap>, CliError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CliError::Io("not a map archive (bad magic)".into()));
    }
    let mut r = Reader {
        buf: bytes,
        pos: MAGIC.len(),
    };
    let mut maps = Vec::new();
    while r.pos < bytes.len() {
        let (patch_id, m, n, k) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        let seed = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let fingerprint = Fingerprint(r.take(32)?.try_into().expect("32 bytes"));
        let u = Mat::from_col_major(m, k, r.floats(m * k)?);
        let s = r.floats(k)?;
        let v = Mat::from_col_major(n, k, r.floats(n * k)?);
        maps.push(ReducedMap {
            patch_id,
            triple: SvdTriple { u, s, v },
            k,
            seed,
            fingerprint,
        });
    }
    Ok(maps)
}

pub fn save(path: &Path, maps: &[ReducedMap]) -> Result<(), CliError> {
    atomic_write(path, &encode(maps))
}

pub fn load(path: &Path) -> Result<Vec<ReducedMap>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("cannot read archive {}: {e}", path.display())))?;
    decode(&bytes)
}
