//! Binary bank container: `P3DB` magic, little-endian u32 version, k and row
//! width, one u64 row count per bank, then every row as little-endian f64.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::features::{FpfhParams, FPFH_DIM};
use crate::scalar::Real;

use super::MemoryBankSet;

pub const BANK_MAGIC: &[u8; 4] = b"P3DB";
pub const BANK_VERSION: u32 = 1;

pub fn write_banks<T: Real, W: Write>(banks: &MemoryBankSet<T>, mut w: W) -> Result<()> {
    w.write_all(BANK_MAGIC)?;
    w.write_all(&BANK_VERSION.to_le_bytes())?;
    w.write_all(&(banks.k() as u32).to_le_bytes())?;
    w.write_all(&(FPFH_DIM as u32).to_le_bytes())?;
    for size in banks.sizes() {
        w.write_all(&(size as u64).to_le_bytes())?;
    }
    for i in 0..banks.k() {
        for v in banks.bank(i) {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::parse(self.offset, format!("truncated bank file reading {what}")))?;
        self.offset += N as u64;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(what)?))
    }
}

/// Reads a bank container; `fpfh` comes from the sidecar metadata.
pub fn read_banks<T: Real, R: Read>(r: R, fpfh: FpfhParams) -> Result<MemoryBankSet<T>> {
    let mut cur = Cursor { inner: r, offset: 0 };
    let magic: [u8; 4] = cur.take("magic")?;
    if &magic != BANK_MAGIC {
        return Err(Error::parse(0, "bad magic, not a bank file"));
    }
    let version = cur.u32("version")?;
    if version != BANK_VERSION {
        return Err(Error::parse(4, format!("unsupported bank version {version}")));
    }
    let k = cur.u32("k")? as usize;
    let dim = cur.u32("dim")? as usize;
    if dim != FPFH_DIM {
        return Err(Error::parse(12, format!("row width {dim}, expected {FPFH_DIM}")));
    }
    let mut counts = Vec::with_capacity(k);
    for _ in 0..k {
        counts.push(u64::from_le_bytes(cur.take("bank count")?) as usize);
    }
    let mut banks = Vec::with_capacity(k);
    for &c in &counts {
        let mut bank = Vec::with_capacity(c * dim);
        for _ in 0..c * dim {
            bank.push(T::lit(f64::from_le_bytes(cur.take("row data")?)));
        }
        banks.push(bank);
    }
    let mut rest = [0u8; 1];
    if cur.inner.read(&mut rest)? != 0 {
        return Err(Error::parse(cur.offset, "trailing bytes after bank data"));
    }
    MemoryBankSet::from_banks(banks, fpfh)
}
