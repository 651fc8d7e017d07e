//! Flat memory image: a base address plus a contiguous byte array.
//!
//! File format: 8-byte little-endian base address followed by the raw bytes.

use std::io::{self, Read, Write};

use thiserror::Error;

/// Largest image accepted (16 MiB of L2).
pub const MAX_IMAGE_BYTES: usize = 16 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("access of {len} bytes at {addr:#x} is outside the memory image")]
    OutOfBounds { addr: u64, len: usize },
    #[error("image of {0} bytes exceeds the {MAX_IMAGE_BYTES}-byte limit")]
    TooLarge(usize),
    #[error("image file is truncated")]
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MemoryImage {
    base: u64,
    bytes: Vec<u8>,
}

impl MemoryImage {
    pub fn new(base: u64, size: usize) -> Result<Self, MemoryError> {
        Self::from_bytes(base, vec![0; size])
    }

    pub fn from_bytes(base: u64, bytes: Vec<u8>) -> Result<Self, MemoryError> {
        if bytes.len() > MAX_IMAGE_BYTES {
            return Err(MemoryError::TooLarge(bytes.len()));
        }
        Ok(MemoryImage { base, bytes })
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    fn range(&self, addr: u64, len: usize) -> Result<std::ops::Range<usize>, MemoryError> {
        let fault = MemoryError::OutOfBounds { addr, len };
        let start = addr.checked_sub(self.base).ok_or(fault.clone())?;
        let start = usize::try_from(start).map_err(|_| fault.clone())?;
        let end = start.checked_add(len).ok_or(fault.clone())?;
        if end > self.bytes.len() {
            return Err(fault);
        }
        Ok(start..end)
    }

    pub fn read(&self, addr: u64, len: usize) -> Result<&[u8], MemoryError> {
        let r = self.range(addr, len)?;
        Ok(&self.bytes[r])
    }

    pub fn write(&mut self, addr: u64, data: &[u8]) -> Result<(), MemoryError> {
        let r = self.range(addr, data.len())?;
        self.bytes[r].copy_from_slice(data);
        Ok(())
    }

    pub fn check(&self, addr: u64, len: usize) -> Result<(), MemoryError> {
        self.range(addr, len).map(|_| ())
    }

    pub fn read_u64(&self, addr: u64) -> Result<u64, MemoryError> {
        let b = self.read(addr, 8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn write_u64(&mut self, addr: u64, value: u64) -> Result<(), MemoryError> {
        self.write(addr, &value.to_le_bytes())
    }

    pub fn read_f64(&self, addr: u64) -> Result<f64, MemoryError> {
        self.read_u64(addr).map(f64::from_bits)
    }

    pub fn write_f64(&mut self, addr: u64, value: f64) -> Result<(), MemoryError> {
        self.write_u64(addr, value.to_bits())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(&self.base.to_le_bytes())?;
        out.write_all(&self.bytes)
    }

    pub fn read_from<R: Read>(mut input: R) -> io::Result<Self> {
        let mut header = [0u8; 8];
        input.read_exact(&mut header).map_err(|_| io::Error::new(io::ErrorKind::InvalidData, MemoryError::Truncated))?;
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        MemoryImage::from_bytes(u64::from_le_bytes(header), bytes)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_are_enforced() {
        let mut m = MemoryImage::new(0x1000, 64).unwrap();
        assert!(m.write_u64(0x1038, 7).is_ok());
        assert_eq!(m.read_u64(0x1038).unwrap(), 7);
        assert_eq!(m.read(0x1039, 8), Err(MemoryError::OutOfBounds { addr: 0x1039, len: 8 }));
        assert!(m.read(0xfff, 1).is_err());
    }

    #[test]
    fn file_round_trip() {
        let mut m = MemoryImage::new(0x8000_0000, 16).unwrap();
        m.write_f64(0x8000_0008, 1.5).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], &0x8000_0000u64.to_le_bytes());
        assert_eq!(MemoryImage::read_from(&buf[..]).unwrap(), m);
    }

    #[test]
    fn oversized_image_rejected() {
        assert_eq!(MemoryImage::new(0, MAX_IMAGE_BYTES + 1), Err(MemoryError::TooLarge(MAX_IMAGE_BYTES + 1)));
    }
}
