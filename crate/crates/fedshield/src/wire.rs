//! Binary serialization helpers shared by the file formats: 4-byte magics
//! with a version byte, length-prefixed big-endian big integers, and a
//! bounds-checked reader.

use crate::error::{Error, Result};
use num_bigint::BigUint;

pub fn put_magic(buf: &mut Vec<u8>, magic: &[u8; 4], version: u8) {
    buf.extend_from_slice(magic);
    buf.push(version);
}

pub fn put_u8(buf: &mut Vec<u8>, v: u8) {
    buf.push(v);
}

pub fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

pub fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_be_bytes());
}

pub fn put_i32_le(buf: &mut Vec<u8>, v: i32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// 4-byte big-endian length prefix followed by the big-endian magnitude.
pub fn put_biguint(buf: &mut Vec<u8>, v: &BigUint) {
    let bytes = v.to_bytes_be();
    put_u32(buf, bytes.len() as u32);
    buf.extend_from_slice(&bytes);
}

/// Fixed-width big-endian value (left-padded with zeros).
pub fn put_biguint_fixed(buf: &mut Vec<u8>, v: &BigUint, width: usize) {
    let bytes = v.to_bytes_be();
    assert!(bytes.len() <= width, "value wider than field");
    buf.resize(buf.len() + (width - bytes.len()), 0);
    buf.extend_from_slice(&bytes);
}

pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8], what: &'static str) -> Self {
        Reader { data, pos: 0, what }
    }

    fn err(&self, detail: impl Into<String>) -> Error {
        Error::Format { what: self.what, detail: detail.into() }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(self.err(format!("unexpected end at byte {}", self.pos)));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn expect_magic(&mut self, magic: &[u8; 4], version: u8) -> Result<()> {
        let m = self.take(5)?;
        if &m[..4] != magic {
            return Err(self.err("bad magic"));
        }
        if m[4] != version {
            return Err(self.err(format!("unsupported version {}", m[4])));
        }
        Ok(())
    }

    pub fn get_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_i32_le(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_biguint(&mut self) -> Result<BigUint> {
        let len = self.get_u32()? as usize;
        Ok(BigUint::from_bytes_be(self.take(len)?))
    }

    pub fn get_biguint_fixed(&mut self, width: usize) -> Result<BigUint> {
        Ok(BigUint::from_bytes_be(self.take(width)?))
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.err(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let mut buf = Vec::new();
        put_magic(&mut buf, b"TEST", 1);
        put_u32(&mut buf, 77);
        put_biguint(&mut buf, &BigUint::from(123456789u64));
        put_biguint_fixed(&mut buf, &BigUint::from(5u8), 8);
        let mut r = Reader::new(&buf, "test");
        r.expect_magic(b"TEST", 1).unwrap();
        assert_eq!(r.get_u32().unwrap(), 77);
        assert_eq!(r.get_biguint().unwrap(), BigUint::from(123456789u64));
        assert_eq!(r.get_biguint_fixed(8).unwrap(), BigUint::from(5u8));
        r.finish().unwrap();
    }

    #[test]
    fn truncation_detected() {
        let mut buf = Vec::new();
        put_u32(&mut buf, 10);
        let mut r = Reader::new(&buf[..2], "test");
        assert!(r.get_u32().is_err());
    }
}
