//! Wire format: `CQPR` once per direction, then frames of
//! `tag:u8, length:u32le, payload`. Requests carry an opcode as tag,
//! responses a status.

use std::io::{self, Read, Write};

pub const MAGIC: &[u8; 4] = b"CQPR";
pub const MAX_PAYLOAD: usize = 64 << 20;
/// Largest `count` accepted in GET_IDS and GET_REGIONS.
pub const MAX_COUNT: u32 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    Hello = 0x01,
    GetMeta = 0x02,
    GetIds = 0x03,
    GetStr = 0x04,
    GetPositions = 0x05,
    GetRegions = 0x06,
}

impl Opcode {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => Opcode::Hello,
            0x02 => Opcode::GetMeta,
            0x03 => Opcode::GetIds,
            0x04 => Opcode::GetStr,
            0x05 => Opcode::GetPositions,
            0x06 => Opcode::GetRegions,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    Ok = 0,
    AuthFail = 1,
    NotFound = 2,
    Malformed = 3,
}

impl Status {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0 => Status::Ok,
            1 => Status::AuthFail,
            2 => Status::NotFound,
            3 => Status::Malformed,
            _ => return None,
        })
    }
}

pub fn write_frame(w: &mut impl Write, tag: u8, payload: &[u8]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(5 + payload.len());
    buf.push(tag);
    buf.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    buf.extend_from_slice(payload);
    w.write_all(&buf)
}

/// Reads one frame. Oversized lengths are reported as `InvalidData`
/// without reading the payload.
pub fn read_frame(r: &mut impl Read) -> io::Result<(u8, Vec<u8>)> {
    let mut head = [0u8; 5];
    r.read_exact(&mut head)?;
    let len = u32::from_le_bytes([head[1], head[2], head[3], head[4]]) as usize;
    if len > MAX_PAYLOAD {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame length {len} exceeds limit"),
        ));
    }
    let mut payload = Vec::with_capacity(len.min(1 << 16));
    r.take(len as u64).read_to_end(&mut payload)?;
    if payload.len() != len {
        return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated frame"));
    }
    Ok((head[0], payload))
}

pub fn read_magic(r: &mut impl Read) -> io::Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad protocol magic"));
    }
    Ok(())
}

/// Payload builder.
#[derive(Debug, Default)]
pub struct Encoder(pub Vec<u8>);

impl Encoder {
    pub fn new() -> Self {
        Encoder(Vec::new())
    }

    pub fn u32(mut self, v: u32) -> Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn str(mut self, s: &str) -> Self {
        self.0.extend_from_slice(&(s.len() as u32).to_le_bytes());
        self.0.extend_from_slice(s.as_bytes());
        self
    }

    pub fn u32s(mut self, vs: &[u32]) -> Self {
        self = self.u32(vs.len() as u32);
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.0
    }
}

/// Payload reader; every accessor fails on truncated input.
#[derive(Debug)]
pub struct Decoder<'a> {
    buf: &'a [u8],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncated;

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], Truncated> {
        if self.buf.len() < n {
            return Err(Truncated);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    pub fn u32(&mut self) -> Result<u32, Truncated> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn str(&mut self) -> Result<&'a str, Truncated> {
        let len = self.u32()? as usize;
        std::str::from_utf8(self.take(len)?).map_err(|_| Truncated)
    }

    pub fn u32s(&mut self) -> Result<Vec<u32>, Truncated> {
        let n = self.u32()? as usize;
        let bytes = self.take(n.checked_mul(4).ok_or(Truncated)?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }

    /// Succeeds only if the whole payload was consumed.
    pub fn end(&self) -> Result<(), Truncated> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Truncated)
        }
    }
}
