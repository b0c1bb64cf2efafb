//! The GWFR frame format.
//!
//! ```text
//! offset size field
//!      0    4 magic "GWFR"
//!      4    4 seq          u32, big-endian
//!      8    8 ts_ms        u64, big-endian
//!     16    2 width        u16, big-endian, > 0
//!     18    2 height       u16, big-endian, > 0
//!     20    1 encoding     0 = raw RGB8, 1 = run-length RGB8
//!     21    4 payload_len  u32, big-endian
//!     25    … payload
//! ```
//!
//! Raw payload: `width * height * 3` bytes, rows top to bottom.
//! Run-length payload: a sequence of 4-byte runs `count r g b` with
//! `count` in 1..=255, covering exactly `width * height` pixels.
//! A frame is exactly `25 + payload_len` bytes.

use thiserror::Error;

use crate::raster::Raster;

pub const MAGIC: [u8; 4] = *b"GWFR";
pub const HEADER_LEN: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Encoding {
    Raw = 0,
    RunLength = 1,
}

impl Encoding {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(Encoding::Raw),
            1 => Some(Encoding::RunLength),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub seq: u32,
    pub ts_ms: u64,
    pub width: u16,
    pub height: u16,
    pub encoding: Encoding,
    pub payload_len: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("bad magic")]
    BadMagic,
    #[error("truncated frame: need {needed} bytes, have {got}")]
    TruncatedFrame { needed: usize, got: usize },
    #[error("unknown encoding {0}")]
    UnknownEncoding(u8),
    #[error("zero width or height")]
    EmptyRaster,
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("corrupt payload: {0}")]
    CorruptPayload(&'static str),
}

pub fn encode_frame(raster: &Raster, seq: u32, ts_ms: u64, encoding: Encoding) -> Vec<u8> {
    let payload = match encoding {
        Encoding::Raw => raster.pixels().to_vec(),
        Encoding::RunLength => rle_encode(raster.pixels()),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&seq.to_be_bytes());
    out.extend_from_slice(&ts_ms.to_be_bytes());
    out.extend_from_slice(&raster.width().to_be_bytes());
    out.extend_from_slice(&raster.height().to_be_bytes());
    out.push(encoding as u8);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

pub fn decode_header(bytes: &[u8]) -> Result<FrameHeader, FrameError> {
    if bytes.len() >= 4 && bytes[..4] != MAGIC {
        return Err(FrameError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FrameError::TruncatedFrame {
            needed: HEADER_LEN,
            got: bytes.len(),
        });
    }
    let be32 = |o: usize| u32::from_be_bytes(bytes[o..o + 4].try_into().unwrap());
    let be16 = |o: usize| u16::from_be_bytes(bytes[o..o + 2].try_into().unwrap());
    let encoding = Encoding::from_u8(bytes[20]).ok_or(FrameError::UnknownEncoding(bytes[20]))?;
    let h = FrameHeader {
        seq: be32(4),
        ts_ms: u64::from_be_bytes(bytes[8..16].try_into().unwrap()),
        width: be16(16),
        height: be16(18),
        encoding,
        payload_len: be32(21),
    };
    if h.width == 0 || h.height == 0 {
        return Err(FrameError::EmptyRaster);
    }
    Ok(h)
}

/// Sequence number of an encoded frame, without decoding the payload.
pub fn frame_seq(bytes: &[u8]) -> Option<u32> {
    decode_header(bytes).ok().map(|h| h.seq)
}

pub fn decode_frame(bytes: &[u8]) -> Result<(FrameHeader, Raster), FrameError> {
    let h = decode_header(bytes)?;
    let total = HEADER_LEN + h.payload_len as usize;
    if bytes.len() < total {
        return Err(FrameError::TruncatedFrame {
            needed: total,
            got: bytes.len(),
        });
    }
    if bytes.len() > total {
        return Err(FrameError::TrailingBytes(bytes.len() - total));
    }
    let payload = &bytes[HEADER_LEN..];
    let n = h.width as usize * h.height as usize * 3;
    let pixels = match h.encoding {
        Encoding::Raw => {
            if payload.len() != n {
                return Err(FrameError::CorruptPayload("raw payload size does not match dimensions"));
            }
            payload.to_vec()
        }
        Encoding::RunLength => rle_decode(payload, n)?,
    };
    let raster = Raster::from_pixels(h.width, h.height, pixels).expect("length checked");
    Ok((h, raster))
}

fn rle_encode(px: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < px.len() {
        let c = &px[i..i + 3];
        let mut run = 1;
        while run < 255 && i + run * 3 < px.len() && &px[i + run * 3..i + run * 3 + 3] == c {
            run += 1;
        }
        out.push(run as u8);
        out.extend_from_slice(c);
        i += run * 3;
    }
    out
}

fn rle_decode(payload: &[u8], n: usize) -> Result<Vec<u8>, FrameError> {
    if !payload.len().is_multiple_of(4) {
        return Err(FrameError::CorruptPayload("run-length payload is not a whole number of runs"));
    }
    let mut out = Vec::with_capacity(n);
    for run in payload.chunks_exact(4) {
        if run[0] == 0 {
            return Err(FrameError::CorruptPayload("zero-length run"));
        }
        if out.len() + run[0] as usize * 3 > n {
            return Err(FrameError::CorruptPayload("runs overflow the raster"));
        }
        for _ in 0..run[0] {
            out.extend_from_slice(&run[1..4]);
        }
    }
    if out.len() != n {
        return Err(FrameError::CorruptPayload("runs do not cover the raster"));
    }
    Ok(out)
}
