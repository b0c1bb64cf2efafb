//! RelayedStream framing.
//!
//! ```text
//! +----------------+--------+-----------------+
//! | length: u32 BE | lane:u8| payload         |
//! +----------------+--------+-----------------+
//! ```
//!
//! `length` counts the lane byte plus the payload, so an empty payload has
//! length 1. Lanes: 0 = control, 1 = media, 2 = signaling.

use std::io::{self, Read, Write};

use crate::error::TransportError;

/// Largest accepted `length` (lane byte + payload).
pub const MAX_FRAME: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lane {
    Control = 0,
    Media = 1,
    Signaling = 2,
}

impl Lane {
    pub const ALL: [Lane; 3] = [Lane::Control, Lane::Media, Lane::Signaling];

    pub fn from_u8(b: u8) -> Option<Lane> {
        match b {
            0 => Some(Lane::Control),
            1 => Some(Lane::Media),
            2 => Some(Lane::Signaling),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Appends one frame to `out`.
pub fn encode_into(out: &mut Vec<u8>, lane: Lane, payload: &[u8]) {
    let len = (payload.len() + 1) as u32;
    out.extend_from_slice(&len.to_be_bytes());
    out.push(lane as u8);
    out.extend_from_slice(payload);
}

pub fn encode(lane: Lane, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 5);
    encode_into(&mut out, lane, payload);
    out
}

/// Incremental decoder for a byte stream.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    start: usize,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.start > 0 && self.start == self.buf.len() {
            self.buf.clear();
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete frame, if any.
    pub fn next_frame(&mut self) -> Result<Option<(Lane, Vec<u8>)>, TransportError> {
        let avail = &self.buf[self.start..];
        if avail.len() < 4 {
            return Ok(None);
        }
        let len = u32::from_be_bytes(avail[..4].try_into().unwrap()) as usize;
        if len == 0 || len > MAX_FRAME {
            return Err(TransportError::BadFrame(format!("length {len}")));
        }
        if avail.len() < 4 + len {
            return Ok(None);
        }
        let lane = Lane::from_u8(avail[4]).ok_or_else(|| TransportError::BadFrame(format!("lane {}", avail[4])))?;
        let payload = avail[5..4 + len].to_vec();
        self.start += 4 + len;
        if self.start > 64 * 1024 && self.start * 2 > self.buf.len() {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        Ok(Some((lane, payload)))
    }

    /// Bytes held that do not yet form a frame.
    pub fn buffered(&self) -> usize {
        self.buf.len() - self.start
    }
}

/// Blocking read of one frame. `Ok(None)` on clean EOF at a frame boundary.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<(Lane, Vec<u8>)>, TransportError> {
    let mut head = [0u8; 4];
    match r.read_exact(&mut head[..1]) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    r.read_exact(&mut head[1..])?;
    let len = u32::from_be_bytes(head) as usize;
    if len == 0 || len > MAX_FRAME {
        return Err(TransportError::BadFrame(format!("length {len}")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    let lane = Lane::from_u8(body[0]).ok_or_else(|| TransportError::BadFrame(format!("lane {}", body[0])))?;
    body.remove(0);
    Ok(Some((lane, body)))
}

pub fn write_frame<W: Write>(w: &mut W, lane: Lane, payload: &[u8]) -> Result<(), TransportError> {
    w.write_all(&encode(lane, payload))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_layout() {
        assert_eq!(encode(Lane::Media, b"ab"), vec![0, 0, 0, 3, 1, b'a', b'b']);
        assert_eq!(encode(Lane::Signaling, b""), vec![0, 0, 0, 1, 2]);
    }

    #[test]
    fn decoder_handles_split_input() {
        let mut stream = encode(Lane::Control, b"hello");
        stream.extend(encode(Lane::Media, &[9; 300]));
        let mut d = FrameDecoder::new();
        let mut got = Vec::new();
        for b in &stream {
            d.push(std::slice::from_ref(b));
            while let Some(f) = d.next_frame().unwrap() {
                got.push(f);
            }
        }
        assert_eq!(got, vec![(Lane::Control, b"hello".to_vec()), (Lane::Media, vec![9; 300])]);
        assert_eq!(d.buffered(), 0);
    }

    #[test]
    fn rejects_bad_lane_and_length() {
        let mut d = FrameDecoder::new();
        d.push(&[0, 0, 0, 1, 7]);
        assert!(d.next_frame().is_err());
        let mut d = FrameDecoder::new();
        d.push(&[0, 0, 0, 0]);
        assert!(d.next_frame().is_err());
        assert!(read_frame(&mut &[0xff, 0xff, 0xff, 0xff][..]).is_err());
    }

    #[test]
    fn read_write_roundtrip_and_eof() {
        let mut buf = Vec::new();
        write_frame(&mut buf, Lane::Signaling, b"{}").unwrap();
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap(), Some((Lane::Signaling, b"{}".to_vec())));
        assert_eq!(read_frame(&mut r).unwrap(), None);
        // Truncated mid-frame is an error, not EOF.
        assert!(read_frame(&mut &buf[..3]).is_err());
    }
}
