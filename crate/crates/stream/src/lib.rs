//! Server-authoritative frames: a 2-D renderer, the GWFR wire format and
//! a newest-wins pacer.

pub mod frame;
pub mod pacer;
pub mod raster;
pub mod render;

pub use frame::{decode_frame, decode_header, encode_frame, frame_seq, Encoding, FrameError, FrameHeader, HEADER_LEN};
pub use pacer::Pacer;
pub use raster::{Raster, Rgb};
pub use render::{render, Projection};

/// Default viewport and rate.
pub const DEFAULT_WIDTH: u16 = 320;
pub const DEFAULT_HEIGHT: u16 = 240;
pub const DEFAULT_FPS: u32 = 30;
