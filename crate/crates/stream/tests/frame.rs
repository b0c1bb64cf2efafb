use gewu_stream::frame::MAGIC;
use gewu_stream::{decode_frame, encode_frame, frame_seq, Encoding, FrameError, Raster, HEADER_LEN};
use proptest::prelude::*;

fn raster_strategy() -> impl Strategy<Value = Raster> {
    (1u16..40, 1u16..40, 1usize..5).prop_flat_map(|(w, h, palette)| {
        // A small palette makes runs likely; one colour per pixel index.
        prop::collection::vec(0..palette, w as usize * h as usize).prop_map(move |idx| {
            let colours: [[u8; 3]; 5] = [[0, 0, 0], [255, 0, 0], [12, 200, 7], [255, 255, 255], [1, 2, 3]];
            let px = idx.iter().flat_map(|i| colours[*i]).collect();
            Raster::from_pixels(w, h, px).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn both_encodings_round_trip(r in raster_strategy(), seq in any::<u32>(), ts in any::<u64>()) {
        for enc in [Encoding::Raw, Encoding::RunLength] {
            let bytes = encode_frame(&r, seq, ts, enc);
            let (h, back) = decode_frame(&bytes).unwrap();
            prop_assert_eq!(&back, &r);
            prop_assert_eq!((h.seq, h.ts_ms, h.width, h.height, h.encoding), (seq, ts, r.width(), r.height(), enc));
            prop_assert_eq!(h.payload_len as usize, bytes.len() - HEADER_LEN);
        }
    }

    #[test]
    fn noise_round_trips(w in 1u16..30, h in 1u16..30, seed in any::<u64>()) {
        let mut x = seed | 1;
        let px: Vec<u8> = (0..w as usize * h as usize * 3)
            .map(|_| { x ^= x << 13; x ^= x >> 7; x ^= x << 17; x as u8 })
            .collect();
        let r = Raster::from_pixels(w, h, px).unwrap();
        for enc in [Encoding::Raw, Encoding::RunLength] {
            prop_assert_eq!(decode_frame(&encode_frame(&r, 1, 2, enc)).unwrap().1, r.clone());
        }
    }

    #[test]
    fn every_strict_prefix_is_truncated(r in raster_strategy(), cut in 0.0f64..1.0) {
        let bytes = encode_frame(&r, 0, 0, Encoding::RunLength);
        let n = ((bytes.len() as f64) * cut) as usize;
        let err = decode_frame(&bytes[..n]).unwrap_err();
        prop_assert!(matches!(err, FrameError::TruncatedFrame { .. }), "{err:?} at {n}");
    }
}

#[test]
fn header_layout_is_big_endian() {
    let r = Raster::new(2, 1, [9, 8, 7]);
    let b = encode_frame(&r, 0x0102_0304, 0x0A0B_0C0D_0E0F_1011, Encoding::Raw);
    assert_eq!(&b[..4], b"GWFR");
    assert_eq!(&b[4..8], &[1, 2, 3, 4]);
    assert_eq!(&b[8..16], &[0x0A, 0x0B, 0x0C, 0x0D, 0x0E, 0x0F, 0x10, 0x11]);
    assert_eq!(&b[16..18], &[0, 2]);
    assert_eq!(&b[18..20], &[0, 1]);
    assert_eq!(b[20], 0);
    assert_eq!(&b[21..25], &[0, 0, 0, 6]);
    assert_eq!(&b[25..], &[9, 8, 7, 9, 8, 7]);
    assert_eq!(frame_seq(&b), Some(0x0102_0304));
}

#[test]
fn solid_red_8x8_run_length_is_small() {
    let r = Raster::new(8, 8, [255, 0, 0]);
    let b = encode_frame(&r, 1, 0, Encoding::RunLength);
    let payload = b.len() - HEADER_LEN;
    // 64 pixels fit one run: a single 4-byte record.
    assert_eq!(payload, 4);
    assert!(payload < 8 * 8 * 3);
    assert_eq!(decode_frame(&b).unwrap().1, r);
    // Runs cap at 255 pixels.
    let big = Raster::new(16, 16, [1, 1, 1]);
    assert_eq!(encode_frame(&big, 0, 0, Encoding::RunLength).len() - HEADER_LEN, 8);
}

#[test]
fn malformed_frames() {
    let r = Raster::new(3, 3, [0, 0, 0]);
    let mut b = encode_frame(&r, 0, 0, Encoding::Raw);
    assert_eq!(decode_frame(&b[..10]), Err(FrameError::TruncatedFrame { needed: HEADER_LEN, got: 10 }));
    let mut bad = b.clone();
    bad[0] = b'X';
    assert_eq!(decode_frame(&bad), Err(FrameError::BadMagic));
    let mut bad = b.clone();
    bad[20] = 7;
    assert_eq!(decode_frame(&bad), Err(FrameError::UnknownEncoding(7)));
    let mut bad = b.clone();
    bad[16..18].copy_from_slice(&[0, 0]);
    assert_eq!(decode_frame(&bad), Err(FrameError::EmptyRaster));
    b.push(0);
    assert_eq!(decode_frame(&b), Err(FrameError::TrailingBytes(1)));
    assert_eq!(MAGIC, *b"GWFR");

    // A run-length payload that under-covers the raster.
    let mut rle = encode_frame(&r, 0, 0, Encoding::RunLength);
    rle[HEADER_LEN] = 8;
    assert!(matches!(decode_frame(&rle), Err(FrameError::CorruptPayload(_))));
}
