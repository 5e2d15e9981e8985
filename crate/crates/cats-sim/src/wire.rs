//! On-wire framing: segment headers and the priority option.
//!
//! Segments travel through the simulator as structs; this module defines the
//! bit-exact byte layout used for size accounting, hex dumps, and roundtrip
//! checks. The frame is a 20-byte network header followed by a 20-byte
//! transport header, then options padded with no-ops to a 4-byte boundary:
//!
//! ```text
//!  0                   1                   2                   3
//!  0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |Version|  IHL  |      TOS      |         Total Length          |
//! |         Identification        |      Flags + Frag Offset      |
//! |      TTL      |   Protocol    |        Header Checksum        |
//! |                         Source Address                        |
//! |                       Destination Address                     |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |          Source Port          |        Destination Port       |
//! |                        Sequence Number                        |
//! |                     Acknowledgment Number                     |
//! | Offset|Rsrvd|     Flags       |            Window             |
//! |            Checksum           |         Urgent Pointer        |
//! |                     Options + NOP padding                     |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! ```
//!
//! The priority option is `[kind=254, len=3, level]` with level in 0..=4,
//! padded to 4 bytes on the wire. Checksums are carried as zero; loss comes
//! from queue drops in the link model, not corruption.

use bytes::Bytes;
use thiserror::Error;

use crate::conductor::Priority;

/// Fixed network + transport header bytes, excluding options.
pub const BASE_HEADER_LEN: usize = 40;
/// Option kind carrying the chunk priority level.
pub const PRIORITY_OPTION_KIND: u8 = 254;
/// Encoded length of the priority option before padding.
pub const PRIORITY_OPTION_LEN: u8 = 3;

const OPT_END: u8 = 0;
const OPT_NOP: u8 = 1;

const NET_PROTO: u8 = 6;
const SRC_PORT: u16 = 49_500;
const DST_PORT: u16 = 443;
const WINDOW: u16 = 65_535;

#[derive(Clone, Copy, PartialEq, Eq, Default, Debug)]
pub struct SegmentFlags {
    pub syn: bool,
    pub ack: bool,
    pub fin: bool,
}

impl SegmentFlags {
    pub const SYN: SegmentFlags = SegmentFlags { syn: true, ack: false, fin: false };
    pub const ACK: SegmentFlags = SegmentFlags { syn: false, ack: true, fin: false };
    pub const SYN_ACK: SegmentFlags = SegmentFlags { syn: true, ack: true, fin: false };

    fn to_byte(self) -> u8 {
        (self.fin as u8) | (self.syn as u8) << 1 | (self.ack as u8) << 4
    }

    fn from_byte(b: u8) -> SegmentFlags {
        SegmentFlags {
            fin: b & 0x01 != 0,
            syn: b & 0x02 != 0,
            ack: b & 0x10 != 0,
        }
    }
}

/// Transport header fields carried by every segment.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SegmentHeader {
    pub seq: u32,
    pub ack: u32,
    pub flags: SegmentFlags,
    /// Priority tag for data segments of a tagged chunk; None emits no option.
    pub priority: Option<Priority>,
}

/// A segment as it moves through the simulator: header plus payload bytes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Segment {
    pub header: SegmentHeader,
    pub payload: Bytes,
}

impl Segment {
    pub fn data(seq: u32, payload: Bytes, priority: Option<Priority>) -> Segment {
        Segment {
            header: SegmentHeader { seq, ack: 0, flags: SegmentFlags::ACK, priority },
            payload,
        }
    }

    pub fn control(flags: SegmentFlags, ack: u32) -> Segment {
        Segment {
            header: SegmentHeader { seq: 0, ack, flags, priority: None },
            payload: Bytes::new(),
        }
    }

    /// Total bytes this segment occupies on a link.
    pub fn wire_len(&self) -> usize {
        BASE_HEADER_LEN + padded_options_len(&self.header) + self.payload.len()
    }
}

/// Options length after padding to a 4-byte multiple.
pub fn padded_options_len(header: &SegmentHeader) -> usize {
    match header.priority {
        Some(_) => 4,
        None => 0,
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum WireError {
    #[error("frame truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("bad version/ihl byte {0:#04x}")]
    BadVersion(u8),
    #[error("total length field {field} disagrees with frame length {actual}")]
    LengthMismatch { field: u16, actual: usize },
    #[error("transport offset {0} outside frame")]
    BadOffset(usize),
    #[error(transparent)]
    Option(#[from] PriorityOptionError),
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum PriorityOptionError {
    #[error("option kind {0} is not the priority option")]
    NotPriorityKind(u8),
    #[error("priority option carries length {0}, expected 3")]
    BadLength(u8),
    #[error("priority level {0} out of range")]
    BadLevel(u8),
    #[error("option truncated")]
    Truncated,
}

/// Encode the 3-byte priority option (without padding).
pub fn encode_priority_option(p: Priority) -> [u8; 3] {
    [PRIORITY_OPTION_KIND, PRIORITY_OPTION_LEN, p.level()]
}

/// Decode one priority option from the start of `b`.
pub fn decode_priority_option(b: &[u8]) -> Result<Priority, PriorityOptionError> {
    if b.is_empty() {
        return Err(PriorityOptionError::Truncated);
    }
    if b[0] != PRIORITY_OPTION_KIND {
        return Err(PriorityOptionError::NotPriorityKind(b[0]));
    }
    if b.len() < 3 {
        return Err(PriorityOptionError::Truncated);
    }
    if b[1] != PRIORITY_OPTION_LEN {
        return Err(PriorityOptionError::BadLength(b[1]));
    }
    Priority::new(b[2]).map_err(|_| PriorityOptionError::BadLevel(b[2]))
}

/// Serialize a segment into its exact wire bytes.
pub fn encode_segment(seg: &Segment) -> Vec<u8> {
    let opts_padded = padded_options_len(&seg.header);
    let total = BASE_HEADER_LEN + opts_padded + seg.payload.len();
    let mut out = Vec::with_capacity(total);

    // Network header.
    out.push(0x45);
    out.push(0);
    out.extend_from_slice(&(total as u16).to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes()); // identification
    out.extend_from_slice(&0u16.to_be_bytes()); // flags + fragment offset
    out.push(64); // ttl
    out.push(NET_PROTO);
    out.extend_from_slice(&0u16.to_be_bytes()); // checksum (not modeled)
    out.extend_from_slice(&[10, 0, 0, 1]);
    out.extend_from_slice(&[10, 0, 0, 2]);

    // Transport header.
    out.extend_from_slice(&SRC_PORT.to_be_bytes());
    out.extend_from_slice(&DST_PORT.to_be_bytes());
    out.extend_from_slice(&seg.header.seq.to_be_bytes());
    out.extend_from_slice(&seg.header.ack.to_be_bytes());
    let data_offset = ((20 + opts_padded) / 4) as u8;
    out.push(data_offset << 4);
    out.push(seg.header.flags.to_byte());
    out.extend_from_slice(&WINDOW.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes()); // checksum (not modeled)
    out.extend_from_slice(&0u16.to_be_bytes()); // urgent pointer

    if let Some(p) = seg.header.priority {
        out.extend_from_slice(&encode_priority_option(p));
        out.push(OPT_NOP);
    }
    out.extend_from_slice(&seg.payload);
    debug_assert_eq!(out.len(), total);
    out
}

/// Parse wire bytes produced by [`encode_segment`] back into a segment.
pub fn decode_segment(frame: &[u8]) -> Result<Segment, WireError> {
    if frame.len() < BASE_HEADER_LEN {
        return Err(WireError::Truncated { need: BASE_HEADER_LEN, have: frame.len() });
    }
    if frame[0] != 0x45 {
        return Err(WireError::BadVersion(frame[0]));
    }
    let total = u16::from_be_bytes([frame[2], frame[3]]);
    if total as usize != frame.len() {
        return Err(WireError::LengthMismatch { field: total, actual: frame.len() });
    }
    let t = &frame[20..];
    let seq = u32::from_be_bytes([t[4], t[5], t[6], t[7]]);
    let ack = u32::from_be_bytes([t[8], t[9], t[10], t[11]]);
    let data_offset = ((t[12] >> 4) as usize) * 4;
    if data_offset < 20 || 20 + data_offset > frame.len() {
        return Err(WireError::BadOffset(data_offset));
    }
    let flags = SegmentFlags::from_byte(t[13]);
    let mut priority = None;
    let mut opts = &t[20..data_offset];
    while let Some(&kind) = opts.first() {
        match kind {
            OPT_END => break,
            OPT_NOP => opts = &opts[1..],
            PRIORITY_OPTION_KIND => {
                priority = Some(decode_priority_option(opts)?);
                opts = &opts[3..];
            }
            _ => {
                // Unknown option: skip by its declared length.
                if opts.len() < 2 {
                    return Err(PriorityOptionError::Truncated.into());
                }
                let len = opts[1] as usize;
                if len < 2 || len > opts.len() {
                    return Err(PriorityOptionError::Truncated.into());
                }
                opts = &opts[len..];
            }
        }
    }
    let payload = Bytes::copy_from_slice(&frame[20 + data_offset..]);
    Ok(Segment { header: SegmentHeader { seq, ack, flags, priority }, payload })
}

/// Hex dump of a segment's wire bytes, 16 per line, for debug traces.
pub fn hex_dump(seg: &Segment) -> String {
    let bytes = encode_segment(seg);
    let mut out = String::new();
    for (i, chunk) in bytes.chunks(16).enumerate() {
        out.push_str(&format!("{:04x}: ", i * 16));
        for b in chunk {
            out.push_str(&format!("{b:02x} "));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn priority_option_levels_roundtrip() {
        for level in 0..=4u8 {
            let p = Priority::new(level).unwrap();
            let enc = encode_priority_option(p);
            assert_eq!(enc, [254, 3, level]);
            assert_eq!(decode_priority_option(&enc).unwrap(), p);
        }
    }

    #[test]
    fn priority_option_malformed_length_rejected() {
        assert_eq!(
            decode_priority_option(&[254, 4, 0]),
            Err(PriorityOptionError::BadLength(4))
        );
    }

    #[test]
    fn priority_option_out_of_range_level_rejected() {
        assert_eq!(
            decode_priority_option(&[254, 3, 9]),
            Err(PriorityOptionError::BadLevel(9))
        );
    }

    #[test]
    fn foreign_option_kind_reports_not_this_option() {
        assert_eq!(
            decode_priority_option(&[8, 10, 0]),
            Err(PriorityOptionError::NotPriorityKind(8))
        );
    }

    #[test]
    fn tagged_data_segment_occupies_padded_option_space() {
        let seg = Segment::data(0, Bytes::from(vec![0u8; 100]), Some(Priority::P2));
        // 40 fixed + 4 padded option bytes + payload.
        assert_eq!(seg.wire_len(), 144);
        let bytes = encode_segment(&seg);
        assert_eq!(bytes.len(), 144);
        // Option bytes sit right after the 40-byte fixed header, NOP padded.
        assert_eq!(&bytes[40..44], &[254, 3, 2, OPT_NOP]);
    }

    #[test]
    fn untagged_segment_has_no_options() {
        let seg = Segment::control(SegmentFlags::ACK, 99);
        assert_eq!(seg.wire_len(), BASE_HEADER_LEN);
        let dec = decode_segment(&encode_segment(&seg)).unwrap();
        assert_eq!(dec, seg);
    }

    #[test]
    fn truncated_frame_rejected() {
        let seg = Segment::data(1, Bytes::from_static(b"abc"), None);
        let bytes = encode_segment(&seg);
        assert!(matches!(
            decode_segment(&bytes[..30]),
            Err(WireError::Truncated { .. })
        ));
        // Cutting payload breaks the length field check.
        assert!(matches!(
            decode_segment(&bytes[..bytes.len() - 1]),
            Err(WireError::LengthMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn segment_roundtrip(
            seq in any::<u32>(),
            ack in any::<u32>(),
            syn in any::<bool>(),
            ack_flag in any::<bool>(),
            fin in any::<bool>(),
            prio in proptest::option::of(0u8..=4),
            payload in proptest::collection::vec(any::<u8>(), 0..1448),
        ) {
            let seg = Segment {
                header: SegmentHeader {
                    seq,
                    ack,
                    flags: SegmentFlags { syn, ack: ack_flag, fin },
                    priority: prio.map(|p| Priority::new(p).unwrap()),
                },
                payload: Bytes::from(payload),
            };
            let bytes = encode_segment(&seg);
            prop_assert_eq!(bytes.len(), seg.wire_len());
            let dec = decode_segment(&bytes).unwrap();
            prop_assert_eq!(dec, seg);
        }
    }
}
