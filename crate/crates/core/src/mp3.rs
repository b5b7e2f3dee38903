//! MP3 container walking: ID3v2 tag, frame sequence, ID3v1 tag.
//!
//! Frame header layout (32 bits):
//!
//! ```text
//! AAAAAAAA AAABBCCD EEEEFFGH IIJJKLMM
//! A sync (11)   B version (2)  C layer (2)    D protection (1, 0 = CRC present)
//! E bitrate (4) F sample rate (2) G padding   H private
//! I channel (2) J mode ext (2) K copyright  L original  M emphasis (2)
//! ```
//!
//! Only Layer III frames are walked. Audio data is never decoded; the
//! payload is always the file's raw bytes.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Mp3Error {
    #[error("frame sync bits not set")]
    NoSync,
    #[error("reserved MPEG version index")]
    ReservedVersion,
    #[error("reserved layer index")]
    ReservedLayer,
    #[error("invalid bitrate index {0}")]
    BadBitrate(u8),
    #[error("reserved sample-rate index")]
    ReservedSampleRate,
    #[error("frame length is only defined for Layer III, got {0:?}")]
    UnsupportedLayer(Layer),
    #[error("no valid MP3 frame found")]
    NotMp3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpegVersion {
    Mpeg1,
    Mpeg2,
    Mpeg2_5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    I,
    II,
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    Stereo,
    JointStereo,
    DualChannel,
    Mono,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mp3FrameHeader {
    pub mpeg_version: MpegVersion,
    pub layer: Layer,
    pub crc_protected: bool,
    pub bitrate_kbps: u32,
    pub sample_rate_hz: u32,
    pub padding: bool,
    pub private_bit: bool,
    pub channel_mode: ChannelMode,
    pub mode_extension: u8,
    pub copyright: bool,
    pub original: bool,
    pub emphasis: u8,
}

// kbps, index 0 (free) and 15 (bad) are rejected before lookup
const BITRATE_V1_L1: [u32; 16] = [
    0, 32, 64, 96, 128, 160, 192, 224, 256, 288, 320, 352, 384, 416, 448, 0,
];
const BITRATE_V1_L2: [u32; 16] = [
    0, 32, 48, 56, 64, 80, 96, 112, 128, 160, 192, 224, 256, 320, 384, 0,
];
const BITRATE_V1_L3: [u32; 16] = [
    0, 32, 40, 48, 56, 64, 80, 96, 112, 128, 160, 192, 224, 256, 320, 0,
];
const BITRATE_V2_L1: [u32; 16] = [
    0, 32, 48, 56, 64, 80, 96, 112, 128, 144, 160, 176, 192, 224, 256, 0,
];
const BITRATE_V2_L23: [u32; 16] = [
    0, 8, 16, 24, 32, 40, 48, 56, 64, 80, 96, 112, 128, 144, 160, 0,
];

const SAMPLE_RATE_V1: [u32; 3] = [44100, 48000, 32000];
const SAMPLE_RATE_V2: [u32; 3] = [22050, 24000, 16000];
const SAMPLE_RATE_V25: [u32; 3] = [11025, 12000, 8000];

pub fn parse_frame_header(bytes: [u8; 4]) -> Result<Mp3FrameHeader, Mp3Error> {
    let word = u32::from_be_bytes(bytes);
    if word >> 21 != 0x7FF {
        return Err(Mp3Error::NoSync);
    }
    let mpeg_version = match (word >> 19) & 0b11 {
        0b00 => MpegVersion::Mpeg2_5,
        0b10 => MpegVersion::Mpeg2,
        0b11 => MpegVersion::Mpeg1,
        _ => return Err(Mp3Error::ReservedVersion),
    };
    let layer = match (word >> 17) & 0b11 {
        0b01 => Layer::III,
        0b10 => Layer::II,
        0b11 => Layer::I,
        _ => return Err(Mp3Error::ReservedLayer),
    };
    let bitrate_index = ((word >> 12) & 0xF) as u8;
    if bitrate_index == 0 || bitrate_index == 15 {
        return Err(Mp3Error::BadBitrate(bitrate_index));
    }
    let table = match (mpeg_version, layer) {
        (MpegVersion::Mpeg1, Layer::I) => &BITRATE_V1_L1,
        (MpegVersion::Mpeg1, Layer::II) => &BITRATE_V1_L2,
        (MpegVersion::Mpeg1, Layer::III) => &BITRATE_V1_L3,
        (_, Layer::I) => &BITRATE_V2_L1,
        (_, _) => &BITRATE_V2_L23,
    };
    let sr_index = ((word >> 10) & 0b11) as usize;
    if sr_index == 3 {
        return Err(Mp3Error::ReservedSampleRate);
    }
    let sample_rate_hz = match mpeg_version {
        MpegVersion::Mpeg1 => SAMPLE_RATE_V1[sr_index],
        MpegVersion::Mpeg2 => SAMPLE_RATE_V2[sr_index],
        MpegVersion::Mpeg2_5 => SAMPLE_RATE_V25[sr_index],
    };
    let channel_mode = match (word >> 6) & 0b11 {
        0 => ChannelMode::Stereo,
        1 => ChannelMode::JointStereo,
        2 => ChannelMode::DualChannel,
        _ => ChannelMode::Mono,
    };
    Ok(Mp3FrameHeader {
        mpeg_version,
        layer,
        crc_protected: (word >> 16) & 1 == 0,
        bitrate_kbps: table[bitrate_index as usize],
        sample_rate_hz,
        padding: (word >> 9) & 1 == 1,
        private_bit: (word >> 8) & 1 == 1,
        channel_mode,
        mode_extension: ((word >> 4) & 0b11) as u8,
        copyright: (word >> 3) & 1 == 1,
        original: (word >> 2) & 1 == 1,
        emphasis: (word & 0b11) as u8,
    })
}

/// Frame size in bytes including the header. Layer III only.
pub fn frame_length(header: &Mp3FrameHeader) -> Result<usize, Mp3Error> {
    if header.layer != Layer::III {
        return Err(Mp3Error::UnsupportedLayer(header.layer));
    }
    // 1152 samples per MPEG-1 frame, 576 for MPEG-2/2.5
    let coefficient: u64 = match header.mpeg_version {
        MpegVersion::Mpeg1 => 144,
        _ => 72,
    };
    let bitrate_bps = header.bitrate_kbps as u64 * 1000;
    let base = coefficient * bitrate_bps / header.sample_rate_hz as u64;
    Ok(base as usize + usize::from(header.padding))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mp3Frame {
    pub header: Mp3FrameHeader,
    pub byte_offset: usize,
    pub byte_length: usize,
}

impl Mp3Frame {
    pub fn range(&self) -> Range<usize> {
        self.byte_offset..self.byte_offset + self.byte_length
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mp3Stream {
    pub id3v2: Option<Range<usize>>,
    pub frames: Vec<Mp3Frame>,
    pub id3v1: Option<Range<usize>>,
    /// Bytes between segments that are neither tags nor frames.
    pub gaps: Vec<Range<usize>>,
    pub raw: Vec<u8>,
}

impl Mp3Stream {
    pub fn frame_bytes(&self) -> usize {
        self.frames.iter().map(|f| f.byte_length).sum()
    }

    /// Every segment and gap, ordered by offset.
    pub fn segments(&self) -> Vec<Range<usize>> {
        let mut all: Vec<Range<usize>> = self
            .id3v2
            .iter()
            .cloned()
            .chain(self.frames.iter().map(Mp3Frame::range))
            .chain(self.id3v1.iter().cloned())
            .chain(self.gaps.iter().cloned())
            .collect();
        all.sort_by_key(|r| r.start);
        all
    }
}

const ID3V1_LEN: usize = 128;

fn id3v2_len(bytes: &[u8]) -> Option<usize> {
    if bytes.len() < 10 || &bytes[..3] != b"ID3" {
        return None;
    }
    let size = &bytes[6..10];
    if size.iter().any(|b| b & 0x80 != 0) {
        return None;
    }
    let body = size.iter().fold(0usize, |acc, &b| (acc << 7) | b as usize);
    let footer = if bytes[5] & 0x10 != 0 { 10 } else { 0 };
    Some((10 + body + footer).min(bytes.len()))
}

fn frame_at(bytes: &[u8], pos: usize, end: usize) -> Option<Mp3Frame> {
    let head: [u8; 4] = bytes.get(pos..pos + 4)?.try_into().ok()?;
    let header = parse_frame_header(head).ok()?;
    let len = frame_length(&header).ok()?;
    if len < 4 || pos + len > end {
        return None;
    }
    Some(Mp3Frame {
        header,
        byte_offset: pos,
        byte_length: len,
    })
}

pub fn parse_mp3(bytes: &[u8]) -> Result<Mp3Stream, Mp3Error> {
    let id3v2 = id3v2_len(bytes).map(|len| 0..len);
    let start = id3v2.as_ref().map_or(0, |r| r.end);
    let id3v1 = (bytes.len() >= start + ID3V1_LEN
        && &bytes[bytes.len() - ID3V1_LEN..bytes.len() - ID3V1_LEN + 3] == b"TAG")
        .then(|| bytes.len() - ID3V1_LEN..bytes.len());
    let end = id3v1.as_ref().map_or(bytes.len(), |r| r.start);

    let mut frames = Vec::new();
    let mut gaps = Vec::new();
    let mut pos = start;
    let mut gap_start: Option<usize> = None;
    while pos < end {
        match frame_at(bytes, pos, end) {
            Some(frame) => {
                if let Some(g) = gap_start.take() {
                    gaps.push(g..pos);
                }
                pos += frame.byte_length;
                frames.push(frame);
            }
            None => {
                gap_start.get_or_insert(pos);
                pos += 1;
            }
        }
    }
    if let Some(g) = gap_start {
        gaps.push(g..end);
    }
    if frames.is_empty() {
        return Err(Mp3Error::NotMp3);
    }
    Ok(Mp3Stream {
        id3v2,
        frames,
        id3v1,
        gaps,
        raw: bytes.to_vec(),
    })
}

/// The bytes to embed: the complete file, tags included.
pub fn to_payload(stream: &Mp3Stream) -> &[u8] {
    &stream.raw
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub valid: bool,
    pub frame_count: usize,
    pub frame_bytes: usize,
    pub gaps: Vec<Range<usize>>,
    pub error: Option<Mp3Error>,
}

/// Re-parses extracted bytes. With `expected_frames`, validity also requires
/// the frame count to match.
pub fn validate_extracted(bytes: &[u8], expected_frames: Option<usize>) -> ValidationReport {
    match parse_mp3(bytes) {
        Ok(stream) => {
            let count = stream.frames.len();
            ValidationReport {
                valid: expected_frames.is_none_or(|n| n == count),
                frame_count: count,
                frame_bytes: stream.frame_bytes(),
                gaps: stream.gaps,
                error: None,
            }
        }
        Err(e) => ValidationReport {
            valid: false,
            frame_count: 0,
            frame_bytes: 0,
            gaps: Vec::new(),
            error: Some(e),
        },
    }
}

/// Deterministic synthetic MP3 files for tests and demos.
///
/// Layout: optional empty ID3v2 tag (10 bytes: `ID3 04 00 00 00 00 00 00`),
/// then `frames` MPEG-1 Layer III frames, each a header
/// `FF FB <bitrate|rate|padding> 00` followed by filler bytes, then an optional
/// 128-byte ID3v1 tag (`TAG` + zeros). Filler byte `i` of frame `f` is
/// `(f * 31 + i * 7) & 0x7F`, which can never form a sync word.
pub mod fixture {
    #[derive(Debug, Clone, Copy)]
    pub struct FixtureSpec {
        pub frames: usize,
        /// MPEG-1 Layer III bitrate index (9 = 128 kbps, 11 = 192 kbps).
        pub bitrate_index: u8,
        pub padding: bool,
        pub id3v2: bool,
        pub id3v1: bool,
    }

    impl Default for FixtureSpec {
        fn default() -> Self {
            Self {
                frames: 1,
                bitrate_index: 9,
                padding: false,
                id3v2: false,
                id3v1: false,
            }
        }
    }

    pub fn synthetic_mp3(spec: FixtureSpec) -> Vec<u8> {
        let mut out = Vec::new();
        if spec.id3v2 {
            out.extend_from_slice(b"ID3\x04\x00\x00\x00\x00\x00\x00");
        }
        let third = (spec.bitrate_index << 4) | (u8::from(spec.padding) << 1);
        let header = [0xFF, 0xFB, third, 0x00];
        let len =
            super::frame_length(&super::parse_frame_header(header).expect("valid fixture header"))
                .expect("layer III");
        for f in 0..spec.frames {
            out.extend_from_slice(&header);
            out.extend((0..len - 4).map(|i| ((f * 31 + i * 7) & 0x7F) as u8));
        }
        if spec.id3v1 {
            out.extend_from_slice(b"TAG");
            out.extend_from_slice(&[0u8; 125]);
        }
        out
    }

    /// Smallest fixture whose length is at least `min_bytes`.
    pub fn synthetic_mp3_at_least(min_bytes: usize) -> Vec<u8> {
        let frames = min_bytes.div_ceil(417).max(1);
        synthetic_mp3(FixtureSpec {
            frames,
            ..FixtureSpec::default()
        })
    }
}
