//! Fixed little-endian message format for instance exchange, and the byte
//! accounting used to report bandwidth.
//!
//! Layout (all little-endian):
//!
//! ```text
//! header   u8  protocol_version (= 1)
//!          u32 sender_id
//!          u32 frame_id
//!          u16 feature_dim  (d)
//!          u16 instance_count
//! record   f32 x d   feature
//!          i32       grid_x
//!          i32       grid_y
//!          f32       score
//! ```
//!
//! A `.msgdump` file is a sequence of `u32` length-prefixed encoded messages.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 13;
/// Bytes per late-fusion box: seven box floats and one score, 32-bit each.
pub const LATE_BOX_BYTES: u64 = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed-header: need {HEADER_LEN} bytes, got {0}")]
    MalformedHeader(usize),
    #[error("version-unsupported: {0}")]
    VersionUnsupported(u8),
    #[error("length-mismatch: expected {expected} payload bytes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid message: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageHeader {
    pub protocol_version: u8,
    pub sender_id: u32,
    pub frame_id: u32,
    pub feature_dim: u16,
    pub instance_count: u16,
}

#[derive(Debug, Clone)]
pub struct InstanceRecord {
    pub feature: Vec<f32>,
    pub grid_x: i32,
    pub grid_y: i32,
    pub score: f32,
}

// Bitwise equality, so NaN payloads still compare equal after a round trip.
impl PartialEq for InstanceRecord {
    fn eq(&self, other: &Self) -> bool {
        self.grid_x == other.grid_x
            && self.grid_y == other.grid_y
            && self.score.to_bits() == other.score.to_bits()
            && self.feature.len() == other.feature.len()
            && self.feature.iter().zip(&other.feature).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentMessage {
    pub header: MessageHeader,
    pub records: Vec<InstanceRecord>,
}

impl AgentMessage {
    /// Build a message, filling in the header counts from `records`.
    pub fn new(sender_id: u32, frame_id: u32, feature_dim: usize, records: Vec<InstanceRecord>) -> Result<Self, WireError> {
        let msg = AgentMessage {
            header: MessageHeader {
                protocol_version: PROTOCOL_VERSION,
                sender_id,
                frame_id,
                feature_dim: u16::try_from(feature_dim)
                    .map_err(|_| WireError::Invalid(format!("feature_dim {feature_dim} exceeds u16")))?,
                instance_count: u16::try_from(records.len())
                    .map_err(|_| WireError::Invalid(format!("{} records exceed u16", records.len())))?,
            },
            records,
        };
        msg.validate()?;
        Ok(msg)
    }

    pub fn validate(&self) -> Result<(), WireError> {
        if self.header.protocol_version != PROTOCOL_VERSION {
            return Err(WireError::VersionUnsupported(self.header.protocol_version));
        }
        if usize::from(self.header.instance_count) != self.records.len() {
            return Err(WireError::Invalid("instance_count does not match record count".into()));
        }
        let d = usize::from(self.header.feature_dim);
        if let Some(r) = self.records.iter().find(|r| r.feature.len() != d) {
            return Err(WireError::Invalid(format!("record has {} features, header says {d}", r.feature.len())));
        }
        Ok(())
    }

    pub fn record_len(&self) -> usize {
        record_len(usize::from(self.header.feature_dim))
    }

    /// Bytes after the header.
    pub fn payload_bytes(&self) -> u64 {
        (self.records.len() * self.record_len()) as u64
    }

    /// Feature bytes only: `instance_count * 4d`.
    pub fn feature_bytes(&self) -> u64 {
        self.records.len() as u64 * 4 * u64::from(self.header.feature_dim)
    }

    pub fn total_bytes(&self) -> u64 {
        HEADER_LEN as u64 + self.payload_bytes()
    }
}

fn record_len(d: usize) -> usize {
    4 * d + 12
}

pub fn encode(msg: &AgentMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(msg.total_bytes() as usize);
    let h = &msg.header;
    out.push(h.protocol_version);
    out.extend_from_slice(&h.sender_id.to_le_bytes());
    out.extend_from_slice(&h.frame_id.to_le_bytes());
    out.extend_from_slice(&h.feature_dim.to_le_bytes());
    out.extend_from_slice(&h.instance_count.to_le_bytes());
    for r in &msg.records {
        for f in &r.feature {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out.extend_from_slice(&r.grid_x.to_le_bytes());
        out.extend_from_slice(&r.grid_y.to_le_bytes());
        out.extend_from_slice(&r.score.to_le_bytes());
    }
    out
}

fn le4(b: &[u8]) -> [u8; 4] {
    [b[0], b[1], b[2], b[3]]
}

pub fn decode(bytes: &[u8]) -> Result<AgentMessage, WireError> {
    if bytes.len() < HEADER_LEN {
        return Err(WireError::MalformedHeader(bytes.len()));
    }
    let version = bytes[0];
    if version != PROTOCOL_VERSION {
        return Err(WireError::VersionUnsupported(version));
    }
    let header = MessageHeader {
        protocol_version: version,
        sender_id: u32::from_le_bytes(le4(&bytes[1..5])),
        frame_id: u32::from_le_bytes(le4(&bytes[5..9])),
        feature_dim: u16::from_le_bytes([bytes[9], bytes[10]]),
        instance_count: u16::from_le_bytes([bytes[11], bytes[12]]),
    };
    let d = usize::from(header.feature_dim);
    let rl = record_len(d);
    let expected = usize::from(header.instance_count) * rl;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(WireError::LengthMismatch {
            expected,
            actual: payload.len(),
        });
    }
    let records = payload
        .chunks_exact(rl)
        .map(|chunk| {
            let feature = chunk[..4 * d]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(le4(b)))
                .collect();
            let tail = &chunk[4 * d..];
            InstanceRecord {
                feature,
                grid_x: i32::from_le_bytes(le4(&tail[0..4])),
                grid_y: i32::from_le_bytes(le4(&tail[4..8])),
                score: f32::from_le_bytes(le4(&tail[8..12])),
            }
        })
        .collect();
    Ok(AgentMessage { header, records })
}

pub fn write_msgdump<W: Write>(mut w: W, messages: &[AgentMessage]) -> io::Result<()> {
    for m in messages {
        let bytes = encode(m);
        let len = u32::try_from(bytes.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "message too large"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(&bytes)?;
    }
    Ok(())
}

pub fn read_msgdump<R: Read>(mut r: R) -> io::Result<Vec<AgentMessage>> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut out = Vec::new();
    let mut rest = &data[..];
    while !rest.is_empty() {
        if rest.len() < 4 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated length prefix"));
        }
        let len = u32::from_le_bytes(le4(rest)) as usize;
        rest = &rest[4..];
        if rest.len() < len {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated message"));
        }
        let msg = decode(&rest[..len]).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        out.push(msg);
        rest = &rest[len..];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accounting {
    /// `instance_count * 4d` per message: features only.
    FeatureOnly,
    /// Every encoded byte, header included.
    FullPayload,
}

impl Accounting {
    pub fn bytes(&self, msg: &AgentMessage) -> u64 {
        match self {
            Accounting::FeatureOnly => msg.feature_bytes(),
            Accounting::FullPayload => msg.total_bytes(),
        }
    }
}

/// Per-frame byte statistics. `log2_mean` is `-inf` when nothing was sent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub frame_bytes: Vec<u64>,
    pub mean: f64,
    pub median: f64,
    pub min: u64,
    pub max: u64,
    pub variance: f64,
    #[serde(serialize_with = "ser_log2", deserialize_with = "de_log2")]
    pub log2_mean: f64,
}

fn ser_log2<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_log2<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

pub const KB: f64 = 1024.0;

impl BandwidthReport {
    pub fn from_frame_bytes(frame_bytes: Vec<u64>) -> Result<Self, crate::Error> {
        if frame_bytes.is_empty() {
            return Err(crate::Error::EmptyInput("bandwidth report needs at least one frame"));
        }
        let n = frame_bytes.len() as f64;
        let mean = frame_bytes.iter().map(|&b| b as f64).sum::<f64>() / n;
        let variance = frame_bytes.iter().map(|&b| (b as f64 - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = frame_bytes.clone();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid] as f64
        } else {
            (sorted[mid - 1] as f64 + sorted[mid] as f64) / 2.0
        };
        let log2_mean = if mean > 0.0 { mean.log2() } else { f64::NEG_INFINITY };
        Ok(Self {
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            frame_bytes,
            mean,
            median,
            variance,
            log2_mean,
        })
    }

    pub fn log2_display(&self) -> String {
        if self.log2_mean.is_finite() {
            format!("{:.2}", self.log2_mean)
        } else {
            "n/a".to_string()
        }
    }

    pub fn mean_kb(&self) -> f64 {
        self.mean / KB
    }

    pub fn median_kb(&self) -> f64 {
        self.median / KB
    }

    pub fn variance_kb2(&self) -> f64 {
        self.variance / (KB * KB)
    }
}

/// Bandwidth over frames, where each frame is the set of messages the ego received.
pub fn bandwidth_log2<F: AsRef<[AgentMessage]>>(frames: &[F], accounting: Accounting) -> Result<BandwidthReport, crate::Error> {
    let bytes = frames
        .iter()
        .map(|f| f.as_ref().iter().map(|m| accounting.bytes(m)).sum())
        .collect();
    BandwidthReport::from_frame_bytes(bytes)
}

pub fn late_fusion_bytes(box_count: usize) -> u64 {
    box_count as u64 * LATE_BOX_BYTES
}
