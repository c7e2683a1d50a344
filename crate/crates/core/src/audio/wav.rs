//! Minimal RIFF/WAVE codec.
//!
//! Reads 16-bit integer and 32-bit float PCM (plain or `WAVE_FORMAT_EXTENSIBLE`)
//! with any channel count, and writes mono 16-bit PCM.

use std::io::Write;

use super::AudioError;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decoded WAV contents with samples still interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub sample_rate: u32,
    pub channels: u16,
    pub interleaved: Vec<f32>,
}

impl WavData {
    pub fn frames(&self) -> usize {
        self.interleaved.len() / self.channels.max(1) as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    /// Averages all channels into one.
    pub fn downmix(&self) -> Vec<f32> {
        let ch = self.channels as usize;
        if ch == 1 {
            return self.interleaved.clone();
        }
        self.interleaved
            .chunks_exact(ch)
            .map(|frame| frame.iter().sum::<f32>() / ch as f32)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn malformed(msg: impl Into<String>) -> AudioError {
    AudioError::Malformed(msg.into())
}

/// Parses a complete WAV file held in memory.
pub fn decode(bytes: &[u8]) -> Result<WavData, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE header"));
    }
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        // Streaming writers sometimes leave the data size at 0 or 0xFFFFFFFF.
        let body_end = if id == b"data" && (size == 0 || body_start + size > bytes.len()) {
            bytes.len()
        } else {
            body_start
                .checked_add(size)
                .filter(|&end| end <= bytes.len())
                .ok_or_else(|| malformed("chunk runs past end of file"))?
        };
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed("fmt chunk too short"));
                }
                let mut format = u16_at(body, 0);
                if format == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(malformed("extensible fmt chunk too short"));
                    }
                    // First two bytes of the sub-format GUID carry the format tag.
                    format = u16_at(body, 24);
                }
                fmt = Some(FmtChunk {
                    format,
                    channels: u16_at(body, 2),
                    sample_rate: u32_at(body, 4),
                    bits: u16_at(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_end + (body_end - body_start) % 2;
    }
    let fmt = fmt.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    if fmt.channels == 0 {
        return Err(malformed("zero channels"));
    }
    if fmt.sample_rate == 0 {
        return Err(malformed("zero sample rate"));
    }
    let interleaved: Vec<f32> = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        (format, bits) => return Err(AudioError::UnsupportedEncoding { format, bits }),
    };
    let whole = interleaved.len() - interleaved.len() % fmt.channels as usize;
    let mut interleaved = interleaved;
    interleaved.truncate(whole);
    Ok(WavData {
        sample_rate: fmt.sample_rate,
        channels: fmt.channels,
        interleaved,
    })
}

/// Encodes mono samples as 16-bit PCM. Values outside [-1, 1] are clipped.
pub fn encode_pcm16(samples: &[f32], sample_rate: u32) -> Vec<u8> {
    encode_interleaved_pcm16(samples, 1, sample_rate)
}

/// Encodes interleaved samples as 16-bit PCM with the given channel count.
pub fn encode_interleaved_pcm16(interleaved: &[f32], channels: u16, sample_rate: u32) -> Vec<u8> {
    let data_len = interleaved.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    write_header(&mut out, FORMAT_PCM, channels, sample_rate, 16, data_len);
    for &s in interleaved {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Encodes interleaved samples as 32-bit IEEE float.
pub fn encode_interleaved_f32(interleaved: &[f32], channels: u16, sample_rate: u32) -> Vec<u8> {
    let data_len = interleaved.len() * 4;
    let mut out = Vec::with_capacity(44 + data_len);
    write_header(&mut out, FORMAT_IEEE_FLOAT, channels, sample_rate, 32, data_len);
    for &s in interleaved {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

fn write_header(out: &mut Vec<u8>, format: u16, channels: u16, rate: u32, bits: u16, data_len: usize) {
    let block_align = channels * bits / 8;
    let byte_rate = rate * block_align as u32;
    // Writes into a Vec cannot fail.
    let _ = (|| -> std::io::Result<()> {
        out.write_all(b"RIFF")?;
        out.write_all(&(36 + data_len as u32).to_le_bytes())?;
        out.write_all(b"WAVEfmt ")?;
        out.write_all(&16u32.to_le_bytes())?;
        out.write_all(&format.to_le_bytes())?;
        out.write_all(&channels.to_le_bytes())?;
        out.write_all(&rate.to_le_bytes())?;
        out.write_all(&byte_rate.to_le_bytes())?;
        out.write_all(&block_align.to_le_bytes())?;
        out.write_all(&bits.to_le_bytes())?;
        out.write_all(b"data")?;
        out.write_all(&(data_len as u32).to_le_bytes())
    })();
}
