//! WAV reading and writing for 16/24-bit PCM and 32-bit float files.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{input_format, CliError, Result};

/// Sample encoding of a WAV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Pcm16,
    Pcm24,
    Float32,
}

impl Encoding {
    fn from_spec(spec: &WavSpec) -> Option<Self> {
        match (spec.sample_format, spec.bits_per_sample) {
            (SampleFormat::Int, 16) => Some(Encoding::Pcm16),
            (SampleFormat::Int, 24) => Some(Encoding::Pcm24),
            (SampleFormat::Float, 32) => Some(Encoding::Float32),
            _ => None,
        }
    }

    fn spec(self, channels: u16, sample_rate: u32) -> WavSpec {
        let (bits_per_sample, sample_format) = match self {
            Encoding::Pcm16 => (16, SampleFormat::Int),
            Encoding::Pcm24 => (24, SampleFormat::Int),
            Encoding::Float32 => (32, SampleFormat::Float),
        };
        WavSpec {
            channels,
            sample_rate,
            bits_per_sample,
            sample_format,
        }
    }

    fn full_scale(self) -> f64 {
        match self {
            Encoding::Pcm16 => 32768.0,
            Encoding::Pcm24 => 8_388_608.0,
            Encoding::Float32 => 1.0,
        }
    }
}

/// Deinterleaved audio with samples scaled to `[-1, 1)` for PCM.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
    pub encoding: Encoding,
}

impl Audio {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    /// Fails unless the file has exactly `channels` channels at `sample_rate`.
    pub fn expect_layout(&self, path: &Path, channels: usize, sample_rate: u32) -> Result<()> {
        if self.channels.len() != channels {
            return input_format(format!(
                "{}: expected {channels} channel(s), found {}",
                path.display(),
                self.channels.len()
            ));
        }
        if self.sample_rate != sample_rate {
            return input_format(format!(
                "{}: expected a sample rate of {sample_rate} Hz, found {} Hz (no resampling is performed)",
                path.display(),
                self.sample_rate
            ));
        }
        Ok(())
    }
}

fn hound_err(path: &Path, e: hound::Error) -> CliError {
    match e {
        hound::Error::IoError(io) => CliError::io(format!("cannot read {}", path.display()), io),
        other => CliError::InputFormat(format!("{}: {other}", path.display())),
    }
}

pub fn read(path: &Path) -> Result<Audio> {
    let mut reader = WavReader::open(path).map_err(|e| hound_err(path, e))?;
    let spec = reader.spec();
    let Some(encoding) = Encoding::from_spec(&spec) else {
        return input_format(format!(
            "{}: unsupported sample format ({} bit {:?}); use 16/24-bit PCM or 32-bit float",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        ));
    };
    let interleaved: Vec<f64> = match encoding {
        Encoding::Float32 => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>(),
        _ => reader
            .samples::<i32>()
            .map(|s| s.map(|v| f64::from(v) / encoding.full_scale()))
            .collect::<Result<_, _>>(),
    }
    .map_err(|e| hound_err(path, e))?;
    let n = usize::from(spec.channels);
    let channels = (0..n)
        .map(|c| interleaved.iter().skip(c).step_by(n).copied().collect())
        .collect();
    Ok(Audio {
        channels,
        sample_rate: spec.sample_rate,
        encoding,
    })
}

/// Writes channels of equal length. PCM samples are rounded and clipped to
/// the encoding's range.
pub fn write(path: &Path, channels: &[&[f64]], sample_rate: u32, encoding: Encoding) -> Result<()> {
    let len = channels.first().map_or(0, |c| c.len());
    if channels.iter().any(|c| c.len() != len) {
        return input_format("all channels written to one file must have equal length");
    }
    let count = u16::try_from(channels.len())
        .map_err(|_| CliError::InputFormat(format!("too many channels: {}", channels.len())))?;
    let spec = encoding.spec(count, sample_rate);
    let write_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => CliError::writing(path, io),
        other => CliError::InputFormat(format!("{}: {other}", path.display())),
    };
    let mut w = WavWriter::create(path, spec).map_err(write_err)?;
    let scale = encoding.full_scale();
    for n in 0..len {
        for c in channels {
            let v = c[n];
            match encoding {
                Encoding::Float32 => w.write_sample(v as f32),
                _ => w.write_sample((v * scale).round().clamp(-scale, scale - 1.0) as i32),
            }
            .map_err(write_err)?;
        }
    }
    w.finalize().map_err(write_err)
}
