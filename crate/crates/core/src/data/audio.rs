use std::path::Path;

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono waveform in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Resample with a Hann-windowed sinc kernel.
    pub fn resample(&self, target: u32) -> Waveform {
        if target == self.sample_rate || self.samples.is_empty() {
            return Waveform::new(self.samples.clone(), target);
        }
        let ratio = f64::from(target) / f64::from(self.sample_rate);
        let cutoff = ratio.min(1.0);
        let half_width = 16.0 / cutoff;
        let out_len = (self.samples.len() as f64 * ratio).round() as usize;
        let src = &self.samples;
        let samples = (0..out_len)
            .map(|n| {
                let center = n as f64 / ratio;
                let lo = (center - half_width).ceil().max(0.0) as usize;
                let hi = ((center + half_width).floor() as usize).min(src.len() - 1);
                let mut acc = 0.0f64;
                for (i, &s) in src.iter().enumerate().take(hi + 1).skip(lo) {
                    let x = i as f64 - center;
                    let arg = x * cutoff;
                    let sinc = if arg.abs() < 1e-12 {
                        1.0
                    } else {
                        (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg)
                    };
                    let w = 0.5 + 0.5 * (std::f64::consts::PI * x / half_width).cos();
                    acc += f64::from(s) * sinc * w * cutoff;
                }
                acc as f32
            })
            .collect();
        Waveform::new(samples, target)
    }
}

/// Reads a WAV file, mixes to mono and resamples to 16 kHz.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let audio_err = |msg: String| Error::Audio {
        path: path.to_path_buf(),
        msg,
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| audio_err(e.to_string()))?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels.max(1));
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(|e| audio_err(e.to_string()))?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<Result<_, _>>()
                .map_err(|e| audio_err(e.to_string()))?
        }
    };
    if interleaved.is_empty() {
        return Err(audio_err("no samples".into()));
    }
    let mono: Vec<f32> = interleaved
        .chunks(channels)
        .map(|c| c.iter().sum::<f32>() / c.len() as f32)
        .collect();
    if mono.iter().any(|s| !s.is_finite()) {
        return Err(audio_err("non-finite samples".into()));
    }
    Ok(Waveform::new(mono, spec.sample_rate).resample(SAMPLE_RATE))
}

/// Writes 16-bit PCM mono.
pub fn write_wav(path: impl AsRef<Path>, wave: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &wave.samples {
        writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    writer.finalize()?;
    Ok(())
}
