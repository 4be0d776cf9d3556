//! WAV ingestion and export. PCM 16-bit and float32 files are accepted,
//! multi-channel input is downmixed by averaging, and non-16 kHz input is
//! linearly resampled when permitted.

use std::path::Path;

use super::{SampledAudio, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Read a WAV file into validated 16 kHz mono samples.
///
/// `allow_resample`: when false, any sample rate other than 16 kHz is a
/// [`Error::WrongSampleRate`]; when true the signal is linearly resampled.
pub fn load_wav(path: &Path, allow_resample: bool) -> Result<SampledAudio> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: io.to_string(),
        },
        other => Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "zero channels".into(),
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::UnreadableFile {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?
            .into_iter()
            .map(|s| s as f64 / 32768.0)
            .collect(),
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::UnreadableFile {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?
            .into_iter()
            .map(|s| s as f64)
            .collect(),
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("{fmt:?} {bits}-bit; expected PCM16 or float32"),
            })
        }
    };

    // downmix by channel average
    let mut mono: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };

    if spec.sample_rate != SAMPLE_RATE {
        if !allow_resample {
            return Err(Error::WrongSampleRate {
                got: spec.sample_rate,
                want: SAMPLE_RATE,
            });
        }
        mono = resample_linear(&mono, spec.sample_rate, SAMPLE_RATE);
    }

    for v in mono.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    SampledAudio::from_samples(mono)
}

/// Linear-interpolation resampler; output length is round(n·dst/src).
fn resample_linear(input: &[f64], src_rate: u32, dst_rate: u32) -> Vec<f64> {
    if input.is_empty() {
        return Vec::new();
    }
    let n_out = ((input.len() as u64 * dst_rate as u64 + src_rate as u64 / 2)
        / src_rate as u64) as usize;
    let step = src_rate as f64 / dst_rate as f64;
    (0..n_out)
        .map(|i| {
            let pos = i as f64 * step;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(input.len() - 1);
            let frac = pos - lo as f64;
            let lo = lo.min(input.len() - 1);
            input[lo] * (1.0 - frac) + input[hi] * frac
        })
        .collect()
}

/// Write mono samples as a float32 WAV at 16 kHz.
pub fn write_wav_f32(path: &Path, samples: &[f64]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    for &s in samples {
        writer.write_sample(s as f32).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })?;
    }
    writer.finalize().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("museface-wav-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn silence_roundtrip() {
        let path = tmp("silence.wav");
        write_wav_f32(&path, &vec![0.0; 16000]).unwrap();
        let audio = load_wav(&path, false).unwrap();
        assert_eq!(audio.len(), 16000);
        assert!(audio.samples().iter().all(|v| *v == 0.0));
        assert_eq!(audio.duration_s(), 1.0);
    }

    #[test]
    fn stereo_pcm16_downmix_and_resample() {
        let path = tmp("stereo8k.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for i in 0..8000 {
            let v = (0.25 * ((i as f64) * 0.01).sin() * 32767.0) as i16;
            w.write_sample(v).unwrap();
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();

        // resampling disabled: error
        assert!(matches!(
            load_wav(&path, false),
            Err(Error::WrongSampleRate { got: 8000, .. })
        ));
        // enabled: mono 16 kHz, duration preserved → 16000 samples
        let audio = load_wav(&path, true).unwrap();
        assert_eq!(audio.len(), 16000);
    }

    #[test]
    fn truncated_header_is_unreadable() {
        let path = tmp("corrupt.wav");
        std::fs::write(&path, b"RIFFxxxxWAVEfmt").unwrap();
        assert!(matches!(
            load_wav(&path, true),
            Err(Error::UnreadableFile { .. })
        ));
    }

    #[test]
    fn missing_file_is_unreadable() {
        assert!(matches!(
            load_wav(std::path::Path::new("/nonexistent/x.wav"), true),
            Err(Error::UnreadableFile { .. })
        ));
    }
}
