//! Audio ingestion front end: WAV stems → 16 kHz mono samples → MFCC+delta
//! frames at 100 Hz → per-video-frame 39×26 feature windows at 30 fps, with
//! optional one-hot subject channels appended to every row.

pub mod mfcc;
pub mod wav;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

pub use mfcc::{compute_mfcc, MfccTrack};
pub use wav::{load_wav, write_wav_f32};

/// Required input sample rate.
pub const SAMPLE_RATE: u32 = 16000;
/// Video frame rate the windows are aligned to.
pub const VIDEO_FPS: usize = 30;
/// MFCC frame rate (10 ms hop).
pub const MFCC_FRAME_RATE: usize = 100;
/// MFCC rows per feature window (≈390 ms of context, centered).
pub const WINDOW_ROWS: usize = 39;
/// Static + delta coefficients per MFCC frame.
pub const MFCC_WIDTH: usize = 26;

/// Validated 16 kHz mono waveform with amplitudes in [-1, 1].
#[derive(Debug, Clone)]
pub struct SampledAudio {
    samples: Vec<f64>,
}

impl SampledAudio {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        let sum: f64 = samples.iter().map(|v| v.abs()).sum();
        if !sum.is_finite() {
            return Err(Error::NonFinite("audio samples".into()));
        }
        if samples.iter().any(|v| v.abs() > 1.0 + 1e-6) {
            return Err(Error::UnsupportedFormat {
                path: "<memory>".into(),
                reason: "amplitudes outside [-1, 1]".into(),
            });
        }
        Ok(SampledAudio { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }

    /// Video frames covered by this audio: floor(30 · duration), computed in
    /// integer arithmetic.
    pub fn video_frames(&self) -> usize {
        self.samples.len() * VIDEO_FPS / SAMPLE_RATE as usize
    }
}

/// Per-video-frame stacks of MFCC rows: `n_frames` windows of
/// `WINDOW_ROWS × width`, where `width = 26 + subject_channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTrack<S> {
    /// (n_frames, WINDOW_ROWS·width), each row is one window, row-major
    /// over (window row, coefficient).
    windows: Tensor<S>,
    width: usize,
    subject_channels: usize,
}

impl<S: Real> FeatureTrack<S> {
    pub fn n_frames(&self) -> usize {
        self.windows.rows()
    }

    /// Coefficients per window row (26 plus any subject channels).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn subject_channels(&self) -> usize {
        self.subject_channels
    }

    /// One window as a (WINDOW_ROWS × width) row-major slice.
    pub fn window(&self, frame: usize) -> &[S] {
        self.windows.row(frame)
    }

    pub fn windows(&self) -> &Tensor<S> {
        &self.windows
    }

    pub fn from_parts(windows: Tensor<S>, width: usize, subject_channels: usize) -> Self {
        assert_eq!(windows.cols(), WINDOW_ROWS * width);
        FeatureTrack {
            windows,
            width,
            subject_channels,
        }
    }

    /// Contiguous sub-track of `len` frames starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> FeatureTrack<S> {
        let cols = self.windows.cols();
        let mut out = Tensor::zeros(&[len, cols]);
        for t in 0..len {
            out.row_mut(t).copy_from_slice(self.windows.row(start + t));
        }
        FeatureTrack {
            windows: out,
            width: self.width,
            subject_channels: self.subject_channels,
        }
    }

    /// The center MFCC row (26+S wide) of each window; used as the per-frame
    /// audio summary fed to the discriminator.
    pub fn center_rows(&self) -> Tensor<S> {
        let t = self.n_frames();
        let mut out = Tensor::zeros(&[t, self.width]);
        let center = WINDOW_ROWS / 2;
        for f in 0..t {
            let w = self.window(f);
            out.row_mut(f)
                .copy_from_slice(&w[center * self.width..(center + 1) * self.width]);
        }
        out
    }
}

/// Index of the 100 Hz MFCC row nearest to video frame `k`'s timestamp
/// k/30 s: round(10k/3), exact in integer arithmetic (never a tie).
pub fn center_row_index(frame: usize) -> usize {
    (20 * frame + 3) / 6
}

/// Build per-video-frame feature windows from a 100 Hz MFCC track.
///
/// Window `k` stacks the 39 MFCC rows centered on the row nearest k/30 s;
/// rows outside the track are zero. `duration_s` fixes the video frame count
/// as floor(30 · duration).
pub fn window_features<S: Real>(mfcc: &MfccTrack<S>, duration_s: f64) -> Result<FeatureTrack<S>> {
    let n_rows = mfcc.n_frames();
    if n_rows == 0 {
        return Err(Error::EmptyTrack("mfcc track".into()));
    }
    // Durations arrive as sample-count ratios; the epsilon keeps exact frame
    // counts from landing one below the integer they encode.
    let n_video = ((VIDEO_FPS as f64) * duration_s + 1e-9).floor() as usize;
    let width = MFCC_WIDTH;
    let half = WINDOW_ROWS / 2;
    let mut windows = Tensor::zeros(&[n_video, WINDOW_ROWS * width]);
    for k in 0..n_video {
        let center = center_row_index(k) as isize;
        let dst = windows.row_mut(k);
        for r in 0..WINDOW_ROWS {
            let src = center - half as isize + r as isize;
            if src >= 0 && (src as usize) < n_rows {
                dst[r * width..(r + 1) * width].copy_from_slice(mfcc.row(src as usize));
            }
        }
    }
    Ok(FeatureTrack {
        windows,
        width,
        subject_channels: 0,
    })
}

/// Append a one-hot subject code to every window row.
pub fn attach_subject<S: Real>(
    track: &FeatureTrack<S>,
    subject: usize,
    n_subjects: usize,
) -> Result<FeatureTrack<S>> {
    if subject >= n_subjects {
        return Err(Error::SubjectOutOfRange {
            subject,
            n_subjects,
        });
    }
    let old_w = track.width;
    let new_w = old_w + n_subjects;
    let t = track.n_frames();
    let mut windows = Tensor::zeros(&[t, WINDOW_ROWS * new_w]);
    for f in 0..t {
        let src = track.window(f);
        let dst = windows.row_mut(f);
        for r in 0..WINDOW_ROWS {
            dst[r * new_w..r * new_w + old_w].copy_from_slice(&src[r * old_w..(r + 1) * old_w]);
            dst[r * new_w + old_w + subject] = S::one();
        }
    }
    Ok(FeatureTrack {
        windows,
        width: new_w,
        subject_channels: n_subjects,
    })
}
