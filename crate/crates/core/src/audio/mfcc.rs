//! MFCC extraction: 25 ms Hamming windows hopped by 10 ms, 512-point FFT,
//! 26 triangular mel filters over 0–8000 Hz, log energies floored at 1e-10,
//! orthonormal DCT-II keeping 13 coefficients, plus ±2-frame regression
//! deltas with replicated edges. All internals run in f64 regardless of the
//! output scalar type.

use rustfft::{num_complex::Complex, FftPlanner};

use super::{SampledAudio, MFCC_WIDTH};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

pub const FRAME_LEN: usize = 400;
pub const HOP: usize = 160;
pub const NFFT: usize = 512;
pub const N_FILTERS: usize = 26;
pub const N_CEPSTRA: usize = 13;
pub const PRE_EMPHASIS: f64 = 0.97;
pub const ENERGY_FLOOR: f64 = 1e-10;

/// 100 Hz track of 26-wide rows: 13 MFCCs then their 13 deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccTrack<S> {
    frames: Tensor<S>,
}

impl<S: Real> MfccTrack<S> {
    pub fn from_tensor(frames: Tensor<S>) -> Self {
        assert_eq!(frames.cols(), MFCC_WIDTH);
        MfccTrack { frames }
    }

    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn row(&self, r: usize) -> &[S] {
        self.frames.row(r)
    }

    pub fn frames(&self) -> &Tensor<S> {
        &self.frames
    }
}

pub fn compute_mfcc<S: Real>(audio: &SampledAudio) -> Result<MfccTrack<S>> {
    let samples = audio.samples();
    if samples.len() < FRAME_LEN {
        return Err(Error::TooShort(format!(
            "{} samples, need at least {FRAME_LEN} (25 ms)",
            samples.len()
        )));
    }
    let n_frames = 1 + (samples.len() - FRAME_LEN) / HOP;

    // pre-emphasis over the whole signal, y[0] = x[0]
    let mut emphasized = Vec::with_capacity(samples.len());
    emphasized.push(samples[0]);
    for i in 1..samples.len() {
        emphasized.push(samples[i] - PRE_EMPHASIS * samples[i - 1]);
    }

    let window = hamming(FRAME_LEN);
    let filterbank = mel_filterbank();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(NFFT);

    let mut cepstra = vec![[0.0f64; N_CEPSTRA]; n_frames];
    let mut buf = vec![Complex::new(0.0, 0.0); NFFT];
    for t in 0..n_frames {
        for v in buf.iter_mut() {
            *v = Complex::new(0.0, 0.0);
        }
        let frame = &emphasized[t * HOP..t * HOP + FRAME_LEN];
        for (i, (&s, &w)) in frame.iter().zip(window.iter()).enumerate() {
            buf[i] = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        let mut power = [0.0f64; NFFT / 2 + 1];
        for (k, p) in power.iter_mut().enumerate() {
            *p = (buf[k].re * buf[k].re + buf[k].im * buf[k].im) / NFFT as f64;
        }
        let mut log_energies = [0.0f64; N_FILTERS];
        for (m, le) in log_energies.iter_mut().enumerate() {
            let e: f64 = filterbank[m]
                .iter()
                .zip(power.iter())
                .map(|(&f, &p)| f * p)
                .sum();
            *le = e.max(ENERGY_FLOOR).ln();
        }
        let ceps = dct_ortho(&log_energies);
        cepstra[t].copy_from_slice(&ceps[..N_CEPSTRA]);
    }

    // deltas: ±2-frame regression, indices clamped at the edges
    let mut out = Tensor::zeros(&[n_frames, MFCC_WIDTH]);
    for t in 0..n_frames {
        let row = out.row_mut(t);
        for c in 0..N_CEPSTRA {
            row[c] = S::from_f64_c(cepstra[t][c]);
        }
        for c in 0..N_CEPSTRA {
            let mut acc = 0.0f64;
            for n in 1..=2usize {
                let tp = (t + n).min(n_frames - 1);
                let tm = t.saturating_sub(n);
                acc += n as f64 * (cepstra[tp][c] - cepstra[tm][c]);
            }
            row[N_CEPSTRA + c] = S::from_f64_c(acc / 10.0);
        }
    }
    Ok(MfccTrack { frames: out })
}

fn hamming(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len as f64 - 1.0)).cos())
        .collect()
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0f64.powf(mel / 2595.0) - 1.0)
}

/// 26 triangular filters with integer-bin corners over 0–8000 Hz.
fn mel_filterbank() -> Vec<Vec<f64>> {
    let sr = super::SAMPLE_RATE as f64;
    let n_bins = NFFT / 2 + 1;
    let lo = hz_to_mel(0.0);
    let hi = hz_to_mel(sr / 2.0);
    let bins: Vec<usize> = (0..N_FILTERS + 2)
        .map(|i| {
            let mel = lo + (hi - lo) * i as f64 / (N_FILTERS + 1) as f64;
            (((NFFT + 1) as f64) * mel_to_hz(mel) / sr).floor() as usize
        })
        .collect();
    let mut fb = vec![vec![0.0f64; n_bins]; N_FILTERS];
    for m in 0..N_FILTERS {
        let (l, c, r) = (bins[m], bins[m + 1], bins[m + 2]);
        for k in l..c {
            fb[m][k] = (k - l) as f64 / (c - l) as f64;
        }
        for k in c..r {
            fb[m][k] = (r - k) as f64 / (r - c) as f64;
        }
    }
    fb
}

/// Orthonormal DCT-II.
fn dct_ortho(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0f64; n];
    for (k, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (i, &v) in x.iter().enumerate() {
            s += v * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / n as f64).cos();
        }
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        *o = s * scale;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn audio_from(samples: Vec<f64>) -> SampledAudio {
        SampledAudio::from_samples(samples).unwrap()
    }

    #[test]
    fn one_second_frame_count() {
        let audio = audio_from(vec![0.0; 16000]);
        let track: MfccTrack<f64> = compute_mfcc(&audio).unwrap();
        assert_eq!(track.n_frames(), 1 + (16000 - 400) / 160);
        assert_eq!(track.n_frames(), 98);
    }

    #[test]
    fn too_short_rejected() {
        let audio = audio_from(vec![0.0; 399]);
        assert!(matches!(
            compute_mfcc::<f64>(&audio),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn constant_zero_audio_gives_identical_frames_and_zero_deltas() {
        let audio = audio_from(vec![0.0; 8000]);
        let track: MfccTrack<f64> = compute_mfcc(&audio).unwrap();
        let first = track.row(0).to_vec();
        for t in 0..track.n_frames() {
            assert_eq!(track.row(t), &first[..], "frame {t} differs");
        }
        for c in N_CEPSTRA..MFCC_WIDTH {
            assert_eq!(first[c], 0.0);
        }
    }

    /// Frozen rows from an independent offline reference implementation
    /// (NumPy): 440 Hz sine at amplitude 0.5, 1.0 s.
    #[test]
    fn sine_matches_offline_reference() {
        let t: Vec<f64> = (0..16000)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16000.0).sin())
            .collect();
        let audio = audio_from(t);
        let track: MfccTrack<f64> = compute_mfcc(&audio).unwrap();
        assert_eq!(track.n_frames(), 98);

        const SINE_ROW_0: [f64; 26] = [
            -6.0259831038e+01, 9.0505625262e+00, 1.2393828459e+00, -2.9797241272e+00,
            -5.5486799427e+00, -6.4450538654e+00, -5.5137074559e+00, -3.3479615203e+00,
            -5.6555275515e-01, 1.8923916703e+00, 3.3973644144e+00, 3.5312043946e+00,
            2.4947944892e+00, -2.8942011921e+00, 2.7955507350e+00, 4.0528915921e-01,
            5.9618250812e-01, 1.7368385014e-01, 2.5783271246e-01, 1.1466857524e-01,
            1.5598498241e-01, 9.0345805436e-02, 1.0028802857e-01, 4.9862176746e-02,
            3.0043054426e-02, -3.1796763335e-02,
        ];
        const SINE_ROW_1: [f64; 26] = [
            -6.3036824446e+01, 1.2278623648e+01, 3.3744358499e+00, -1.6065610811e+00,
            -4.6328494302e+00, -5.7926015067e+00, -5.0135962512e+00, -2.9510245033e+00,
            -2.3724776103e-01, 2.1378242709e+00, 3.5690296879e+00, 3.5926516770e+00,
            2.4329636308e+00, -1.7549543845e+00, 1.8021884227e+00, 4.8464254673e-01,
            4.8862058584e-01, 2.1864886248e-01, 2.2442942046e-01, 1.3054834092e-01,
            1.3536083233e-01, 9.1915272470e-02, 8.4559410157e-02, 4.9082511089e-02,
            2.4090859678e-02, -2.3494318533e-02,
        ];
        const SINE_ROW_50: [f64; 26] = [
            -6.0274405835e+01, 9.3467957297e+00, 1.4953556074e+00, -2.7655153755e+00,
            -5.3650131564e+00, -6.2909251100e+00, -5.3851935215e+00, -3.2504828605e+00,
            -4.8131532701e-01, 1.9547061996e+00, 3.4650161727e+00, 3.5843904707e+00,
            2.5240198763e+00, -2.4481216481e+00, 2.2257613382e+00, 1.2503146494e-02,
            3.3330081202e-01, -7.7934302235e-03, 1.2613174774e-01, 1.3281328710e-02,
            7.6880860800e-02, 2.4996748544e-02, 5.2071899706e-02, 1.3583613327e-02,
            1.4400895696e-02, -2.3443771989e-02,
        ];
        for (idx, want) in [(0usize, SINE_ROW_0), (1, SINE_ROW_1), (50, SINE_ROW_50)] {
            let got = track.row(idx);
            for c in 0..26 {
                assert!(
                    (got[c] - want[c]).abs() <= 1e-3,
                    "row {idx} coeff {c}: got {} want {}",
                    got[c],
                    want[c]
                );
            }
        }
    }

    /// Second frozen case: amplitude-modulated two-tone mixture, 0.6 s.
    #[test]
    fn tone_mixture_matches_offline_reference() {
        let n = (0.6 * 16000.0) as usize;
        let tau = 2.0 * std::f64::consts::PI;
        let sig: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / 16000.0;
                (0.3 + 0.2 * (tau * 2.0 * t).sin()) * (tau * 233.0 * t).sin()
                    + 0.25 * (tau * 987.0 * t + 0.7).sin()
            })
            .collect();
        let audio = audio_from(sig);
        let track: MfccTrack<f64> = compute_mfcc(&audio).unwrap();
        assert_eq!(track.n_frames(), 58);

        const MIX_ROW_0: [f64; 26] = [
            -5.4161012305e+01, 9.4313168654e+00, 1.0812533854e-02, -3.2671229901e+00,
            7.5516574888e-01, 4.7655835851e+00, 4.1373402204e+00, -1.5076072997e+00,
            -7.1189215876e+00, -8.1403776900e+00, -4.3483231389e+00, -8.4587238355e-02,
            8.7191582376e-01, -5.3773849423e-01, 7.1990041607e-01, -2.4121961886e-01,
            -1.5368958713e-01, -3.0300951681e-01, -2.8347144207e-01, -2.4371935225e-01,
            -1.6097122181e-01, -9.9925754648e-02, -5.7310137284e-02, -4.9084439930e-02,
            -5.9708368098e-02, -8.9019545850e-02,
        ];
        const MIX_ROW_30: [f64; 26] = [
            -5.8648380979e+01, 1.2324383354e+01, -1.8654521610e+00, -4.9275381097e+00,
            -9.2390283501e-01, 3.7179190928e+00, 3.6866527707e+00, -1.3673860893e+00,
            -6.6037663791e+00, -7.4324043058e+00, -3.6335960536e+00, 5.0440954990e-01,
            1.2087093955e+00, -1.8908508523e-01, -2.4321619538e-01, -2.3556960311e-01,
            -2.2670327741e-01, -1.9416834832e-01, -1.4054437534e-01, -7.9521228315e-02,
            -2.5776052846e-02, 1.1542939724e-02, 2.8449157620e-02, 2.6651455797e-02,
            1.0488538612e-02, -1.3628387082e-02,
        ];
        for (idx, want) in [(0usize, MIX_ROW_0), (30, MIX_ROW_30)] {
            let got = track.row(idx);
            for c in 0..26 {
                assert!(
                    (got[c] - want[c]).abs() <= 1e-3,
                    "row {idx} coeff {c}: got {} want {}",
                    got[c],
                    want[c]
                );
            }
        }
    }

    #[test]
    fn deterministic_output() {
        let sig: Vec<f64> = (0..8000)
            .map(|i| 0.4 * ((i as f64) * 0.05).sin())
            .collect();
        let audio = audio_from(sig);
        let a: MfccTrack<f32> = compute_mfcc(&audio).unwrap();
        let b: MfccTrack<f32> = compute_mfcc(&audio).unwrap();
        assert_eq!(a, b);
    }
}
