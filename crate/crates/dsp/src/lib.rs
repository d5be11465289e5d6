//! Signal processing front end: COLA windows, short-time transforms, Mel
//! features, Wiener and ideal masks, learned filterbanks, WAV files and the
//! multichannel direction-of-arrival stack.

pub mod error;
pub mod fourier;
pub mod learned;
pub mod masks;
pub mod mel;
pub mod spatial;
pub mod stft;
pub mod wav;
pub mod window;

pub use error::{DspError, Result};
pub use fourier::Dft;
pub use masks::{ideal_masks, wiener_from_snr, wiener_gain, wiener_mask};
pub use mel::{hz_to_mel, mel_to_hz, mfcc, MelBank};
pub use stft::{istft, stft, Spectrogram};
pub use wav::{read_wav, write_wav, Audio, WavFormat};
pub use window::{cola_residual, solve_cola_window, FrameConfig, WindowShape};
