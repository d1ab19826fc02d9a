use std::io::{Read, Write};
use std::path::Path;

use crate::corpus::Modality;
use crate::nn::tensorfile::{MAGIC, VERSION};
use crate::{Error, Result};

/// A recording: `epochs` windows of `channels × samples` values, stored
/// epoch-major, channel-major, time-minor. Images are one epoch with rows
/// as channels.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordingInput {
    modality: Modality,
    channels: usize,
    samples: usize,
    epochs: usize,
    sample_rate: Option<u32>,
    data: Vec<f32>,
}

impl RecordingInput {
    pub fn new(
        modality: Modality,
        channels: usize,
        samples: usize,
        epochs: usize,
        sample_rate: Option<u32>,
        data: Vec<f32>,
    ) -> Result<Self> {
        if channels == 0 || samples == 0 || epochs == 0 {
            return Err(Error::Invalid("recording dimensions must be positive".into()));
        }
        if data.len() != channels * samples * epochs {
            return Err(Error::shape(
                "recording data",
                channels * samples * epochs,
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("recording data".into()));
        }
        Ok(Self {
            modality,
            channels,
            samples,
            epochs,
            sample_rate,
            data,
        })
    }

    /// Splits a continuous `[channels × n]` signal into 60-second epochs;
    /// a trailing partial epoch is dropped.
    pub fn from_continuous(channels: usize, signal: &[f32], sample_rate: u32) -> Result<Self> {
        if channels == 0 || sample_rate == 0 || signal.len() % channels != 0 {
            return Err(Error::Invalid("signal length must be a multiple of channels".into()));
        }
        let n = signal.len() / channels;
        let per_epoch = 60 * sample_rate as usize;
        let epochs = n / per_epoch;
        if epochs == 0 {
            return Err(Error::Invalid(format!(
                "signal of {n} samples is shorter than one {per_epoch}-sample epoch"
            )));
        }
        let mut data = Vec::with_capacity(epochs * channels * per_epoch);
        for e in 0..epochs {
            for c in 0..channels {
                let row = &signal[c * n..(c + 1) * n];
                data.extend_from_slice(&row[e * per_epoch..(e + 1) * per_epoch]);
            }
        }
        Self::new(Modality::Eeg, channels, per_epoch, epochs, Some(sample_rate), data)
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn sample_rate(&self) -> Option<u32> {
        self.sample_rate
    }

    /// One epoch as `f64`, channel-major.
    pub fn epoch(&self, e: usize) -> Vec<f64> {
        let n = self.channels * self.samples;
        self.data[e * n..(e + 1) * n].iter().map(|&v| v as f64).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(22 + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.modality.code());
        for v in [self.channels, self.samples, self.epochs] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.sample_rate.unwrap_or(0).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 22 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a recording file".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported version {}", bytes[4])));
        }
        let modality = Modality::from_code(bytes[5])?;
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let (c, t, e, sr) = (u32_at(6) as usize, u32_at(10) as usize, u32_at(14) as usize, u32_at(18));
        let expected = 22 + c * t * e * 4;
        if bytes.len() != expected {
            return Err(Error::shape("recording file length", expected, bytes.len()));
        }
        let data = bytes[22..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(modality, c, t, e, (sr != 0).then_some(sr), data)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn binary_roundtrip(c in 1usize..4, t in 1usize..6, e in 1usize..3, sr in 0u32..300, seed in any::<u32>()) {
            let data: Vec<f32> = (0..c * t * e).map(|i| (i as f32 * 0.37 + seed as f32).sin()).collect();
            let rec = RecordingInput::new(Modality::Eeg, c, t, e, (sr != 0).then_some(sr), data).unwrap();
            prop_assert_eq!(RecordingInput::decode(&rec.encode()).unwrap(), rec);
        }
    }

    #[test]
    fn header_layout() {
        let rec = RecordingInput::new(Modality::Xray, 2, 3, 1, None, vec![0.0; 6]).unwrap();
        let bytes = rec.encode();
        assert_eq!(&bytes[..4], b"CLRA");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 0);
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[18..22], &0u32.to_le_bytes());
        assert_eq!(bytes.len(), 22 + 24);
    }

    #[test]
    fn continuous_signal_drops_partial_epoch() {
        let sr = 2;
        let n = 60 * sr as usize * 2 + 7;
        let signal: Vec<f32> = (0..2 * n).map(|i| i as f32).collect();
        let rec = RecordingInput::from_continuous(2, &signal, sr).unwrap();
        assert_eq!((rec.epochs(), rec.samples()), (2, 120));
        // second epoch of channel 1 starts at sample 120 of row 1
        assert_eq!(rec.epoch(1)[120], (n + 120) as f64);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(RecordingInput::new(Modality::Eeg, 0, 1, 1, None, vec![]).is_err());
        assert!(RecordingInput::new(Modality::Eeg, 1, 2, 1, None, vec![0.0]).is_err());
        assert!(RecordingInput::new(Modality::Eeg, 1, 1, 1, None, vec![f32::NAN]).is_err());
    }
}
