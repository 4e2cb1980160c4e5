use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::Waveform;
use crate::error::{Error, Result};

const FULL_SCALE: f64 = 32768.0;

fn map_hound(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) if io.kind() != std::io::ErrorKind::UnexpectedEof => {
            Error::Io(io)
        }
        hound::Error::IoError(_) => Error::WavMalformed(Some("truncated file".into())),
        hound::Error::FormatError(msg) => Error::WavMalformed(Some(msg.to_string())),
        other => Error::WavMalformed(Some(other.to_string())),
    }
}

/// Reads a mono 16-bit PCM WAV file. Samples are scaled to `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let meta = std::fs::metadata(path)?;
    if meta.len() == 0 {
        return Err(Error::WavMalformed(None));
    }
    let reader = WavReader::open(path).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::WavNotMono(spec.channels));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::WavNotPcm16(format!(
            "{:?} {} bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / FULL_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(map_hound)?;
    Waveform::new(samples, spec.sample_rate)
}

/// Writes a mono 16-bit PCM WAV file, saturating samples outside `[-1, 1)`.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(map_hound)?;
    for &s in w.samples() {
        let q = (s * FULL_SCALE)
            .round()
            .clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16;
        writer.write_sample(q).map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_round_trip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ramp.wav");
        let ramp: Vec<f64> = (0..2000).map(|i| -0.99 + 1.98 * i as f64 / 1999.0).collect();
        let w = Waveform::from_samples(ramp).unwrap();
        write_wav(&path, &w).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.len(), w.len());
        let max_err = back
            .samples()
            .iter()
            .zip(w.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 1.0 / 32768.0);
    }

    #[test]
    fn one_second_has_16000_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.wav");
        write_wav(&path, &Waveform::zeros(16000, 16000)).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 44 + 32000);
        assert_eq!(read_wav(&path).unwrap().len(), 16000);
    }

    #[test]
    fn empty_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        std::fs::write(&path, b"").unwrap();
        let err = read_wav(&path).unwrap_err();
        assert!(err.to_string().contains("malformed header"), "{err}");
    }

    #[test]
    fn garbage_header_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.wav");
        std::fs::write(&path, b"not a riff file at all, just text").unwrap();
        assert!(matches!(read_wav(&path), Err(Error::WavMalformed(_))));
    }

    #[test]
    fn stereo_and_float_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stereo = dir.path().join("stereo.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&stereo, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&stereo), Err(Error::WavNotMono(2))));

        let float = dir.path().join("float.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&float, spec).unwrap();
        w.write_sample(0.0f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&float), Err(Error::WavNotPcm16(_))));
    }
}
