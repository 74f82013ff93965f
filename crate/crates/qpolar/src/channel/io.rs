//! Channel file format: JSON with one probability row per input symbol.
//! All floating point values are written with 17 significant digits so that
//! files round-trip exactly.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Dmc;

#[derive(Serialize, Deserialize)]
struct ChannelFile {
    r: u32,
    outputs: Vec<String>,
    /// `matrix[x][y] = W(y|x)`; each row sums to 1.
    matrix: Vec<Vec<f64>>,
}

/// A `serde_json` formatter that renders every float with 17 significant
/// digits.
pub(crate) struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes any value as JSON with full-precision floats.
pub(crate) fn to_precise_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFormatter);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// Canonical JSON encoding of a channel. Used both for files and as the
/// fingerprint payload binding constructions to their source channel.
pub fn channel_to_json(w: &Dmc) -> Vec<u8> {
    let file = ChannelFile {
        r: w.r(),
        outputs: w.output_labels().to_vec(),
        matrix: (0..w.q()).map(|x| w.input_row(x).to_vec()).collect(),
    };
    to_precise_json(&file).expect("channel serialization cannot fail")
}

/// Parses a channel from its JSON encoding, validating all invariants.
pub fn channel_from_json(bytes: &[u8]) -> Result<Dmc> {
    let file: ChannelFile =
        serde_json::from_slice(bytes).map_err(|e| Error::Format(format!("channel file: {e}")))?;
    Dmc::new(file.r, file.outputs, file.matrix)
}

pub fn write_channel(w: &Dmc, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&channel_to_json(w))?;
    Ok(())
}

pub fn read_channel(path: &Path) -> Result<Dmc> {
    let bytes = std::fs::read(path)?;
    channel_from_json(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_ordered_erasure, random_channel};
    use rand::SeedableRng;

    #[test]
    fn channel_round_trips_bit_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let w = random_channel(2, 5, &mut rng).unwrap();
            let json = channel_to_json(&w);
            let back = channel_from_json(&json).unwrap();
            assert_eq!(back.r(), w.r());
            assert_eq!(back.output_labels(), w.output_labels());
            for x in 0..w.q() {
                assert_eq!(back.input_row(x), w.input_row(x), "row {x} not bit-exact");
            }
            // Canonical form is stable.
            assert_eq!(channel_to_json(&back), json);
        }
    }

    #[test]
    fn rejects_malformed_channel_files() {
        assert!(channel_from_json(b"{").is_err());
        assert!(channel_from_json(br#"{"r":1,"outputs":["a"],"matrix":[[1.0]]}"#).is_err());
        let ok = br#"{"r":1,"outputs":["a","b"],"matrix":[[0.5,0.5],[0.25,0.75]]}"#;
        assert!(channel_from_json(ok).is_ok());
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("qpolar-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("oec.json");
        let w = build_ordered_erasure(2, &[0.5, 0.4, 0.1]).unwrap();
        write_channel(&w, &path).unwrap();
        let back = read_channel(&path).unwrap();
        assert_eq!(channel_to_json(&back), channel_to_json(&w));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
