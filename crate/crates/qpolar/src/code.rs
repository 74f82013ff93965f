//! Information-set construction with per-symbol frozen-bit prefixes, and the
//! mod-q butterfly encoder.

use std::io::Write as IoWrite;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarize::SynthesisTable;

/// Frozen-bit fill policy. Zeros is the default; the seeded random option
/// supports experimentation on asymmetric channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrozenFill {
    Zeros,
    Random { seed: u64 },
}

/// A code construction: for each index `j` the `k[j]` most significant bits
/// of `u_j` are frozen to the bits of `frozen[j]` (MSB first); the remaining
/// `r - k[j]` bits carry data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeConstruction {
    pub n: u32,
    pub r: u32,
    /// Binds the construction to its source channel and synthesis depth.
    pub fingerprint: String,
    /// Frozen-prefix depth per index, each in `0..=r`.
    pub k: Vec<u8>,
    /// Frozen prefix value per index: the top `k[j]` bits, MSB first.
    pub frozen: Vec<u32>,
}

impl CodeConstruction {
    pub fn block_length(&self) -> usize {
        1 << self.n
    }

    pub fn q(&self) -> usize {
        1 << self.r
    }

    /// Number of data bits carried per block.
    pub fn rate_bits(&self) -> usize {
        self.k.iter().map(|&k| (self.r as u8 - k) as usize).sum()
    }

    pub fn rate_bits_per_symbol(&self) -> f64 {
        self.rate_bits() as f64 / self.block_length() as f64
    }

    fn validate(&self) -> Result<()> {
        let big_n = self.block_length();
        if self.k.len() != big_n || self.frozen.len() != big_n {
            return Err(Error::Format(format!(
                "construction arrays must have length {big_n}"
            )));
        }
        for (&k, &f) in self.k.iter().zip(&self.frozen) {
            if u32::from(k) > self.r {
                return Err(Error::Format(format!("frozen depth {k} exceeds r={}", self.r)));
            }
            if u64::from(f) >= 1u64 << k {
                return Err(Error::Format(format!(
                    "frozen value {f} does not fit in {k} bits"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ConstructionFile {
    n: u32,
    r: u32,
    fingerprint: String,
    k: Vec<u8>,
    frozen: Vec<String>,
}

/// Serializes a construction: frozen prefixes are written as bit strings of
/// length `k[j]`, most significant bit first.
pub fn construction_to_json(c: &CodeConstruction) -> Vec<u8> {
    let frozen = c
        .k
        .iter()
        .zip(&c.frozen)
        .map(|(&k, &f)| {
            (0..k)
                .map(|b| if f >> (k - 1 - b) & 1 == 1 { '1' } else { '0' })
                .collect()
        })
        .collect();
    let file = ConstructionFile {
        n: c.n,
        r: c.r,
        fingerprint: c.fingerprint.clone(),
        k: c.k.clone(),
        frozen,
    };
    let mut bytes = serde_json::to_vec(&file).expect("construction serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

pub fn construction_from_json(bytes: &[u8]) -> Result<CodeConstruction> {
    let file: ConstructionFile = serde_json::from_slice(bytes)
        .map_err(|e| Error::Format(format!("construction file: {e}")))?;
    if file.n == 0 || file.n > 30 || file.r == 0 || file.r > 30 {
        return Err(Error::Format("n and r must lie in 1..=30".into()));
    }
    let mut frozen = Vec::with_capacity(file.frozen.len());
    for (j, bits) in file.frozen.iter().enumerate() {
        if bits.len() != file.k.get(j).copied().unwrap_or(0) as usize {
            return Err(Error::Format(format!(
                "index {}: frozen string length {} does not match depth",
                j + 1,
                bits.len()
            )));
        }
        let mut v = 0u32;
        for ch in bits.chars() {
            v = (v << 1)
                | match ch {
                    '0' => 0,
                    '1' => 1,
                    other => {
                        return Err(Error::Format(format!(
                            "invalid frozen bit {other:?} at index {}",
                            j + 1
                        )))
                    }
                };
        }
        frozen.push(v);
    }
    let c = CodeConstruction {
        n: file.n,
        r: file.r,
        fingerprint: file.fingerprint,
        k: file.k,
        frozen,
    };
    c.validate()?;
    Ok(c)
}

pub fn write_construction(c: &CodeConstruction, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&construction_to_json(c))?;
    Ok(())
}

pub fn read_construction(path: &Path) -> Result<CodeConstruction> {
    construction_from_json(&std::fs::read(path)?)
}

fn fill_frozen(k: &[u8], fill: FrozenFill) -> Vec<u32> {
    match fill {
        FrozenFill::Zeros => vec![0; k.len()],
        FrozenFill::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            k.iter()
                .map(|&kj| {
                    if kj == 0 {
                        0
                    } else {
                        rng.random::<u32>() & ((1u32 << kj) - 1)
                    }
                })
                .collect()
        }
    }
}

/// Freezes, at every index, all bit levels up to the worst level whose
/// average Bhattacharyya parameter is at least `epsilon`; this makes the
/// frozen pattern a prefix even at finite depths where the levels are not
/// monotone.
pub fn construct_by_threshold(
    table: &SynthesisTable,
    epsilon: f64,
    fill: FrozenFill,
) -> CodeConstruction {
    assert!(
        epsilon > 0.0 && epsilon < 0.5,
        "threshold must lie in (0, 0.5)"
    );
    let k: Vec<u8> = table
        .records
        .iter()
        .map(|rec| {
            rec.stats
                .z_level
                .iter()
                .enumerate()
                .filter(|(_, &z)| z >= epsilon)
                .map(|(i, _)| i as u8 + 1)
                .max()
                .unwrap_or(0)
        })
        .collect();
    let frozen = fill_frozen(&k, fill);
    CodeConstruction {
        n: table.n,
        r: table.r,
        fingerprint: table.fingerprint.clone(),
        k,
        frozen,
    }
}

/// Ranking score used for tie-breaking: indices with larger
/// `sum_i 2^(i-1) Z_i` are frozen first.
fn reliability_score(z_level: &[f64]) -> f64 {
    z_level
        .iter()
        .enumerate()
        .map(|(i, &z)| (1u64 << i) as f64 * z)
        .sum()
}

/// Builds the construction with exactly `target_bits` data bits: the most
/// conservative threshold construction meeting the rate, adjusted one bit
/// level at a time (worst reliability score first) until the rate is exact.
pub fn construct_by_rate(
    table: &SynthesisTable,
    target_bits: usize,
    fill: FrozenFill,
) -> Result<CodeConstruction> {
    let big_n = table.block_length();
    let r = table.r as usize;
    if target_bits > big_n * r {
        return Err(Error::InvalidConfig(format!(
            "target of {target_bits} bits exceeds the block maximum {}",
            big_n * r
        )));
    }
    // Candidate thresholds: the distinct Z values in (0, 0.5), plus the
    // largest representable threshold below 0.5 (freezing only levels with
    // Z >= 0.5).
    let mut candidates: Vec<f64> = table
        .records
        .iter()
        .flat_map(|rec| rec.stats.z_level.iter().copied())
        .filter(|&z| z > 0.0 && z < 0.5)
        .collect();
    candidates.push(f64::from_bits(0.5f64.to_bits() - 1));
    candidates.sort_unstable_by(f64::total_cmp);
    candidates.dedup();

    let mut chosen = None;
    for &eps in &candidates {
        let c = construct_by_threshold(table, eps, FrozenFill::Zeros);
        if c.rate_bits() >= target_bits {
            chosen = Some(c);
            break;
        }
    }
    // Even the most aggressive threshold may fall short; start from it and
    // unfreeze below.
    let mut c = chosen.unwrap_or_else(|| {
        construct_by_threshold(table, *candidates.last().unwrap(), FrozenFill::Zeros)
    });

    let mut order: Vec<usize> = (0..big_n).collect();
    order.sort_by(|&a, &b| {
        let sa = reliability_score(&table.records[a].stats.z_level);
        let sb = reliability_score(&table.records[b].stats.z_level);
        sb.total_cmp(&sa).then(a.cmp(&b))
    });
    // Freeze extra levels at the least reliable indices first, exhausting
    // each index before moving to the next.
    let mut rate = c.rate_bits();
    let mut pos = 0;
    while rate > target_bits {
        let j = order[pos];
        if c.k[j] < table.r as u8 {
            c.k[j] += 1;
            rate -= 1;
        } else {
            pos += 1;
        }
    }
    // Or unfreeze at the most reliable indices when no threshold reaches
    // the target.
    let mut pos = 0;
    while rate < target_bits {
        let j = order[big_n - 1 - pos];
        if c.k[j] > 0 {
            c.k[j] -= 1;
            rate += 1;
        } else {
            pos += 1;
        }
    }
    c.frozen = fill_frozen(&c.k, fill);
    Ok(c)
}

/// Multiplies `u` by the polar generator: bit-reversal permutation followed
/// by `log2 N` butterfly stages `(a, b) -> (a + b mod q, b)` at strides
/// `1, 2, .., N/2`.
pub fn gn_multiply(u: &[usize], r: u32) -> Result<Vec<usize>> {
    let big_n = u.len();
    if !big_n.is_power_of_two() || big_n == 0 {
        return Err(Error::NotPowerOfTwo(big_n));
    }
    let q = 1usize << r;
    for &s in u {
        if s >= q {
            return Err(Error::SymbolOutOfRange { symbol: s, q });
        }
    }
    let n = big_n.trailing_zeros();
    let mut x = vec![0usize; big_n];
    for (i, &s) in u.iter().enumerate() {
        x[bit_reverse(i, n)] = s;
    }
    let mask = q - 1;
    let mut stride = 1usize;
    while stride < big_n {
        let block = stride * 2;
        for start in (0..big_n).step_by(block) {
            for a in start..start + stride {
                x[a] = (x[a] + x[a + stride]) & mask;
            }
        }
        stride = block;
    }
    Ok(x)
}

pub(crate) fn bit_reverse(i: usize, bits: u32) -> usize {
    let mut out = 0;
    for b in 0..bits {
        out |= (i >> b & 1) << (bits - 1 - b);
    }
    out
}

/// Packs data bits into the non-frozen bit positions (index order, most
/// significant data bit first within each symbol), applies the generator,
/// and returns both the message symbols and the codeword.
pub fn encode(c: &CodeConstruction, data_bits: &[u8]) -> Result<(Vec<usize>, Vec<usize>)> {
    if data_bits.len() != c.rate_bits() {
        return Err(Error::WrongLength {
            expected: c.rate_bits(),
            actual: data_bits.len(),
        });
    }
    if let Some(&b) = data_bits.iter().find(|&&b| b > 1) {
        return Err(Error::Format(format!("data bit {b} is not 0 or 1")));
    }
    let r = c.r;
    let mut u = Vec::with_capacity(c.block_length());
    let mut pos = 0;
    for (&kj, &fj) in c.k.iter().zip(&c.frozen) {
        let data_len = r - u32::from(kj);
        let mut sym = (fj as usize) << data_len;
        for b in 0..data_len {
            sym |= (data_bits[pos] as usize) << (data_len - 1 - b);
            pos += 1;
        }
        u.push(sym);
    }
    let x = gn_multiply(&u, r)?;
    Ok((u, x))
}

/// Extracts the data bits back out of a message vector; inverse of the
/// placement done by [`encode`].
pub fn extract_data_bits(c: &CodeConstruction, u: &[usize]) -> Result<Vec<u8>> {
    if u.len() != c.block_length() {
        return Err(Error::WrongLength {
            expected: c.block_length(),
            actual: u.len(),
        });
    }
    let r = c.r;
    let mut bits = Vec::with_capacity(c.rate_bits());
    for (&kj, &sym) in c.k.iter().zip(u) {
        let data_len = r - u32::from(kj);
        for b in 0..data_len {
            bits.push((sym >> (data_len - 1 - b) & 1) as u8);
        }
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_ordered_erasure;
    use crate::polarize::{synthesize_all, SynthesisParams};
    use rand::Rng;
    use rand::SeedableRng;

    /// Dense generator-matrix oracle: `G = B H^(x n)` built by explicit
    /// Kronecker powers and bit-reversal row permutation.
    fn dense_gn_oracle(u: &[usize], q: usize) -> Vec<usize> {
        let big_n = u.len();
        let n = big_n.trailing_zeros();
        // h[k][j] of H^(x n): 1 iff j's bits are a subset of k's bits.
        let mut x = vec![0usize; big_n];
        for (j, out) in x.iter_mut().enumerate() {
            let mut acc = 0usize;
            for k in 0..big_n {
                if k & j == j {
                    // Row permutation: u B has entry u[rev(k)] at row k.
                    acc += u[bit_reverse(k, n)];
                }
            }
            *out = acc % q;
        }
        x
    }

    #[test]
    fn gn_multiply_hand_cases() {
        assert_eq!(gn_multiply(&[1, 3], 2).unwrap(), vec![0, 3]);
        assert_eq!(gn_multiply(&[0, 0, 0, 0], 2).unwrap(), vec![0, 0, 0, 0]);
        assert_eq!(gn_multiply(&[1, 2, 3, 0], 2).unwrap(), vec![2, 3, 2, 0]);
        assert!(gn_multiply(&[1, 2, 3], 2).is_err());
        assert!(gn_multiply(&[4, 0], 2).is_err());
    }

    #[test]
    fn gn_multiply_matches_dense_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for r in [1u32, 2, 3] {
            let q = 1usize << r;
            for n in 1..=4u32 {
                let big_n = 1usize << n;
                for _ in 0..100 {
                    let u: Vec<usize> = (0..big_n).map(|_| rng.random_range(0..q)).collect();
                    assert_eq!(
                        gn_multiply(&u, r).unwrap(),
                        dense_gn_oracle(&u, q),
                        "r={r} n={n} u={u:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn gn_multiply_is_linear() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let q = 8usize;
        for _ in 0..50 {
            let u: Vec<usize> = (0..16).map(|_| rng.random_range(0..q)).collect();
            let v: Vec<usize> = (0..16).map(|_| rng.random_range(0..q)).collect();
            let sum: Vec<usize> = u.iter().zip(&v).map(|(&a, &b)| (a + b) % q).collect();
            let gu = gn_multiply(&u, 3).unwrap();
            let gv = gn_multiply(&v, 3).unwrap();
            let gsum = gn_multiply(&sum, 3).unwrap();
            for i in 0..16 {
                assert_eq!(gsum[i], (gu[i] + gv[i]) % q);
            }
        }
    }

    fn erasure_table(n: u32) -> SynthesisTable {
        let w = build_ordered_erasure(2, &[0.5, 0.4, 0.1]).unwrap();
        synthesize_all(&w, n, &SynthesisParams::default()).unwrap()
    }

    #[test]
    fn threshold_construction_on_erasure_channel() {
        let table = erasure_table(6);
        let c = construct_by_threshold(&table, 0.1, FrozenFill::Zeros);
        // Frozen prefix property holds by construction; rate below capacity.
        assert!(c.rate_bits() <= 2 * c.block_length());
        assert!(c.rate_bits() > 0);
        let c2 = construct_by_threshold(&table, 0.02, FrozenFill::Zeros);
        assert!(c2.rate_bits() <= c.rate_bits(), "smaller eps freezes more");
    }

    #[test]
    fn rate_construction_hits_target_exactly() {
        let table = erasure_table(6);
        for target in [0usize, 10, 64, 100, 128] {
            let c = construct_by_rate(&table, target, FrozenFill::Zeros).unwrap();
            assert_eq!(c.rate_bits(), target);
        }
        assert!(construct_by_rate(&table, 129, FrozenFill::Zeros).is_err());
    }

    #[test]
    fn encode_places_bits_msb_first() {
        // n=1, r=2, k = [1, 1], frozen prefixes [1, 0]: u_j = frozen*2 + bit.
        let c = CodeConstruction {
            n: 1,
            r: 2,
            fingerprint: "test".into(),
            k: vec![1, 1],
            frozen: vec![1, 0],
        };
        let (u, x) = encode(&c, &[1, 0]).unwrap();
        assert_eq!(u, vec![3, 0]);
        assert_eq!(x, vec![3, 0]);
        assert_eq!(extract_data_bits(&c, &u).unwrap(), vec![1, 0]);
    }

    #[test]
    fn encode_extract_round_trip() {
        let table = erasure_table(5);
        let c = construct_by_rate(&table, 40, FrozenFill::Random { seed: 5 }).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let bits: Vec<u8> = (0..40).map(|_| rng.random_range(0..2) as u8).collect();
            let (u, _) = encode(&c, &bits).unwrap();
            assert_eq!(extract_data_bits(&c, &u).unwrap(), bits);
        }
        assert!(encode(&c, &[0; 39]).is_err());
    }

    #[test]
    fn construction_file_round_trip() {
        let table = erasure_table(4);
        let c = construct_by_threshold(&table, 0.1, FrozenFill::Random { seed: 3 });
        let json = construction_to_json(&c);
        let back = construction_from_json(&json).unwrap();
        assert_eq!(back, c);
        assert!(construction_from_json(b"{}").is_err());
    }

    #[test]
    fn all_frozen_encodes_deterministically() {
        let c = CodeConstruction {
            n: 2,
            r: 2,
            fingerprint: "test".into(),
            k: vec![2, 2, 2, 2],
            frozen: vec![1, 2, 3, 0],
        };
        assert_eq!(c.rate_bits(), 0);
        let (u, x) = encode(&c, &[]).unwrap();
        assert_eq!(u, vec![1, 2, 3, 0]);
        assert_eq!(x, gn_multiply(&[1, 2, 3, 0], 2).unwrap());
    }
}
