//! Discrete memoryless channels with input alphabet `{0, .., 2^r - 1}` and
//! the scalar statistics used throughout the toolkit: symmetric capacity,
//! pairwise Bhattacharyya affinities, the per-difference averages `Z_v`, the
//! per-bit-level averages `Z_i` and their maxima.
//!
//! Bit convention, used everywhere in this crate: a symbol `v` is read as the
//! bit string `v_1 v_2 .. v_r` with `v_1` the most significant bit, i.e.
//! `v = sum_j v_j * 2^(r-j)`. The ordered weight of `v` is the largest `j`
//! with `v_j != 0` (and 0 for `v = 0`), so the weight-`i` class consists of
//! the odd multiples of `2^(r-i)` and has `2^(i-1)` elements.

mod builders;
mod io;
mod merge;

pub use builders::{
    build_ordered_erasure, build_ordered_symmetric, capacity_ordered_erasure, identity_channel,
    osc_capacity_closed_form, random_channel, single_output_channel,
};
pub use io::{channel_from_json, channel_to_json, read_channel, write_channel};
pub(crate) use io::to_precise_json;
pub(crate) use merge::greedy_quantize_columns;
pub use merge::{merge_default, merge_equivalent_outputs, quantize_outputs};

use crate::error::{Error, Result};

/// Column sums must match 1 to this tolerance for a channel to be accepted.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Default relative tolerance for detecting proportional output columns.
pub const MERGE_REL_TOL: f64 = 1e-12;

/// Probabilities at or below this threshold are treated as exact zeros.
pub const PROB_FLOOR: f64 = 1e-300;

/// A discrete memoryless channel `W : X -> Y` with `|X| = q = 2^r` and a
/// finite labeled output alphabet. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dmc {
    r: u32,
    q: usize,
    output_labels: Vec<String>,
    /// Input-major storage: `probs[x * m + y] = W(y|x)`.
    probs: Vec<f64>,
    /// Set when a lossy output quantization occurred anywhere in the
    /// history of this channel.
    quantized: bool,
}

impl Dmc {
    /// Builds a channel from one probability row per input symbol
    /// (`rows[x][y] = W(y|x)`), validating all invariants.
    pub fn new(r: u32, output_labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if r == 0 || r > 30 {
            return Err(Error::InvalidChannel(format!(
                "r must be in 1..=30, got {r}"
            )));
        }
        let q = 1usize << r;
        let m = output_labels.len();
        if m == 0 {
            return Err(Error::InvalidChannel("output alphabet is empty".into()));
        }
        {
            let mut sorted: Vec<&String> = output_labels.iter().collect();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidChannel("output labels are not unique".into()));
            }
        }
        if rows.len() != q {
            return Err(Error::InvalidChannel(format!(
                "expected {q} input rows, got {}",
                rows.len()
            )));
        }
        let mut probs = Vec::with_capacity(q * m);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidChannel(format!(
                    "input {x}: expected {m} entries, got {}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for &p in row {
                if !(0.0..=1.0).contains(&p) || p.is_nan() {
                    return Err(Error::InvalidChannel(format!(
                        "input {x}: probability {p} outside [0, 1]"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidChannel(format!(
                    "input {x}: probabilities sum to {sum}, not 1"
                )));
            }
            probs.extend_from_slice(row);
        }
        Ok(Self {
            r,
            q,
            output_labels,
            probs,
            quantized: false,
        })
    }

    pub(crate) fn with_quantized_flag(mut self, quantized: bool) -> Self {
        self.quantized = quantized;
        self
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    /// Input alphabet size `q = 2^r`.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Output alphabet size.
    pub fn num_outputs(&self) -> usize {
        self.output_labels.len()
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    pub fn output_index(&self, label: &str) -> Option<usize> {
        self.output_labels.iter().position(|l| l == label)
    }

    /// `W(y|x)`.
    pub fn w(&self, y: usize, x: usize) -> f64 {
        self.probs[x * self.num_outputs() + y]
    }

    /// The conditional output distribution of input `x`.
    pub fn input_row(&self, x: usize) -> &[f64] {
        let m = self.num_outputs();
        &self.probs[x * m..(x + 1) * m]
    }

    /// True when a lossy quantization occurred in this channel's history.
    pub fn is_quantized(&self) -> bool {
        self.quantized
    }

    pub(crate) fn check_symbol(&self, x: usize) -> Result<()> {
        if x < self.q {
            Ok(())
        } else {
            Err(Error::SymbolOutOfRange { symbol: x, q: self.q })
        }
    }

    /// Per-output sparse columns `(inputs with positive mass, values)`,
    /// in output order. Entries at or below [`PROB_FLOOR`] are dropped.
    pub(crate) fn sparse_columns(&self) -> Vec<SparseColumn> {
        let m = self.num_outputs();
        let mut cols = vec![SparseColumn::default(); m];
        for x in 0..self.q {
            let row = self.input_row(x);
            for (y, &p) in row.iter().enumerate() {
                if p > PROB_FLOOR {
                    cols[y].inputs.push(x as u32);
                    cols[y].values.push(p);
                }
            }
        }
        cols
    }
}

/// One output column in sparse form: the inputs that can produce the output,
/// with their probabilities.
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseColumn {
    pub inputs: Vec<u32>,
    pub values: Vec<f64>,
}

/// Ordered weight `wt_r(v)`: the 1-based position (from the most significant
/// bit) of the lowest-order nonzero bit, 0 for the zero symbol.
pub fn ordered_weight(v: usize, r: u32) -> Result<u32> {
    if v >= (1usize << r) {
        return Err(Error::SymbolOutOfRange { symbol: v, q: 1 << r });
    }
    if v == 0 {
        Ok(0)
    } else {
        Ok(r - v.trailing_zeros())
    }
}

/// Ordered distance `d_r(x, x') = wt_r(x XOR x')`: the highest bit position
/// (1-based from the MSB) where the two symbols differ.
pub fn ordered_distance(x: usize, y: usize, r: u32) -> Result<u32> {
    if x >= (1usize << r) {
        return Err(Error::SymbolOutOfRange { symbol: x, q: 1 << r });
    }
    ordered_weight(x ^ y, r)
}

/// Symmetric capacity `I(W)` in bits, computed with a uniform input prior.
/// Zero-probability terms contribute nothing; the result is clamped to
/// `[0, r]`.
pub fn capacity(w: &Dmc) -> f64 {
    let q = w.q() as f64;
    let mut bits = 0.0;
    for y in 0..w.num_outputs() {
        let mut py = 0.0;
        for x in 0..w.q() {
            py += w.w(y, x);
        }
        py /= q;
        if py <= PROB_FLOOR {
            continue;
        }
        for x in 0..w.q() {
            let p = w.w(y, x);
            if p > PROB_FLOOR {
                bits += p / q * (p / py).log2();
            }
        }
    }
    bits.clamp(0.0, w.r() as f64)
}

/// Bhattacharyya affinity `Z(W_{x,x'}) = sum_y sqrt(W(y|x) W(y|x'))`.
/// Equals 1 exactly when `x = x'`.
pub fn bhattacharyya_pair(w: &Dmc, x: usize, x2: usize) -> Result<f64> {
    w.check_symbol(x)?;
    w.check_symbol(x2)?;
    if x == x2 {
        return Ok(1.0);
    }
    let a = w.input_row(x);
    let b = w.input_row(x2);
    Ok(a.iter().zip(b).map(|(&p, &p2)| (p * p2).sqrt()).sum())
}

/// The full `q x q` matrix of pairwise Bhattacharyya affinities, flattened
/// row-major. Symmetric with unit diagonal.
pub fn bhattacharyya_matrix(w: &Dmc) -> Vec<f64> {
    let q = w.q();
    let mut z = vec![0.0; q * q];
    for x in 0..q {
        z[x * q + x] = 1.0;
        for x2 in (x + 1)..q {
            let v = bhattacharyya_pair(w, x, x2).expect("symbols in range");
            z[x * q + x2] = v;
            z[x2 * q + x] = v;
        }
    }
    z
}

/// All scalar summaries of a channel.
#[derive(Debug, Clone)]
pub struct ChannelStats {
    /// Symmetric capacity in bits, in `[0, r]`.
    pub capacity: f64,
    /// `q x q` pairwise Bhattacharyya matrix, row-major.
    pub z_pair: Vec<f64>,
    /// `Z_v` for `v = 1..q`, stored at `z_v[v - 1]`.
    pub z_v: Vec<f64>,
    /// Level averages `Z_1..Z_r`, stored at `z_level[i - 1]`.
    pub z_level: Vec<f64>,
    /// `Z(W)`: the weighted average of the level values.
    pub z_avg: f64,
    /// Level maxima `Z_max^(1)..Z_max^(r)`.
    pub z_max_level: Vec<f64>,
}

/// The level statistics kept per synthesized channel. Same content as
/// [`ChannelStats`] minus the `q x q` pair matrix, which grows quadratically
/// in the alphabet size and is cheap to recompute when needed.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub capacity: f64,
    pub z_v: Vec<f64>,
    pub z_level: Vec<f64>,
    pub z_avg: f64,
    pub z_max_level: Vec<f64>,
}

impl LevelStats {
    /// Lower capacity bound `log2(q / (1 + sum 2^(i-1) Z_i))`.
    pub fn capacity_lower_bound(&self) -> f64 {
        let mut s = 1.0;
        for (i, z) in self.z_level.iter().enumerate() {
            s += (1u64 << i) as f64 * z;
        }
        ((self.z_level.len() as f64).exp2() / s).log2()
    }

    /// Upper capacity bound `sum sqrt(1 - Z_i^2)`.
    pub fn capacity_upper_bound(&self) -> f64 {
        self.z_level
            .iter()
            .map(|&z| (1.0 - (z * z).min(1.0)).max(0.0).sqrt())
            .sum()
    }
}

/// Computes capacity and all `Z` statistics derived from per-difference
/// accumulation, without materializing the `q x q` pair matrix.
pub fn level_stats(w: &Dmc) -> LevelStats {
    let q = w.q();
    let r = w.r();
    // acc[v] accumulates sum_x Z(W_{x, x+v}) over ordered pairs.
    let mut acc = vec![0.0; q];
    for col in w.sparse_columns() {
        let k = col.inputs.len();
        for a in 0..k {
            let (xa, wa) = (col.inputs[a] as usize, col.values[a]);
            for b in (a + 1)..k {
                let (xb, wb) = (col.inputs[b] as usize, col.values[b]);
                let c = (wa * wb).sqrt();
                let d = xb - xa;
                acc[d] += c;
                acc[q - d] += c;
            }
        }
    }
    let z_v: Vec<f64> = (1..q).map(|v| (acc[v] / q as f64).min(1.0)).collect();
    let mut z_level = vec![0.0f64; r as usize];
    let mut z_max_level = vec![0.0f64; r as usize];
    for v in 1..q {
        let i = (r - (v).trailing_zeros()) as usize - 1;
        z_level[i] += z_v[v - 1];
        z_max_level[i] = z_max_level[i].max(z_v[v - 1]);
    }
    for (i, z) in z_level.iter_mut().enumerate() {
        *z /= (1u64 << i) as f64;
    }
    let mut z_avg = 0.0;
    for (i, &z) in z_level.iter().enumerate() {
        z_avg += (1u64 << i) as f64 * z;
    }
    z_avg /= (q - 1) as f64;
    LevelStats {
        capacity: capacity(w),
        z_v,
        z_level,
        z_avg,
        z_max_level,
    }
}

/// Computes every field of [`ChannelStats`].
pub fn channel_stats(w: &Dmc) -> ChannelStats {
    let ls = level_stats(w);
    ChannelStats {
        capacity: ls.capacity,
        z_pair: bhattacharyya_matrix(w),
        z_v: ls.z_v,
        z_level: ls.z_level,
        z_avg: ls.z_avg,
        z_max_level: ls.z_max_level,
    }
}

/// The channel seen by the `r - k` least significant bits of the input when
/// the `k` most significant bits are drawn uniformly: columns of `W` whose
/// low bits agree are averaged.
pub fn restrict_rightmost(w: &Dmc, k: u32) -> Result<Dmc> {
    let r = w.r();
    if k >= r {
        return Err(Error::InvalidConfig(format!(
            "restriction depth {k} must be in 0..{r}"
        )));
    }
    if k == 0 {
        return Ok(w.clone());
    }
    let r2 = r - k;
    let q2 = 1usize << r2;
    let m = w.num_outputs();
    let scale = 1.0 / (1u64 << k) as f64;
    let mut rows = vec![vec![0.0; m]; q2];
    for u in 0..q2 {
        for a in 0..(1usize << k) {
            let x = (a << r2) | u;
            let row = w.input_row(x);
            for (acc, &p) in rows[u].iter_mut().zip(row) {
                *acc += p;
            }
        }
        for p in rows[u].iter_mut() {
            *p *= scale;
        }
    }
    Ok(Dmc::new(r2, w.output_labels().to_vec(), rows)?.with_quantized_flag(w.is_quantized()))
}
