//! The minus/plus channel transforms, recursive synthesis of all virtual
//! channels at depth `n`, extremal-configuration classification, and Monte
//! Carlo sampling of the channel polarization process.

mod validate;

pub use validate::{validate_bhatta_order, validate_transform_identities, RelationCheck,
    ValidationReport};

use std::collections::HashMap;
use std::fmt;
use std::io::Write as IoWrite;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::channel::{
    capacity, channel_to_json, greedy_quantize_columns, level_stats, quantize_outputs,
    restrict_rightmost, Dmc, LevelStats, MERGE_REL_TOL, PROB_FLOOR,
};
use crate::error::{Error, Result};

/// One step of the polarizing transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Minus,
    Plus,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Minus => "-",
            Sign::Plus => "+",
        })
    }
}

/// Renders a path as a compact sign string, e.g. `-++-`.
pub fn path_string(signs: &[Sign]) -> String {
    signs.iter().map(|s| s.to_string()).collect()
}

/// Parses a sign string produced by [`path_string`].
pub fn parse_path(s: &str) -> Result<Vec<Sign>> {
    s.chars()
        .map(|c| match c {
            '-' => Ok(Sign::Minus),
            '+' => Ok(Sign::Plus),
            other => Err(Error::Format(format!("invalid path character {other:?}"))),
        })
        .collect()
}

/// Parameters governing recursive synthesis.
#[derive(Debug, Clone)]
pub struct SynthesisParams {
    /// Output alphabet cap; larger alphabets are quantized (and flagged).
    pub max_outputs: usize,
    /// Relative tolerance for merging proportional output columns.
    pub merge_tol: f64,
    /// Hard memory budget for intermediate column storage; exceeding it is
    /// an explicit error, never a silent truncation.
    pub memory_budget_bytes: usize,
    /// Hard cap on distinct intermediate columns per transform step.
    pub max_intermediate_outputs: usize,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            max_outputs: 65536,
            merge_tol: MERGE_REL_TOL,
            memory_budget_bytes: 2 << 30,
            max_intermediate_outputs: 1 << 18,
        }
    }
}

impl SynthesisParams {
    pub fn with_max_outputs(max_outputs: usize) -> Self {
        Self {
            max_outputs,
            max_intermediate_outputs: (2 * max_outputs).max(256),
            ..Self::default()
        }
    }
}

/// How the outputs of a transformed channel are labeled.
#[derive(Debug, Clone, Copy)]
enum LabelMode {
    /// Compose parent labels, keeping the smallest constituent of each
    /// merged group (ordered by parent output indices).
    Compose,
    /// Sequential indices; used inside deep synthesis where composed labels
    /// would grow exponentially.
    Sequential,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_step(h: u64, x: u64) -> u64 {
    (h ^ x).wrapping_mul(FNV_PRIME)
}

/// A merged group of proportional candidate columns.
struct Group {
    support: Vec<u32>,
    /// Values normalized by the first entry, as raw bits (exact-match key).
    norm_bits: Vec<u64>,
    /// Accumulated raw column, parallel to `support`.
    col: Vec<f64>,
    /// Smallest constituent `(y1, y2, u1)` for label construction.
    src: (u32, u32, u32),
}

/// Mask dropping the low mantissa bits of a normalized value, so columns
/// that differ only by summation-order noise land in the same bucket.
const COARSE_MASK: u64 = !0xff_ffff;

/// Merges near-proportional groups within the relative tolerance. Equal
/// supports are a prerequisite since zero entries are exact. Buckets are
/// keyed on the support and coarsely rounded normalized values: the
/// proportionality test still decides every merge, the key only bounds the
/// scan, at the cost of missing a merge when noise straddles a rounding
/// boundary (harmless: the outputs stay separate and all statistics agree).
fn tolerance_merge(groups: Vec<Group>, rel_tol: f64) -> Vec<Group> {
    let mut reps: Vec<Group> = Vec::with_capacity(groups.len());
    let mut by_shape: HashMap<u64, Vec<u32>> = HashMap::new();
    'groups: for g in groups {
        let mut key = FNV_OFFSET;
        for (&s, &nb) in g.support.iter().zip(&g.norm_bits) {
            key = fnv_step(fnv_step(key, s as u64), nb & COARSE_MASK);
        }
        let ids = by_shape.entry(key).or_default();
        for &id in ids.iter() {
            let rep = &mut reps[id as usize];
            if rep.support == g.support && proportional_sparse(&rep.col, &g.col, rel_tol) {
                for (acc, &v) in rep.col.iter_mut().zip(&g.col) {
                    *acc += v;
                }
                if g.src < rep.src {
                    rep.src = g.src;
                }
                continue 'groups;
            }
        }
        ids.push(reps.len() as u32);
        reps.push(g);
    }
    reps
}

/// Accumulates candidate columns, merging proportional ones as they arrive.
/// Bit-identical normalized columns merge via hashing; a final pass merges
/// the remaining near-proportional groups within the relative tolerance.
/// When the number of distinct columns outgrows `soft_cap`, the accumulated
/// alphabet is compacted and, if necessary, quantized down to `target`
/// (setting the quantized flag) so unstructured channels stay bounded.
struct ColumnGrouper {
    q: usize,
    rel_tol: f64,
    groups: Vec<Group>,
    by_key: HashMap<u64, Vec<u32>>,
    nnz: usize,
    memory_budget: usize,
    soft_cap: usize,
    target: usize,
    quantized: bool,
    norm_scratch: Vec<u64>,
}

impl ColumnGrouper {
    fn new(q: usize, rel_tol: f64, memory_budget: usize, soft_cap: usize, target: usize) -> Self {
        Self {
            q,
            rel_tol,
            groups: Vec::new(),
            by_key: HashMap::new(),
            nnz: 0,
            memory_budget,
            soft_cap: soft_cap.max(target),
            target,
            quantized: false,
            norm_scratch: Vec::new(),
        }
    }

    fn add(&mut self, support: &[u32], values: &[f64], src: (u32, u32, u32)) -> Result<()> {
        debug_assert!(!support.is_empty());
        let first = values[0];
        let mut key = FNV_OFFSET;
        let mut norm_scratch = std::mem::take(&mut self.norm_scratch);
        norm_scratch.clear();
        for (&s, &v) in support.iter().zip(values) {
            let nb = (v / first).to_bits();
            key = fnv_step(fnv_step(key, s as u64), nb);
            norm_scratch.push(nb);
        }
        if let Some(ids) = self.by_key.get(&key) {
            for &id in ids {
                let g = &mut self.groups[id as usize];
                if g.support == support && g.norm_bits == norm_scratch {
                    for (acc, &v) in g.col.iter_mut().zip(values) {
                        *acc += v;
                    }
                    if src < g.src {
                        g.src = src;
                    }
                    self.norm_scratch = norm_scratch;
                    return Ok(());
                }
            }
        }
        let norm_bits = norm_scratch.clone();
        self.norm_scratch = norm_scratch;
        self.nnz += support.len();
        let estimated = self.nnz * 24 + self.groups.len() * 96;
        if estimated > self.memory_budget {
            return Err(Error::ResourceBudget {
                estimated,
                budget: self.memory_budget,
            });
        }
        let id = self.groups.len() as u32;
        self.groups.push(Group {
            support: support.to_vec(),
            norm_bits,
            col: values.to_vec(),
            src,
        });
        self.by_key.entry(key).or_default().push(id);
        if self.groups.len() > self.soft_cap {
            self.reduce()?;
        }
        Ok(())
    }

    /// Compacts the accumulated alphabet: tolerance-merge first, then a
    /// lossy quantization down to `target` if the soft cap is still
    /// exceeded.
    fn reduce(&mut self) -> Result<()> {
        let mut groups = tolerance_merge(std::mem::take(&mut self.groups), self.rel_tol);
        if groups.len() > self.soft_cap {
            let dense_bytes = groups.len() * self.q * 8;
            if dense_bytes > self.memory_budget {
                return Err(Error::ResourceBudget {
                    estimated: dense_bytes,
                    budget: self.memory_budget,
                });
            }
            let dense: Vec<(Vec<f64>, (u32, u32, u32))> = groups
                .into_iter()
                .map(|g| {
                    let mut col = vec![0.0; self.q];
                    for (&x, &v) in g.support.iter().zip(&g.col) {
                        col[x as usize] = v;
                    }
                    (col, g.src)
                })
                .collect();
            let kept = greedy_quantize_columns(dense, self.target);
            self.quantized = true;
            groups = kept
                .into_iter()
                .map(|(col, src)| {
                    let mut support = Vec::new();
                    let mut values = Vec::new();
                    for (x, &v) in col.iter().enumerate() {
                        if v > PROB_FLOOR {
                            support.push(x as u32);
                            values.push(v);
                        }
                    }
                    let first = values[0];
                    let norm_bits = values.iter().map(|&v| (v / first).to_bits()).collect();
                    Group {
                        support,
                        norm_bits,
                        col: values,
                        src,
                    }
                })
                .collect();
        }
        // Rebuild the hash index over the surviving groups.
        self.by_key.clear();
        self.nnz = 0;
        for (id, g) in groups.iter().enumerate() {
            let mut key = FNV_OFFSET;
            for (&s, &nb) in g.support.iter().zip(&g.norm_bits) {
                key = fnv_step(fnv_step(key, s as u64), nb);
            }
            self.by_key.entry(key).or_default().push(id as u32);
            self.nnz += g.support.len();
        }
        self.groups = groups;
        Ok(())
    }

    fn finish(self) -> (Vec<Group>, bool) {
        let quantized = self.quantized;
        (tolerance_merge(self.groups, self.rel_tol), quantized)
    }
}

/// Proportionality of two positive value vectors over the same support:
/// cross-products with the first entry agree within `rel_tol` relative error.
fn proportional_sparse(a: &[f64], b: &[f64], rel_tol: f64) -> bool {
    let (fa, fb) = (a[0], b[0]);
    for (&va, &vb) in a.iter().zip(b) {
        let lhs = va * fb;
        let rhs = vb * fa;
        if (lhs - rhs).abs() > rel_tol * lhs.max(rhs) {
            return false;
        }
    }
    true
}

/// Applies one polarizing transform with merging of equivalent outputs fused
/// into the generation of the composite alphabet.
fn transform_channel(
    w: &Dmc,
    sign: Sign,
    rel_tol: f64,
    memory_budget: usize,
    soft_cap: usize,
    target: usize,
    labels: LabelMode,
) -> Result<Dmc> {
    let q = w.q();
    let mask = q - 1;
    let inv_q = 1.0 / q as f64;
    let cols = w.sparse_columns();
    let m = cols.len();
    let mut grouper = ColumnGrouper::new(q, rel_tol, memory_budget, soft_cap, target);

    match sign {
        Sign::Minus => {
            // W-((y1,y2)|u1) = 1/q sum_{u2} W(y1|u1+u2) W(y2|u2): a cyclic
            // cross-correlation of the two output columns over Z_q.
            let mut acc = vec![0.0; q];
            let mut touched: Vec<u32> = Vec::with_capacity(q);
            let mut support: Vec<u32> = Vec::with_capacity(q);
            let mut values: Vec<f64> = Vec::with_capacity(q);
            for i in 0..m {
                let a = &cols[i];
                if a.inputs.is_empty() {
                    continue;
                }
                for j in 0..m {
                    let b = &cols[j];
                    if b.inputs.is_empty() {
                        continue;
                    }
                    for (&xb, &wb) in b.inputs.iter().zip(&b.values) {
                        let base = q - xb as usize;
                        for (&xa, &wa) in a.inputs.iter().zip(&a.values) {
                            let u1 = (xa as usize + base) & mask;
                            if acc[u1] == 0.0 {
                                touched.push(u1 as u32);
                            }
                            acc[u1] += wa * wb;
                        }
                    }
                    support.clear();
                    values.clear();
                    // Collect in symbol order: sweep the dense accumulator
                    // when many entries were touched, sort otherwise.
                    if touched.len() * 8 >= q {
                        for (u1, slot) in acc.iter_mut().enumerate() {
                            if *slot != 0.0 {
                                let v = *slot * inv_q;
                                *slot = 0.0;
                                if v > PROB_FLOOR {
                                    support.push(u1 as u32);
                                    values.push(v);
                                }
                            }
                        }
                    } else {
                        touched.sort_unstable();
                        for &u1 in &touched {
                            let v = acc[u1 as usize] * inv_q;
                            acc[u1 as usize] = 0.0;
                            if v > PROB_FLOOR {
                                support.push(u1);
                                values.push(v);
                            }
                        }
                    }
                    touched.clear();
                    if !support.is_empty() {
                        grouper.add(&support, &values, (i as u32, j as u32, 0))?;
                    }
                }
            }
        }
        Sign::Plus => {
            // W+((y1,y2,u1)|u2) = 1/q W(y1|u1+u2) W(y2|u2): every (xa, xb)
            // entry pair contributes to exactly one u1 = xa - xb. Iterating
            // xb in ascending order fills each u1 bucket already sorted by
            // u2 = xb.
            let mut buckets: Vec<(Vec<u32>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); q];
            let mut touched: Vec<u32> = Vec::with_capacity(q);
            for i in 0..m {
                let a = &cols[i];
                for j in 0..m {
                    let b = &cols[j];
                    for (&xb, &wb) in b.inputs.iter().zip(&b.values) {
                        let base = q - xb as usize;
                        for (&xa, &wa) in a.inputs.iter().zip(&a.values) {
                            let u1 = (xa as usize + base) & mask;
                            let v = wa * wb * inv_q;
                            if v > PROB_FLOOR {
                                let bucket = &mut buckets[u1];
                                if bucket.0.is_empty() {
                                    touched.push(u1 as u32);
                                }
                                bucket.0.push(xb);
                                bucket.1.push(v);
                            }
                        }
                    }
                    touched.sort_unstable();
                    for &u1 in &touched {
                        let (support, values) = &mut buckets[u1 as usize];
                        grouper.add(support, values, (i as u32, j as u32, u1))?;
                        support.clear();
                        values.clear();
                    }
                    touched.clear();
                }
            }
        }
    }

    let (groups, interim_quantized) = grouper.finish();
    let m2 = groups.len();
    if m2 == 0 {
        return Err(Error::InvalidChannel(
            "transform produced an empty output alphabet".into(),
        ));
    }
    let mut rows = vec![vec![0.0; m2]; q];
    let mut out_labels = Vec::with_capacity(m2);
    for (g_idx, g) in groups.iter().enumerate() {
        for (&x, &v) in g.support.iter().zip(&g.col) {
            rows[x as usize][g_idx] = v.min(1.0);
        }
        out_labels.push(match labels {
            LabelMode::Sequential => g_idx.to_string(),
            LabelMode::Compose => {
                let (y1, y2, u1) = g.src;
                let l1 = &w.output_labels()[y1 as usize];
                let l2 = &w.output_labels()[y2 as usize];
                match sign {
                    Sign::Minus => format!("{l1}|{l2}"),
                    Sign::Plus => format!("{l1}|{l2}|{u1}"),
                }
            }
        });
    }
    Ok(Dmc::new(w.r(), out_labels, rows)?
        .with_quantized_flag(w.is_quantized() || interim_quantized))
}

const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

/// The channel seen by `u1` when `(u1 + u2, u2)` is transmitted over two
/// independent uses of `W` and `u2` is unknown. Equivalent outputs are
/// merged.
pub fn transform_minus(w: &Dmc) -> Result<Dmc> {
    transform_channel(
        w,
        Sign::Minus,
        MERGE_REL_TOL,
        DEFAULT_MEMORY_BUDGET,
        usize::MAX,
        usize::MAX,
        LabelMode::Compose,
    )
}

/// The channel seen by `u2` when `(u1 + u2, u2)` is transmitted over two
/// independent uses of `W` and `u1` is revealed. Equivalent outputs are
/// merged.
pub fn transform_plus(w: &Dmc) -> Result<Dmc> {
    transform_channel(
        w,
        Sign::Plus,
        MERGE_REL_TOL,
        DEFAULT_MEMORY_BUDGET,
        usize::MAX,
        usize::MAX,
        LabelMode::Compose,
    )
}

fn transform_step(w: &Dmc, sign: Sign, params: &SynthesisParams) -> Result<Dmc> {
    let t = transform_channel(
        w,
        sign,
        params.merge_tol,
        params.memory_budget_bytes,
        params.max_intermediate_outputs,
        params.max_outputs,
        LabelMode::Sequential,
    )?;
    if t.num_outputs() > params.max_outputs {
        quantize_outputs(&t, params.max_outputs)
    } else {
        Ok(t)
    }
}

/// Folds the transforms along `path` (first element applied first), merging
/// after every step and quantizing whenever the merged alphabet exceeds
/// `max_outputs`.
pub fn synthesize(w: &Dmc, path: &[Sign], max_outputs: usize) -> Result<Dmc> {
    synthesize_with(w, path, &SynthesisParams::with_max_outputs(max_outputs))
}

/// [`synthesize`] with full parameter control.
pub fn synthesize_with(w: &Dmc, path: &[Sign], params: &SynthesisParams) -> Result<Dmc> {
    let mut chan = w.clone();
    for &sign in path {
        chan = transform_step(&chan, sign, params)?;
    }
    Ok(chan)
}

/// Per-index outcome of a full synthesis.
#[derive(Debug, Clone)]
pub struct IndexRecord {
    /// 1-based index `i` of the virtual channel.
    pub index: usize,
    /// Transform path in application order.
    pub path: String,
    pub stats: LevelStats,
    /// `restricted_capacity[m]` = capacity of the channel seen by the `m`
    /// rightmost bits, for `m = 0..=r`.
    pub restricted_capacity: Vec<f64>,
    /// True when a lossy quantization occurred anywhere on the path.
    pub quantized: bool,
}

/// The complete set of virtual channels at depth `n`, in index order.
#[derive(Debug, Clone)]
pub struct SynthesisTable {
    pub n: u32,
    pub r: u32,
    pub max_outputs: usize,
    pub merge_tol: f64,
    /// Binds the table to its source channel and depth.
    pub fingerprint: String,
    pub records: Vec<IndexRecord>,
}

impl SynthesisTable {
    pub fn block_length(&self) -> usize {
        1 << self.n
    }

    pub fn mean_capacity(&self) -> f64 {
        self.records.iter().map(|rec| rec.stats.capacity).sum::<f64>()
            / self.records.len() as f64
    }

    pub fn any_quantized(&self) -> bool {
        self.records.iter().any(|rec| rec.quantized)
    }

    /// Writes the table as CSV: `index,path,capacity,z1..zr,class_k,quantized`.
    /// `class_k` is the frozen-prefix depth of the Z-region classification at
    /// `epsilon`, or -1 when unpolarized. An optional provenance comment is
    /// emitted first.
    pub fn write_csv<W: IoWrite>(
        &self,
        out: &mut W,
        epsilon: f64,
        provenance: Option<&str>,
    ) -> Result<()> {
        if let Some(p) = provenance {
            writeln!(out, "# {p}")?;
        }
        write!(out, "index,path,capacity")?;
        for i in 1..=self.r {
            write!(out, ",z{i}")?;
        }
        writeln!(out, ",class_k,quantized")?;
        for rec in &self.records {
            write!(out, "{},{},{:.16e}", rec.index, rec.path, rec.stats.capacity)?;
            for z in &rec.stats.z_level {
                write!(out, ",{z:.16e}")?;
            }
            let class = classify(&rec.stats.z_level, epsilon);
            let k = class.k.map(|k| k as i64).unwrap_or(-1);
            writeln!(out, ",{k},{}", u8::from(rec.quantized))?;
        }
        Ok(())
    }
}

/// Hash binding a synthesis (and the constructions derived from it) to the
/// canonical encoding of its source channel and the recursion depth.
pub fn synthesis_fingerprint(w: &Dmc, n: u32) -> String {
    let mut h = Sha256::new();
    h.update(channel_to_json(w));
    h.update(b"|n=");
    h.update(n.to_le_bytes());
    hex::encode(h.finalize())
}

fn make_record(chan: &Dmc, index: usize, path: String) -> Result<IndexRecord> {
    let stats = level_stats(chan);
    let r = chan.r();
    let mut restricted_capacity = Vec::with_capacity(r as usize + 1);
    restricted_capacity.push(0.0);
    for m in 1..r {
        restricted_capacity.push(capacity(&restrict_rightmost(chan, r - m)?));
    }
    restricted_capacity.push(stats.capacity);
    Ok(IndexRecord {
        index,
        path,
        stats,
        restricted_capacity,
        quantized: chan.is_quantized(),
    })
}

fn expand_rec(
    chan: Dmc,
    signs: &mut Vec<Sign>,
    depth_left: u32,
    base_index: usize,
    out: &mut [Option<IndexRecord>],
    params: &SynthesisParams,
) -> Result<()> {
    if depth_left == 0 {
        out[0] = Some(make_record(&chan, base_index + 1, path_string(signs))?);
        return Ok(());
    }
    let half = out.len() / 2;
    let (left, right) = out.split_at_mut(half);
    let (res_minus, res_plus) = rayon::join(
        || {
            let child = transform_step(&chan, Sign::Minus, params)?;
            let mut signs = signs.clone();
            signs.push(Sign::Minus);
            expand_rec(child, &mut signs, depth_left - 1, base_index, left, params)
        },
        || {
            let child = transform_step(&chan, Sign::Plus, params)?;
            let mut signs = signs.clone();
            signs.push(Sign::Plus);
            expand_rec(
                child,
                &mut signs,
                depth_left - 1,
                base_index + half,
                right,
                params,
            )
        },
    );
    res_minus?;
    res_plus?;
    Ok(())
}

/// Synthesizes all `2^n` virtual channels. Index `i` (1-based) follows the
/// path given by the binary expansion of `i - 1`, most significant bit
/// first, with 0 mapping to minus and 1 to plus; sibling subtrees are
/// expanded in parallel and each parent is expanded exactly once.
pub fn synthesize_all(w: &Dmc, n: u32, params: &SynthesisParams) -> Result<SynthesisTable> {
    if n == 0 {
        return Err(Error::InvalidConfig("synthesis depth must be >= 1".into()));
    }
    let big_n = 1usize << n;
    let mut slots: Vec<Option<IndexRecord>> = vec![None; big_n];
    expand_rec(w.clone(), &mut Vec::new(), n, 0, &mut slots, params)?;
    let records = slots
        .into_iter()
        .map(|slot| slot.expect("every index filled"))
        .collect();
    Ok(SynthesisTable {
        n,
        r: w.r(),
        max_outputs: params.max_outputs,
        merge_tol: params.merge_tol,
        fingerprint: synthesis_fingerprint(w, n),
        records,
    })
}

/// The transform path for 1-based index `i` at depth `n`: bits of `i - 1`,
/// most significant first; 0 is minus, 1 is plus.
pub fn path_for_index(index: usize, n: u32) -> Result<Vec<Sign>> {
    let big_n = 1usize << n;
    if index == 0 || index > big_n {
        return Err(Error::InvalidConfig(format!(
            "index {index} out of range 1..={big_n}"
        )));
    }
    let j = index - 1;
    Ok((0..n)
        .map(|t| {
            if j >> (n - 1 - t) & 1 == 0 {
                Sign::Minus
            } else {
                Sign::Plus
            }
        })
        .collect())
}

/// Inverse of [`path_for_index`].
pub fn index_for_path(signs: &[Sign]) -> usize {
    let mut j = 0usize;
    for &s in signs {
        j = (j << 1) | usize::from(s == Sign::Plus);
    }
    j + 1
}

/// The extremal-configuration region a statistics vector falls into:
/// `k` frozen levels means `Z_i > 1 - epsilon` for `i <= k` and
/// `Z_i < epsilon` for `i > k`. Anything else is unpolarized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigClass {
    /// Frozen-prefix depth `k in 0..=r`, or `None` when unpolarized.
    pub k: Option<u32>,
    /// The threshold used.
    pub epsilon: f64,
}

impl ConfigClass {
    pub fn is_unpolarized(&self) -> bool {
        self.k.is_none()
    }
}

/// Classifies a `Z_1..Z_r` vector into its extremal region at threshold
/// `epsilon` (which must lie in `(0, 0.5)`).
pub fn classify(z_level: &[f64], epsilon: f64) -> ConfigClass {
    assert!(
        epsilon > 0.0 && epsilon < 0.5,
        "classification threshold must lie in (0, 0.5)"
    );
    let r = z_level.len();
    for k in 0..=r {
        let high = z_level[..k].iter().all(|&z| z > 1.0 - epsilon);
        let low = z_level[k..].iter().all(|&z| z < epsilon);
        if high && low {
            return ConfigClass {
                k: Some(k as u32),
                epsilon,
            };
        }
    }
    ConfigClass { k: None, epsilon }
}

/// Fractions of indices in each extremal configuration, by three routes:
/// the windowed capacity counts (capacity within `delta` of `k` good bits
/// and the `k`-rightmost-bits channel also near `k`), the nearest-level
/// capacity counts (every index assigned to its closest level), and the
/// Z-region counts.
#[derive(Debug, Clone)]
pub struct PolarizationHistogram {
    pub delta: f64,
    pub epsilon: f64,
    /// `capacity_fraction[k]` = fraction of indices carrying `k` good bits
    /// by the windowed capacity test, `k = 0..=r`.
    pub capacity_fraction: Vec<f64>,
    pub capacity_unpolarized: f64,
    /// `nearest_fraction[k]` = fraction whose capacity rounds to `k`.
    pub nearest_fraction: Vec<f64>,
    /// `z_fraction[k]` = fraction classified into the region with `k` good
    /// bits (frozen-prefix depth `r - k`).
    pub z_fraction: Vec<f64>,
    pub z_unpolarized: f64,
}

impl PolarizationHistogram {
    /// `sum_k k * pi_k` over the windowed capacity counts.
    pub fn capacity_weighted_good_bits(&self) -> f64 {
        self.capacity_fraction
            .iter()
            .enumerate()
            .map(|(k, &f)| k as f64 * f)
            .sum()
    }

    /// `sum_k k * pi_k` over the nearest-level counts.
    pub fn nearest_weighted_good_bits(&self) -> f64 {
        self.nearest_fraction
            .iter()
            .enumerate()
            .map(|(k, &f)| k as f64 * f)
            .sum()
    }

    pub fn write_csv<W: IoWrite>(&self, out: &mut W, provenance: Option<&str>) -> Result<()> {
        if let Some(p) = provenance {
            writeln!(out, "# {p}")?;
        }
        writeln!(out, "good_bits,capacity_fraction,nearest_fraction,z_fraction")?;
        for (k, ((cf, nf), zf)) in self
            .capacity_fraction
            .iter()
            .zip(&self.nearest_fraction)
            .zip(&self.z_fraction)
            .enumerate()
        {
            writeln!(out, "{k},{cf:.16e},{nf:.16e},{zf:.16e}")?;
        }
        writeln!(
            out,
            "unpolarized,{:.16e},0.0000000000000000e0,{:.16e}",
            self.capacity_unpolarized, self.z_unpolarized
        )?;
        Ok(())
    }
}

/// Builds the polarization histogram of a synthesis table. `delta` is the
/// capacity proximity window (must lie in `(0, 0.5)` so the buckets are
/// disjoint); `epsilon` the Z-region threshold.
pub fn polarization_histogram(
    table: &SynthesisTable,
    delta: f64,
    epsilon: f64,
) -> PolarizationHistogram {
    assert!(delta > 0.0 && delta < 0.5, "delta must lie in (0, 0.5)");
    let r = table.r as usize;
    let total = table.records.len() as f64;
    let mut cap_counts = vec![0usize; r + 1];
    let mut nearest_counts = vec![0usize; r + 1];
    let mut z_counts = vec![0usize; r + 1];
    let mut z_unpolarized = 0usize;
    for rec in &table.records {
        for k in 0..=r {
            if (rec.stats.capacity - k as f64).abs() < delta
                && (rec.restricted_capacity[k] - k as f64).abs() < delta
            {
                cap_counts[k] += 1;
                break;
            }
        }
        let nearest = rec.stats.capacity.round().clamp(0.0, r as f64) as usize;
        nearest_counts[nearest] += 1;
        match classify(&rec.stats.z_level, epsilon).k {
            Some(frozen) => z_counts[r - frozen as usize] += 1,
            None => z_unpolarized += 1,
        }
    }
    let capacity_fraction: Vec<f64> = cap_counts.iter().map(|&c| c as f64 / total).collect();
    let capacity_unpolarized = 1.0 - capacity_fraction.iter().sum::<f64>();
    PolarizationHistogram {
        delta,
        epsilon,
        capacity_fraction,
        capacity_unpolarized,
        nearest_fraction: nearest_counts.iter().map(|&c| c as f64 / total).collect(),
        z_fraction: z_counts.iter().map(|&c| c as f64 / total).collect(),
        z_unpolarized: z_unpolarized as f64 / total,
    }
}

/// One step of a sampled polarization trajectory.
#[derive(Debug, Clone)]
pub struct PathStep {
    pub capacity: f64,
    pub z_level: Vec<f64>,
    pub z_max_level: Vec<f64>,
}

/// A sampled trajectory of the channel process: the sign drawn at each step
/// and the statistics after `t = 0..=n` transforms.
#[derive(Debug, Clone)]
pub struct PathTrace {
    pub seed: u64,
    pub stream: u64,
    pub signs: Vec<Sign>,
    pub steps: Vec<PathStep>,
}

fn step_of(stats: &LevelStats) -> PathStep {
    PathStep {
        capacity: stats.capacity,
        z_level: stats.z_level.clone(),
        z_max_level: stats.z_max_level.clone(),
    }
}

/// Samples one trajectory of the polarization process with i.i.d. uniform
/// signs from a dedicated RNG stream. Deterministic given `(seed, stream)`.
pub fn sample_path(
    w: &Dmc,
    n: u32,
    seed: u64,
    stream: u64,
    params: &SynthesisParams,
) -> Result<PathTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut signs = Vec::with_capacity(n as usize);
    let mut steps = Vec::with_capacity(n as usize + 1);
    let mut chan = w.clone();
    steps.push(step_of(&level_stats(&chan)));
    for _ in 0..n {
        let sign = if rng.random::<u8>() & 1 == 0 {
            Sign::Minus
        } else {
            Sign::Plus
        };
        signs.push(sign);
        chan = transform_step(&chan, sign, params)?;
        steps.push(step_of(&level_stats(&chan)));
    }
    Ok(PathTrace {
        seed,
        stream,
        signs,
        steps,
    })
}

/// Samples `count` independent trajectories in parallel; trajectory `t` uses
/// RNG stream `t`, so the batch is reproducible regardless of worker count.
pub fn sample_paths(
    w: &Dmc,
    n: u32,
    seed: u64,
    count: usize,
    params: &SynthesisParams,
) -> Result<Vec<PathTrace>> {
    use rayon::prelude::*;
    (0..count)
        .into_par_iter()
        .map(|t| sample_path(w, n, seed, t as u64, params))
        .collect()
}
