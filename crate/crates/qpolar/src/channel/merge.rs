//! Output-alphabet reduction: exact merging of likelihood-equivalent outputs
//! and lossy quantization down to a configured alphabet size.

use crate::error::{Error, Result};

use super::{Dmc, MERGE_REL_TOL, PROB_FLOOR};

/// Tests whether two output columns are proportional: `a[x] * b[x0] ==
/// b[x] * a[x0]` for every input `x`, within `rel_tol` relative error, where
/// `x0` is the first input with positive mass.
pub(crate) fn columns_proportional(a: &[f64], b: &[f64], rel_tol: f64) -> bool {
    let x0 = match a.iter().position(|&p| p > PROB_FLOOR) {
        Some(x) => x,
        None => return b.iter().all(|&p| p <= PROB_FLOOR),
    };
    if b[x0] <= PROB_FLOOR {
        return false;
    }
    let (fa, fb) = (a[x0], b[x0]);
    for (&pa, &pb) in a.iter().zip(b) {
        let lhs = pa * fb;
        let rhs = pb * fa;
        let scale = lhs.max(rhs);
        if (lhs - rhs).abs() > rel_tol * scale {
            return false;
        }
    }
    true
}

/// Merges outputs whose columns are proportional within `rel_tol` (relative),
/// summing their probabilities, and removes outputs with no mass. The merged
/// output keeps the lexicographically smallest constituent label. Capacity
/// and all Bhattacharyya statistics are preserved.
pub fn merge_equivalent_outputs(w: &Dmc, rel_tol: f64) -> Dmc {
    let q = w.q();
    let m = w.num_outputs();
    // Column view: cols[y][x] = W(y|x).
    let col = |y: usize| -> Vec<f64> { (0..q).map(|x| w.w(y, x)).collect() };

    let mut group_cols: Vec<Vec<f64>> = Vec::new();
    let mut group_labels: Vec<String> = Vec::new();
    for y in 0..m {
        let c = col(y);
        if c.iter().sum::<f64>() <= PROB_FLOOR {
            continue;
        }
        match group_cols
            .iter()
            .position(|g| columns_proportional(g, &c, rel_tol))
        {
            Some(g) => {
                for (acc, v) in group_cols[g].iter_mut().zip(&c) {
                    *acc += v;
                }
                if w.output_labels()[y] < group_labels[g] {
                    group_labels[g] = w.output_labels()[y].clone();
                }
            }
            None => {
                group_cols.push(c);
                group_labels.push(w.output_labels()[y].clone());
            }
        }
    }

    let m2 = group_cols.len();
    let mut rows = vec![vec![0.0; m2]; q];
    for (g, c) in group_cols.iter().enumerate() {
        for (x, &p) in c.iter().enumerate() {
            rows[x][g] = p.min(1.0);
        }
    }
    Dmc::new(w.r(), group_labels, rows)
        .expect("merging preserves stochasticity")
        .with_quantized_flag(w.is_quantized())
}

/// Merges outputs with the default tolerance [`MERGE_REL_TOL`].
pub fn merge_default(w: &Dmc) -> Dmc {
    merge_equivalent_outputs(w, MERGE_REL_TOL)
}

struct QuantCol<T> {
    raw: Vec<f64>,
    /// `raw` scaled to unit mass; refreshed on merge.
    norm: Vec<f64>,
    tag: T,
}

fn normalized(raw: &[f64]) -> Vec<f64> {
    let mass: f64 = raw.iter().sum();
    raw.iter().map(|&p| p / mass).collect()
}

fn norm_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&pa, &pb) in a.iter().zip(b) {
        let delta = pa - pb;
        d += delta * delta;
    }
    d
}

/// Greedy closest-pair coalescing of dense columns down to `target`
/// survivors: repeatedly merges (sums) the pair whose mass-normalized
/// columns are closest in Euclidean distance, keeping the smaller tag.
/// Deterministic; ties break on the smaller index pair.
pub(crate) fn greedy_quantize_columns<T: Ord>(
    cols: Vec<(Vec<f64>, T)>,
    target: usize,
) -> Vec<(Vec<f64>, T)> {
    let m = cols.len();
    if m <= target {
        return cols;
    }
    let mut cols: Vec<Option<QuantCol<T>>> = cols
        .into_iter()
        .map(|(raw, tag)| {
            let norm = normalized(&raw);
            Some(QuantCol { raw, norm, tag })
        })
        .collect();

    // Nearest-neighbor maintenance: recompute a column's neighbor only when
    // its previous neighbor disappears into a merge.
    fn nearest<T>(cols: &[Option<QuantCol<T>>], i: usize) -> Option<(f64, usize)> {
        let ci = cols[i].as_ref()?;
        let mut best: Option<(f64, usize)> = None;
        for (j, slot) in cols.iter().enumerate() {
            if j == i {
                continue;
            }
            if let Some(cj) = slot {
                let d = norm_dist(&ci.norm, &cj.norm);
                if best.is_none() || d < best.unwrap().0 {
                    best = Some((d, j));
                }
            }
        }
        best
    }

    let mut nn: Vec<Option<(f64, usize)>> = (0..m).map(|i| nearest(&cols, i)).collect();
    let mut alive = m;
    while alive > target {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, entry) in nn.iter().enumerate() {
            if let Some((d, j)) = entry {
                let cand = (*d, i.min(*j), i.max(*j));
                if best.is_none() || cand < best.unwrap() {
                    best = Some(cand);
                }
            }
        }
        let (_, i, j) = best.expect("at least two alive columns");
        let merged_from = cols[j].take().expect("alive");
        let slot = cols[i].as_mut().expect("alive");
        for (acc, v) in slot.raw.iter_mut().zip(&merged_from.raw) {
            *acc += v;
        }
        slot.norm = normalized(&slot.raw);
        if merged_from.tag < slot.tag {
            slot.tag = merged_from.tag;
        }
        alive -= 1;
        nn[j] = None;
        nn[i] = nearest(&cols, i);
        for k in 0..m {
            if k == i || cols[k].is_none() {
                continue;
            }
            match nn[k] {
                Some((_, t)) if t == i || t == j => nn[k] = nearest(&cols, k),
                _ => {
                    let d = norm_dist(
                        &cols[k].as_ref().unwrap().norm,
                        &cols[i].as_ref().unwrap().norm,
                    );
                    if nn[k].is_none() || d < nn[k].unwrap().0 {
                        nn[k] = Some((d, i));
                    }
                }
            }
        }
    }
    cols.into_iter()
        .flatten()
        .map(|c| (c.raw, c.tag))
        .collect()
}

/// Reduces the output alphabet to at most `max_outputs` by repeatedly
/// merging the pair of outputs whose mass-normalized columns are closest in
/// Euclidean distance. The result is an approximation and carries the
/// quantized flag; if the alphabet is already small enough the channel is
/// returned unchanged.
pub fn quantize_outputs(w: &Dmc, max_outputs: usize) -> Result<Dmc> {
    if max_outputs < w.q() {
        return Err(Error::InvalidConfig(format!(
            "max_outputs {} is below the input alphabet size {}",
            max_outputs,
            w.q()
        )));
    }
    let m = w.num_outputs();
    if m <= max_outputs {
        return Ok(w.clone());
    }
    let q = w.q();
    let cols: Vec<(Vec<f64>, String)> = (0..m)
        .map(|y| {
            (
                (0..q).map(|x| w.w(y, x)).collect(),
                w.output_labels()[y].clone(),
            )
        })
        .collect();
    let kept = greedy_quantize_columns(cols, max_outputs);
    let mut rows = vec![vec![0.0; kept.len()]; q];
    let mut labels = Vec::with_capacity(kept.len());
    for (g, (c, label)) in kept.into_iter().enumerate() {
        for (x, p) in c.into_iter().enumerate() {
            rows[x][g] = p.min(1.0);
        }
        labels.push(label);
    }
    Ok(Dmc::new(w.r(), labels, rows)?.with_quantized_flag(true))
}
