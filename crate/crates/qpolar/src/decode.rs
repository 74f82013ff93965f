//! Successive cancellation decoding. Posteriors are propagated through the
//! size-N butterfly as length-q likelihood vectors in the linear domain,
//! renormalized at every node; the decision at each index is the argmax
//! restricted to the frozen-prefix coset.

use crate::channel::Dmc;
use crate::code::{extract_data_bits, CodeConstruction};
use crate::error::{Error, Result};
use crate::polarize::synthesis_fingerprint;

/// A nonnegative length-q vector normalized to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodVector(Vec<f64>);

impl LikelihoodVector {
    /// Normalizes a raw nonnegative vector; an all-zero (or non-finite)
    /// vector is impossible evidence.
    pub fn new(mut raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !sum.is_finite() || sum <= 0.0 || raw.iter().any(|&p| p < 0.0 || p.is_nan()) {
            return Err(Error::ImpossibleEvidence);
        }
        for p in raw.iter_mut() {
            *p /= sum;
        }
        Ok(Self(raw))
    }

    pub fn uniform(q: usize) -> Self {
        Self(vec![1.0 / q as f64; q])
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Argmax over the coset of symbols whose top `k` bits (of `r`) equal
    /// `prefix`; ties go to the smallest symbol.
    pub fn argmax_in_coset(&self, prefix: u32, k: u8, r: u32) -> usize {
        let width = r - u32::from(k);
        let lo = (prefix as usize) << width;
        let hi = lo + (1usize << width);
        let mut best = lo;
        for x in lo + 1..hi {
            if self.0[x] > self.0[best] {
                best = x;
            }
        }
        best
    }
}

/// Posterior combine for the first symbol of a pair: a cyclic
/// cross-correlation over `Z_q`, `out[u1] ~ sum_u2 a[u1+u2] b[u2]`.
pub fn node_minus(a: &LikelihoodVector, b: &LikelihoodVector) -> Result<LikelihoodVector> {
    let q = a.q();
    debug_assert_eq!(q, b.q());
    let mask = q - 1;
    let (av, bv) = (a.as_slice(), b.as_slice());
    let mut out = vec![0.0; q];
    for (u1, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (u2, &pb) in bv.iter().enumerate() {
            acc += av[(u1 + u2) & mask] * pb;
        }
        *o = acc;
    }
    LikelihoodVector::new(out)
}

/// Posterior combine for the second symbol of a pair once the first is
/// known: `out[u2] ~ a[u1_hat + u2] b[u2]`.
pub fn node_plus(
    a: &LikelihoodVector,
    b: &LikelihoodVector,
    u1_hat: usize,
) -> Result<LikelihoodVector> {
    let q = a.q();
    debug_assert_eq!(q, b.q());
    let mask = q - 1;
    let (av, bv) = (a.as_slice(), b.as_slice());
    let out = (0..q).map(|u2| av[(u1_hat + u2) & mask] * bv[u2]).collect();
    LikelihoodVector::new(out)
}

/// The posterior over inputs after observing output index `y` under a
/// uniform prior: `out[x] ~ W(y|x)`.
pub fn posterior_by_index(w: &Dmc, y: usize) -> Result<LikelihoodVector> {
    if y >= w.num_outputs() {
        return Err(Error::OutputIndexOutOfRange {
            index: y,
            outputs: w.num_outputs(),
        });
    }
    LikelihoodVector::new((0..w.q()).map(|x| w.w(y, x)).collect())
}

/// [`posterior_by_index`] addressed by output label.
pub fn channel_posterior(w: &Dmc, label: &str) -> Result<LikelihoodVector> {
    let y = w
        .output_index(label)
        .ok_or_else(|| Error::UnknownOutputLabel(label.to_string()))?;
    posterior_by_index(w, y)
}

/// Result of decoding one frame.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub data_bits: Vec<u8>,
    pub u_hat: Vec<usize>,
    /// Set when impossible evidence was encountered anywhere; decoding
    /// continued with uniform posteriors at the dead nodes.
    pub failure: bool,
}

/// Result of a genie-aided pass: decisions are made normally but the true
/// prefix is propagated, so `correct[j]` is exactly the event "index j
/// decides correctly given a correct past".
#[derive(Debug, Clone)]
pub struct GenieResult {
    pub u_hat: Vec<usize>,
    pub correct: Vec<bool>,
    pub failure: bool,
}

enum Mode<'m> {
    /// Feed own decisions forward.
    Decode,
    /// Feed the given true symbols forward.
    Genie(&'m [usize]),
}

/// A successive cancellation decoder bound to one channel/construction pair.
/// Owns mutable per-frame scratch; use one instance per concurrent frame.
pub struct ScDecoder<'a> {
    w: &'a Dmc,
    c: &'a CodeConstruction,
    n: u32,
    big_n: usize,
    /// Per internal node (heap ids 1..N): the pair symbol awaiting its
    /// partner.
    pending: Vec<Option<usize>>,
    /// Per internal node: cached child likelihood pair for the current
    /// even/odd phase pair.
    cached: Vec<Option<(LikelihoodVector, LikelihoodVector)>>,
    /// Per leaf: channel posterior of the received symbol.
    leaf_post: Vec<LikelihoodVector>,
    failure: bool,
}

impl<'a> ScDecoder<'a> {
    /// Builds a decoder, refusing construction/channel pairs whose
    /// fingerprints do not match.
    pub fn new(w: &'a Dmc, c: &'a CodeConstruction) -> Result<Self> {
        let expected = synthesis_fingerprint(w, c.n);
        if c.fingerprint != expected {
            return Err(Error::FingerprintMismatch {
                expected,
                actual: c.fingerprint.clone(),
            });
        }
        Ok(Self::new_unchecked(w, c))
    }

    /// Builds a decoder without the fingerprint check, for callers that
    /// guarantee the pairing themselves.
    pub fn new_unchecked(w: &'a Dmc, c: &'a CodeConstruction) -> Self {
        assert_eq!(w.r(), c.r, "channel and construction alphabet mismatch");
        let big_n = c.block_length();
        Self {
            w,
            c,
            n: c.n,
            big_n,
            pending: vec![None; big_n],
            cached: vec![None; big_n],
            leaf_post: vec![LikelihoodVector::uniform(w.q()); big_n],
            failure: false,
        }
    }

    fn begin_frame(&mut self, y: &[usize]) -> Result<()> {
        if y.len() != self.big_n {
            return Err(Error::WrongLength {
                expected: self.big_n,
                actual: y.len(),
            });
        }
        self.failure = false;
        for p in self.pending.iter_mut() {
            *p = None;
        }
        for cmem in self.cached.iter_mut() {
            *cmem = None;
        }
        for (j, &yj) in y.iter().enumerate() {
            if yj >= self.w.num_outputs() {
                return Err(Error::OutputIndexOutOfRange {
                    index: yj,
                    outputs: self.w.num_outputs(),
                });
            }
            self.leaf_post[j] = match posterior_by_index(self.w, yj) {
                Ok(p) => p,
                Err(Error::ImpossibleEvidence) => {
                    self.failure = true;
                    LikelihoodVector::uniform(self.w.q())
                }
                Err(e) => return Err(e),
            };
        }
        Ok(())
    }

    fn or_uniform(&mut self, like: Result<LikelihoodVector>) -> LikelihoodVector {
        like.unwrap_or_else(|_| {
            self.failure = true;
            LikelihoodVector::uniform(self.w.q())
        })
    }

    /// Likelihood of the next undecided symbol of node `v` (heap indexing:
    /// root 1, children 2v and 2v+1, leaves N..2N-1).
    fn next_like(&mut self, v: usize) -> LikelihoodVector {
        if v >= self.big_n {
            return self.leaf_post[v - self.big_n].clone();
        }
        match self.pending[v] {
            None => {
                let a = self.next_like(2 * v);
                let b = self.next_like(2 * v + 1);
                let out = node_minus(&a, &b);
                let out = self.or_uniform(out);
                self.cached[v] = Some((a, b));
                out
            }
            Some(first) => {
                let (a, b) = self.cached[v].as_ref().expect("cached pair at odd phase");
                let out = node_plus(a, b, first);
                self.or_uniform(out)
            }
        }
    }

    /// Feeds a decided symbol into node `v`, propagating completed pairs.
    fn feed(&mut self, v: usize, sym: usize) {
        if v >= self.big_n {
            return;
        }
        match self.pending[v].take() {
            None => self.pending[v] = Some(sym),
            Some(first) => {
                let mask = self.w.q() - 1;
                self.feed(2 * v, (first + sym) & mask);
                self.feed(2 * v + 1, sym);
            }
        }
    }

    fn decide(&self, j: usize, like: &LikelihoodVector) -> usize {
        let k = self.c.k[j];
        if u32::from(k) == self.c.r {
            self.c.frozen[j] as usize
        } else {
            like.argmax_in_coset(self.c.frozen[j], k, self.c.r)
        }
    }

    fn run(&mut self, y: &[usize], mode: Mode, mut on_like: impl FnMut(usize, &LikelihoodVector))
        -> Result<(Vec<usize>, bool)> {
        self.begin_frame(y)?;
        let mut u_hat = Vec::with_capacity(self.big_n);
        for j in 0..self.big_n {
            let like = self.next_like(1);
            on_like(j, &like);
            let decision = self.decide(j, &like);
            u_hat.push(decision);
            let forward = match mode {
                Mode::Decode => decision,
                Mode::Genie(truth) => truth[j],
            };
            self.feed(1, forward);
        }
        Ok((u_hat, self.failure))
    }

    /// Decodes one frame of received output indices.
    pub fn decode(&mut self, y: &[usize]) -> Result<DecodeResult> {
        let (u_hat, failure) = self.run(y, Mode::Decode, |_, _| {})?;
        let data_bits = extract_data_bits(self.c, &u_hat)?;
        Ok(DecodeResult {
            data_bits,
            u_hat,
            failure,
        })
    }

    /// Decodes one frame addressed by output labels.
    pub fn decode_labels(&mut self, labels: &[&str]) -> Result<DecodeResult> {
        let y: Vec<usize> = labels
            .iter()
            .map(|l| {
                self.w
                    .output_index(l)
                    .ok_or_else(|| Error::UnknownOutputLabel(l.to_string()))
            })
            .collect::<Result<_>>()?;
        self.decode(&y)
    }

    /// Genie-aided pass: per-index decisions against the true message with
    /// a correct past.
    pub fn decode_genie(&mut self, y: &[usize], true_u: &[usize]) -> Result<GenieResult> {
        if true_u.len() != self.big_n {
            return Err(Error::WrongLength {
                expected: self.big_n,
                actual: true_u.len(),
            });
        }
        let (u_hat, failure) = self.run(y, Mode::Genie(true_u), |_, _| {})?;
        let correct = u_hat.iter().zip(true_u).map(|(a, b)| a == b).collect();
        Ok(GenieResult {
            u_hat,
            correct,
            failure,
        })
    }

    /// Diagnostic: the per-index decision posteriors when the decisions are
    /// forced to `forced_u`. The returned vector at index `j` is the
    /// posterior of `u_j` given `y` and the forced prefix, i.e. the
    /// normalized virtual-channel transition.
    pub fn posteriors_given_prefix(
        &mut self,
        y: &[usize],
        forced_u: &[usize],
    ) -> Result<Vec<LikelihoodVector>> {
        if forced_u.len() != self.big_n {
            return Err(Error::WrongLength {
                expected: self.big_n,
                actual: forced_u.len(),
            });
        }
        let mut likes = Vec::with_capacity(self.big_n);
        self.run(y, Mode::Genie(forced_u), |_, like| likes.push(like.clone()))?;
        Ok(likes)
    }

    pub fn block_length(&self) -> usize {
        self.big_n
    }

    pub fn n(&self) -> u32 {
        self.n
    }
}
