use std::cmp::Ordering;

use crate::corpus::vocab::{EOS, SOS};
use crate::error::Result;
use crate::numerics::ParamStore;
use crate::qg::model::{DecoderState, EncoderOutput, QgNet, QgSource};
use crate::qg::DynamicVocab;

/// An autoregressive scorer that beam search can drive.
pub trait StepModel {
    type State: Clone;

    fn initial(&self) -> Self::State;
    fn start_token(&self) -> usize;
    fn eos(&self) -> usize;
    /// Log-probabilities of every next token after consuming `prev`, and the new state.
    fn log_probs(&self, state: &Self::State, prev: usize) -> Result<(Vec<f64>, Self::State)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamResult {
    /// Emitted ids, EOS excluded.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    /// False when no hypothesis reached EOS within the length cap.
    pub terminated: bool,
}

#[derive(Clone)]
struct Hyp<S> {
    tokens: Vec<usize>,
    log_prob: f64,
    state: S,
    last: usize,
}

/// Beam search over summed log-probabilities, without length normalization.
///
/// At most `max_len` tokens are emitted, EOS included. Candidates are ranked
/// by score, then by the rank of their parent, then by token id; EOS
/// candidates take beam slots like any other.
pub fn beam_search<M: StepModel>(model: &M, beam: usize, max_len: usize) -> Result<BeamResult> {
    let beam = beam.max(1);
    let mut live = vec![Hyp {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: model.initial(),
        last: model.start_token(),
    }];
    let mut done: Vec<Hyp<M::State>> = Vec::new();

    for _ in 0..max_len {
        let mut cands: Vec<(f64, usize, usize, M::State)> = Vec::new();
        for (pi, h) in live.iter().enumerate() {
            let (lp, state) = model.log_probs(&h.state, h.last)?;
            for (w, l) in lp.iter().enumerate() {
                let score = h.log_prob + l;
                if score.is_finite() {
                    cands.push((score, pi, w, state.clone()));
                }
            }
        }
        cands.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        cands.truncate(beam);

        let mut next = Vec::with_capacity(beam);
        for (score, pi, w, state) in cands {
            let mut tokens = live[pi].tokens.clone();
            if w != model.eos() {
                tokens.push(w);
            }
            let hyp = Hyp { tokens, log_prob: score, state, last: w };
            if w == model.eos() {
                done.push(hyp);
            } else {
                next.push(hyp);
            }
        }
        live = next;
        let best_done = done.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
        match live.first() {
            None => break,
            Some(h) if best_done >= h.log_prob => break,
            _ => {}
        }
    }

    let mut best: Option<&Hyp<M::State>> = None;
    for h in &done {
        if best.is_none_or(|b| h.log_prob > b.log_prob) {
            best = Some(h);
        }
    }
    Ok(match best {
        Some(h) => BeamResult {
            tokens: h.tokens.clone(),
            log_prob: h.log_prob,
            terminated: true,
        },
        None => {
            let h = &live[0];
            BeamResult {
                tokens: h.tokens.clone(),
                log_prob: h.log_prob,
                terminated: false,
            }
        }
    })
}

pub fn greedy<M: StepModel>(model: &M, max_len: usize) -> Result<BeamResult> {
    beam_search(model, 1, max_len)
}

/// The generator viewed as a step model over one source's dynamic vocabulary.
pub struct QgDecoder<'a> {
    pub net: &'a QgNet,
    pub store: &'a ParamStore,
    pub enc: EncoderOutput,
    pub dv: DynamicVocab,
}

impl<'a> QgDecoder<'a> {
    pub fn new(net: &'a QgNet, store: &'a ParamStore, src: &QgSource) -> Result<Self> {
        Ok(QgDecoder {
            enc: net.encode(store, src)?,
            dv: net.dynamic_vocab(src),
            net,
            store,
        })
    }

    pub fn surfaces(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.dv.token(&self.net.vocab, i).to_string())
            .collect()
    }
}

impl StepModel for QgDecoder<'_> {
    type State = DecoderState;

    fn initial(&self) -> DecoderState {
        self.enc.init_state.clone()
    }

    fn start_token(&self) -> usize {
        SOS
    }

    fn eos(&self) -> usize {
        EOS
    }

    fn log_probs(&self, state: &DecoderState, prev: usize) -> Result<(Vec<f64>, DecoderState)> {
        let out = self.net.decode_step(self.store, &self.enc, &self.dv, prev, state)?;
        Ok((out.p.iter().map(|p| p.ln()).collect(), out.state))
    }
}

/// A decoded question.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub tokens: Vec<String>,
    pub log_prob: f64,
    pub terminated: bool,
}

impl QgNet {
    pub fn generate(&self, store: &ParamStore, src: &QgSource, beam: usize) -> Result<Generated> {
        self.generate_with(store, src, beam, self.config.max_decode_len)
    }

    /// Beam search with an explicit length limit (EOS included).
    pub fn generate_with(&self, store: &ParamStore, src: &QgSource, beam: usize, max_len: usize) -> Result<Generated> {
        let dec = QgDecoder::new(self, store, src)?;
        let r = beam_search(&dec, beam, max_len)?;
        Ok(Generated {
            tokens: dec.surfaces(&r.tokens),
            log_prob: r.log_prob,
            terminated: r.terminated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    /// Distributions looked up by prefix; unknown prefixes put all mass on EOS.
    struct Table {
        vocab: usize,
        eos: usize,
        dists: HashMap<Vec<usize>, Vec<f64>>,
    }

    impl StepModel for Table {
        type State = Vec<usize>;

        fn initial(&self) -> Vec<usize> {
            Vec::new()
        }
        fn start_token(&self) -> usize {
            usize::MAX
        }
        fn eos(&self) -> usize {
            self.eos
        }
        fn log_probs(&self, state: &Vec<usize>, prev: usize) -> Result<(Vec<f64>, Vec<usize>)> {
            let mut prefix = state.clone();
            if prev != usize::MAX {
                prefix.push(prev);
            }
            let p = self.dists.get(&prefix).cloned().unwrap_or_else(|| {
                let mut v = vec![0.0; self.vocab];
                v[self.eos] = 1.0;
                v
            });
            Ok((p.iter().map(|x| x.ln()).collect(), prefix))
        }
    }

    // tokens: 0 = a, 1 = b, 2 = EOS
    fn trap() -> Table {
        let mut dists = HashMap::new();
        dists.insert(vec![], vec![0.6, 0.4, 0.0]);
        dists.insert(vec![0], vec![0.3, 0.3, 0.4]);
        dists.insert(vec![1], vec![0.0, 0.0, 1.0]);
        Table { vocab: 3, eos: 2, dists }
    }

    #[test]
    fn greedy_falls_into_trap_beam_escapes() {
        let t = trap();
        let g = greedy(&t, 5).unwrap();
        assert_eq!(g.tokens, vec![0]);
        assert!((g.log_prob - (0.6f64 * 0.4).ln()).abs() < 1e-12);
        let b = beam_search(&t, 3, 5).unwrap();
        assert_eq!(b.tokens, vec![1]);
        assert!((b.log_prob - 0.4f64.ln()).abs() < 1e-12);
        assert!(b.terminated);
    }

    #[test]
    fn beam_one_is_greedy() {
        let t = trap();
        assert_eq!(beam_search(&t, 1, 5).unwrap(), greedy(&t, 5).unwrap());
    }

    #[test]
    fn unterminated_when_cap_hit() {
        let mut dists = HashMap::new();
        for len in 0..4 {
            dists.insert(vec![0; len], vec![0.9, 0.1]);
        }
        // greedy never prefers EOS
        let t = Table { vocab: 2, eos: 1, dists };
        let r = beam_search(&t, 1, 3).unwrap();
        assert!(!r.terminated);
        assert_eq!(r.tokens, vec![0, 0, 0]);
    }
}
