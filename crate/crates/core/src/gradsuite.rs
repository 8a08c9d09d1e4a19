//! Central-difference checks of every analytic gradient in the generator and
//! the extractor, at small random dimensions.

use crate::coref::{CorefTag, Origin, TransformedSentence};
use crate::corpus::{build_vocab, AnswerSpan, AnswerTag, Paragraph};
use crate::error::Result;
use crate::extractor::{build_extractor_vocabs, crf_nll_var, ExtractorConfig, ExtractorNet, NerTagger, RuleNerTagger};
use crate::numerics::{grad_check, GradCheckReport, ParamStore, RngState, Tape, Tensor, Var};
use crate::qg::{GatingMode, QgConfig, QgNet, QgSource};

pub const GRADIENT_TOLERANCE: f64 = 1e-4;
const EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCase {
    pub name: String,
    pub report: GradCheckReport,
}

impl GradCase {
    pub fn passes(&self) -> bool {
        self.report.passes(GRADIENT_TOLERANCE)
    }
}

fn qg_config(gating: GatingMode, seed: u64) -> QgConfig {
    QgConfig {
        word_dim: 4,
        coref_feat_dim: 3,
        answer_feat_dim: 2,
        encoder_hidden: 3,
        dropout: 0.0,
        init_scale: 0.5,
        gating,
        seed,
        ..QgConfig::desk()
    }
}

fn qg_source() -> QgSource {
    use CorefTag::*;
    let tokens: Vec<String> = "they the panthers defeated broncos in 2015".split(' ').map(String::from).collect();
    let n = tokens.len();
    QgSource {
        sentence: TransformedSentence {
            coref_tags: vec![BeginPronoun, BeginAntecedent, InsideAntecedent, Outside, Outside, Outside, Outside],
            scores: vec![0.7, 0.7, 0.7, 0.0, 0.0, 0.0, 0.0],
            origin: (0..n).map(Origin::Original).collect(),
            tokens,
        },
        answer_tags: vec![
            AnswerTag::Outside,
            AnswerTag::Outside,
            AnswerTag::Outside,
            AnswerTag::Outside,
            AnswerTag::Outside,
            AnswerTag::Begin,
            AnswerTag::Inside,
        ],
    }
}

fn qg_target() -> Vec<String> {
    "when did they defeat the broncos".split(' ').map(String::from).collect()
}

fn qg_net(gating: GatingMode, seed: u64) -> Result<(QgNet, ParamStore)> {
    let src = qg_source();
    let vocab = build_vocab(src.sentence.tokens.iter().chain(&qg_target()).filter(|t| *t != "2015"), 100);
    let config = qg_config(gating, seed);
    let mut rng = RngState::new(seed);
    QgNet::build(config, vocab, &mut rng)
}

/// `Σ r ⊙ v` for a fixed random `r`.
fn project(tape: &mut Tape, v: Var, rng: &mut RngState) -> Result<Var> {
    let r = Tensor::uniform(rng, tape.value(v).shape(), -1.0, 1.0);
    let w = tape.mul_const(v, &r)?;
    Ok(tape.sum(w))
}

fn backprop(tape: &Tape, loss: Var, store: &mut ParamStore) -> f64 {
    store.zero_grad();
    let grads = tape.backward(loss);
    tape.accumulate_into(&grads, store);
    tape.scalar(loss)
}

fn check<F>(name: &str, store: &mut ParamStore, loss: F) -> Result<GradCase>
where
    F: FnMut(&mut ParamStore) -> Result<f64>,
{
    Ok(GradCase {
        name: name.into(),
        report: grad_check(store, EPS, loss)?,
    })
}

fn qg_cases(seed: u64, out: &mut Vec<GradCase>) -> Result<()> {
    let src = qg_source();
    let tgt = qg_target();

    for gating in [GatingMode::Gated, GatingMode::NoGating, GatingMode::ZeroScores] {
        let (net, mut store) = qg_net(gating, seed)?;
        out.push(check(&format!("gate_coref_features ({gating:?})"), &mut store, |s| {
            let mut tape = Tape::new();
            let mut r = RngState::new(seed ^ 0x9e37);
            let inputs = net.embed_vars(&mut tape, s, &src, &mut None)?;
            let projected = inputs
                .iter()
                .map(|&e| {
                    let d = tape.slice(e, 0, net.config.coref_feat_dim)?;
                    project(&mut tape, d, &mut r)
                })
                .collect::<Result<Vec<_>>>()?;
            let loss = tape.sum_scalars(&projected);
            Ok(backprop(&tape, loss, s))
        })?);
    }

    let (net, mut store) = qg_net(GatingMode::Gated, seed)?;
    out.push(check("encode", &mut store, |s| {
        let mut tape = Tape::new();
        let mut r = RngState::new(seed ^ 0x51ed);
        let inputs = net.embed_vars(&mut tape, s, &src, &mut None)?;
        let enc = net.encode_vars(&mut tape, s, &inputs, &mut None)?;
        let parts = [
            project(&mut tape, enc.stacked, &mut r)?,
            project(&mut tape, enc.s0, &mut r)?,
            project(&mut tape, enc.c0, &mut r)?,
        ];
        let loss = tape.sum_scalars(&parts);
        Ok(backprop(&tape, loss, s))
    })?);

    out.push(check("decode_step", &mut store, |s| {
        let mut tape = Tape::new();
        let mut r = RngState::new(seed ^ 0xdec0);
        let dv = net.dynamic_vocab(&src);
        let inputs = net.embed_vars(&mut tape, s, &src, &mut None)?;
        let enc = net.encode_vars(&mut tape, s, &inputs, &mut None)?;
        let (mut h, mut c) = (enc.s0, enc.c0);
        let mut parts = Vec::new();
        for prev in [crate::corpus::SOS, net.vocab.id("did"), dv.input_id(dv.len() - 1)] {
            let step = net.decode_step_vars(&mut tape, s, enc.stacked, &dv, prev, h, c, &mut None)?;
            for v in [step.p, step.lambda, step.alpha, step.s, step.c] {
                parts.push(project(&mut tape, v, &mut r)?);
            }
            (h, c) = (step.s, step.c);
        }
        let loss = tape.sum_scalars(&parts);
        Ok(backprop(&tape, loss, s))
    })?);

    for gating in [GatingMode::Gated, GatingMode::NoGating, GatingMode::ZeroScores] {
        let (net, mut store) = qg_net(gating, seed)?;
        out.push(check(&format!("nll_loss ({gating:?})"), &mut store, |s| {
            s.zero_grad();
            Ok(net.nll_backward(s, &src, &tgt, None)?.total)
        })?);
    }
    Ok(())
}

fn extractor_cases(seed: u64, out: &mut Vec<GradCase>) -> Result<()> {
    let mut rng = RngState::new(seed ^ 0xc4f);
    for n in [0usize, 1, 3] {
        let mut store = ParamStore::new();
        let em = store.add("em", Tensor::uniform(&mut rng, &[n, 3], -2.0, 2.0))?;
        let tr = store.add("trans", Tensor::uniform(&mut rng, &[5, 5], -2.0, 2.0))?;
        let tags: Vec<usize> = (0..n).map(|i| (i * 2 + 1) % 3).collect();
        out.push(check(&format!("crf_nll (n={n})"), &mut store, |s| {
            let mut tape = Tape::new();
            let e = tape.param(s, em);
            let t = tape.param(s, tr);
            let loss = crf_nll_var(&mut tape, e, t, &tags)?;
            Ok(backprop(&tape, loss, s))
        })?);
    }

    let p = Paragraph::new("g", 0, "Ann won 2 prizes. She has 9 cats.")?;
    let gold = [AnswerSpan::from_tokens(&p, 0, 2, 3)?, AnswerSpan::from_tokens(&p, 1, 2, 2)?];
    let tags = crate::extractor::paragraph_tags(&p, &gold).0;
    let ner = RuleNerTagger.tag(&p);
    let (vocab, chars) = build_extractor_vocabs([&p], 100);
    for softmax_emissions in [true, false] {
        let config = ExtractorConfig {
            word_dim: 3,
            char_dim: 2,
            char_hidden: 2,
            ner_dim: 2,
            hidden: 2,
            depth: 2,
            dropout: 0.0,
            init_scale: 0.5,
            softmax_emissions,
            seed,
            ..ExtractorConfig::default()
        };
        let (net, mut store) = ExtractorNet::build(config, vocab.clone(), chars.clone(), &mut RngState::new(seed))?;
        let name = if softmax_emissions { "crf_nll extractor (softmax emissions)" } else { "crf_nll extractor (raw emissions)" };
        out.push(check(name, &mut store, |s| {
            s.zero_grad();
            net.loss_backward(s, &p, &ner, &tags, None)
        })?);
    }
    Ok(())
}

/// Every gradient case at float64 with all dimensions at most 8.
pub fn gradient_suite(seed: u64) -> Result<Vec<GradCase>> {
    let mut out = Vec::new();
    qg_cases(seed, &mut out)?;
    extractor_cases(seed, &mut out)?;
    Ok(out)
}
