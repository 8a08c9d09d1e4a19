#![allow(dead_code)]

use qgharvest::coref::{CorefTag, Origin, TransformedSentence};
use qgharvest::corpus::{build_vocab, AnswerTag, Vocabulary};
use qgharvest::numerics::RngState;
use qgharvest::qg::{GatingMode, QgConfig, QgNet, QgSource};

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Source with explicit coref tags/scores; `tags` uses the BIO names.
pub fn source(tokens: &str, coref: &str, scores: &[f64], answer: &str) -> QgSource {
    let tokens = words(tokens);
    let parse_c = |t: &str| match t {
        "B_PRO" => CorefTag::BeginPronoun,
        "I_PRO" => CorefTag::InsidePronoun,
        "B_ANT" => CorefTag::BeginAntecedent,
        "I_ANT" => CorefTag::InsideAntecedent,
        _ => CorefTag::Outside,
    };
    let parse_a = |t: &str| match t {
        "B" => AnswerTag::Begin,
        "I" => AnswerTag::Inside,
        _ => AnswerTag::Outside,
    };
    let n = tokens.len();
    QgSource {
        sentence: TransformedSentence {
            coref_tags: coref.split_whitespace().map(parse_c).collect(),
            scores: scores.to_vec(),
            origin: (0..n).map(Origin::Original).collect(),
            tokens,
        },
        answer_tags: answer.split_whitespace().map(parse_a).collect(),
    }
}

pub fn plain_source(tokens: &str, answer: &str) -> QgSource {
    let n = tokens.split_whitespace().count();
    source(tokens, &vec!["O"; n].join(" "), &vec![0.0; n], answer)
}

/// All dimensions at most 8.
pub fn tiny_config(gating: GatingMode) -> QgConfig {
    QgConfig {
        word_dim: 4,
        coref_feat_dim: 3,
        answer_feat_dim: 2,
        encoder_hidden: 3,
        init_scale: 0.5,
        dropout: 0.0,
        gating,
        ..QgConfig::desk()
    }
}

pub fn tiny_vocab() -> Vocabulary {
    build_vocab(words("what did they defeat the panthers in which year"), 50)
}

/// Source sentence in the shape of a coreference-transformed input.
pub fn coref_source() -> QgSource {
    source(
        "they the panthers defeated broncos in 2015",
        "B_PRO B_ANT I_ANT O O O O",
        &[0.0, 0.8, 0.8, 0.0, 0.0, 0.0, 0.0],
        "O O O O O O B",
    )
}

pub fn tiny_net(gating: GatingMode, seed: u64) -> (QgNet, qgharvest::numerics::ParamStore) {
    let mut rng = RngState::new(seed);
    QgNet::build(tiny_config(gating), tiny_vocab(), &mut rng).unwrap()
}
