use crate::error::{Error, Result};
use crate::eval::overlap_metrics;
use crate::extractor::model::{build_extractor_vocabs, ExtractorConfig, ExtractorExample, ExtractorModel, ExtractorNet};
use crate::extractor::ner::{NerTag, NerTagger, RuleNerTagger};
use crate::numerics::{sgd_step, ParamStore, RngState, CLIP_HI, CLIP_LO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractorEpochLog {
    pub epoch: usize,
    /// Mean CRF loss per paragraph.
    pub train_nll: f64,
    pub dev_exact_f1: f64,
}

#[derive(Debug, Clone)]
pub struct ExtractorTrainOutcome {
    pub model: ExtractorModel,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    pub log: Vec<ExtractorEpochLog>,
    pub diverged: Option<usize>,
}

/// Exact-match F1 of the extractor on a labelled set.
pub fn exact_f1(net: &ExtractorNet, store: &ParamStore, data: &[ExtractorExample], ner: &[Vec<Vec<NerTag>>]) -> Result<f64> {
    let mut pred = Vec::with_capacity(data.len());
    for (ex, tags) in data.iter().zip(ner) {
        pred.push(net.predict_with(store, &ex.paragraph, tags)?.spans);
    }
    let gold: Vec<_> = data.iter().map(|e| e.gold.clone()).collect();
    Ok(overlap_metrics(&pred, &gold).exact.f1)
}

/// Mini-batch SGD on the mean CRF loss; keeps the parameters with the best dev exact-match F1.
///
/// With an empty dev set, selection uses the training set.
pub fn train_extractor(
    train: &[ExtractorExample],
    dev: &[ExtractorExample],
    config: ExtractorConfig,
) -> Result<ExtractorTrainOutcome> {
    train_extractor_with(train, dev, config, &RuleNerTagger, |_| {})
}

pub fn train_extractor_with<F: FnMut(&ExtractorEpochLog)>(
    train: &[ExtractorExample],
    dev: &[ExtractorExample],
    config: ExtractorConfig,
    tagger: &dyn NerTagger,
    mut on_epoch: F,
) -> Result<ExtractorTrainOutcome> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let (vocab, chars) = build_extractor_vocabs(train.iter().map(|e| &e.paragraph), config.vocab_limit);
    let mut rng = RngState::new(config.seed);
    let (net, mut store) = ExtractorNet::build(config, vocab, chars, &mut rng)?;
    let select = if dev.is_empty() { train } else { dev };
    let train_ner: Vec<_> = train.iter().map(|e| tagger.tag(&e.paragraph)).collect();
    let train_tags: Vec<_> = train.iter().map(ExtractorExample::tags).collect();
    let select_ner: Vec<_> = select.iter().map(|e| tagger.tag(&e.paragraph)).collect();

    let mut best_store = store.clone();
    let mut best_f1 = exact_f1(&net, &store, select, &select_ner)?;
    let mut best_epoch = 0;
    let mut log = Vec::new();
    let mut diverged = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    'epochs: for epoch in 1..=net.config.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(net.config.batch_size) {
            store.zero_grad();
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += net.loss_backward(&mut store, &train[i].paragraph, &train_ner[i], &train_tags[i], Some(&mut rng))?;
            }
            if !batch_loss.is_finite() {
                log::warn!("non-finite extractor loss at epoch {epoch}; keeping last good parameters");
                diverged = Some(epoch);
                break 'epochs;
            }
            total += batch_loss;
            store.scale_grads(1.0 / batch.len() as f64);
            sgd_step(&mut store, net.config.learning_rate, CLIP_LO, CLIP_HI)?;
            if !store.all_finite() {
                log::warn!("non-finite extractor parameters at epoch {epoch}; keeping last good parameters");
                diverged = Some(epoch);
                break 'epochs;
            }
        }
        let f1 = exact_f1(&net, &store, select, &select_ner)?;
        let entry = ExtractorEpochLog {
            epoch,
            train_nll: total / train.len() as f64,
            dev_exact_f1: f1,
        };
        log::info!("epoch {epoch}: train nll {:.4}, dev exact F1 {:.4}", entry.train_nll, f1);
        on_epoch(&entry);
        log.push(entry);
        if f1 > best_f1 {
            best_f1 = f1;
            best_epoch = epoch;
            best_store.copy_values_from(&store)?;
        }
    }
    Ok(ExtractorTrainOutcome {
        model: ExtractorModel { net, store: best_store },
        best_epoch,
        best_dev_f1: best_f1,
        log,
        diverged,
    })
}
