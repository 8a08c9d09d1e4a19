use std::io::Write;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::numerics::{sgd_step, ParamStore, RngState, CLIP_HI, CLIP_LO};
use crate::qg::data::QgInstance;
use crate::qg::model::{QgModel, QgNet};
use crate::qg::QgConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-token training NLL (with dropout active).
    pub train_nll: f64,
    pub dev_perplexity: f64,
}

#[derive(Debug, Clone)]
pub struct QgTrainOutcome {
    /// Parameters from the epoch with the lowest dev perplexity.
    pub model: QgModel,
    pub best_epoch: usize,
    pub best_dev_perplexity: f64,
    pub log: Vec<EpochLog>,
    /// Epoch at which a non-finite loss stopped training.
    pub diverged: Option<usize>,
}

pub fn write_training_csv<W: Write>(mut w: W, log: &[EpochLog]) -> Result<()> {
    writeln!(w, "epoch,train_nll,dev_perplexity")?;
    for e in log {
        writeln!(w, "{},{},{}", e.epoch, e.train_nll, e.dev_perplexity)?;
    }
    Ok(())
}

fn pairs(data: &[QgInstance]) -> impl Iterator<Item = (&crate::qg::QgSource, &[String])> {
    data.iter().map(|i| (&i.source, i.target.as_slice()))
}

/// Mini-batch SGD with dropout and value clipping; keeps the best-dev snapshot.
///
/// With an empty dev set, selection falls back to training perplexity.
pub fn train_qg(
    train: &[QgInstance],
    dev: &[QgInstance],
    vocab: Vocabulary,
    config: QgConfig,
) -> Result<QgTrainOutcome> {
    train_qg_with(train, dev, vocab, config, |_| {})
}

pub fn train_qg_with<F: FnMut(&EpochLog)>(
    train: &[QgInstance],
    dev: &[QgInstance],
    vocab: Vocabulary,
    config: QgConfig,
    mut on_epoch: F,
) -> Result<QgTrainOutcome> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mut rng = RngState::new(config.seed);
    let (net, mut store) = QgNet::build(config, vocab, &mut rng)?;
    let select = if dev.is_empty() { train } else { dev };

    let mut best_store: ParamStore = store.clone();
    let mut best_ppl = net.perplexity(&store, pairs(select))?;
    let mut best_epoch = 0;
    let mut log = Vec::new();
    let mut diverged = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    'epochs: for epoch in 1..=net.config.epochs {
        rng.shuffle(&mut order);
        let (mut nll, mut tokens) = (0.0, 0usize);
        for batch in order.chunks(net.config.batch_size) {
            store.zero_grad();
            let mut batch_nll = 0.0;
            for &i in batch {
                let ex = &train[i];
                let out = net.nll_backward(&mut store, &ex.source, &ex.target, Some(&mut rng))?;
                batch_nll += out.total;
                tokens += out.tokens;
            }
            if !batch_nll.is_finite() {
                log::warn!("non-finite training loss at epoch {epoch}; keeping last good parameters");
                diverged = Some(epoch);
                break 'epochs;
            }
            nll += batch_nll;
            store.scale_grads(1.0 / batch.len() as f64);
            sgd_step(&mut store, net.config.learning_rate, CLIP_LO, CLIP_HI)?;
            if !store.all_finite() {
                log::warn!("non-finite parameters at epoch {epoch}; keeping last good parameters");
                diverged = Some(epoch);
                break 'epochs;
            }
        }
        let ppl = net.perplexity(&store, pairs(select))?;
        let entry = EpochLog {
            epoch,
            train_nll: nll / tokens.max(1) as f64,
            dev_perplexity: ppl,
        };
        log::info!("epoch {epoch}: train nll {:.4}, dev ppl {:.4}", entry.train_nll, ppl);
        on_epoch(&entry);
        log.push(entry);
        if ppl < best_ppl {
            best_ppl = ppl;
            best_epoch = epoch;
            best_store.copy_values_from(&store)?;
        }
    }

    Ok(QgTrainOutcome {
        model: QgModel {
            net,
            store: best_store,
        },
        best_epoch,
        best_dev_perplexity: best_ppl,
        log,
        diverged,
    })
}
