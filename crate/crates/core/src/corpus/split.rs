use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, DocumentSet};

/// Splits `ds` into (train, test) with per-class train counts of
/// `round_half_up(count * train_fraction)`, clamped so both sides keep at
/// least one document of every class. Membership is drawn with a seeded
/// shuffle per class; each side keeps the original document order.
pub fn stratified_split(
    ds: &DocumentSet,
    train_fraction: f64,
    seed: u64,
) -> Result<(DocumentSet, DocumentSet), CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::BadFraction(train_fraction));
    }
    let taxonomy = ds.taxonomy();
    for class in taxonomy.ids() {
        if ds.counts()[class.0] < 2 {
            return Err(CorpusError::StratumTooSmall(taxonomy.name(class).to_string()));
        }
    }

    let in_train = choose_train(ds, seed, |count| {
        let n = (count as f64 * train_fraction + 0.5).floor() as usize;
        n.clamp(1, count - 1)
    });
    let (train, test): (Vec<_>, Vec<_>) = ds
        .documents()
        .iter()
        .zip(in_train)
        .partition(|(_, keep)| *keep);
    let collect = |docs: Vec<(&super::Document, bool)>| {
        DocumentSet::new(docs.into_iter().map(|(d, _)| d.clone()).collect(), taxonomy.clone())
    };
    Ok((collect(train)?, collect(test)?))
}

/// Stratified subset of roughly `n` documents (per-class proportions kept,
/// each class contributing at least one document when it has any).
pub fn stratified_subset(ds: &DocumentSet, n: usize, seed: u64) -> Result<DocumentSet, CorpusError> {
    if n >= ds.len() {
        return Ok(ds.clone());
    }
    let fraction = n as f64 / ds.len() as f64;
    let keep = choose_train(ds, seed, |count| {
        let k = (count as f64 * fraction + 0.5).floor() as usize;
        k.clamp(count.min(1), count)
    });
    let docs = ds
        .documents()
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(d, _)| d.clone())
        .collect();
    DocumentSet::new(docs, ds.taxonomy().clone())
}

fn choose_train(ds: &DocumentSet, seed: u64, quota: impl Fn(usize) -> usize) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; ds.len()];
    for class in ds.taxonomy().ids() {
        let mut members: Vec<usize> = ds
            .documents()
            .iter()
            .enumerate()
            .filter(|(_, d)| d.label == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        for &i in &members[..quota(members.len())] {
            mask[i] = true;
        }
    }
    mask
}
