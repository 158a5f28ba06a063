//! Seeded synthetic forum-post corpus with the four-class taxonomy.
//!
//! Posts are short bags of pseudo-words. Most tokens come from a large
//! Zipf-distributed general vocabulary; a minority come from class topic
//! pools, some of which are shared between confusable classes. The result
//! has the ultra-sparse TF-IDF profile of real short posts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClassId, ClassTaxonomy, CorpusError, Document, DocumentSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub seed: u64,
    /// Class proportions in taxonomy order.
    pub class_weights: Vec<f64>,
    pub general_vocab: usize,
    pub topic_vocab: usize,
    pub shared_vocab: usize,
    /// Mean number of content tokens per post.
    pub mean_len: f64,
    /// Chance that a content token is drawn from the post's own topic pool.
    pub topic_rate: f64,
    /// Chance that it is drawn from a pool shared with a neighbouring class.
    pub shared_rate: f64,
    pub zipf_exponent: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_docs: 20_000,
            seed: 2022,
            class_weights: vec![0.30, 0.25, 0.20, 0.25],
            general_vocab: 30_000,
            topic_vocab: 400,
            shared_vocab: 300,
            mean_len: 15.0,
            topic_rate: 0.15,
            shared_rate: 0.15,
            zipf_exponent: 1.05,
        }
    }
}

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const FILLER: [&str; 24] = [
    "i", "the", "and", "to", "my", "a", "it", "of", "is", "that", "me", "in", "so", "but", "just", "have", "this",
    "for", "was", "not", "with", "be", "am", "do",
];

/// Distinct pseudo-word for every index; at least three syllables, so it
/// never collides with short English stopwords.
fn word(mut i: usize) -> String {
    let base = ONSETS.len() * VOWELS.len();
    let mut out = String::new();
    let mut syllables = 0;
    while syllables < 3 || i > 0 {
        let s = i % base;
        out.push_str(ONSETS[s / VOWELS.len()]);
        out.push_str(VOWELS[s % VOWELS.len()]);
        i /= base;
        syllables += 1;
    }
    out
}

/// Inverse-CDF sampler for a Zipf law over `n` ranks.
struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    fn new(n: usize, s: f64) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = (1..=n)
            .map(|k| {
                acc += (k as f64).powf(-s);
                acc
            })
            .collect();
        cdf.iter_mut().for_each(|c| *c /= acc);
        Self { cdf }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1)
    }
}

fn pick_weighted<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Generates the corpus. Word index ranges: general vocabulary first, then one
/// topic pool per class, then one shared pool per adjacent class pair.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn generate(cfg: &SynthConfig) -> Result<DocumentSet, CorpusError> {
    let taxonomy = ClassTaxonomy::default();
    let k = taxonomy.len();
    if cfg.class_weights.len() != k || cfg.class_weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(CorpusError::BadTaxonomy(format!("need {k} non-negative class weights")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let general = Zipf::new(cfg.general_vocab.max(1), cfg.zipf_exponent);
    let topic = Zipf::new(cfg.topic_vocab.max(1), cfg.zipf_exponent);
    let shared = Zipf::new(cfg.shared_vocab.max(1), cfg.zipf_exponent);
    let topic_base = |c: usize| cfg.general_vocab + c * cfg.topic_vocab;
    let shared_base = |pair: usize| cfg.general_vocab + k * cfg.topic_vocab + pair * cfg.shared_vocab;
    // the last class ("others") has the weakest topical signal
    let topic_rate = |c: usize| if c + 1 == k { cfg.topic_rate * 0.5 } else { cfg.topic_rate };

    let mut docs = Vec::with_capacity(cfg.n_docs);
    for n in 0..cfg.n_docs {
        let class = pick_weighted(&cfg.class_weights, &mut rng);
        let len = 1 + (-(1.0 - rng.gen::<f64>()).ln() * (cfg.mean_len - 1.0)).round() as usize;
        let mut tokens: Vec<String> = Vec::with_capacity(2 * len + 2);
        for _ in 0..len {
            let u: f64 = rng.gen();
            let w = if u < topic_rate(class) {
                topic_base(class) + topic.sample(&mut rng)
            } else if u < topic_rate(class) + cfg.shared_rate {
                // pair p couples classes p and p + 1 (cyclically)
                let pair = if rng.gen::<bool>() { class } else { (class + k - 1) % k };
                shared_base(pair) + shared.sample(&mut rng)
            } else {
                general.sample(&mut rng)
            };
            tokens.push(word(w));
            if rng.gen::<f64>() < 0.6 {
                tokens.push(FILLER[rng.gen_range(0..FILLER.len())].to_string());
            }
        }
        match rng.gen_range(0..100) {
            0..=2 => tokens.push(format!("https://forum.example/t/{}", rng.gen_range(1000..99999))),
            3 => tokens.push(format!(
                "call {}-{}-{}",
                rng.gen_range(200..999),
                rng.gen_range(100..999),
                rng.gen_range(1000..9999)
            )),
            _ => {}
        }
        let shift = rng.gen_range(0..tokens.len());
        tokens.rotate_left(shift);
        docs.push(Document {
            id: format!("s{n}"),
            text: tokens.join(" "),
            label: ClassId(class),
        });
    }
    DocumentSet::new(docs, taxonomy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..40_000 {
            assert!(seen.insert(word(i)), "duplicate at {i}");
        }
    }

    #[test]
    fn deterministic_and_proportioned() {
        let cfg = SynthConfig {
            n_docs: 4000,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        assert_eq!(a, generate(&cfg).unwrap());
        for (count, w) in a.counts().iter().zip(&cfg.class_weights) {
            let share = *count as f64 / 4000.0;
            assert!((share - w).abs() < 0.03, "{share} vs {w}");
        }
    }
}
