//! Fits a batch LDA model to documents drawn from three known topics and
//! prints the top words of every fitted topic.
//!
//!     cargo run --release --example fit_lda -- [seed]

use topicshift::report::top_words;
use topicshift::synthetic::{disjoint_topics, sample_docs, word_name};
use topicshift::{fit, LdaParams, Vocabulary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(0);
    let truth = disjoint_topics(3, 10);
    let mut params = LdaParams::new(3);
    params.seed = seed;
    let sample = sample_docs(
        &truth,
        200,
        50,
        params.alpha,
        &mut topicshift::seed::rng(seed, &[]),
    );

    let mut vocab = Vocabulary::new();
    let counts = (0..30).map(|v| (word_name(v), usize::MAX)).collect();
    vocab.admit_minibatch(&counts, 0);
    let ids: Vec<u32> = (0..30)
        .map(|v| vocab.id(&word_name(v)).expect("admitted"))
        .collect();
    let docs = sample
        .docs
        .iter()
        .map(|d| d.iter().map(|&w| ids[w as usize]).collect())
        .collect();

    let state = fit(docs, vocab.len(), &params)?;
    println!("log joint {:.1}", state.log_joint(params.alpha, params.eta));
    for k in 0..3 {
        let words: Vec<String> = top_words(state.topic_word().row(k), &vocab, 5)
            .into_iter()
            .map(|(w, n)| format!("{w} ({n})"))
            .collect();
        println!("topic {k}: {}", words.join(", "));
    }
    Ok(())
}
