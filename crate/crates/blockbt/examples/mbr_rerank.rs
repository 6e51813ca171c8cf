//! MBR consensus reranking: the pool member most similar to all the others
//! wins, with every other member standing in for the unknown reference.
//!
//! ```bash
//! cargo run -p blockbt --example mbr_rerank
//! ```

use blockbt::corpus::Hypothesis;
use blockbt::mbr::{mbr_rerank, HypothesisPool};
use blockbt::metrics::ChrF;

fn sentence(index: usize, texts: &[&str]) -> Vec<Hypothesis> {
    texts
        .iter()
        .enumerate()
        .map(|(rank, text)| Hypothesis {
            sentence_index: index,
            text: text.to_string(),
            model_score: -(rank as f64),
            origin: None,
        })
        .collect()
}

fn main() -> blockbt::Result<()> {
    // three checkpoints produced candidates for two sentences; two agree on
    // the right reading of sentence 0, one went its own way
    let pool = HypothesisPool::from_sentences(
        vec![
            sentence(
                0,
                &[
                    "vláda schválila nový rozpočet",
                    "vláda schválila rozpočet nový",
                    "vláda schválila nový rozpočet",
                    "vláda zamítla starý rozpočet",
                ],
            ),
            sentence(
                1,
                &[
                    "kočka spí na gauči",
                    "kočka spí na pohovce",
                    "pes spí na gauči",
                ],
            ),
        ],
        vec![],
    )?;

    let utility = ChrF::default();
    let result = mbr_rerank(&pool, &utility)?;
    for selection in &result.selections {
        println!(
            "sentence {}: picked #{} \"{}\" (consensus {:.4})",
            selection.sentence_index,
            selection.chosen_index,
            selection.hypothesis.text,
            selection.consensus
        );
        println!("  full row: {:?}", selection.consensus_row);
    }
    println!("corpus mean consensus: {:.4}", result.corpus_consensus);
    Ok(())
}
