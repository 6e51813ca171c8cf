//! The evaluation metrics: chrF, smoothed sentence BLEU, corpus BLEU,
//! named-entity accuracy, and the external-score file reader.
//!
//! ```bash
//! cargo run -p blockbt --example score_translations
//! ```

use std::io::Write;

use blockbt::corpus::NeTestCase;
use blockbt::metrics::{
    corpus_bleu, load_external_scores, ne_accuracy, ChrF, SentenceBleu, Utility,
};

fn main() -> blockbt::Result<()> {
    let hypotheses = [
        "Vláda včera schválila nový rozpočet pro příští rok.",
        "Kočka spí na pohovce v obývacím pokoji.",
        "Praha je hlavním městem České republiky.",
    ];
    let references = [
        "Vláda včera schválila nový rozpočet na příští rok.",
        "Kočka spí na gauči v obývacím pokoji.",
        "Praha je hlavní město České republiky.",
    ];

    let chrf = ChrF::default();
    let sbleu = SentenceBleu::default();
    println!("sentence-level scores:");
    for (hyp, reference) in hypotheses.iter().zip(&references) {
        println!(
            "  chrf {:.4}  sbleu {:.4}  | {hyp}",
            chrf.score(hyp, reference),
            sbleu.score(hyp, reference)
        );
    }
    println!("corpus BLEU: {:.2}", corpus_bleu(&hypotheses, &references)?);

    // named-entity accuracy matches whole tokens, case-sensitively:
    // "U Karla." contains entity "U Karla"; "Karlov" does NOT contain "Karl"
    let cases = vec![
        NeTestCase::new("Jídlo v U Karla.", "Food at U Karla.", "U Karla")?,
        NeTestCase::new("Byli jsme v Karlově.", "We visited Karlov.", "Karl")?,
    ];
    let ne_hyps = ["Dinner at U Karla.", "We visited Karlov."];
    println!("NE accuracy: {:.3}", ne_accuracy(&ne_hyps, &cases)?);

    // neural metric scores enter through files, they are never computed here
    let mut file = tempfile::NamedTempFile::new().expect("temp file");
    write!(file, "# metric=comet\n0.7322\n0.8082\n0.8232\n").expect("write scores");
    let report = load_external_scores(file.path())?;
    println!(
        "external {}: corpus {:.4} over {} sentences",
        report.metric,
        report.corpus_score,
        report.per_sentence.len()
    );
    Ok(())
}
