//! Sentence segmentation and view construction for one entity, under both
//! view policies and the single-view baseline.
//!
//! ```bash
//! cargo run --example segment_and_views
//! ```

use muver::corpus::{
    build_views, sentence_spans, single_view, EntityRecord, ViewPolicy, Vocabulary,
};
use muver::matcher::ViewSet;

fn show(label: &str, vs: &ViewSet, vocab: &Vocabulary) {
    println!("{label}: {} views ({} basic)", vs.len(), vs.basic_count);
    for v in &vs.views {
        let words: Vec<&str> = v.token_ids().filter_map(|t| vocab.word(t)).collect();
        println!(
            "  view {} sentences {:?}: {}",
            v.view_id,
            v.sentence_indices(),
            words.join(" ")
        );
    }
}

fn main() -> muver::Result<()> {
    let entity = EntityRecord {
        entity_id: "Q25369".into(),
        title: "Kobe Bryant".into(),
        description: "Kobe Bryant was an American professional basketball player. \
                      He spent his entire 20-year career with the Los Angeles Lakers.\n\
                      Bryant was also a film producer! His short film won an Academy Award."
            .into(),
    };

    for (text, starts_paragraph) in sentence_spans(&entity.description) {
        println!("{} {text:?}", if starts_paragraph { '¶' } else { ' ' });
    }

    let mut vocab = Vocabulary::new();
    let per_sentence = build_views(&entity, &mut vocab, 8, ViewPolicy::PerSentence)?;
    show("per-sentence, 8 tokens per view", &per_sentence, &vocab);

    let paragraphs = build_views(&entity, &mut vocab, 40, "first-1-paragraphs".parse()?)?;
    show("first-1-paragraphs", &paragraphs, &vocab);

    let single = single_view(&entity, &vocab, 40)?;
    show("single view", &single, &vocab);

    let empty = EntityRecord {
        description: String::new(),
        ..entity
    };
    show(
        "empty description",
        &build_views(&empty, &mut vocab, 40, ViewPolicy::PerSentence)?,
        &vocab,
    );
    Ok(())
}
