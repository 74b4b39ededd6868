//! Literal transcription of the lexicon scoring rule.

use std::collections::HashMap;

use hisa_core::sentiment::{Lexicon, LexiconEntry};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy)]
pub enum Kind {
    Term(f64),
    Intensifier(f64),
    Negator,
}

/// Reference scorer: a flat lookup table and an explicit pending-modifier
/// record, evaluated in the rule's stated order.
pub fn reference_polarity(tokens: &[String], table: &HashMap<String, Kind>) -> f64 {
    let mut clauses: Vec<f64> = Vec::new();
    let mut pending_negation = false;
    let mut pending_factor = 1.0;
    for tok in tokens {
        match table.get(tok) {
            None => {}
            Some(Kind::Negator) => pending_negation = true,
            Some(Kind::Intensifier(k)) => pending_factor *= k,
            Some(Kind::Term(p)) => {
                let mut v = p * pending_factor;
                if v > 1.0 {
                    v = 1.0;
                }
                if v < -1.0 {
                    v = -1.0;
                }
                if pending_negation {
                    v = -v * 0.5;
                }
                clauses.push(v);
                pending_negation = false;
                pending_factor = 1.0;
            }
        }
    }
    if clauses.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for c in &clauses {
        total += c;
    }
    (total / clauses.len() as f64).clamp(-1.0, 1.0)
}

pub fn random_lexicon(rng: &mut ChaCha8Rng) -> (Lexicon, HashMap<String, Kind>, Vec<String>) {
    let mut entries = Vec::new();
    let mut negators = Vec::new();
    let mut table = HashMap::new();
    let mut vocab = Vec::new();
    for n in 0..50 {
        let term = format!("w{n}");
        let kind = match n % 10 {
            0 => Kind::Negator,
            1 | 2 => Kind::Intensifier(rng.gen_range(0.2..2.5)),
            _ => Kind::Term(rng.gen_range(-1.0..=1.0)),
        };
        match kind {
            Kind::Negator => negators.push(term.clone()),
            Kind::Intensifier(k) => entries.push(LexiconEntry {
                term: term.clone(),
                polarity: rng.gen_range(-1.0..=1.0),
                intensity: k,
            }),
            Kind::Term(p) => entries.push(LexiconEntry {
                term: term.clone(),
                polarity: p,
                intensity: 1.0,
            }),
        }
        table.insert(term.clone(), kind);
        vocab.push(term);
    }
    for n in 0..10 {
        vocab.push(format!("unk{n}"));
    }
    (Lexicon::new(entries, negators), table, vocab)
}

