use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{tokenize, ClassifyError};

/// Keyword sets per class label. Keywords are stored lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    keywords: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    pub fn new<I, K, W>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, W)>,
        K: Into<String>,
        W: IntoIterator,
        W::Item: AsRef<str>,
    {
        let keywords = entries
            .into_iter()
            .map(|(label, words)| {
                let set = words
                    .into_iter()
                    .map(|w| w.as_ref().trim().to_lowercase())
                    .filter(|w| !w.is_empty())
                    .collect();
                (label.into(), set)
            })
            .collect();
        Lexicon { keywords }
    }

    /// Reads a JSON object mapping class label to an array of keywords.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        Ok(Lexicon::new(raw))
    }

    pub fn load(path: &Path) -> Result<Self, ClassifyError> {
        let text = std::fs::read_to_string(path).map_err(|source| ClassifyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Lexicon::from_json(&text).map_err(|e| ClassifyError::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn keywords(&self, label: &str) -> Option<&BTreeSet<String>> {
        self.keywords.get(label)
    }

    /// Every vocabulary label must have an entry, even an empty one.
    pub fn check_covers(&self, vocabulary: &[String]) -> Result<(), ClassifyError> {
        match vocabulary.iter().find(|l| !self.keywords.contains_key(*l)) {
            Some(label) => Err(ClassifyError::LexiconMissingClass {
                label: label.clone(),
            }),
            None => Ok(()),
        }
    }
}

/// Index of the vocabulary label whose keyword set has the most token hits.
/// Ties, including the all-zero case, go to the earliest label.
pub fn classify_lexicon_index(text: &str, lexicon: &Lexicon, vocabulary: &[String]) -> usize {
    let tokens = tokenize(text);
    let mut best = (0usize, 0usize);
    for (i, label) in vocabulary.iter().enumerate() {
        let hits = lexicon
            .keywords(label)
            .map_or(0, |set| tokens.iter().filter(|t| set.contains(*t)).count());
        if hits > best.1 {
            best = (i, hits);
        }
    }
    best.0
}

pub fn classify_lexicon<'v>(text: &str, lexicon: &Lexicon, vocabulary: &'v [String]) -> &'v str {
    &vocabulary[classify_lexicon_index(text, lexicon, vocabulary)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentiment() -> (Lexicon, Vec<String>) {
        let lex = Lexicon::new([
            ("Negative", vec!["bad", "boring", "hate"]),
            ("Positive", vec!["good", "loved", "great"]),
        ]);
        (lex, vec!["Negative".into(), "Positive".into()])
    }

    #[test]
    fn argmax_wins() {
        let (lex, vocab) = sentiment();
        assert_eq!(
            classify_lexicon("good great, loved it. a bit boring", &lex, &vocab),
            "Positive"
        );
    }

    #[test]
    fn no_hits_falls_to_first_label() {
        let (lex, vocab) = sentiment();
        assert_eq!(classify_lexicon("the cat sat", &lex, &vocab), "Negative");
    }

    #[test]
    fn ties_go_to_earlier_label() {
        let (lex, vocab) = sentiment();
        assert_eq!(
            classify_lexicon("good bad great hate", &lex, &vocab),
            "Negative"
        );
    }

    #[test]
    fn repeated_tokens_count_each_time() {
        let (lex, vocab) = sentiment();
        assert_eq!(classify_lexicon("good good bad", &lex, &vocab), "Positive");
    }

    #[test]
    fn keywords_are_lowercased_on_load() {
        let lex = Lexicon::from_json(r#"{"A": ["Dune", " SciFi "], "B": []}"#).unwrap();
        assert!(lex.keywords("A").unwrap().contains("dune"));
        assert!(lex.keywords("A").unwrap().contains("scifi"));
        assert!(lex.keywords("B").unwrap().is_empty());
    }

    #[test]
    fn coverage_check_names_missing_label() {
        let (lex, _) = sentiment();
        let err = lex
            .check_covers(&["Negative".into(), "Neutral".into()])
            .unwrap_err();
        assert!(err.to_string().contains("Neutral"));
    }
}
