//! TF-IDF term ranking for offline theme extraction.

use std::collections::{BTreeMap, BTreeSet};

const STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did", "do",
    "does", "doing", "down", "during", "each", "either", "etc", "few", "for", "from", "further", "had", "has", "have",
    "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is",
    "it", "its", "itself", "just", "may", "me", "might", "more", "most", "must", "my", "myself", "no", "nor", "not",
    "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same",
    "shall", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves",
    "then", "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "us", "very",
    "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
    "you", "your", "yours", "yourself", "yourselves",
];

pub fn is_stop_word(word: &str) -> bool {
    STOP_WORDS.binary_search(&word).is_ok()
}

/// Lowercased content terms of `text`, in order, with repeats.
pub fn terms(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() >= 2 && !w.chars().all(|c| c.is_ascii_digit()))
        .map(str::to_lowercase)
        .filter(|w| !is_stop_word(w))
}

/// Scores terms of `focus` (concatenated) against document frequencies in
/// `corpus`, highest first, ties broken alphabetically.
///
/// `tf = count / total terms in focus`, `idf = ln((1 + N) / (1 + df)) + 1`.
pub fn rank_terms<'a>(focus: impl IntoIterator<Item = &'a str>, corpus: impl IntoIterator<Item = &'a str>) -> Vec<(String, f64)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for text in focus {
        for t in terms(text) {
            *counts.entry(t).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Vec::new();
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut n_docs = 0usize;
    for text in corpus {
        n_docs += 1;
        let unique: BTreeSet<String> = terms(text).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut scored: Vec<(String, f64)> = counts
        .into_iter()
        .map(|(term, c)| {
            let d = df.get(&term).copied().unwrap_or(0);
            let idf = ((1.0 + n_docs as f64) / (1.0 + d as f64)).ln() + 1.0;
            let score = c as f64 / total as f64 * idf;
            (term, score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_list_sorted() {
        assert!(STOP_WORDS.windows(2).all(|w| w[0] < w[1]));
        assert!(is_stop_word("the"));
        assert!(!is_stop_word("heron"));
    }

    #[test]
    fn repeated_term_ranks_first() {
        // cluster: "alpha alpha beta"; tf(alpha) = 2/3, tf(beta) = 1/3.
        // Both occur in 1 of 4 corpus chunks, so idf is shared and alpha wins.
        let corpus = ["alpha alpha beta", "gamma delta", "gamma epsilon", "delta zeta"];
        let ranked = rank_terms(["alpha alpha beta"], corpus);
        assert_eq!(ranked[0].0, "alpha");
        assert_eq!(ranked[1].0, "beta");
        let idf = (5.0f64 / 2.0).ln() + 1.0;
        assert!((ranked[0].1 - 2.0 / 3.0 * idf).abs() < 1e-12);
    }

    #[test]
    fn stop_words_and_numbers_dropped() {
        let t: Vec<String> = terms("The 2024 Fund and its X shares").collect();
        assert_eq!(t, vec!["fund", "shares"]);
    }

    #[test]
    fn empty_focus() {
        assert!(rank_terms(["the of and"], ["x"]).is_empty());
    }
}
