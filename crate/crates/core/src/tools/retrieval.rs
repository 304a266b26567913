use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ToolError;

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be", "been",
    "before", "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has", "have",
    "how", "i", "if", "in", "into", "is", "it", "its", "me", "my", "no", "not", "of", "on", "or",
    "our", "should", "so", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "to", "up", "was", "we", "were", "what", "when", "which", "while", "who", "why", "will",
    "with", "would", "you", "your",
];

const BUNDLED: &[(&str, &str)] = &[
    ("general/activity", include_str!("../../data/corpus/activity.txt")),
    ("general/heart_rate", include_str!("../../data/corpus/heart_rate.txt")),
    ("general/hydration", include_str!("../../data/corpus/hydration.txt")),
    ("general/oxygen", include_str!("../../data/corpus/oxygen.txt")),
    ("general/sleep", include_str!("../../data/corpus/sleep.txt")),
    ("general/temperature", include_str!("../../data/corpus/temperature.txt")),
];

/// Lowercased alphanumeric terms with stopwords removed.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassageSource {
    GeneralCorpus,
    UserUploaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgePassage {
    pub doc_id: String,
    pub text: String,
    pub source: PassageSource,
    pub score: f64,
}

#[derive(Debug, Clone)]
struct Doc {
    id: String,
    text: String,
    source: PassageSource,
    tf: HashMap<String, u32>,
}

/// Term-frequency index over plain-text documents.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeIndex {
    docs: Vec<Doc>,
}

impl KnowledgeIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// The wellness corpus shipped with the crate.
    pub fn bundled() -> Self {
        let mut idx = Self::new();
        for (id, text) in BUNDLED {
            idx.add(id, text, PassageSource::GeneralCorpus);
        }
        idx
    }

    /// Adds every `*.txt` file in `dir`, keyed by file stem.
    pub fn add_dir(&mut self, dir: &Path, source: PassageSource) -> std::io::Result<usize> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        for p in &paths {
            let text = std::fs::read_to_string(p)?;
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("doc");
            self.add(stem, &text, source);
        }
        Ok(paths.len())
    }

    /// Adds or replaces a document.
    pub fn add(&mut self, doc_id: &str, text: &str, source: PassageSource) {
        let mut tf = HashMap::new();
        for t in tokenize(text) {
            *tf.entry(t).or_insert(0) += 1;
        }
        let doc = Doc {
            id: doc_id.to_owned(),
            text: text.trim().to_owned(),
            source,
            tf,
        };
        match self.docs.iter_mut().find(|d| d.id == doc_id) {
            Some(slot) => *slot = doc,
            None => self.docs.push(doc),
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Top `k` documents by summed term frequency of the distinct query
    /// terms, ties broken by ascending doc id. Every document is ranked, so
    /// `k` beyond the corpus size returns the whole corpus.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<KnowledgePassage>, ToolError> {
        self.retrieve_multi(&[query], k)
    }

    /// Scores are summed over several phrasings of the same need.
    pub fn retrieve_multi(&self, queries: &[&str], k: usize) -> Result<Vec<KnowledgePassage>, ToolError> {
        if self.docs.is_empty() {
            return Err(ToolError::EmptyIndex);
        }
        let term_sets: Vec<BTreeSet<String>> = queries.iter().map(|q| tokenize(q).into_iter().collect()).collect();
        let mut scored: Vec<(f64, &Doc)> = self
            .docs
            .iter()
            .map(|d| {
                let s: u32 = term_sets
                    .iter()
                    .flat_map(|terms| terms.iter().map(|t| d.tf.get(t).copied().unwrap_or(0)))
                    .sum();
                (f64::from(s), d)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(score, d)| KnowledgePassage {
                doc_id: d.id.clone(),
                text: d.text.clone(),
                source: d.source,
                score,
            })
            .collect())
    }
}
