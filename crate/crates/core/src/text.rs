//! Comment tags, lexeme extraction, and tag suggestion.

use std::collections::{BTreeSet, HashMap};

pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Stopword list; one word per line, `#` starts a comment.
#[derive(Debug, Clone, Default)]
pub struct Stopwords(BTreeSet<String>);

impl Stopwords {
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::str::FromStr for Stopwords {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self::parse(s))
    }
}

/// `#`-prefixed tokens, lowercased with punctuation removed, first
/// occurrence order, no repeats.
pub fn extract_tags(body: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for token in body.split_whitespace() {
        let Some(raw) = token.strip_prefix('#') else {
            continue;
        };
        let tag: String = raw
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        if !tag.is_empty() && !out.contains(&tag) {
            out.push(tag);
        }
    }
    out
}

/// Distinct lowercase words across `texts`, minus stopwords.
pub fn lexemes<'a>(texts: impl IntoIterator<Item = &'a str>, stopwords: &Stopwords) -> BTreeSet<String> {
    texts
        .into_iter()
        .flat_map(|t| t.split(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !stopwords.contains(w))
        .collect()
}

/// Tags starting with `prefix`, most used first, ties alphabetical.
pub fn suggest<'a>(tags: impl IntoIterator<Item = &'a str>, prefix: &str, limit: usize) -> Vec<(String, usize)> {
    let prefix = prefix.to_lowercase();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tag in tags {
        if tag.starts_with(&prefix) {
            *counts.entry(tag).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().map(|(t, n)| (t.to_string(), n)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(limit);
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_extraction() {
        assert_eq!(extract_tags("fits #geospatial datasets"), vec!["geospatial"]);
        assert!(extract_tags("looks good").is_empty());
        assert_eq!(extract_tags("#Geo-Spatial, #geospatial! # #x"), vec!["geospatial", "x"]);
    }

    #[test]
    fn lexemes_of_aggregated_text() {
        let stop = Stopwords::parse(DEFAULT_STOPWORDS);
        let got = lexemes(["Metadata quality; metadata ranking."], &stop);
        let want: BTreeSet<String> = ["metadata", "quality", "ranking"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(got, want);
        assert!(lexemes([""], &stop).is_empty());
        assert!(lexemes(["the and of"], &stop).is_empty());
    }

    #[test]
    fn suggestions_rank_by_usage() {
        let tags = ["metadata", "meta", "metadata", "geo", "metrics", "metrics", "metadata"];
        let got = suggest(tags, "meta", 10);
        assert_eq!(got, vec![("metadata".to_string(), 3), ("meta".to_string(), 1)]);
        assert_eq!(suggest(tags, "me", 2)[1], ("metrics".to_string(), 2));
    }

    #[test]
    fn stopword_file_comments() {
        let s = Stopwords::parse("# header\nthe\n  And  # trailing\n\n");
        assert!(s.contains("the") && s.contains("and"));
        assert_eq!(s.len(), 2);
    }
}
