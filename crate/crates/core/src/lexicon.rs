//! Vocabulary tables behind the deterministic language adapter.
//!
//! The table format is line based: `[type <name>]` opens a value list,
//! `[stopwords]` a whitespace separated word list and `[synonyms]` a list of
//! `value: related, related, ...` lines. `#` starts a comment.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fragment::{normalize_text, Fragment, FragmentOrigin, FragmentType};

const BUILTIN: &str = include_str!("../data/lexicon.txt");

/// Longest multi-word value the tokenizer tries to match.
const MAX_PHRASE_WORDS: usize = 3;

#[derive(Debug, Clone)]
pub struct Lexicon {
    types: Vec<(FragmentType, Vec<String>)>,
    index: HashMap<String, (usize, usize)>,
    stopwords: HashSet<String>,
    synonyms: BTreeMap<String, Vec<String>>,
}

enum Section {
    None,
    Type(usize),
    Stopwords,
    Synonyms,
}

impl Lexicon {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("builtin lexicon parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon {
            types: Vec::new(),
            index: HashMap::new(),
            stopwords: HashSet::new(),
            synonyms: BTreeMap::new(),
        };
        let mut section = Section::None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Config(format!("lexicon line {}: {msg}", lineno + 1));
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let mut parts = header.split_whitespace();
                section = match (parts.next(), parts.next()) {
                    (Some("type"), Some(name)) => {
                        lex.types.push((FragmentType::new(name)?, Vec::new()));
                        Section::Type(lex.types.len() - 1)
                    }
                    (Some("stopwords"), None) => Section::Stopwords,
                    (Some("synonyms"), None) => Section::Synonyms,
                    _ => return Err(bad("unknown section header")),
                };
                continue;
            }
            match section {
                Section::None => return Err(bad("entry outside of a section")),
                Section::Type(t) => {
                    let value = normalize_text(line);
                    if lex.index.contains_key(&value) {
                        return Err(bad(&format!("value `{value}` listed twice")));
                    }
                    let list = &mut lex.types[t].1;
                    lex.index.insert(value.clone(), (t, list.len()));
                    list.push(value);
                }
                Section::Stopwords => {
                    lex.stopwords.extend(line.split_whitespace().map(str::to_lowercase));
                }
                Section::Synonyms => {
                    let (head, rest) = line.split_once(':').ok_or_else(|| bad("synonym line needs `:`"))?;
                    let related = rest.split(',').map(normalize_text).filter(|v| !v.is_empty()).collect();
                    lex.synonyms.insert(normalize_text(head), related);
                }
            }
        }
        if lex.types.is_empty() {
            return Err(Error::Config("lexicon defines no types".into()));
        }
        Ok(lex)
    }

    pub fn types(&self) -> impl Iterator<Item = &FragmentType> {
        self.types.iter().map(|(t, _)| t)
    }

    pub fn values(&self, ftype: &FragmentType) -> &[String] {
        self.types.iter().find(|(t, _)| t == ftype).map(|(_, v)| v.as_slice()).unwrap_or(&[])
    }

    pub fn classify(&self, value: &str) -> Option<FragmentType> {
        self.index.get(value).map(|&(t, _)| self.types[t].0.clone())
    }

    /// Position of a value inside its type list.
    pub fn value_rank(&self, value: &str) -> Option<usize> {
        self.index.get(value).map(|&(_, i)| i)
    }

    pub fn synonyms(&self, value: &str) -> &[String] {
        self.synonyms.get(value).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    /// Tokenizes into comma separated segments of lowercase words.
    pub fn segments(text: &str) -> Vec<Vec<String>> {
        text.to_lowercase()
            .split([',', ';', '.', '\n'])
            .map(|seg| {
                seg.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\''))
                    .filter(|w| !w.is_empty())
                    .map(str::to_string)
                    .collect::<Vec<_>>()
            })
            .filter(|s| !s.is_empty())
            .collect()
    }

    /// Every lexicon value found in `text`, in order of appearance, using
    /// greedy longest-phrase matching. Stopwords and unknown words are skipped.
    pub fn scan(&self, text: &str) -> Vec<Fragment> {
        let mut found: Vec<Fragment> = Vec::new();
        for words in Self::segments(text) {
            let mut i = 0;
            while i < words.len() {
                let mut matched = 0;
                for n in (1..=MAX_PHRASE_WORDS.min(words.len() - i)).rev() {
                    let phrase = words[i..i + n].join(" ");
                    if n == 1 && self.is_stopword(&phrase) {
                        break;
                    }
                    if let Some(ftype) = self.classify(&phrase) {
                        let frag = Fragment {
                            ftype,
                            value: phrase,
                            origin: FragmentOrigin::Decomposed,
                        };
                        if !found.iter().any(|f| f.same_as(&frag)) {
                            found.push(frag);
                        }
                        matched = n;
                        break;
                    }
                }
                i += matched.max(1);
            }
        }
        found
    }

    /// Finds a fragment type named in `text` (e.g. "painting styles" -> style).
    pub fn named_type(&self, text: &str) -> Option<FragmentType> {
        for words in Self::segments(text) {
            for w in words {
                let singular = w.strip_suffix('s').unwrap_or(&w);
                let name = if singular == "colour" { "color" } else { singular };
                if let Some(t) = self.types().find(|t| t.as_str() == name || t.as_str() == w) {
                    return Some(t.clone());
                }
            }
        }
        None
    }

    /// Sorts fragments canonically: by type, then lexicon position, then text.
    pub fn sort(&self, fragments: &mut [Fragment]) {
        fragments.sort_by(|a, b| {
            a.ftype.cmp(&b.ftype).then_with(|| {
                let ra = self.value_rank(&a.value).unwrap_or(usize::MAX);
                let rb = self.value_rank(&b.value).unwrap_or(usize::MAX);
                ra.cmp(&rb).then_with(|| a.value.cmp(&b.value))
            })
        });
    }
}
