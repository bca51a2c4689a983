//! Alphabets, transcript normalization and label encoding.
//!
//! Class layout for an alphabet with `n` symbols: ids `0..n` are the symbols in
//! order, id `n` is the CTC blank. The blank is never a member of `symbols`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Escape used for the space symbol in alphabet files.
pub const SPACE_TOKEN: &str = "<sp>";

const RUSSIAN_LETTERS: &str = "абвгдеёжзийклмнопрстуфхцчшщъыьэюя";
const KAZAKH_LETTERS: &str = "аәбвгғдеёжзийкқлмнңоөпрстуұүфхһцчшщъыіьэюя";

#[derive(Debug, Error)]
pub enum TextError {
    #[error("unknown built-in alphabet {0:?} (expected \"kk\" or \"ru\")")]
    UnknownAlphabet(String),
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("character {ch:?} at position {position} is not in alphabet {alphabet:?}")]
    OutOfAlphabet {
        ch: char,
        position: usize,
        alphabet: String,
    },
    #[error("label id {id} at position {position} is outside the symbol range 0..{num_symbols}")]
    InvalidLabel {
        id: usize,
        position: usize,
        num_symbols: usize,
    },
    #[error("reading alphabet file: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered symbol inventory. The blank class sits after the last symbol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    name: String,
    symbols: Vec<char>,
}

impl Alphabet {
    /// Validates and builds an alphabet.
    ///
    /// Symbols must be unique and lowercase, and the space character must
    /// appear exactly once.
    pub fn new(name: impl Into<String>, symbols: Vec<char>) -> Result<Self, TextError> {
        let name = name.into();
        let mut seen = HashSet::new();
        for &c in &symbols {
            if !seen.insert(c) {
                return Err(TextError::InvalidAlphabet(format!(
                    "{name}: duplicate symbol {c:?}"
                )));
            }
            if !is_lowercase_char(c) {
                return Err(TextError::InvalidAlphabet(format!(
                    "{name}: symbol {c:?} is not lowercase"
                )));
            }
            if c != ' ' && c.is_whitespace() {
                return Err(TextError::InvalidAlphabet(format!(
                    "{name}: whitespace symbol {c:?} other than space"
                )));
            }
        }
        if !seen.contains(&' ') {
            return Err(TextError::InvalidAlphabet(format!(
                "{name}: the space symbol is missing"
            )));
        }
        Ok(Self { name, symbols })
    }

    /// Letters followed by a single space symbol.
    pub fn from_letters(name: impl Into<String>, letters: &str) -> Result<Self, TextError> {
        let mut symbols: Vec<char> = letters.chars().collect();
        symbols.push(' ');
        Self::new(name, symbols)
    }

    /// One of the embedded alphabets: `"ru"` (33 letters) or `"kk"` (42 letters),
    /// each in standard dictionary order with the space appended last.
    pub fn builtin(name: &str) -> Result<Self, TextError> {
        match name {
            "ru" => Self::from_letters("ru", RUSSIAN_LETTERS),
            "kk" => Self::from_letters("kk", KAZAKH_LETTERS),
            other => Err(TextError::UnknownAlphabet(other.to_string())),
        }
    }

    /// Parses the one-symbol-per-line file format (`<sp>` encodes the space).
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, TextError> {
        let name = name.into();
        let mut symbols = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            if line == SPACE_TOKEN {
                symbols.push(' ');
                continue;
            }
            let mut chars = line.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => symbols.push(c),
                _ => {
                    return Err(TextError::InvalidAlphabet(format!(
                        "{name}: line {} holds {line:?}, expected exactly one character",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(name, symbols)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".to_string());
        Self::parse(name, &std::fs::read_to_string(path)?)
    }

    /// Renders the file format accepted by [`Alphabet::parse`].
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for &c in &self.symbols {
            if c == ' ' {
                out.push_str(SPACE_TOKEN);
            } else {
                out.push(c);
            }
            out.push('\n');
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    /// Number of output classes: symbols plus blank.
    pub fn num_classes(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn blank_index(&self) -> usize {
        self.symbols.len()
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c)
    }

    pub fn contains(&self, c: char) -> bool {
        self.symbols.contains(&c)
    }

    /// Symbols other than the space.
    pub fn letters(&self) -> impl Iterator<Item = char> + '_ {
        self.symbols.iter().copied().filter(|&c| c != ' ')
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} symbols + blank)", self.name, self.symbols.len())
    }
}

fn is_lowercase_char(c: char) -> bool {
    let mut lower = c.to_lowercase();
    lower.next() == Some(c) && lower.next().is_none()
}

/// Target label ids; never contains the blank.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelSeq(pub Vec<usize>);

impl LabelSeq {
    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Frames needed for a CTC alignment: one per label plus one blank
    /// between each pair of equal neighbours.
    pub fn min_frames(&self) -> usize {
        let repeats = self.0.windows(2).filter(|w| w[0] == w[1]).count();
        self.0.len() + repeats
    }
}

impl From<Vec<usize>> for LabelSeq {
    fn from(ids: Vec<usize>) -> Self {
        Self(ids)
    }
}

/// Lowercases, drops characters outside the alphabet, collapses whitespace
/// runs to one space and trims.
pub fn normalize_transcript(raw: &str, alphabet: &Alphabet) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars().flat_map(char::to_lowercase) {
        let c = if c.is_whitespace() { ' ' } else { c };
        if c == ' ' {
            pending_space = !out.is_empty();
            continue;
        }
        if !alphabet.contains(c) {
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(c);
    }
    out
}

pub fn encode(text: &str, alphabet: &Alphabet) -> Result<LabelSeq, TextError> {
    text.chars()
        .enumerate()
        .map(|(position, ch)| {
            alphabet.index_of(ch).ok_or_else(|| TextError::OutOfAlphabet {
                ch,
                position,
                alphabet: alphabet.name().to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(LabelSeq)
}

pub fn decode(labels: &LabelSeq, alphabet: &Alphabet) -> Result<String, TextError> {
    labels
        .ids()
        .iter()
        .enumerate()
        .map(|(position, &id)| {
            alphabet
                .symbols()
                .get(id)
                .copied()
                .ok_or(TextError::InvalidLabel {
                    id,
                    position,
                    num_symbols: alphabet.symbols().len(),
                })
        })
        .collect()
}

/// Fraction of the target's letters (space excluded) that the source also has.
pub fn overlap_ratio(source: &Alphabet, target: &Alphabet) -> f64 {
    let target_letters: Vec<char> = target.letters().collect();
    if target_letters.is_empty() {
        return 0.0;
    }
    let shared = target_letters.iter().filter(|&&c| source.contains(c)).count();
    shared as f64 / target_letters.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kk() -> Alphabet {
        Alphabet::builtin("kk").unwrap()
    }

    #[test]
    fn builtin_sizes() {
        let ru = Alphabet::builtin("ru").unwrap();
        assert_eq!(ru.symbols().len(), 34);
        assert_eq!(ru.num_classes(), 35);
        assert_eq!(ru.blank_index(), 34);
        let kk = kk();
        assert_eq!(kk.symbols().len(), 43);
        assert_eq!(kk.num_classes(), 44);
        assert!(matches!(
            Alphabet::builtin("en"),
            Err(TextError::UnknownAlphabet(_))
        ));
    }

    #[test]
    fn russian_letters_are_a_subset_of_kazakh() {
        let ru = Alphabet::builtin("ru").unwrap();
        let kk = kk();
        assert!(ru.letters().all(|c| kk.contains(c)));
        let extra: String = kk.letters().filter(|&c| !ru.contains(c)).collect();
        assert_eq!(extra, "әғқңөұүһі");
    }

    #[test]
    fn overlap_ratio_examples() {
        let ru = Alphabet::builtin("ru").unwrap();
        let r = overlap_ratio(&ru, &kk());
        assert_eq!(r, 33.0 / 42.0);
        assert!((0.78..=0.79).contains(&r));
        assert_eq!(overlap_ratio(&kk(), &kk()), 1.0);
        let a = Alphabet::from_letters("a", "ab").unwrap();
        let b = Alphabet::from_letters("b", "cd").unwrap();
        assert_eq!(overlap_ratio(&a, &b), 0.0);
    }

    #[test]
    fn normalize_examples() {
        let kk = kk();
        assert_eq!(normalize_transcript("Абай!", &kk), "абай");
        assert_eq!(normalize_transcript("", &kk), "");
        assert_eq!(normalize_transcript("Қара   сөздер…", &kk), "қара сөздер");
        assert_eq!(normalize_transcript("  a - б\tв 1999 ", &kk), "б в");
    }

    /// Independent character-filter oracle: split on whitespace, filter each
    /// word, drop empties, rejoin.
    fn normalize_oracle(raw: &str, a: &Alphabet) -> String {
        raw.to_lowercase()
            .split_whitespace()
            .map(|w| w.chars().filter(|&c| a.contains(c)).collect::<String>())
            .filter(|w| !w.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn encode_decode() {
        let kk = kk();
        assert_eq!(encode("", &kk).unwrap(), LabelSeq::default());
        let ids = encode("абай", &kk).unwrap();
        assert_eq!(ids.ids(), &[0, 2, 0, 12]);
        assert_eq!(decode(&ids, &kk).unwrap(), "абай");
        match encode("аq", &kk) {
            Err(TextError::OutOfAlphabet { ch, position, .. }) => {
                assert_eq!(ch, 'q');
                assert_eq!(position, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(decode(&LabelSeq(vec![kk.blank_index()]), &kk).is_err());
    }

    #[test]
    fn min_frames_counts_repeats() {
        assert_eq!(LabelSeq(vec![]).min_frames(), 0);
        assert_eq!(LabelSeq(vec![1, 1]).min_frames(), 3);
        assert_eq!(LabelSeq(vec![1, 2, 2, 2]).min_frames(), 6);
    }

    #[test]
    fn alphabet_validation() {
        assert!(Alphabet::new("x", vec!['a', 'a', ' ']).is_err());
        assert!(Alphabet::new("x", vec!['a', 'b']).is_err());
        assert!(Alphabet::new("x", vec!['A', ' ']).is_err());
        assert!(Alphabet::new("x", vec!['a', ' ', '\t']).is_err());
    }

    #[test]
    fn alphabet_file_round_trip() {
        let kk = kk();
        let parsed = Alphabet::parse("kk", &kk.to_file_string()).unwrap();
        assert_eq!(parsed, kk);
        assert!(Alphabet::parse("bad", "ab\n<sp>\n").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mini.txt");
        std::fs::write(&path, "a\nб\n<sp>\n").unwrap();
        let a = Alphabet::load(&path).unwrap();
        assert_eq!(a.name(), "mini");
        assert_eq!(a.symbols(), &['a', 'б', ' ']);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent_and_matches_oracle(raw in "[а-яәғқңөұүһіA-Za-z0-9 \\t!,.…-]{0,40}") {
            let kk = kk();
            let once = normalize_transcript(&raw, &kk);
            prop_assert_eq!(normalize_transcript(&once, &kk), once.clone());
            prop_assert_eq!(once, normalize_oracle(&raw, &kk));
        }

        #[test]
        fn decode_inverts_encode(raw in "[а-яәғқңөұүһі ]{0,40}") {
            let kk = kk();
            let ids = encode(&raw, &kk).unwrap();
            prop_assert!(ids.ids().iter().all(|&i| i < kk.blank_index()));
            prop_assert_eq!(decode(&ids, &kk).unwrap(), raw);
        }
    }
}
