use alloc::string::String;
use alloc::vec::Vec;

/// Identifier of the shipped English stopword list.
pub const STOPWORDS_V1: &str = "english-v1";

const STOPWORD_ASSET: &str = include_str!("../../assets/stopwords_en_v1.txt");

/// The 318-word English stopword list, sorted.
pub fn stopwords() -> impl Iterator<Item = &'static str> {
    STOPWORD_ASSET.lines().filter(|l| !l.is_empty())
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().any(|w| w == token)
}

/// Lowercases `text` and returns its maximal alphanumeric runs of at least
/// two characters. Stopwords are kept; the vectorizer drops them.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut chars = 0usize;
    let mut flush = |current: &mut String, chars: &mut usize| {
        if *chars >= 2 {
            tokens.push(core::mem::take(current));
        } else {
            current.clear();
        }
        *chars = 0;
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
            chars += 1;
        } else if chars > 0 || !current.is_empty() {
            flush(&mut current, &mut chars);
        }
    }
    flush(&mut current, &mut chars);
    tokens
}
