//! Tweet normalization: URL removal, mention removal, hashtag segmentation,
//! character cleaning, lowercasing and whitespace tokenization.
//!
//! The stages always run in that order. Stopwords are not removed here; they
//! only matter when keywords are extracted from a cluster.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Deref;

/// Lowercase tokens matching `[a-z]+(-[a-z]+)*`, in text order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenList(Vec<String>);

impl TokenList {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenList(tokens)
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Tokens joined by single spaces.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl Deref for TokenList {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl From<Vec<String>> for TokenList {
    fn from(tokens: Vec<String>) -> Self {
        TokenList(tokens)
    }
}

impl<'a> FromIterator<&'a str> for TokenList {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        TokenList(iter.into_iter().map(String::from).collect())
    }
}

fn starts_with_ignore_case(haystack: &str, prefix: &str) -> bool {
    haystack.len() >= prefix.len() && haystack.as_bytes()[..prefix.len()].eq_ignore_ascii_case(prefix.as_bytes())
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Removes `http://…`, `https://…` and `www.…` runs up to the next whitespace.
pub fn strip_urls(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if starts_with_ignore_case(rest, "http://")
            || starts_with_ignore_case(rest, "https://")
            || starts_with_ignore_case(rest, "www.")
        {
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            rest = &rest[end..];
        } else {
            out.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    out
}

/// Removes `@name` where the `@` starts a word. A mid-word `@` (as in an
/// e-mail address) is left alone.
pub fn strip_mentions(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let word_initial = i == 0 || !(chars[i - 1].is_alphanumeric() || chars[i - 1] == '_');
        if c == '@' && word_initial && chars.get(i + 1).copied().is_some_and(is_word_char) {
            i += 1;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            continue;
        }
        out.push(c);
        i += 1;
    }
    out
}

/// Splits a hashtag body at lower→upper case changes, letter↔digit changes
/// and underscores.
fn split_hashtag_body(body: &str) -> Vec<&str> {
    let mut words = Vec::new();
    for part in body.split('_') {
        let mut start = 0;
        let mut prev: Option<char> = None;
        for (idx, c) in part.char_indices() {
            if let Some(p) = prev {
                let boundary = (p.is_ascii_lowercase() && c.is_ascii_uppercase())
                    || (p.is_ascii_alphabetic() && c.is_ascii_digit())
                    || (p.is_ascii_digit() && c.is_ascii_alphabetic());
                if boundary {
                    words.push(&part[start..idx]);
                    start = idx;
                }
            }
            prev = Some(c);
        }
        if start < part.len() {
            words.push(&part[start..]);
        }
    }
    words
}

/// Replaces every `#Tag` with its constituent words (`#StayAtHome` becomes
/// `Stay At Home`). Case is preserved; lowercasing happens later.
pub fn segment_hashtags(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 8);
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        let after = &rest[c.len_utf8()..];
        if c == '#' && after.chars().next().is_some_and(is_word_char) {
            let end = after.find(|ch: char| !is_word_char(ch)).unwrap_or(after.len());
            let words = split_hashtag_body(&after[..end]);
            if !words.is_empty() && out.chars().next_back().is_some_and(char::is_alphanumeric) {
                out.push(' ');
            }
            for (n, word) in words.iter().enumerate() {
                if n > 0 {
                    out.push(' ');
                }
                out.push_str(word);
            }
            rest = &after[end..];
        } else {
            out.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    out
}

/// Keeps ASCII letters, whitespace and hyphens that sit between two letters;
/// everything else (digits, punctuation, non-ASCII) is dropped. Whitespace
/// runs collapse to one space and the ends are trimmed.
pub fn clean(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut kept = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        if c.is_ascii_alphabetic() {
            kept.push(c);
        } else if c.is_whitespace() {
            kept.push(' ');
        } else if c == '-' {
            let left = i > 0 && chars[i - 1].is_ascii_alphabetic();
            let right = chars.get(i + 1).is_some_and(char::is_ascii_alphabetic);
            if left && right {
                kept.push('-');
            }
        }
    }
    let mut out = String::with_capacity(kept.len());
    for word in kept.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Full pipeline: URLs, mentions, hashtags, cleaning, lowercasing, split.
pub fn tokenize(text: &str) -> TokenList {
    let text = strip_urls(text);
    let text = strip_mentions(&text);
    let text = segment_hashtags(&text);
    let text = clean(&text).to_ascii_lowercase();
    text.split_whitespace().collect()
}
