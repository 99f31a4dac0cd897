//! Log message preprocessing: case folding, variable masking, stemming.
//!
//! Raw log lines differ mostly in embedded variables — addresses, ids,
//! counters, paths. Masking those behind a single wildcard token makes
//! lines with the same fixed text identical, which is what lets the
//! template tree collapse millions of lines into a few templates.

use regex::Regex;
use std::sync::OnceLock;

/// The token standing in for any masked variable.
pub const WILDCARD: &str = "<*>";

/// Result of preprocessing one message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Preprocessed {
    /// Token list in original order; contains at least one non-wildcard.
    Tokens(Vec<String>),
    /// Every token was a masked variable (or the message was empty):
    /// there is no fixed text to build a template from.
    AllVariables,
}

fn ipv4_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d{1,3}\.){3}\d{1,3}(:\d+)?$").expect("valid regex"))
}

fn uuid_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$")
            .expect("valid regex")
    })
}

/// True for tokens that are variable data rather than fixed message text.
///
/// The pattern set is fixed: IPv4 addresses (with optional port), UUIDs,
/// hex identifiers (0x-prefixed, or bare hex of 8+ characters containing
/// at least one digit — the digit requirement spares ordinary words),
/// plain numbers, and filesystem-like paths (leading slash or at least
/// two slashes; a single interior slash as in "mb/s" is kept).
fn is_variable(token: &str) -> bool {
    if token.chars().all(|c| c.is_ascii_digit() || c == '.') {
        // Pure integers and decimals (and IPv4 without port).
        return token.chars().any(|c| c.is_ascii_digit());
    }
    if ipv4_pattern().is_match(token) {
        return true;
    }
    if token.len() == 36 && uuid_pattern().is_match(token) {
        return true;
    }
    if let Some(rest) = token.strip_prefix("0x") {
        if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_hexdigit()) {
            return true;
        }
    }
    if token.len() >= 8
        && token.chars().all(|c| c.is_ascii_hexdigit())
        && token.chars().any(|c| c.is_ascii_digit())
    {
        return true;
    }
    if token.starts_with('/') || token.matches('/').count() >= 2 {
        return true;
    }
    false
}

/// Minimal rule-based stemmer: strips one of -ing / -ed / -s. Machine-log
/// vocabulary only needs inflection folding ("failed"/"failing"/"fails"
/// → "fail"); length guards and the -ss/-us exceptions keep short words
/// and Latin-ish nouns ("status", "access") intact. Only plain alphabetic
/// words are stemmed — units and codes like "mb/s" or "eth0s" are data,
/// not inflected English.
fn stem(token: &str) -> &str {
    if !token.chars().all(|c| c.is_ascii_alphabetic()) {
        return token;
    }
    if token.len() > 4 {
        if let Some(base) = token.strip_suffix("ing") {
            return base;
        }
    }
    if token.len() > 3 {
        if let Some(base) = token.strip_suffix("ed") {
            return base;
        }
        if token.ends_with('s') && !token.ends_with("ss") && !token.ends_with("us") {
            return &token[..token.len() - 1];
        }
    }
    token
}

/// Case-folds, splits on whitespace, trims edge punctuation, masks
/// variable tokens with [`WILDCARD`], and stems the rest. Token order is
/// preserved; reordering is the template tree's job.
pub fn preprocess(message: &str) -> Preprocessed {
    let lowered = message.to_lowercase();
    let mut tokens: Vec<String> = Vec::new();
    let mut any_fixed = false;
    for raw in lowered.split_whitespace() {
        let trimmed = raw.trim_matches(|c: char| c.is_ascii_punctuation() && c != '/');
        if trimmed.is_empty() {
            continue;
        }
        if is_variable(trimmed) {
            tokens.push(WILDCARD.to_string());
        } else {
            any_fixed = true;
            tokens.push(stem(trimmed).to_string());
        }
    }
    if !any_fixed {
        return Preprocessed::AllVariables;
    }
    Preprocessed::Tokens(tokens)
}
