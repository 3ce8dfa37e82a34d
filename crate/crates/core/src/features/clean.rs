use std::sync::OnceLock;

use regex::Regex;

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S+").expect("valid regex"))
}

fn tag_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Leading group stands in for a lookbehind: tags start a token or follow punctuation.
    RE.get_or_init(|| {
        Regex::new(r"(?i)(^|[^\w/])/?[ur]/[A-Za-z0-9_\-]+").expect("valid regex")
    })
}

fn is_zero_width(c: char) -> bool {
    matches!(c, '\u{200B}' | '\u{200C}' | '\u{200D}' | '\u{2060}' | '\u{FEFF}')
}

/// Strips links, user/subreddit tags, quote markers, and zero-width characters,
/// then collapses whitespace.
pub fn clean_message(body: &str) -> String {
    let text: String = body.chars().filter(|&c| !is_zero_width(c)).collect();
    let text = text.replace("&gt;", " ");
    let text = url_pattern().replace_all(&text, " ");
    let text = tag_pattern().replace_all(&text, "$1 ");
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
