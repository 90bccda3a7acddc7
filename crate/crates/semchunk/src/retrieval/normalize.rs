//! Shared text normalization for BM25, LCS, and token-F1 scoring.
//!
//! Pipeline: Unicode NFKC, lowercase, punctuation and symbols mapped to
//! spaces, whitespace-delimited tokens. Every CJK codepoint (ideographs and
//! kana) becomes its own token, which keeps scoring uniform across English
//! and Japanese without a language-specific tokenizer. NFKC also folds
//! fullwidth forms, so detector and VLM output variants compare equal.

use unicode_normalization::UnicodeNormalization;

fn is_cjk(c: char) -> bool {
    matches!(u32::from(c),
        0x3040..=0x309F      // hiragana
        | 0x30A0..=0x30FF    // katakana
        | 0x31F0..=0x31FF    // katakana phonetic extensions
        | 0x3400..=0x4DBF    // ideograph extension A
        | 0x4E00..=0x9FFF    // unified ideographs
        | 0xF900..=0xFAFF    // compatibility ideographs
        | 0x20000..=0x2EBEF  // ideograph extensions B..F
    )
}

/// Normalize raw text into tokens.
pub fn normalize_text(raw: &str) -> Vec<String> {
    let mut buf = String::with_capacity(raw.len());
    for ch in raw.nfkc() {
        for lc in ch.to_lowercase() {
            if is_cjk(lc) {
                buf.push(' ');
                buf.push(lc);
                buf.push(' ');
            } else if lc.is_alphanumeric() {
                buf.push(lc);
            } else {
                buf.push(' ');
            }
        }
    }
    buf.split_whitespace().map(str::to_string).collect()
}

/// Normalized character sequence: tokens joined by single spaces. This is
/// the unit stream for character-level LCS.
pub fn normalized_chars(raw: &str) -> Vec<char> {
    let tokens = normalize_text(raw);
    let mut out = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.extend(tok.chars());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_strips_punctuation() {
        assert_eq!(normalize_text("The CAT, sat."), vec!["the", "cat", "sat"]);
    }

    #[test]
    fn cjk_codepoints_become_tokens() {
        assert_eq!(
            normalize_text("売上高2024"),
            vec!["売", "上", "高", "2024"]
        );
    }

    #[test]
    fn empty_input_yields_no_tokens() {
        assert!(normalize_text("").is_empty());
        assert!(normalize_text("  ,.;  ").is_empty());
    }

    #[test]
    fn nfkc_folds_fullwidth_forms() {
        // fullwidth "ＡＢＣ１２３" normalizes to ascii
        assert_eq!(normalize_text("ＡＢＣ１２３"), vec!["abc123"]);
    }

    #[test]
    fn kana_split_per_codepoint() {
        assert_eq!(normalize_text("データ"), vec!["デ", "ー", "タ"]);
    }

    #[test]
    fn normalized_chars_joins_with_single_spaces() {
        let chars: String = normalized_chars("The  CAT,   sat.").into_iter().collect();
        assert_eq!(chars, "the cat sat");
    }
}
