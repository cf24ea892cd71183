//! Text normalization shared by source verification and field matching.

/// True for ASCII punctuation and the common Unicode punctuation blocks
/// (general punctuation, CJK symbols, fullwidth forms).
pub fn is_punctuation(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_punctuation();
    }
    matches!(c as u32,
        0x00A1..=0x00BF
        | 0x2010..=0x2027
        | 0x2030..=0x205E
        | 0x3000..=0x303F
        | 0xFF01..=0xFF0F
        | 0xFF1A..=0xFF20
        | 0xFF3B..=0xFF40
        | 0xFF5B..=0xFF65)
}

/// Lowercases, removes punctuation and collapses runs of whitespace to a
/// single space. Leading and trailing whitespace is dropped.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        if is_punctuation(c) {
            continue;
        }
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(c.to_lowercase());
    }
    out
}

/// Trims and collapses internal whitespace without touching case or
/// punctuation.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_case_punctuation_and_spaces() {
        assert_eq!(normalize("Zhang  San."), "zhang san");
        assert_eq!(normalize("ALIBABA, GROUP."), "alibaba group");
        assert_eq!(normalize("  a ,  b  "), "a b");
        assert_eq!(normalize("至今。"), "至今");
        assert_eq!(normalize(""), "");
    }

    #[test]
    fn collapse_keeps_punctuation() {
        assert_eq!(collapse_whitespace("  Rainbow   Network Co. "), "Rainbow Network Co.");
    }
}
