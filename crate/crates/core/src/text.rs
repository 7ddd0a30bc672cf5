//! Scalar-value text helpers. Every offset in this crate counts `char`s, never bytes.

/// Number of Unicode scalar values in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Slice `s` by scalar-value offsets. Out-of-range bounds are clamped.
pub fn char_slice(s: &str, start: usize, end: usize) -> &str {
    let mut indices = s.char_indices().map(|(i, _)| i).chain(std::iter::once(s.len()));
    let from = indices.nth(start).unwrap_or(s.len());
    let to = if end <= start {
        from
    } else {
        indices.nth(end - start - 1).unwrap_or(s.len())
    };
    &s[from..to]
}

/// Case folding that never changes the number of scalar values, so folded
/// offsets line up with the original text.
pub fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}
