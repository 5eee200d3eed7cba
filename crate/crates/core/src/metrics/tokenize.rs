/// Lowercase, split on whitespace, and emit every non-alphanumeric
/// character as a token of its own. Shared by every metric.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() && !ch.is_control() {
                out.push(ch.to_lowercase().collect());
            }
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::tokenize;

    #[test]
    fn punctuation_becomes_tokens() {
        assert_eq!(tokenize("The cat, sat."), ["the", "cat", ",", "sat", "."]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
        assert_eq!(tokenize("Ünïcode\tWORDS"), ["ünïcode", "words"]);
    }
}
