/// Characters split off as standalone tokens.
const DETACHED: &[char] = &['.', ',', '!', '?', ';', ':', '"', '(', ')', '[', ']', '{', '}'];

/// Sentence-final tokens.
pub const TERMINATORS: [&str; 3] = [".", "!", "?"];

/// Whitespace tokenization with punctuation detached, original case kept.
pub fn tokenize_preserving_case(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for ch in chunk.chars() {
            if DETACHED.contains(&ch) {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(ch.to_string());
            } else {
                word.push(ch);
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

/// Lowercased tokens. Joining the output with single spaces and tokenizing
/// again yields the same sequence.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_preserving_case(text)
        .into_iter()
        .map(|t| t.to_lowercase())
        .collect()
}

pub fn is_terminator(token: &str) -> bool {
    TERMINATORS.contains(&token)
}

/// Tokens up to and including the first sentence terminator, or everything
/// when there is none.
pub fn first_sentence<S: AsRef<str>>(tokens: &[S]) -> &[S] {
    match tokens.iter().position(|t| is_terminator(t.as_ref())) {
        Some(end) => &tokens[..=end],
        None => tokens,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detaches_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("The Cat, sat. \"Hi!\""),
            vec!["the", "cat", ",", "sat", ".", "\"", "hi", "!", "\""]
        );
    }

    #[test]
    fn keeps_inner_hyphens_and_apostrophes() {
        assert_eq!(tokenize("won 13-10 in Crenshaw's"), vec!["won", "13-10", "in", "crenshaw's"]);
    }

    #[test]
    fn first_sentence_variants() {
        let toks = tokenize("the cat sat . it left .");
        assert_eq!(first_sentence(&toks), &["the", "cat", "sat", "."]);
        let none = tokenize("no terminator here");
        assert_eq!(first_sentence(&none).len(), 3);
        let lead = tokenize("? then more");
        assert_eq!(first_sentence(&lead), &["?"]);
    }

    #[test]
    fn retokenizing_is_stable() {
        let toks = tokenize("A (quick) test: yes; no... ok?");
        assert_eq!(tokenize(&toks.join(" ")), toks);
    }
}
