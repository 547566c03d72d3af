/// Splits on whitespace, then peels punctuation off into separate tokens.
///
/// Apostrophes, hyphens and periods stay inside a word when they sit between
/// two alphanumeric characters (`let's`, `sci-fi`, `3.5`). Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut word = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if c.is_alphanumeric() {
                word.push(c);
                continue;
            }
            let joiner = matches!(c, '\'' | '’' | '-' | '.')
                && i > 0
                && chars[i - 1].is_alphanumeric()
                && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            if joiner {
                word.push(c);
            } else {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(c.to_string());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| !c.is_alphanumeric())
}

/// Lowercased tokens without punctuation; the input to n-gram features.
pub fn normalized_words(tokens: &[String]) -> Vec<String> {
    tokens.iter().filter(|t| !is_punctuation(t)).map(|t| t.to_lowercase()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn examples() {
        assert_eq!(toks("let's chat about movies."), vec!["let's", "chat", "about", "movies", "."]);
        assert!(toks("").is_empty());
        assert_eq!(toks("Star Wars"), vec!["Star", "Wars"]);
    }

    #[test]
    fn punctuation_is_split() {
        assert_eq!(toks("Hi, Anna!?"), vec!["Hi", ",", "Anna", "!", "?"]);
        assert_eq!(toks("(sci-fi) 3.5 'quoted'"), vec!["(", "sci-fi", ")", "3.5", "'", "quoted", "'"]);
        assert_eq!(toks("end-"), vec!["end", "-"]);
    }

    proptest! {
        #[test]
        fn join_then_tokenize_is_identity(words in prop::collection::vec("[A-Za-z0-9]{1,8}", 0..12)) {
            let joined = words.join(" ");
            prop_assert_eq!(tokenize(&joined), words);
        }
    }
}
