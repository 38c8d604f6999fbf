//! Text normalization shared by the matcher, the taxonomy and the hash encoder.
//!
//! Text is NFKC-folded and lowercased, then split on whitespace and
//! punctuation. `+` and `#` survive as suffixes of a token (`c++`, `c#`) and
//! `.` survives when an alphanumeric character follows it (`.net`, `node.js`),
//! so a sentence-final period is still dropped.

use unicode_normalization::UnicodeNormalization;

/// Split `text` into normalized tokens.
pub fn normalize(text: &str) -> Vec<String> {
    let folded: Vec<char> = text.nfkc().flat_map(char::to_lowercase).collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in folded.iter().enumerate() {
        let keep = if c.is_alphanumeric() {
            true
        } else {
            match c {
                '+' | '#' => !current.is_empty(),
                '.' => folded.get(i + 1).is_some_and(|n| n.is_alphanumeric()),
                _ => false,
            }
        };
        if keep {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation() {
        assert_eq!(normalize("Haskell, and SPARK"), ["haskell", "and", "spark"]);
        assert_eq!(normalize("Manage  musical staff."), ["manage", "musical", "staff"]);
    }

    #[test]
    fn keeps_programming_language_marks() {
        assert_eq!(normalize("C++ developer"), ["c++", "developer"]);
        assert_eq!(normalize("C# and .NET"), ["c#", "and", ".net"]);
        assert_eq!(normalize("node.js, F#."), ["node.js", "f#"]);
        assert_eq!(normalize("+ # ."), Vec::<String>::new());
    }

    #[test]
    fn nfkc_folds_compatibility_forms() {
        // fullwidth letters and the "fi" ligature
        assert_eq!(normalize("ＳＱＬ ﬁle"), ["sql", "file"]);
    }

    #[test]
    fn empty_input() {
        assert!(normalize("").is_empty());
        assert!(normalize("  ,;  ").is_empty());
    }
}
