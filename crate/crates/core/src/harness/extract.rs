use crate::eval::LABELS;

/// Index of the option an answer picks, or `None` to abstain.
///
/// A standalone option letter wins over quoted option text; within each rule
/// the earliest match in the text wins.
pub fn extract_choice(answer: &str, choices: &[String]) -> Option<usize> {
    let n = choices.len().min(LABELS.len());
    if n == 0 {
        return None;
    }
    letter(answer, n).or_else(|| containment(answer, &choices[..n]))
}

fn letter(text: &str, n: usize) -> Option<usize> {
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_ascii_alphabetic() {
            continue;
        }
        let prev = if i > 0 { Some(chars[i - 1]) } else { None };
        let next = chars.get(i + 1).copied();
        if prev.is_some_and(|p| p.is_alphanumeric()) || next.is_some_and(|x| x.is_alphanumeric()) {
            continue;
        }
        let idx = (c.to_ascii_uppercase() as u8 - b'A') as usize;
        if idx >= n {
            continue;
        }
        let paren = prev == Some('(') && next == Some(')');
        let accepted = if c.is_ascii_uppercase() {
            // "A" and "I" also start ordinary sentences ("I think", "A road")
            let word_follows = next == Some(' ') && chars.get(i + 2).is_some_and(|x| x.is_lowercase());
            paren || !(matches!(c, 'A' | 'I') && word_follows)
        } else {
            paren || next == Some(')')
        };
        if accepted {
            return Some(idx);
        }
    }
    None
}

fn containment(text: &str, choices: &[String]) -> Option<usize> {
    let lower = text.to_lowercase();
    choices
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.trim().is_empty())
        .filter_map(|(i, c)| lower.find(&c.to_lowercase()).map(|pos| (pos, std::cmp::Reverse(c.len()), i)))
        .min()
        .map(|(_, _, i)| i)
}

/// Lowercase, drop punctuation and collapse whitespace, for free-form name matching.
pub fn normalize_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() { c.to_lowercase().next().unwrap_or(c) } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}
