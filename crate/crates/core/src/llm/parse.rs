use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::prompt::LABELS;
use super::LlmError;

/// Interpretation of one multi-choice response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "index")]
pub enum Choice {
    Option(usize),
    NoneAnswer,
    ParseFailure,
}

fn regex(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static pattern"))
}

fn answer_prefix() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    regex(
        &R,
        r"(?i)^(?:the\s+)?(?:correct\s+|final\s+)?(?:answer|option|choice)(?:\s+is)?\s*[:：]?\s*|^答案\s*(?:是)?\s*[:：]?\s*",
    )
}

fn none_keywords() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    regex(
        &R,
        r"(?i)\b(?:none|neither|no\s+equivalent|not\s+equivalent|no\s+match(?:ing)?|no\s+such|no\s+correct)\b|都不是|没有|无",
    )
}

fn list_marker() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    regex(&R, r"^(?:[-*•]\s+|\d+[.)]\s+)")
}

fn name_label() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    regex(
        &R,
        r"(?i)^(?:answer|output|result|translation|name|virtual(?:\s+equivalent)?\s+entity|equivalent\s+entity)\s*[:：]\s*|^(?:答案|输出|结果|翻译)\s*[:：]?\s*",
    )
}

const QUOTES: [(char, char); 9] = [
    ('"', '"'),
    ('\'', '\''),
    ('“', '”'),
    ('‘', '’'),
    ('「', '」'),
    ('『', '』'),
    ('«', '»'),
    ('`', '`'),
    ('*', '*'),
];

fn strip_quotes(mut s: &str) -> &str {
    loop {
        s = s.trim();
        let mut chars = s.chars();
        let (Some(first), Some(last)) = (chars.next(), chars.next_back()) else {
            return s;
        };
        if QUOTES.iter().any(|&(o, c)| o == first && c == last) {
            s = &s[first.len_utf8()..s.len() - last.len_utf8()];
        } else {
            return s;
        }
    }
}

fn normalize(s: &str) -> String {
    strip_quotes(s).trim_end_matches(['.', '。']).trim().to_lowercase()
}

/// A leading `A`, `(B)`, `C.`, `D)` … that names one of the options.
fn leading_label(body: &str, options: &[String]) -> Option<usize> {
    let body = body.strip_prefix(['(', '[']).unwrap_or(body);
    let mut chars = body.chars();
    let c = chars.next()?;
    let idx = LABELS.iter().position(|&l| l == c)?;
    if idx >= options.len() {
        return None;
    }
    let rest = chars.as_str();
    match rest.chars().next() {
        None => Some(idx),
        Some(')' | ']' | '.' | ':' | ',' | '、' | '：' | '。') => Some(idx),
        Some(w) if w.is_whitespace() => {
            let tail = rest.trim_start().to_lowercase();
            let name = options[idx].trim().to_lowercase();
            (tail.is_empty() || tail.starts_with(&name)).then_some(idx)
        }
        Some(_) => None,
    }
}

/// Resolves a response against the option names, in order: leading label,
/// exact name, unique contained name, none keywords.
pub fn parse_choice(response: &str, options: &[String]) -> Choice {
    let text = strip_quotes(response.trim());
    let body = strip_quotes(answer_prefix().replace(text, "").as_ref()).to_string();

    if let Some(i) = leading_label(&body, options) {
        return Choice::Option(i);
    }

    let wanted = normalize(&body);
    if let Some(i) = options.iter().position(|o| normalize(o) == wanted && !wanted.is_empty()) {
        return Choice::Option(i);
    }

    let lower = text.to_lowercase();
    let hits: Vec<usize> = options
        .iter()
        .enumerate()
        .filter(|(_, o)| {
            let o = o.trim().to_lowercase();
            !o.is_empty() && lower.contains(&o)
        })
        .map(|(i, _)| i)
        .collect();
    match hits.as_slice() {
        [i] => return Choice::Option(*i),
        [_, _, ..] => {
            // One hit whose name contains every other hit's name is still unique.
            let longest = *hits
                .iter()
                .max_by_key(|&&i| options[i].trim().chars().count())
                .expect("non-empty");
            let outer = options[longest].trim().to_lowercase();
            let nested = hits
                .iter()
                .filter(|&&i| i != longest)
                .all(|&i| outer.contains(&options[i].trim().to_lowercase()) && options[i].trim().len() < outer.len());
            if nested {
                return Choice::Option(longest);
            }
        }
        [] => {}
    }

    if none_keywords().is_match(text) {
        return Choice::NoneAnswer;
    }
    Choice::ParseFailure
}

/// Extracts the generated entity name: the first line that is non-empty after
/// stripping list markers, label prefixes and surrounding quotes.
pub fn parse_virtual_entity(response: &str) -> Result<String, LlmError> {
    for line in response.lines() {
        let mut s = line.trim();
        s = list_marker().find(s).map_or(s, |m| &s[m.end()..]);
        s = strip_quotes(s);
        s = name_label().find(s).map_or(s, |m| &s[m.end()..]);
        s = strip_quotes(s);
        if !s.is_empty() {
            return Ok(s.to_string());
        }
    }
    Err(LlmError::Extraction(format!("no entity name in response {response:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn labels() {
        let o = opts(&["Paris", "London", "Berlin", "Rome"]);
        assert_eq!(parse_choice("B", &o), Choice::Option(1));
        assert_eq!(parse_choice("  (C)  ", &o), Choice::Option(2));
        assert_eq!(parse_choice("Answer: D. Rome", &o), Choice::Option(3));
        assert_eq!(parse_choice("The answer is A", &o), Choice::Option(0));
        assert_eq!(parse_choice("Option B", &o), Choice::Option(1));
        assert_eq!(parse_choice("答案：C", &o), Choice::Option(2));
        assert_eq!(parse_choice("B London", &o), Choice::Option(1));
    }

    #[test]
    fn label_beyond_option_count_is_not_a_label() {
        let o = opts(&["Paris", "London"]);
        assert_eq!(parse_choice("D", &o), Choice::ParseFailure);
    }

    #[test]
    fn words_starting_with_a_label_letter() {
        let o = opts(&["Paris", "London"]);
        assert_eq!(parse_choice("A lot depends on context.", &o), Choice::ParseFailure);
        assert_eq!(parse_choice("Berlin", &o), Choice::ParseFailure);
    }

    #[test]
    fn names() {
        let o = opts(&["Paris", "London", "Jill Biden", "Rome"]);
        assert_eq!(parse_choice("jill biden.", &o), Choice::Option(2));
        assert_eq!(parse_choice("\"Jill Biden\"", &o), Choice::Option(2));
        assert_eq!(parse_choice("I think it is London, the capital.", &o), Choice::Option(1));
    }

    #[test]
    fn nested_names_resolve_to_the_longer() {
        let o = opts(&["Paris", "Paris Saint-Germain"]);
        assert_eq!(parse_choice("It is Paris Saint-Germain", &o), Choice::Option(1));
        let o = opts(&["Paris", "London"]);
        assert_eq!(parse_choice("Paris or London", &o), Choice::ParseFailure);
    }

    #[test]
    fn none_answers() {
        let o = opts(&["Paris", "London"]);
        assert_eq!(parse_choice("There is no equivalent entity.", &o), Choice::NoneAnswer);
        assert_eq!(parse_choice("None", &o), Choice::NoneAnswer);
        assert_eq!(parse_choice("Answer: none of them", &o), Choice::NoneAnswer);
        assert_eq!(parse_choice("都不是", &o), Choice::NoneAnswer);
        assert_eq!(parse_choice("I'm not sure what you mean.", &o), Choice::ParseFailure);
        assert_eq!(parse_choice("", &o), Choice::ParseFailure);
    }

    #[test]
    fn virtual_entity() {
        assert_eq!(parse_virtual_entity("乔·拜登").unwrap(), "乔·拜登");
        assert_eq!(parse_virtual_entity("Answer: \"乔·拜登\"").unwrap(), "乔·拜登");
        assert_eq!(parse_virtual_entity("\n\n  Output: 巴黎\nblah").unwrap(), "巴黎");
        assert_eq!(parse_virtual_entity("- “Jóe Bídén”").unwrap(), "Jóe Bídén");
        assert_eq!(parse_virtual_entity("答案：\n乔·拜登").unwrap(), "乔·拜登");
        assert!(parse_virtual_entity("").is_err());
        assert!(parse_virtual_entity("   \n\t").is_err());
    }
}
