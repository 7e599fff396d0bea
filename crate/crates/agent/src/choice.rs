use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// What a well-formed answer looks like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnswerSpace {
    /// Lettered options in presentation order.
    Options { options: Vec<(char, String)> },
    YesNo,
    Numeric,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Choice {
    Letter(char),
    Number(f64),
    Text(String),
}

impl Choice {
    /// Whether the choice belongs to `space`.
    pub fn fits(&self, space: &AnswerSpace) -> bool {
        match (self, space) {
            (Choice::Letter(c), AnswerSpace::Options { options }) => options.iter().any(|(l, _)| l == c),
            (Choice::Text(t), AnswerSpace::YesNo) => t == "yes" || t == "no",
            (Choice::Number(_), AnswerSpace::Numeric) => true,
            (_, AnswerSpace::Free) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Letter(c) => write!(f, "{c}"),
            Choice::Number(x) => write!(f, "{x}"),
            Choice::Text(t) => f.write_str(t),
        }
    }
}

static LETTER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([A-Z])\b").unwrap());
static ANSWER_IS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)answer\s*(?:is|:)\s*\(?([A-Za-z]|yes|no)\b").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d+(?:\.\d+)?").unwrap());
static SENTENCE_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?](?:\s+|$)").unwrap());
static YES_NO: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(yes|no)\b").unwrap());

/// First rule that fires: a standalone option letter, an "answer is X"
/// phrase, the longest option text quoted verbatim, and for numeric spaces
/// the first number of the last sentence. Anything else is free text.
pub fn parse_choice(text: &str, space: &AnswerSpace) -> Choice {
    let free = || Choice::Text(text.trim().to_string());
    match space {
        AnswerSpace::Options { options } => {
            let is_option = |c: char| options.iter().any(|(l, _)| *l == c);
            if let Some(c) = LETTER
                .captures_iter(text)
                .filter_map(|m| m[1].chars().next())
                .find(|c| is_option(*c))
            {
                return Choice::Letter(c);
            }
            if let Some(m) = ANSWER_IS.captures(text) {
                let c = m[1].to_ascii_uppercase();
                if let Some(c) = c.chars().next().filter(|c| c.is_ascii_alphabetic() && is_option(*c)) {
                    if m[1].len() == 1 {
                        return Choice::Letter(c);
                    }
                }
            }
            let lower = text.to_lowercase();
            options
                .iter()
                .filter(|(_, t)| !t.trim().is_empty() && lower.contains(&t.trim().to_lowercase()))
                .max_by_key(|(l, t)| (t.trim().len(), std::cmp::Reverse(*l)))
                .map_or_else(free, |(l, _)| Choice::Letter(*l))
        }
        AnswerSpace::YesNo => {
            if let Some(m) = ANSWER_IS.captures(text) {
                let w = m[1].to_lowercase();
                if w == "yes" || w == "no" {
                    return Choice::Text(w);
                }
            }
            YES_NO.captures(text).map_or_else(free, |m| Choice::Text(m[1].to_lowercase()))
        }
        AnswerSpace::Numeric => {
            let tail = SENTENCE_END.split(text.trim()).filter(|s| !s.trim().is_empty()).last().unwrap_or("");
            NUMBER
                .find(tail)
                .and_then(|m| m.as_str().parse::<f64>().ok())
                .map_or_else(free, Choice::Number)
        }
        AnswerSpace::Free => free(),
    }
}
