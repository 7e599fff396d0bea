use serde::Deserialize;
use thiserror::Error;

/// Program text pulled from a model reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedProgram {
    pub code: String,
    /// Free-form text the model wrote before the code.
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("reply contains no fenced code block")]
    NoCodeBlock,
    #[error("reply contains an unterminated code block")]
    Unterminated,
}

#[derive(Deserialize)]
struct Structured {
    #[serde(default)]
    reasoning: String,
    code: String,
}

struct Block<'a> {
    tag: &'a str,
    body: &'a str,
    start: usize,
}

fn fenced_blocks(text: &str) -> Result<Vec<Block<'_>>, ExtractError> {
    let mut blocks = Vec::new();
    let mut rest = 0;
    while let Some(open) = text[rest..].find("```") {
        let open = rest + open;
        let after = open + 3;
        let line_end = text[after..].find('\n').map_or(text.len(), |i| after + i);
        let tag = text[after..line_end].trim();
        let body_start = (line_end + 1).min(text.len());
        let Some(close) = text[body_start..].find("```") else {
            return Err(ExtractError::Unterminated);
        };
        let close = body_start + close;
        blocks.push(Block { tag, body: &text[body_start..close], start: open });
        rest = close + 3;
    }
    Ok(blocks)
}

/// A `{reasoning, code}` JSON object, else the first python-tagged fenced
/// block, else the first untagged one.
pub fn extract_program(text: &str) -> Result<ExtractedProgram, ExtractError> {
    if let Ok(s) = serde_json::from_str::<Structured>(text.trim()) {
        if let Ok(inner) = extract_program(&s.code) {
            return Ok(ExtractedProgram { code: inner.code, reasoning: s.reasoning });
        }
        return Ok(ExtractedProgram { code: dedent(&s.code), reasoning: s.reasoning });
    }
    let blocks = fenced_blocks(text)?;
    let is_python = |b: &&Block| b.tag.eq_ignore_ascii_case("python") || b.tag.eq_ignore_ascii_case("py");
    let block = blocks.iter().find(is_python).or_else(|| blocks.iter().find(|b| b.tag.is_empty()));
    let block = block.ok_or(ExtractError::NoCodeBlock)?;
    Ok(ExtractedProgram { code: dedent(block.body), reasoning: text[..block.start].trim().to_string() })
}

/// Strips the indentation shared by every non-blank line.
pub fn dedent(code: &str) -> String {
    let common = code
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start_matches([' ', '\t']).len())
        .min()
        .unwrap_or(0);
    let mut out: String = code
        .lines()
        .map(|l| if l.trim().is_empty() { "" } else { &l[common..] })
        .collect::<Vec<_>>()
        .join("\n");
    if code.ends_with('\n') {
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn python_block_with_reasoning() {
        let got = extract_program("reasoning...\n```python\ndef program(s): return 1\n```").unwrap();
        assert_eq!(got.code, "def program(s): return 1\n");
        assert_eq!(got.reasoning, "reasoning...");
    }

    #[test]
    fn first_of_two_blocks() {
        let got = extract_program("```python\nfirst\n```\nthen\n```python\nsecond\n```").unwrap();
        assert_eq!(got.code, "first\n");
    }

    #[test]
    fn tagged_beats_untagged() {
        let got = extract_program("```\nuntagged\n```\n```python\ntagged\n```").unwrap();
        assert_eq!(got.code, "tagged\n");
        let got = extract_program("```\nonly\n```").unwrap();
        assert_eq!(got.code, "only\n");
    }

    #[test]
    fn missing_or_broken_blocks() {
        assert_eq!(extract_program("just prose"), Err(ExtractError::NoCodeBlock));
        assert_eq!(extract_program("```json\n{}\n```"), Err(ExtractError::NoCodeBlock));
        assert_eq!(extract_program("```python\ndef program(s):"), Err(ExtractError::Unterminated));
    }

    #[test]
    fn indented_code_is_dedented() {
        let got = extract_program("```python\n    def program(s):\n\n        return 1\n```").unwrap();
        assert_eq!(got.code, "def program(s):\n\n    return 1\n");
    }

    #[test]
    fn structured_reply() {
        let got = extract_program(r#"{"reasoning": "look right", "code": "def program(s):\n    return 1\n"}"#).unwrap();
        assert_eq!(got.reasoning, "look right");
        assert_eq!(got.code, "def program(s):\n    return 1\n");
        let fenced = extract_program(r#"{"reasoning": "r", "code": "```python\nx\n```"}"#).unwrap();
        assert_eq!(fenced.code, "x\n");
    }
}
