//! Recovering the chosen option letter from a model response.
//!
//! Two stages. The tagged stage reads only the `<output>` block and looks
//! for an `"answer"` key; the last such key wins. If that fails, the
//! fallback stage scans the whole response for `answer is X`, `Answer: X`
//! (key optionally quoted) or a final line holding just the letter, again
//! taking the last hit.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::domain::AnswerLetter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMethod {
    Tagged,
    FallbackPattern,
    None,
}

impl ExtractionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractionMethod::Tagged => "tagged",
            ExtractionMethod::FallbackPattern => "fallback_pattern",
            ExtractionMethod::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedAnswer {
    pub letter: Option<AnswerLetter>,
    pub method: ExtractionMethod,
    pub thinking: Option<String>,
    pub output_block: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sections {
    pub thinking: Option<String>,
    pub output: Option<String>,
}

fn tag_block(content: &str, tag: &str) -> Option<String> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = content.find(&open)? + open.len();
    let len = content[start..].find(&close)?;
    Some(content[start..start + len].to_string())
}

/// Inner text of the first `<thinking>` and `<output>` pairs. Tags are flat
/// delimiters; an unclosed tag yields nothing.
pub fn extract_sections(content: &str) -> Sections {
    Sections {
        thinking: tag_block(content, "thinking"),
        output: tag_block(content, "output"),
    }
}

static TAGGED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"["']?(?i:answer)["']?\s*[:=]\s*[\s"'\[(*]*([ABC])(?:[^A-Za-z0-9_]|$)"#)
        .expect("valid regex")
});

static FALLBACK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i:answer\s+is|answer["']?\s*:)\s*[\s"'\[(*]*([ABC])(?:[^A-Za-z0-9_]|$)"#)
        .expect("valid regex")
});

static FINAL_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"^[\s"'\[(*]*([ABC])[\s"'\])*.]*$"#).expect("valid regex"));

fn last_letter(re: &Regex, text: &str) -> Option<(usize, AnswerLetter)> {
    re.captures_iter(text)
        .filter_map(|c| {
            let m = c.get(1)?;
            Some((
                m.start(),
                AnswerLetter::from_char(m.as_str().chars().next()?)?,
            ))
        })
        .last()
}

pub fn extract_answer(content: &str) -> ExtractedAnswer {
    let Sections { thinking, output } = extract_sections(content);

    if let Some((_, letter)) = output
        .as_deref()
        .and_then(|block| last_letter(&TAGGED, block))
    {
        return ExtractedAnswer {
            letter: Some(letter),
            method: ExtractionMethod::Tagged,
            thinking,
            output_block: output,
        };
    }

    let pattern_hit = last_letter(&FALLBACK, content);
    let final_line = content
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| last_letter(&FINAL_LINE, l))
        .map(|(_, letter)| (content.len(), letter));
    let fallback = match (pattern_hit, final_line) {
        (Some(a), Some(b)) => Some(if b.0 >= a.0 { b } else { a }),
        (a, b) => a.or(b),
    };

    ExtractedAnswer {
        letter: fallback.map(|(_, l)| l),
        method: if fallback.is_some() {
            ExtractionMethod::FallbackPattern
        } else {
            ExtractionMethod::None
        },
        thinking,
        output_block: output,
    }
}
