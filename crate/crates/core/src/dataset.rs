//! JSONL dataset adapter.
//!
//! Accepts the common spellings of multiple-choice records and converts
//! them to [`McqItem`]s. Options supplied separately are folded into the
//! question as `A. …` lines; records whose question already embeds the
//! options (a bare letter list such as `["A","B","C"]`, or no choices at
//! all) are passed through unchanged.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use crate::domain::{AnswerLetter, DomainCode};
use crate::prompting::McqItem;

const QUESTION_KEYS: [&str; 3] = ["question", "query", "text"];
const ID_KEYS: [&str; 3] = ["id", "qid", "question_id"];
const CHOICE_KEYS: [&str; 2] = ["choices", "options"];
const ANSWER_KEYS: [&str; 3] = ["answer", "gold", "label"];

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read dataset {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: invalid JSON: {reason}")]
    Json { line: usize, reason: String },
    #[error("line {line}: missing or invalid field `{field}`")]
    Schema { line: usize, field: String },
    #[error("line {line}: expected 3 options, found {found}")]
    OptionCount { line: usize, found: usize },
    #[error("line {line}: answer {answer:?} matches no option")]
    AnswerNotInOptions { line: usize, answer: String },
    #[error("line {line}: duplicate item id {id:?}")]
    DuplicateId { line: usize, id: String },
}

pub fn ingest_dataset(path: &Path) -> Result<Vec<McqItem>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

/// Parses JSONL text; `line` numbers in errors are 1-based.
pub fn parse_dataset(text: &str) -> Result<Vec<McqItem>, DatasetError> {
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).map_err(|e| DatasetError::Json {
            line,
            reason: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(schema(line, "<record>"));
        };
        let item = parse_record(&obj, line)?;
        if !seen.insert(item.id.clone()) {
            return Err(DatasetError::DuplicateId { line, id: item.id });
        }
        items.push(item);
    }
    Ok(items)
}

fn schema(line: usize, field: &str) -> DatasetError {
    DatasetError::Schema {
        line,
        field: field.to_string(),
    }
}

fn first<'a>(
    obj: &'a Map<String, Value>,
    keys: &[&'static str],
) -> Option<(&'static str, &'a Value)> {
    keys.iter()
        .find_map(|&k| obj.get(k).filter(|v| !v.is_null()).map(|v| (k, v)))
}

fn parse_record(obj: &Map<String, Value>, line: usize) -> Result<McqItem, DatasetError> {
    let id = match first(obj, &ID_KEYS) {
        Some((_, Value::String(s))) if !s.trim().is_empty() => s.trim().to_string(),
        Some((_, Value::Number(n))) => n.to_string(),
        Some((k, _)) => return Err(schema(line, k)),
        None => format!("line-{line}"),
    };

    let question = match first(obj, &QUESTION_KEYS) {
        Some((_, Value::String(s))) if !s.trim().is_empty() => s.trim_end().to_string(),
        Some((k, _)) => return Err(schema(line, k)),
        None => return Err(schema(line, "question")),
    };

    let options = parse_options(obj, line)?;

    let (answer_key, answer) = first(obj, &ANSWER_KEYS).ok_or_else(|| schema(line, "answer"))?;
    let gold = resolve_answer(answer, options.as_deref(), line, answer_key)?;

    let domain = match obj.get("domain") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(
            s.trim()
                .parse::<DomainCode>()
                .map_err(|_| schema(line, "domain"))?,
        ),
        Some(_) => return Err(schema(line, "domain")),
    };

    let question = match &options {
        Some(opts) => {
            let mut q = question;
            for (letter, text) in AnswerLetter::ALL.iter().zip(opts) {
                q.push_str(&format!("\n{}. {}", letter.as_char(), text));
            }
            q
        }
        None => question,
    };

    Ok(McqItem {
        id,
        question,
        gold,
        domain,
    })
}

/// Separately supplied option texts, or `None` when the question is
/// expected to carry them already.
fn parse_options(
    obj: &Map<String, Value>,
    line: usize,
) -> Result<Option<Vec<String>>, DatasetError> {
    if let Some((key, v)) = first(obj, &CHOICE_KEYS) {
        let opts = match v {
            Value::Array(arr) => arr
                .iter()
                .map(|x| {
                    x.as_str()
                        .map(|s| s.trim().to_string())
                        .ok_or_else(|| schema(line, key))
                })
                .collect::<Result<Vec<_>, _>>()?,
            Value::Object(m) => letter_keyed(m, line)?.ok_or_else(|| schema(line, key))?,
            _ => return Err(schema(line, key)),
        };
        if opts.len() != 3 {
            return Err(DatasetError::OptionCount {
                line,
                found: opts.len(),
            });
        }
        let bare_letters = opts
            .iter()
            .zip(AnswerLetter::ALL)
            .all(|(o, l)| o.len() == 1 && o.starts_with(l.as_char()));
        return Ok((!bare_letters).then_some(opts));
    }
    letter_keyed(obj, line)
}

fn letter_keyed(m: &Map<String, Value>, line: usize) -> Result<Option<Vec<String>>, DatasetError> {
    let present: Vec<_> = AnswerLetter::ALL
        .iter()
        .map(|l| {
            m.get(&l.as_char().to_string())
                .or_else(|| m.get(&l.as_char().to_ascii_lowercase().to_string()))
        })
        .collect();
    if present.iter().all(Option::is_none) {
        return Ok(None);
    }
    present
        .into_iter()
        .zip(AnswerLetter::ALL)
        .map(|(v, l)| match v {
            Some(Value::String(s)) => Ok(s.trim().to_string()),
            _ => Err(schema(line, &l.as_char().to_string())),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn parse_letter(s: &str) -> Option<AnswerLetter> {
    let t = s
        .trim()
        .trim_matches(|c: char| c == '(' || c == ')' || c == '.' || c == ':' || c.is_whitespace());
    let mut chars = t.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => AnswerLetter::from_char(c.to_ascii_uppercase()),
        _ => None,
    }
}

fn resolve_answer(
    v: &Value,
    options: Option<&[String]>,
    line: usize,
    key: &str,
) -> Result<AnswerLetter, DatasetError> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .and_then(|i| AnswerLetter::from_index(i as usize))
            .ok_or_else(|| DatasetError::AnswerNotInOptions {
                line,
                answer: n.to_string(),
            }),
        Value::String(s) => {
            if let Some(l) = parse_letter(s) {
                return Ok(l);
            }
            options
                .and_then(|opts| opts.iter().position(|o| o == s.trim()))
                .and_then(AnswerLetter::from_index)
                .ok_or_else(|| DatasetError::AnswerNotInOptions {
                    line,
                    answer: s.clone(),
                })
        }
        _ => Err(schema(line, key)),
    }
}
