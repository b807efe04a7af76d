use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::AssistError;
use crate::annotation::{CodebookLookup, Project, TierKind, TierOrigin};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmSuggestion {
    pub tier_name: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub value: String,
}

/// An item that did not make it, with the offending JSON and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub item: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSuggestions {
    pub accepted: Vec<LlmSuggestion>,
    pub rejected: Vec<Rejection>,
}

/// The first complete JSON array in `text`, fenced or bare.
fn first_array(text: &str) -> Option<Vec<Value>> {
    text.match_indices('[').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Array(items))) => Some(items),
            _ => None,
        }
    })
}

fn text_field(obj: &Map<String, Value>, keys: &[&str]) -> Result<String, String> {
    match keys.iter().find_map(|k| obj.get(*k)) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
        Some(Value::String(_)) => Err(format!("empty field '{}'", keys[0])),
        Some(_) => Err(format!("field '{}' is not a string", keys[0])),
        None => Err(format!("missing field '{}'", keys[0])),
    }
}

/// Seconds (number or numeric string) to milliseconds.
fn time_field(obj: &Map<String, Value>, key: &str) -> Result<f64, String> {
    let secs = match obj.get(key) {
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => s.trim().parse::<f64>().ok(),
        None => return Err(format!("missing field '{key}'")),
        Some(_) => None,
    };
    match secs {
        Some(s) if s.is_finite() => Ok(s * 1000.0),
        _ => Err(format!("field '{key}' is not a number of seconds")),
    }
}

fn validate(item: &Value, observation_ms: u64) -> Result<LlmSuggestion, String> {
    let obj = item.as_object().ok_or("not an object")?;
    let tier_name = text_field(obj, &["tier", "tier_name"])?;
    let value = match obj.get("value") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err("field 'value' is not a string".into()),
        None => return Err("missing field 'value'".into()),
    };
    let start = time_field(obj, "start")?;
    let end = time_field(obj, "end")?;
    if end < start {
        return Err("inverted interval".into());
    }
    let clamp = |ms: f64| (ms.round().max(0.0) as u64).min(observation_ms);
    let (start_ms, end_ms) = (clamp(start), clamp(end));
    if start_ms >= end_ms {
        return Err(if end.round() <= start.round() {
            "empty interval".into()
        } else {
            "outside the recording".into()
        });
    }
    Ok(LlmSuggestion {
        tier_name: tier_name.trim().to_string(),
        start_ms,
        end_ms,
        value,
    })
}

/// Extracts and validates suggestions. Times are seconds; they are converted
/// to milliseconds and clamped to `[0, observation_ms]`.
pub fn parse_suggestions(response: &str, observation_ms: u64) -> Result<ParsedSuggestions, AssistError> {
    let items = first_array(response).ok_or(AssistError::NoJsonFound)?;
    let mut out = ParsedSuggestions::default();
    for item in items {
        match validate(&item, observation_ms) {
            Ok(s) => out.accepted.push(s),
            Err(reason) => out.rejected.push(Rejection {
                item: item.to_string(),
                reason,
            }),
        }
    }
    Ok(out)
}

/// The wire form [`parse_suggestions`] reads, times in seconds.
pub fn serialize_suggestions(suggestions: &[LlmSuggestion]) -> String {
    let items: Vec<Value> = suggestions
        .iter()
        .map(|s| {
            serde_json::json!({
                "tier": s.tier_name,
                "start": s.start_ms as f64 / 1000.0,
                "end": s.end_ms as f64 / 1000.0,
                "value": s.value,
            })
        })
        .collect();
    Value::Array(items).to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyReport {
    /// Names of the tiers created, in order.
    pub tiers: Vec<String>,
    pub applied: usize,
    pub rejected: Vec<Rejection>,
}

fn free_name(project: &Project, base: &str) -> String {
    if project.tier(base).is_none() {
        return base.to_string();
    }
    (2..)
        .map(|n| format!("{base}-{n}"))
        .find(|n| project.tier(n).is_none())
        .expect("unbounded")
}

/// Creates one LLM-origin free-text tier per suggested tier name (suffixed
/// `-2`, `-3`, ... when the name is taken) and inserts the suggestions in
/// start order; a suggestion overlapping an earlier one is rejected.
pub fn apply_suggestions(project: &mut Project, suggestions: &[LlmSuggestion]) -> ApplyReport {
    let mut report = ApplyReport::default();
    let mut groups: Vec<(&str, Vec<&LlmSuggestion>)> = Vec::new();
    for s in suggestions {
        match groups.iter_mut().find(|(n, _)| *n == s.tier_name) {
            Some((_, g)) => g.push(s),
            None => groups.push((&s.tier_name, vec![s])),
        }
    }
    let no_books: Vec<crate::annotation::Codebook> = Vec::new();
    let books: &dyn CodebookLookup = &no_books;
    for (base, mut group) in groups {
        let name = free_name(project, base);
        if let Err(e) = project.create_tier_with_origin(&name, TierKind::FreeText, None, TierOrigin::Llm, books) {
            for s in group {
                report.rejected.push(Rejection {
                    item: serialize_suggestions(std::slice::from_ref(s)),
                    reason: e.to_string(),
                });
            }
            continue;
        }
        group.sort_by_key(|s| (s.start_ms, s.end_ms));
        for s in group {
            match project.add_annotation(&name, s.start_ms, s.end_ms, &s.value, books) {
                Ok(_) => report.applied += 1,
                Err(e) => report.rejected.push(Rejection {
                    item: serialize_suggestions(std::slice::from_ref(s)),
                    reason: e.to_string(),
                }),
            }
        }
        report.tiers.push(name);
    }
    report
}
