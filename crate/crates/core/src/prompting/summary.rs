use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Dataset, ParseError, PromptError, SchemaVariant, Stage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarySchema {
    pub variant: SchemaVariant,
    pub attributes: Vec<String>,
    /// `None` is unlimited.
    pub max_values_per_attribute: Option<usize>,
}

const RADQA_FULL: [&str; 5] =
    ["symptoms", "medical_conditions", "areas_examined", "patient_medical_history", "diagnostic_techniques"];
const RADQA_INCOMPLETE: [&str; 3] = ["symptoms", "medical_conditions", "patient_medical_history"];
const MIMIC_FULL: [&str; 5] = ["patient_history", "diagnosis", "symptoms", "medical_conditions", "exam_results"];

impl SummarySchema {
    pub fn for_dataset(dataset: Dataset, variant: SchemaVariant) -> Result<Self, PromptError> {
        let (attrs, max): (&[&str], Option<usize>) = match (dataset, variant) {
            (_, SchemaVariant::None) => (&[], None),
            (Dataset::Radqa, SchemaVariant::Full) => (&RADQA_FULL, None),
            (Dataset::Radqa, SchemaVariant::Incomplete) => (&RADQA_INCOMPLETE, None),
            (Dataset::Mimicqa, SchemaVariant::Full) => (&MIMIC_FULL, Some(5)),
            (Dataset::Mimicqa, SchemaVariant::Incomplete) => {
                return Err(PromptError::NoTemplate {
                    dataset,
                    stage: Stage::Summarization,
                    detail: " with the incomplete schema".into(),
                })
            }
        };
        Ok(Self {
            variant,
            attributes: attrs.iter().map(|s| s.to_string()).collect(),
            max_values_per_attribute: max,
        })
    }
}

/// Schema-constrained summary: attribute → values, in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub doc_id: String,
    pub values: IndexMap<String, Vec<String>>,
    pub raw: String,
}

/// Output of the summarization stage: structured for `full`/`incomplete`
/// schemas, a free paragraph for the `none` variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    Structured(SummaryRecord),
    Paragraph { doc_id: String, text: String },
}

impl Summary {
    pub fn doc_id(&self) -> &str {
        match self {
            Summary::Structured(r) => &r.doc_id,
            Summary::Paragraph { doc_id, .. } => doc_id,
        }
    }

    /// Text placed into `{{input_summary}}`.
    pub fn as_context(&self) -> String {
        match self {
            Summary::Structured(r) => render_summary_as_context(r),
            Summary::Paragraph { text, .. } => text.clone(),
        }
    }
}

/// Byte range of the balanced `{ ... }` starting at `open`, string-aware.
fn balanced_object_end(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in text[open..].char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Drop commas directly before `}` or `]` (outside strings).
fn strip_trailing_commas(json: &str) -> String {
    let chars: Vec<char> = json.chars().collect();
    let mut out = String::with_capacity(json.len());
    let mut in_str = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
        } else if c == '"' {
            in_str = true;
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// First JSON object embedded in `text` (prose and code fences allowed around it).
fn first_json_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    for (open, _) in text.match_indices('{') {
        let Some(end) = balanced_object_end(text, open) else { continue };
        let candidate = &text[open..end];
        let parsed = serde_json::from_str::<Value>(candidate)
            .or_else(|_| serde_json::from_str::<Value>(&strip_trailing_commas(candidate)));
        if let Ok(Value::Object(map)) = parsed {
            return Some(map);
        }
    }
    None
}

fn describe(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "text",
        Value::Array(_) => "a list containing non-text items",
        Value::Object(_) => "an object",
    }
}

/// Parse a schema'd summary. Returns the record and any warnings (missing or
/// extra keys, blank values, values beyond the per-attribute cap).
pub fn parse_summary(
    doc_id: &str,
    text: &str,
    schema: &SummarySchema,
) -> Result<(SummaryRecord, Vec<String>), ParseError> {
    if schema.variant == SchemaVariant::None {
        return Err(ParseError::NoSchema);
    }
    let mut object = first_json_object(text).ok_or(ParseError::NoJsonObject)?;
    let mut warnings = Vec::new();
    let mut values = IndexMap::with_capacity(schema.attributes.len());
    for attr in &schema.attributes {
        let list = match object.remove(attr) {
            None => {
                warnings.push(format!("summary missing `{attr}`; using []"));
                Vec::new()
            }
            Some(Value::String(s)) => vec![s],
            Some(Value::Array(items)) => {
                let mut list = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::String(s) => list.push(s),
                        other => {
                            return Err(ParseError::BadValue { key: attr.clone(), found: describe(&other).into() })
                        }
                    }
                }
                list
            }
            Some(other) => return Err(ParseError::BadValue { key: attr.clone(), found: describe(&other).into() }),
        };
        let before = list.len();
        let mut list: Vec<String> = list.into_iter().filter(|s| !s.trim().is_empty()).collect();
        if list.len() != before {
            warnings.push(format!("summary `{attr}`: dropped {} blank value(s)", before - list.len()));
        }
        if let Some(max) = schema.max_values_per_attribute {
            if list.len() > max {
                warnings.push(format!("summary `{attr}`: kept first {max} of {} values", list.len()));
                list.truncate(max);
            }
        }
        values.insert(attr.clone(), list);
    }
    for extra in object.keys() {
        warnings.push(format!("summary has unexpected key `{extra}`; dropped"));
    }
    Ok((SummaryRecord { doc_id: doc_id.to_string(), values, raw: text.to_string() }, warnings))
}

/// Dispatch on the schema variant: JSON parsing, or the trimmed paragraph.
pub fn parse_summary_output(
    doc_id: &str,
    text: &str,
    schema: &SummarySchema,
) -> Result<(Summary, Vec<String>), ParseError> {
    if schema.variant == SchemaVariant::None {
        let text = text.trim();
        if text.is_empty() {
            return Err(ParseError::EmptySummary);
        }
        return Ok((Summary::Paragraph { doc_id: doc_id.to_string(), text: text.to_string() }, Vec::new()));
    }
    parse_summary(doc_id, text, schema).map(|(r, w)| (Summary::Structured(r), w))
}

/// Canonical JSON (schema order, 2-space indent) used as `<patient_data>`.
pub fn render_summary_as_context(record: &SummaryRecord) -> String {
    serde_json::to_string_pretty(&record.values).expect("string map serializes")
}
