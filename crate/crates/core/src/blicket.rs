//! Blicket-machine rules: a classification of every object as triggering the
//! light (`on`), not triggering it (`off`) or `undetermined`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::Label;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlicketError {
    #[error("no balanced `{{...}}` object found in rule text")]
    NoObject,
    #[error("rule object is not valid JSON: {0}")]
    Json(String),
    #[error("object `{object}` has label `{label}`, expected on/off/undetermined")]
    Label { object: String, label: String },
    #[error("object `{0}` is labeled twice with different labels")]
    Conflict(String),
}

/// Object-to-label map parsed from a hypothesis.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlicketRule {
    labels: BTreeMap<String, Label>,
}

pub(crate) fn normalize_object(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

impl BlicketRule {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = (S, Label)>,
        S: AsRef<str>,
    {
        BlicketRule { labels: labels.into_iter().map(|(k, v)| (normalize_object(k.as_ref()), v)).collect() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label_of(&self, object: &str) -> Option<Label> {
        self.labels.get(&normalize_object(object)).copied()
    }

    pub fn labels(&self) -> &BTreeMap<String, Label> {
        &self.labels
    }

    /// The predicted set of Blickets.
    pub fn blickets(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().filter(|(_, &l)| l == Label::On).map(|(k, _)| k.as_str())
    }

    /// Predict the light for the presented objects.
    ///
    /// Any `on` object lights the machine. Otherwise an `undetermined` or
    /// unknown object leaves the state undetermined, and only a panel made
    /// entirely of `off` objects yields `off`.
    pub fn apply<S: AsRef<str>>(&self, objects: &[S]) -> Label {
        let mut undetermined = false;
        for object in objects {
            match self.label_of(object.as_ref()) {
                Some(Label::On) => return Label::On,
                Some(Label::Off) => {}
                Some(Label::Undetermined) | None => undetermined = true,
            }
        }
        if undetermined {
            Label::Undetermined
        } else {
            Label::Off
        }
    }

    /// Render in the prompt rule format: `{"object": "label", ...}`.
    pub fn to_rule_text(&self) -> String {
        let map: serde_json::Map<String, serde_json::Value> =
            self.labels.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.as_str().into()))).collect();
        serde_json::Value::Object(map).to_string()
    }
}

/// Byte range of the first balanced `{...}` in `text`, skipping braces inside
/// JSON string literals.
pub fn first_balanced_object(text: &str) -> Option<(usize, usize)> {
    let bytes = text.as_bytes();
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((start, i + 1));
                }
            }
            _ => {}
        }
    }
    None
}

/// Parse the first JSON object in `payload` as a Blicket rule.
pub fn parse_blicket_rule(payload: &str) -> Result<BlicketRule, BlicketError> {
    let (start, end) = first_balanced_object(payload).ok_or(BlicketError::NoObject)?;
    let raw: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&payload[start..end]).map_err(|e| BlicketError::Json(e.to_string()))?;
    let mut labels = BTreeMap::new();
    for (object, value) in raw {
        let label_text = match &value {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let label: Label = label_text
            .parse()
            .map_err(|_| BlicketError::Label { object: object.clone(), label: label_text.clone() })?;
        let key = normalize_object(&object);
        if let Some(prev) = labels.insert(key.clone(), label) {
            if prev != label {
                return Err(BlicketError::Conflict(key));
            }
        }
    }
    Ok(BlicketRule { labels })
}

/// Apply a parsed rule to a set of objects.
pub fn apply_blicket<S: AsRef<str>>(rule: &BlicketRule, objects: &[S]) -> Label {
    rule.apply(objects)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rule_format() {
        let rule = parse_blicket_rule(r#"{"blue rubber sphere": "on", "red metal cube": "off"}"#).unwrap();
        assert_eq!(rule.len(), 2);
        assert_eq!(rule.label_of("Blue Rubber  Sphere"), Some(Label::On));
    }

    #[test]
    fn empty_rule_is_vacuous() {
        let rule = parse_blicket_rule("{}").unwrap();
        assert!(rule.is_empty());
        assert_eq!(rule.apply(&["anything"]), Label::Undetermined);
    }

    #[test]
    fn rejects_unknown_label() {
        let err = parse_blicket_rule(r#"Rule: {"a": "maybe"}"#).unwrap_err();
        assert!(matches!(err, BlicketError::Label { .. }));
    }

    #[test]
    fn tolerates_prose_and_braces_in_strings() {
        let text = "Here is my answer.\nRule: {\"odd {name}\": \"off\", \"x\": \"ON\"} and more {text}";
        let rule = parse_blicket_rule(text).unwrap();
        assert_eq!(rule.label_of("odd {name}"), Some(Label::Off));
        assert_eq!(rule.label_of("x"), Some(Label::On));
        assert_eq!(parse_blicket_rule("no object here"), Err(BlicketError::NoObject));
        assert_eq!(parse_blicket_rule("{\"a\": \"on\""), Err(BlicketError::NoObject));
    }

    #[test]
    fn conflicting_duplicates_rejected() {
        let err = parse_blicket_rule(r#"{"red cube": "on", "Red  Cube": "off"}"#).unwrap_err();
        assert_eq!(err, BlicketError::Conflict("red cube".into()));
    }

    #[test]
    fn precedence_examples() {
        let rule = BlicketRule::from_labels([("blue rubber sphere", Label::On), ("red metal cube", Label::Off)]);
        assert_eq!(rule.apply(&["blue rubber sphere"]), Label::On);
        let rule = BlicketRule::from_labels([("red metal cube", Label::Off)]);
        assert_eq!(rule.apply(&["red metal cube"]), Label::Off);
        let rule =
            BlicketRule::from_labels([("red metal cube", Label::Off), ("green metal cube", Label::Undetermined)]);
        assert_eq!(rule.apply(&["red metal cube", "green metal cube"]), Label::Undetermined);
    }

    #[test]
    fn rule_text_round_trips() {
        let rule = BlicketRule::from_labels([("a b", Label::On), ("c", Label::Undetermined)]);
        assert_eq!(parse_blicket_rule(&rule.to_rule_text()).unwrap(), rule);
    }
}
