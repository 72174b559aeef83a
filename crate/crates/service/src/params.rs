//! JSON operation requests and their conversion to journal actions.

use imgjournal_core::journal::{FieldKind, FieldValue};
use imgjournal_core::{Action, ContentHash, Fixed6, OpKind, Session};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::error::ApiError;

/// Body of `POST /sessions/{id}/ops`, e.g.
/// `{"op": "CROP", "params": {"x": 0, "y": 0, "w": 10, "h": 10}}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpRequest {
    pub op: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl OpRequest {
    /// Decimal parameters may be JSON numbers or canonical decimal strings;
    /// numbers are rounded to 6 fractional digits before execution so the
    /// value applied is the value journaled. For MELD, `file` defaults to the
    /// name the insert was uploaded under.
    pub fn into_action(self, session: &Session) -> Result<Action, ApiError> {
        let kind = OpKind::from_name(&self.op.to_ascii_uppercase())
            .ok_or_else(|| ApiError::schema(format!("unknown operation `{}`", self.op)))?;
        if !kind.is_edit() {
            return Err(ApiError::schema(format!(
                "{kind} is not an image operation; use the dedicated endpoint"
            )));
        }
        let mut params = self.params;
        if kind == OpKind::Meld && !params.contains_key("file") {
            if let Some(Value::String(hex)) = params.get("ihash") {
                if let Some(name) = hex.parse().ok().and_then(|h: ContentHash| session.insert_name(&h)) {
                    params.insert("file".into(), Value::String(name.to_string()));
                }
            }
        }
        let mut fields = Vec::with_capacity(params.len());
        for (key, value) in params {
            let Some(field_kind) = kind.field_kind(&key) else {
                return Err(ApiError::schema(format!("{kind}: unexpected key `{key}`")));
            };
            let converted = convert(field_kind, &value).ok_or_else(|| {
                ApiError::schema(format!("{kind}: key `{key}` expects {}", field_kind.describe()))
            })?;
            fields.push((key, converted));
        }
        Action::from_fields(kind, fields).map_err(|p| ApiError::schema(format!("{kind}: {p}")))
    }
}

fn convert(kind: FieldKind, value: &Value) -> Option<FieldValue> {
    match (kind, value) {
        (FieldKind::Int, Value::Number(n)) => n.as_i64().map(FieldValue::Int),
        (FieldKind::Decimal, Value::Number(n)) => n.as_f64().and_then(Fixed6::from_f64).map(FieldValue::Decimal),
        (FieldKind::Decimal, Value::String(s)) => s.parse().ok().map(FieldValue::Decimal),
        (FieldKind::Text, Value::String(s)) => Some(FieldValue::Text(s.clone())),
        (FieldKind::Hash, Value::String(s)) => s.parse().ok().map(FieldValue::Hash),
        _ => None,
    }
}
