//! Minimal structural JSON-schema checker for the output formats.
//!
//! Supports the subset the checked-in schemas use: `type`, `properties`,
//! `required`, `items`, and `enum`.

use serde_json::Value;

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "integer" => value.as_i64().is_some() || value.as_u64().is_some(),
        "number" => value.is_number(),
        "null" => value.is_null(),
        _ => false,
    }
}

/// Validates `value` against `schema`, returning the path of the first
/// mismatch.
pub fn validate(value: &Value, schema: &Value) -> Result<(), String> {
    validate_at(value, schema, "$")
}

fn validate_at(value: &Value, schema: &Value, path: &str) -> Result<(), String> {
    if let Some(ty) = schema.get("type").and_then(Value::as_str) {
        if !type_matches(value, ty) {
            return Err(format!("{path}: expected {ty}"));
        }
    }
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            return Err(format!("{path}: value not in enum"));
        }
    }
    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        for key in required.iter().filter_map(Value::as_str) {
            if value.get(key).is_none() {
                return Err(format!("{path}: missing required key {key:?}"));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        if let Some(obj) = value.as_object() {
            for (key, sub) in props {
                if let Some(v) = obj.get(key) {
                    validate_at(v, sub, &format!("{path}.{key}"))?;
                }
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(arr) = value.as_array() {
            for (idx, v) in arr.iter().enumerate() {
                validate_at(v, items, &format!("{path}[{idx}]"))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn accepts_matching_document() {
        let schema = json!({
            "type": "object",
            "required": ["n", "rows"],
            "properties": {
                "n": {"type": "integer"},
                "rows": {"type": "array", "items": {"type": "number"}}
            }
        });
        assert!(validate(&json!({"n": 3, "rows": [1.0, 2.5]}), &schema).is_ok());
    }

    #[test]
    fn reports_mismatch_with_path() {
        let schema = json!({
            "type": "object",
            "required": ["rows"],
            "properties": {"rows": {"type": "array", "items": {"type": "number"}}}
        });
        let err = validate(&json!({"rows": [1.0, "x"]}), &schema).unwrap_err();
        assert!(err.contains("rows[1]"), "{err}");
        let err = validate(&json!({}), &schema).unwrap_err();
        assert!(err.contains("rows"), "{err}");
    }
}
