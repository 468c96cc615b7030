//! Canonical JSON encoding.
//!
//! Rules:
//! - object keys sorted by Unicode code point (byte order of UTF-8)
//! - no whitespace between tokens
//! - integral numbers below 2^63 in magnitude are written without a
//!   fraction or exponent; other numbers use the shortest round-trip form
//! - non-finite numbers are rejected
//! - strings use JSON escaping with non-ASCII left as raw UTF-8

use serde_json::{Number, Value};

use super::{BeadError, Draft};

/// 2^63 as f64: integral floats below this magnitude fit in i64 exactly.
const I64_BOUND: f64 = 9_223_372_036_854_775_808.0;

/// Canonical bytes of a draft. `id` and `signature` are never part of a
/// draft, so they are excluded by construction.
pub fn canonicalize(draft: &Draft) -> Result<Vec<u8>, BeadError> {
    let report = draft.validate();
    if !report.is_ok() {
        return Err(BeadError::InvalidDraft(report));
    }
    let value = serde_json::to_value(draft).expect("draft serializes to a JSON value");
    to_canonical_bytes(&value)
}

pub fn to_canonical_bytes(value: &Value) -> Result<Vec<u8>, BeadError> {
    let mut out = Vec::with_capacity(256);
    write_value(&mut out, value)?;
    Ok(out)
}

pub fn to_canonical_string(value: &Value) -> Result<String, BeadError> {
    to_canonical_bytes(value).map(|b| String::from_utf8(b).expect("canonical JSON is UTF-8"))
}

fn write_value(out: &mut Vec<u8>, value: &Value) -> Result<(), BeadError> {
    match value {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => write_number(out, n)?,
        Value::String(s) => write_str(out, s),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(out, item)?;
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_unstable_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_str(out, k);
                out.push(b':');
                write_value(out, v)?;
            }
            out.push(b'}');
        }
    }
    Ok(())
}

fn write_number(out: &mut Vec<u8>, n: &Number) -> Result<(), BeadError> {
    if let Some(u) = n.as_u64() {
        out.extend_from_slice(u.to_string().as_bytes());
    } else if let Some(i) = n.as_i64() {
        out.extend_from_slice(i.to_string().as_bytes());
    } else {
        let f = n.as_f64().expect("non-integer JSON numbers are f64");
        write_f64(out, f)?;
    }
    Ok(())
}

/// Writes a float in canonical form.
pub fn write_f64(out: &mut Vec<u8>, f: f64) -> Result<(), BeadError> {
    if !f.is_finite() {
        return Err(BeadError::NonCanonicalizableNumber(f));
    }
    if f.fract() == 0.0 && f.abs() < I64_BOUND {
        // -0.0 lands here too and prints as "0".
        out.extend_from_slice((f as i64).to_string().as_bytes());
    } else {
        let mut buf = ryu::Buffer::new();
        out.extend_from_slice(buf.format_finite(f).as_bytes());
    }
    Ok(())
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    serde_json::to_writer(&mut *out, s).expect("writing a string to a Vec cannot fail");
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn enc(v: Value) -> String {
        to_canonical_string(&v).unwrap()
    }

    fn f(x: f64) -> String {
        let mut out = Vec::new();
        write_f64(&mut out, x).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn keys_sorted_and_compact() {
        assert_eq!(enc(json!({"b": 1, "a": 2})), r#"{"a":2,"b":1}"#);
        assert_eq!(
            enc(json!({"z": {"y": [1, {"d": null, "c": true}], "x": "s"}})),
            r#"{"z":{"x":"s","y":[1,{"c":true,"d":null}]}}"#
        );
    }

    #[test]
    fn key_order_is_code_point_order() {
        // 'Z' (0x5A) < '_' (0x5F) < 'a' (0x61) < 'é' (U+00E9) < '中' (U+4E2D)
        assert_eq!(
            enc(json!({"中": 1, "é": 2, "a": 3, "_": 4, "Z": 5})),
            r#"{"Z":5,"_":4,"a":3,"é":2,"中":1}"#
        );
    }

    #[test]
    fn number_forms() {
        assert_eq!(f(1.0), "1");
        assert_eq!(f(-0.0), "0");
        assert_eq!(f(-42.0), "-42");
        assert_eq!(f(0.1), "0.1");
        assert_eq!(f(2.5e-8), "2.5e-8");
        assert_eq!(f(1e20), "1e20");
        assert_eq!(enc(json!(18446744073709551615u64)), "18446744073709551615");
        assert_eq!(enc(json!(-7)), "-7");
    }

    #[test]
    fn non_finite_rejected() {
        for x in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            let mut out = Vec::new();
            assert!(matches!(
                write_f64(&mut out, x),
                Err(BeadError::NonCanonicalizableNumber(_))
            ));
        }
    }

    #[test]
    fn strings_escape_controls_and_keep_unicode() {
        assert_eq!(enc(json!("a\"b\\c\n\u{1}é")), "\"a\\\"b\\\\c\\n\\u0001é\"");
    }

    #[test]
    fn draft_canonical_form_omits_absent_clearance() {
        let d = Draft::new("t", "2026-01-26T10:00:00Z", "did:x");
        let s = String::from_utf8(canonicalize(&d).unwrap()).unwrap();
        assert_eq!(
            s,
            r#"{"author":"did:x","content":{},"evidence":[],"parents":[],"timestamp":"2026-01-26T10:00:00Z","type":"t"}"#
        );
    }

    #[test]
    fn invalid_draft_is_rejected() {
        let d = Draft::new("", "2026-01-26T10:00:00Z", "did:x");
        assert!(matches!(canonicalize(&d), Err(BeadError::InvalidDraft(_))));
    }
}
