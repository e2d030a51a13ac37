//! Strict response parsing.

use serde_json::Value;

use crate::error::ContactError;

/// Parses a response into per-candidate `[left, right]` binaries.
///
/// The JSON object must contain exactly the candidate keys with `left` and
/// `right` integer values in {0, 1}. Prose before or after the JSON is
/// tolerated by extracting the outermost brace span.
pub fn parse_response(text: &str, candidates: &[String]) -> Result<Vec<[u8; 2]>, ContactError> {
    let err = |reason: &str| ContactError::Parse {
        reason: reason.to_string(),
        raw: text.to_string(),
    };
    let start = text.find('{').ok_or_else(|| err("no JSON object found"))?;
    let end = text.rfind('}').ok_or_else(|| err("no closing brace"))?;
    if end <= start {
        return Err(err("malformed brace span"));
    }
    let value: Value = serde_json::from_str(&text[start..=end])
        .map_err(|e| err(&format!("invalid JSON: {e}")))?;
    let map = value.as_object().ok_or_else(|| err("top level is not an object"))?;
    if map.len() != candidates.len() {
        return Err(err(&format!(
            "expected {} keys, got {}",
            candidates.len(),
            map.len()
        )));
    }
    let mut out = Vec::with_capacity(candidates.len());
    for name in candidates {
        let entry = map
            .get(name)
            .ok_or_else(|| err(&format!("missing key {name:?}")))?;
        let obj = entry
            .as_object()
            .ok_or_else(|| err(&format!("{name:?} is not an object")))?;
        let mut pair = [0u8; 2];
        for (i, hand) in ["left", "right"].iter().enumerate() {
            let v = obj
                .get(*hand)
                .ok_or_else(|| err(&format!("{name:?} missing {hand:?}")))?;
            let as_int = v.as_i64().ok_or_else(|| err(&format!("{name:?}.{hand} not an integer")))?;
            if as_int != 0 && as_int != 1 {
                return Err(err(&format!("{name:?}.{hand} = {as_int} is not binary")));
            }
            pair[i] = as_int as u8;
        }
        if obj.len() != 2 {
            return Err(err(&format!("{name:?} has extra fields")));
        }
        out.push(pair);
    }
    Ok(out)
}

/// Formats labels back into the exact response schema (round-trip partner
/// of [`parse_response`]).
pub fn format_labels(candidates: &[String], labels: &[[u8; 2]]) -> String {
    let mut out = String::from("{\n");
    for (i, (name, pair)) in candidates.iter().zip(labels).enumerate() {
        out.push_str(&format!(
            "  \"{name}\": {{\"left\": {}, \"right\": {}}}",
            pair[0], pair[1]
        ));
        if i + 1 < candidates.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push('}');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_the_reference_format() {
        let out = parse_response(r#"{"obj1": {"left":0,"right":1}}"#, &c(&["obj1"])).unwrap();
        assert_eq!(out, vec![[0, 1]]);
    }

    #[test]
    fn non_binary_value_is_rejected() {
        let err = parse_response(r#"{"obj1": {"left":2,"right":0}}"#, &c(&["obj1"])).unwrap_err();
        assert!(matches!(err, ContactError::Parse { .. }));
        assert!(err.to_string().contains("not binary"));
    }

    #[test]
    fn prose_around_json_is_tolerated() {
        let text = "Sure! Here is my answer:\n{\"a\": {\"left\": 1, \"right\": 0}}\nHope that helps.";
        let out = parse_response(text, &c(&["a"])).unwrap();
        assert_eq!(out, vec![[1, 0]]);
    }

    #[test]
    fn missing_and_extra_keys_are_rejected() {
        assert!(parse_response(r#"{"b": {"left":0,"right":0}}"#, &c(&["a"])).is_err());
        assert!(
            parse_response(
                r#"{"a": {"left":0,"right":0}, "b": {"left":0,"right":0}}"#,
                &c(&["a"])
            )
            .is_err()
        );
    }

    #[test]
    fn format_then_parse_round_trips() {
        let names = c(&["cup", "box", "pen"]);
        for bits in 0..64u32 {
            let labels: Vec<[u8; 2]> = (0..3)
                .map(|i| [(bits >> (2 * i)) as u8 & 1, (bits >> (2 * i + 1)) as u8 & 1])
                .collect();
            let text = format_labels(&names, &labels);
            let parsed = parse_response(&text, &names).unwrap();
            assert_eq!(parsed, labels);
        }
    }
}
