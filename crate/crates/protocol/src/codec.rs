use thiserror::Error;

use crate::message::{Body, Message};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("malformed message at {line}:{column}: {reason}")]
    Malformed {
        line: usize,
        column: usize,
        reason: String,
    },
    #[error("unknown message kind {kind:?}")]
    UnknownKind { kind: String, raw: String },
    #[error("message is not valid UTF-8")]
    Utf8,
}

/// One newline-terminated JSON object.
pub fn encode(m: &Message) -> Vec<u8> {
    let mut out = serde_json::to_vec(m).expect("messages always serialize");
    out.push(b'\n');
    out
}

pub fn encode_line(m: &Message) -> String {
    String::from_utf8(encode(m)).expect("serde_json emits UTF-8")
}

/// Decodes one line, with or without its trailing newline.
pub fn decode(bytes: &[u8]) -> Result<Message, DecodeError> {
    let text = std::str::from_utf8(bytes).map_err(|_| DecodeError::Utf8)?;
    let text = text
        .strip_suffix('\n')
        .map(|t| t.strip_suffix('\r').unwrap_or(t))
        .unwrap_or(text);
    let malformed = |e: serde_json::Error| DecodeError::Malformed {
        line: e.line(),
        column: e.column(),
        reason: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(malformed)?;
    if let Some(kind) = value.get("kind").and_then(|k| k.as_str()) {
        if !Body::KINDS.contains(&kind) {
            return Err(DecodeError::UnknownKind {
                kind: kind.to_string(),
                raw: text.to_string(),
            });
        }
    }
    serde_json::from_str(text).map_err(malformed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{Capability, Value};
    use resh_lang::ParamType;

    fn advertise() -> Message {
        Message::new(
            1,
            "robbie",
            0,
            Body::Advertise {
                robot: "robbie".into(),
                capabilities: vec![Capability::new("say", vec![ParamType::String])],
                properties: Default::default(),
            },
        )
    }

    #[test]
    fn canonical_advertise_line() {
        assert_eq!(
            encode_line(&advertise()),
            "{\"v\":1,\"id\":1,\"sender\":\"robbie\",\"ts\":0,\"kind\":\"ADVERTISE\",\"robot\":\"robbie\",\"capabilities\":[{\"action\":\"say\",\"signature\":[\"string\"]}]}\n"
        );
        assert_eq!(decode(&encode(&advertise())).unwrap(), advertise());
    }

    #[test]
    fn optional_fields_default() {
        let line = "{\"v\":1,\"id\":2,\"sender\":\"rt\",\"ts\":5,\"kind\":\"EVENT\",\"name\":\"go\"}";
        let m = decode(line.as_bytes()).unwrap();
        assert_eq!(
            m.body,
            Body::Event {
                name: "go".into(),
                args: vec![]
            }
        );
        assert_eq!(encode_line(&m), format!("{line}\n"));
    }

    #[test]
    fn truncated_line_is_malformed() {
        let full = encode(&advertise());
        let cut = &full[..full.len() / 2];
        assert!(matches!(decode(cut), Err(DecodeError::Malformed { .. })));
    }

    #[test]
    fn unknown_field_is_ignored() {
        let line = "{\"v\":1,\"id\":3,\"sender\":\"a\",\"ts\":0,\"kind\":\"CANCEL_ACTION\",\"instance\":\"p1.a0\",\"priority\":7}";
        let m = decode(line.as_bytes()).unwrap();
        assert_eq!(
            m.body,
            Body::CancelAction {
                instance: "p1.a0".into()
            }
        );
    }

    #[test]
    fn unknown_kind_keeps_payload() {
        let line = "{\"v\":1,\"id\":3,\"sender\":\"a\",\"ts\":0,\"kind\":\"TELEPORT\"}";
        match decode(line.as_bytes()) {
            Err(DecodeError::UnknownKind { kind, raw }) => {
                assert_eq!(kind, "TELEPORT");
                assert_eq!(raw, line);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn values_keep_their_scalar_type() {
        let m = Message::new(
            9,
            "rt",
            1,
            Body::Event {
                name: "e".into(),
                args: vec![
                    Value::Int(1),
                    Value::Float(1.0),
                    Value::Bool(true),
                    Value::Str("1".into()),
                ],
            },
        );
        assert_eq!(decode(&encode(&m)).unwrap(), m);
    }
}
