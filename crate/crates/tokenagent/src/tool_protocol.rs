//! Tool metadata and the token-level tool-call wire format.
//!
//! A call is the delimiter codec `TOOL_OPEN name arg… TOOL_CLOSE` over
//! atomic symbols; JSON Schema appears only in the rendered manifest and
//! in registry config files. Parse failures are data, not crashes: they
//! flow into the format-reward term downstream.

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::vocab::{TokenId, Vocabulary};

/// Coarse argument type used by the synthetic tasks.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticType {
    Entity,
    Relation,
    FreeToken,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub param_name: String,
    pub semantic_type: SemanticType,
    pub required: bool,
}

/// Metadata describing one callable tool.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParamSpec>,
}

impl ToolSpec {
    pub fn required_arity(&self) -> usize {
        self.parameters.iter().filter(|p| p.required).count()
    }

    pub fn max_arity(&self) -> usize {
        self.parameters.len()
    }

    /// JSON Schema form of the parameter table, as used by the manifest
    /// and the registry config file.
    pub fn parameters_schema(&self) -> serde_json::Value {
        let mut properties = serde_json::Map::new();
        let mut required = Vec::new();
        for p in &self.parameters {
            properties.insert(
                p.param_name.clone(),
                json!({ "type": "string", "semantic_type": p.semantic_type }),
            );
            if p.required {
                required.push(json!(p.param_name));
            }
        }
        json!({ "type": "object", "properties": properties, "required": required })
    }
}

/// A parsed invocation: tool name plus ordered argument tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToolCall {
    pub tool_name: String,
    pub arguments: Vec<TokenId>,
}

/// A subject/relation/object record, the raw payload unit of tool output.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub subject: TokenId,
    pub relation: TokenId,
    pub object: TokenId,
}

/// Raw outcome of executing a tool. `success=false` implies empty payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToolResult {
    pub payload: Vec<Fact>,
    pub success: bool,
    pub note: Option<String>,
}

impl ToolResult {
    pub fn failure(note: impl Into<String>) -> Self {
        Self {
            payload: Vec::new(),
            success: false,
            note: Some(note.into()),
        }
    }

    pub fn hits(payload: Vec<Fact>) -> Self {
        let success = !payload.is_empty();
        Self {
            payload,
            success,
            note: None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnmatchedMarker,
    EmptySpan,
    UnknownTool,
    ArityViolation,
}

/// A malformed tool span: where it sat and why it failed.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("tool call parse error at {start}..{end}: {kind:?}")]
pub struct ParseError {
    pub start: usize,
    pub end: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("registry error: {0}")]
    Registry(String),
    #[error("symbol `{0}` not in vocabulary")]
    Encoding(String),
}

/// Read-only set of tool specs, unique by name.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ToolRegistry {
    specs: Vec<ToolSpec>,
}

impl ToolRegistry {
    pub fn new(specs: Vec<ToolSpec>) -> Result<Self, ProtocolError> {
        for (i, a) in specs.iter().enumerate() {
            for b in &specs[i + 1..] {
                if a.name == b.name {
                    return Err(ProtocolError::Registry(format!(
                        "duplicate tool name `{}`",
                        a.name
                    )));
                }
            }
            let mut names: Vec<&str> = a.parameters.iter().map(|p| p.param_name.as_str()).collect();
            names.sort_unstable();
            names.dedup();
            if names.len() != a.parameters.len() {
                return Err(ProtocolError::Registry(format!(
                    "duplicate parameter name in tool `{}`",
                    a.name
                )));
            }
        }
        Ok(Self { specs })
    }

    pub fn specs(&self) -> &[ToolSpec] {
        &self.specs
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    /// Registry config file form: a JSON list of tools with JSON Schema
    /// parameter blocks.
    pub fn to_config_json(&self) -> serde_json::Value {
        json!(self
            .specs
            .iter()
            .map(|s| json!({
                "name": s.name,
                "description": s.description,
                "parameters": s.parameters_schema(),
            }))
            .collect::<Vec<_>>())
    }
}

/// Index of the first TOOL_CLOSE that completes a TOOL_OPEN with no
/// intervening TOOL_CLOSE, or None when no complete call is present.
pub fn detect_tool_call_trigger(stream: &[TokenId], vocab: &Vocabulary) -> Option<usize> {
    let r = vocab.reserved();
    let mut open: Option<usize> = None;
    for (i, &tok) in stream.iter().enumerate() {
        if tok == r.tool_open {
            if open.is_none() {
                open = Some(i);
            }
        } else if tok == r.tool_close && open.is_some() {
            return Some(i);
        }
    }
    None
}

/// Parse every `TOOL_OPEN … TOOL_CLOSE` span of one turn's agent output,
/// in order of appearance, validating names and arity against the registry.
pub fn extract_tool_calls(
    segment: &[TokenId],
    vocab: &Vocabulary,
    registry: &ToolRegistry,
) -> Result<Vec<ToolCall>, ParseError> {
    let r = vocab.reserved();
    let mut calls = Vec::new();
    let mut i = 0;
    while i < segment.len() {
        let tok = segment[i];
        if tok == r.tool_close {
            return Err(ParseError {
                start: i,
                end: i + 1,
                kind: ParseErrorKind::UnmatchedMarker,
            });
        }
        if tok != r.tool_open {
            i += 1;
            continue;
        }
        let open = i;
        let close = segment[open + 1..]
            .iter()
            .position(|&t| t == r.tool_close)
            .map(|off| open + 1 + off);
        let Some(close) = close else {
            return Err(ParseError {
                start: open,
                end: segment.len(),
                kind: ParseErrorKind::UnmatchedMarker,
            });
        };
        if segment[open + 1..close].contains(&r.tool_open) {
            return Err(ParseError {
                start: open,
                end: close + 1,
                kind: ParseErrorKind::UnmatchedMarker,
            });
        }
        let inner = &segment[open + 1..close];
        if inner.is_empty() {
            return Err(ParseError {
                start: open,
                end: close + 1,
                kind: ParseErrorKind::EmptySpan,
            });
        }
        let name = vocab.symbol(inner[0]).to_string();
        let Some(spec) = registry.get(&name) else {
            return Err(ParseError {
                start: open,
                end: close + 1,
                kind: ParseErrorKind::UnknownTool,
            });
        };
        let args = inner[1..].to_vec();
        if args.len() < spec.required_arity() || args.len() > spec.max_arity() {
            return Err(ParseError {
                start: open,
                end: close + 1,
                kind: ParseErrorKind::ArityViolation,
            });
        }
        calls.push(ToolCall {
            tool_name: name,
            arguments: args,
        });
        i = close + 1;
    }
    Ok(calls)
}

/// Inverse of extraction for a valid call: `TOOL_OPEN name args TOOL_CLOSE`.
pub fn wrap_tool_call(call: &ToolCall, vocab: &Vocabulary) -> Result<Vec<TokenId>, ProtocolError> {
    let r = vocab.reserved();
    let name = vocab
        .lookup(&call.tool_name)
        .map_err(|_| ProtocolError::Encoding(call.tool_name.clone()))?;
    let mut out = vec![r.tool_open, name];
    out.extend_from_slice(&call.arguments);
    out.push(r.tool_close);
    Ok(out)
}

/// Encode a tool result as observation tokens:
/// `OBS_OPEN (subject relation object)* OBS_CLOSE`. A failed result
/// encodes as the empty observation.
pub fn format_tool_response(
    result: &ToolResult,
    vocab: &Vocabulary,
) -> Result<Vec<TokenId>, ProtocolError> {
    let r = vocab.reserved();
    let mut out = vec![r.obs_open];
    if result.success {
        for fact in &result.payload {
            for tok in [fact.subject, fact.relation, fact.object] {
                if !vocab.contains(tok) {
                    return Err(ProtocolError::Encoding(format!("token {}", tok.0)));
                }
                out.push(tok);
            }
        }
    }
    out.push(r.obs_close);
    Ok(out)
}

/// Deterministic human-readable manifest: one block per tool with name,
/// description, and the JSON Schema parameter table.
pub fn render_tool_manifest(specs: &[ToolSpec]) -> Result<String, ProtocolError> {
    if specs.is_empty() {
        return Err(ProtocolError::Registry("empty tool registry".into()));
    }
    // reuse registry validation for duplicate names
    ToolRegistry::new(specs.to_vec())?;
    let mut out = String::new();
    for spec in specs {
        out.push_str(&format!("tool: {}\n", spec.name));
        out.push_str(&format!("  description: {}\n", spec.description));
        out.push_str("  parameters:\n");
        let schema = spec.parameters_schema();
        out.push_str(&format!(
            "    {}\n",
            serde_json::to_string(&schema).expect("schema serializes")
        ));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::Reserved;

    pub(crate) fn test_vocab() -> Vocabulary {
        let mut symbols: Vec<String> = [
            "<tool>", "</tool>", "<obs>", "</obs>", "<answer>", "</answer>", "<eos>", "<pad>",
            "ask", "search",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for i in 0..4 {
            symbols.push(format!("e{i}"));
        }
        for i in 0..2 {
            symbols.push(format!("r{i}"));
        }
        Vocabulary::new(
            symbols,
            Reserved {
                tool_open: TokenId(0),
                tool_close: TokenId(1),
                obs_open: TokenId(2),
                obs_close: TokenId(3),
                ans_open: TokenId(4),
                ans_close: TokenId(5),
                eos: TokenId(6),
                pad: TokenId(7),
            },
        )
        .unwrap()
    }

    fn search_registry() -> ToolRegistry {
        ToolRegistry::new(vec![ToolSpec {
            name: "search".into(),
            description: "look up facts by subject and optional relation".into(),
            parameters: vec![
                ParamSpec {
                    param_name: "entity".into(),
                    semantic_type: SemanticType::Entity,
                    required: true,
                },
                ParamSpec {
                    param_name: "relation".into(),
                    semantic_type: SemanticType::Relation,
                    required: false,
                },
            ],
        }])
        .unwrap()
    }

    #[test]
    fn trigger_on_first_complete_call() {
        let v = test_vocab();
        let e = |i: u32| TokenId(10 + i);
        let stream = vec![e(0), TokenId(0), TokenId(9), e(1), TokenId(1), e(2)];
        assert_eq!(detect_tool_call_trigger(&stream, &v), Some(4));
    }

    #[test]
    fn trigger_absent() {
        let v = test_vocab();
        assert_eq!(
            detect_tool_call_trigger(&[TokenId(10), TokenId(11)], &v),
            None
        );
        // unterminated call
        assert_eq!(
            detect_tool_call_trigger(&[TokenId(0), TokenId(9)], &v),
            None
        );
        // close without open
        assert_eq!(detect_tool_call_trigger(&[TokenId(1)], &v), None);
    }

    #[test]
    fn extract_single_call() {
        let v = test_vocab();
        let reg = search_registry();
        let seg = vec![TokenId(0), TokenId(9), TokenId(12), TokenId(14), TokenId(1)];
        let calls = extract_tool_calls(&seg, &v, &reg).unwrap();
        assert_eq!(
            calls,
            vec![ToolCall {
                tool_name: "search".into(),
                arguments: vec![TokenId(12), TokenId(14)],
            }]
        );
    }

    #[test]
    fn extract_error_kinds() {
        let v = test_vocab();
        let reg = search_registry();
        let empty = vec![TokenId(0), TokenId(1)];
        assert_eq!(
            extract_tool_calls(&empty, &v, &reg).unwrap_err().kind,
            ParseErrorKind::EmptySpan
        );
        let unknown = vec![TokenId(0), TokenId(8), TokenId(10), TokenId(1)];
        assert_eq!(
            extract_tool_calls(&unknown, &v, &reg).unwrap_err().kind,
            ParseErrorKind::UnknownTool
        );
        let dangling = vec![TokenId(0), TokenId(9), TokenId(10)];
        assert_eq!(
            extract_tool_calls(&dangling, &v, &reg).unwrap_err().kind,
            ParseErrorKind::UnmatchedMarker
        );
        let stray_close = vec![TokenId(10), TokenId(1)];
        assert_eq!(
            extract_tool_calls(&stray_close, &v, &reg).unwrap_err().kind,
            ParseErrorKind::UnmatchedMarker
        );
        let too_many = vec![
            TokenId(0),
            TokenId(9),
            TokenId(10),
            TokenId(11),
            TokenId(12),
            TokenId(1),
        ];
        assert_eq!(
            extract_tool_calls(&too_many, &v, &reg).unwrap_err().kind,
            ParseErrorKind::ArityViolation
        );
        let no_args = vec![TokenId(0), TokenId(9), TokenId(1)];
        assert_eq!(
            extract_tool_calls(&no_args, &v, &reg).unwrap_err().kind,
            ParseErrorKind::ArityViolation
        );
    }

    #[test]
    fn format_response_cases() {
        let v = test_vocab();
        let one = ToolResult::hits(vec![Fact {
            subject: TokenId(10),
            relation: TokenId(14),
            object: TokenId(11),
        }]);
        assert_eq!(
            format_tool_response(&one, &v).unwrap(),
            vec![TokenId(2), TokenId(10), TokenId(14), TokenId(11), TokenId(3)]
        );
        let fail = ToolResult::failure("no match");
        assert_eq!(
            format_tool_response(&fail, &v).unwrap(),
            vec![TokenId(2), TokenId(3)]
        );
        let two = ToolResult::hits(vec![
            Fact {
                subject: TokenId(10),
                relation: TokenId(14),
                object: TokenId(11),
            },
            Fact {
                subject: TokenId(11),
                relation: TokenId(15),
                object: TokenId(12),
            },
        ]);
        assert_eq!(format_tool_response(&two, &v).unwrap().len(), 8);
    }

    #[test]
    fn wrap_then_extract_roundtrip() {
        let v = test_vocab();
        let reg = search_registry();
        let call = ToolCall {
            tool_name: "search".into(),
            arguments: vec![TokenId(13)],
        };
        let wire = wrap_tool_call(&call, &v).unwrap();
        assert_eq!(extract_tool_calls(&wire, &v, &reg).unwrap(), vec![call]);
    }

    #[test]
    fn manifest_is_deterministic() {
        let reg = search_registry();
        let a = render_tool_manifest(reg.specs()).unwrap();
        let b = render_tool_manifest(reg.specs()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("tool: search").count(), 1);
        assert!(render_tool_manifest(&[]).is_err());
    }

    #[test]
    fn registry_rejects_duplicates() {
        let spec = search_registry().specs()[0].clone();
        assert!(ToolRegistry::new(vec![spec.clone(), spec]).is_err());
    }
}
