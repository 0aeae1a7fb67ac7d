#![allow(dead_code)]

//! Subset of JSON Schema (2020-12) used by the shipped schema: `type`,
//! `required`, `properties`, `additionalProperties`, `items`, `minItems`,
//! `maxItems`, `minProperties`, `maxProperties`, `enum`, `const`,
//! `minimum`, `maximum`, local `$ref`, `allOf`, `anyOf` and `if`/`then`.

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mrav-hover"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("MRAV_HOVER_OUT_DIR").output().expect("binary runs")
}

pub fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/output.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn scratch_dir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&d);
    d
}

pub struct Validator<'a> {
    root: &'a Value,
}

impl<'a> Validator<'a> {
    pub fn new(root: &'a Value) -> Self {
        Self { root }
    }

    /// Every violation as `path: message`.
    pub fn errors(&self, instance: &Value) -> Vec<String> {
        let mut out = Vec::new();
        self.check(self.root, instance, "$", &mut out);
        out
    }

    fn resolve(&self, r: &str) -> &'a Value {
        let pointer = r.strip_prefix('#').unwrap_or_else(|| panic!("non-local $ref {r}"));
        self.root.pointer(pointer).unwrap_or_else(|| panic!("dangling $ref {r}"))
    }

    fn check(&self, schema: &Value, v: &Value, path: &str, out: &mut Vec<String>) {
        let Some(s) = schema.as_object() else {
            if schema == &Value::Bool(false) {
                out.push(format!("{path}: not allowed"));
            }
            return;
        };
        if let Some(Value::String(r)) = s.get("$ref") {
            self.check(self.resolve(r), v, path, out);
        }
        if let Some(t) = s.get("type") {
            let ok = match t {
                Value::String(t) => type_matches(t, v),
                Value::Array(ts) => ts.iter().any(|t| t.as_str().is_some_and(|t| type_matches(t, v))),
                _ => true,
            };
            if !ok {
                out.push(format!("{path}: expected type {t}, found {v}"));
                return;
            }
        }
        if let Some(c) = s.get("const") {
            if !json_eq(c, v) {
                out.push(format!("{path}: expected {c}"));
            }
        }
        if let Some(Value::Array(opts)) = s.get("enum") {
            if !opts.iter().any(|o| json_eq(o, v)) {
                out.push(format!("{path}: {v} not in enum"));
            }
        }
        if let (Some(min), Some(x)) = (s.get("minimum").and_then(Value::as_f64), v.as_f64()) {
            if x < min {
                out.push(format!("{path}: {x} < {min}"));
            }
        }
        if let (Some(max), Some(x)) = (s.get("maximum").and_then(Value::as_f64), v.as_f64()) {
            if x > max {
                out.push(format!("{path}: {x} > {max}"));
            }
        }
        if let Value::Object(o) = v {
            if let Some(Value::Array(req)) = s.get("required") {
                for k in req.iter().filter_map(Value::as_str) {
                    if !o.contains_key(k) {
                        out.push(format!("{path}: missing {k}"));
                    }
                }
            }
            let props = s.get("properties").and_then(Value::as_object);
            for (k, child) in o {
                let p = format!("{path}.{k}");
                match props.and_then(|ps| ps.get(k)) {
                    Some(sub) => self.check(sub, child, &p, out),
                    None => match s.get("additionalProperties") {
                        Some(Value::Bool(false)) => out.push(format!("{p}: unexpected property")),
                        Some(extra @ Value::Object(_)) => self.check(extra, child, &p, out),
                        _ => {}
                    },
                }
            }
            let n = o.len() as u64;
            if s.get("minProperties").and_then(Value::as_u64).is_some_and(|m| n < m) {
                out.push(format!("{path}: too few properties"));
            }
            if s.get("maxProperties").and_then(Value::as_u64).is_some_and(|m| n > m) {
                out.push(format!("{path}: too many properties"));
            }
        }
        if let Value::Array(a) = v {
            if let Some(items) = s.get("items") {
                for (i, child) in a.iter().enumerate() {
                    self.check(items, child, &format!("{path}[{i}]"), out);
                }
            }
            let n = a.len() as u64;
            if s.get("minItems").and_then(Value::as_u64).is_some_and(|m| n < m) {
                out.push(format!("{path}: fewer than {} items", s["minItems"]));
            }
            if s.get("maxItems").and_then(Value::as_u64).is_some_and(|m| n > m) {
                out.push(format!("{path}: more than {} items", s["maxItems"]));
            }
        }
        if let Some(Value::Array(all)) = s.get("allOf") {
            for sub in all {
                self.check(sub, v, path, out);
            }
        }
        if let Some(Value::Array(any)) = s.get("anyOf") {
            if !any.iter().any(|sub| self.errors_of(sub, v).is_empty()) {
                out.push(format!("{path}: matches no anyOf branch"));
            }
        }
        if let Some(cond) = s.get("if") {
            if self.errors_of(cond, v).is_empty() {
                if let Some(then) = s.get("then") {
                    self.check(then, v, path, out);
                }
            }
        }
    }

    fn errors_of(&self, schema: &Value, v: &Value) -> Vec<String> {
        let mut out = Vec::new();
        self.check(schema, v, "", &mut out);
        out
    }
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64() || v.as_f64().is_some_and(|x| x.fract() == 0.0),
        _ => panic!("unknown type {t}"),
    }
}

fn json_eq(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

#[test]
fn validator_rejects_what_it_should() {
    let schema = serde_json::json!({
        "type": "object",
        "required": ["a"],
        "additionalProperties": false,
        "properties": {
            "a": {"type": "integer", "minimum": 1},
            "b": {"anyOf": [{"type": "null"}, {"$ref": "#/$defs/s"}]}
        },
        "$defs": {"s": {"type": "string", "enum": ["x"]}}
    });
    let v = Validator::new(&schema);
    assert!(v.errors(&serde_json::json!({"a": 2, "b": "x"})).is_empty());
    assert!(v.errors(&serde_json::json!({"a": 2, "b": null})).is_empty());
    assert_eq!(v.errors(&serde_json::json!({"a": 0})).len(), 1);
    assert_eq!(v.errors(&serde_json::json!({"b": "y"})).len(), 2);
    assert_eq!(v.errors(&serde_json::json!({"a": 1, "c": 1})).len(), 1);
    assert_eq!(v.errors(&serde_json::json!({"a": 1.5})).len(), 1);
}
