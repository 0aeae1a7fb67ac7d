use serde_json::{Map, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal that reproduces the rounded value.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    let a = r.abs();
    if r == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// Rounds every float in `v`; non-finite floats become `null`.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round_sig(x)))
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn vec3(v: &nalgebra::Vector3<f64>) -> Value {
    Value::Array(v.iter().map(|x| num(*x)).collect())
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub subcommand: &'static str,
    pub source: Option<(String, String)>,
    pub overrides: Vec<(String, String)>,
    pub parameters: Vec<(String, Value)>,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(subcommand: &'static str) -> Self {
        Self {
            subcommand,
            source: None,
            overrides: Vec::new(),
            parameters: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.push((key.to_string(), value.into()));
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("tool".into(), "mrav-hover".into());
        m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        m.insert("subcommand".into(), self.subcommand.into());
        if let Some((kind, name)) = &self.source {
            let mut s = Map::new();
            s.insert(kind.clone(), name.clone().into());
            m.insert("source".into(), Value::Object(s));
        }
        let overrides: Map<String, Value> =
            self.overrides.iter().map(|(k, v)| (k.clone(), v.clone().into())).collect();
        m.insert("overrides".into(), Value::Object(overrides));
        let params: Map<String, Value> = self.parameters.iter().cloned().collect();
        m.insert("parameters".into(), round_json(Value::Object(params)));
        m.insert(
            "outputs".into(),
            Value::Array(self.outputs.iter().map(|p| p.display().to_string().into()).collect()),
        );
        Value::Object(m)
    }

    /// Single-line `#` comment for CSV artifacts.
    pub fn csv_comment(&self) -> String {
        format!("# {}", serde_json::to_string(&self.to_json()).expect("manifest serializes"))
    }
}

/// Pretty JSON document `{ "manifest": ..., <body fields> }` with LF endings.
pub fn json_document(manifest: &Manifest, body: Value) -> String {
    let mut doc = Map::new();
    doc.insert("manifest".into(), manifest.to_json());
    if let Value::Object(fields) = round_json(body) {
        doc.extend(fields);
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("document serializes");
    s.push('\n');
    s
}

pub enum Cell {
    F(f64),
    I(i64),
    B(bool),
    S(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::F)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

/// CSV with a manifest comment line, a header row and LF endings.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(manifest: &Manifest, header: &[String]) -> Self {
        let mut text = manifest.csv_comment();
        text.push('\n');
        text.push_str(&header.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = Cell>) {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            first = false;
            match c {
                Cell::F(x) => self.text.push_str(&format_float(x)),
                Cell::I(i) => {
                    let _ = write!(self.text, "{i}");
                }
                Cell::B(b) => self.text.push_str(if b { "true" } else { "false" }),
                Cell::S(s) => self.text.push_str(&quote(&s)),
                Cell::Empty => {}
            }
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Where artifacts go: stdout, or files under a directory.
pub struct Sink {
    pub dir: Option<PathBuf>,
}

impl Sink {
    pub fn path_for(&self, stem: &str, ext: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{stem}.{ext}")))
    }

    pub fn emit(&self, path: Option<&Path>, text: &str) -> std::io::Result<()> {
        match path {
            Some(p) => {
                if let Some(parent) = p.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                std::fs::write(p, text)?;
                eprintln!("wrote {}", p.display());
                Ok(())
            }
            None => {
                use std::io::Write;
                std::io::stdout().lock().write_all(text.as_bytes())
            }
        }
    }
}
