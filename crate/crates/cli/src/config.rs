//! JSON inputs with field-level diagnostics, and flag overrides.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_text(path, &text)
}

/// Parses `text` as `T`, reporting the failing field path together with the
/// line and column.
pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let location = format!("line {}, column {}", inner.line(), inner.column());
        let message = if field == "." { format!("{location}: {inner}") } else { format!("{location}, field `{field}`: {inner}") };
        CliError::Json { path: path.to_path_buf(), message }
    })
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(path, &read_text(path)?)
}

/// Field assignments collected from command-line flags.
#[derive(Debug, Default)]
pub struct Overrides(Vec<(&'static str, Value)>);

impl Overrides {
    /// Sets a dotted path such as `params.n` when the flag was given.
    pub fn set<T: Serialize>(&mut self, path: &'static str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((path, serde_json::to_value(v).expect("serializable flag")));
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, mut base: Value) -> Value {
        for (path, value) in &self.0 {
            let mut node = &mut base;
            let mut keys = path.split('.').peekable();
            while let Some(key) = keys.next() {
                if !node.is_object() {
                    *node = Value::Object(Map::new());
                }
                let map = node.as_object_mut().expect("object");
                if keys.peek().is_none() {
                    map.insert(key.to_string(), value.clone());
                    break;
                }
                node = map.entry(key).or_insert_with(|| Value::Object(Map::new()));
            }
        }
        base
    }
}

/// Loads an optional JSON file, applies flag overrides and deserializes the
/// result. The file is validated on its own first so diagnostics point at
/// its lines.
pub fn resolve<T: DeserializeOwned + Serialize>(file: Option<&Path>, overrides: &Overrides, what: &str) -> Result<T> {
    let base = match file {
        Some(path) => {
            let text = read_text(path)?;
            let raw: Value = parse_json(path, &text)?;
            if overrides.is_empty() {
                return parse_json(path, &text);
            }
            raw
        }
        None => Value::Object(Map::new()),
    };
    let merged = overrides.apply(base);
    let text = serde_json::to_string(&merged).expect("serializable value");
    let label = file.map_or_else(|| format!("<{what} from flags>"), |p| format!("{} (with flag overrides)", p.display()));
    parse_json(Path::new(&label), &text)
}
