//! Model persistence.
//!
//! A model file is UTF-8 text: a short `key = value` header opened by the
//! magic line and closed by `---`, followed by the model as JSON. Floats are
//! written in shortest round-trip form, so a loaded model reproduces every
//! score bit for bit. The header duplicates `n`, `m` and `t` for quick
//! inspection; they are cross-checked on load.
//!
//! ```text
//! CHRISTOFFEL-MODEL
//! format_version = 1
//! n = 2
//! m = 2
//! t = 4
//! threshold_policy = rel:1e-10
//! mass_policy = normalized
//! ---
//! {"n":2,"m":2,...}
//! ```

use std::io::Write;
use std::path::Path;

use crate::classifier::ClassifierModel;
use crate::error::{Error, Result};
use crate::moments::MassPolicy;

pub const MAGIC: &str = "CHRISTOFFEL-MODEL";
pub const FORMAT_VERSION: u32 = 1;
const SEPARATOR: &str = "---";

fn mass_name(p: MassPolicy) -> &'static str {
    match p {
        MassPolicy::Normalized => "normalized",
        MassPolicy::ClassPrior => "class-prior",
    }
}

pub fn to_string(model: &ClassifierModel) -> Result<String> {
    let body = serde_json::to_string(model).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let mut out = Vec::new();
    writeln!(out, "{MAGIC}").ok();
    writeln!(out, "format_version = {FORMAT_VERSION}").ok();
    writeln!(out, "n = {}", model.dim()).ok();
    writeln!(out, "m = {}", model.classes()).ok();
    writeln!(out, "t = {}", model.degree()).ok();
    writeln!(out, "threshold_policy = {}", model.policy()).ok();
    writeln!(out, "mass_policy = {}", mass_name(model.mass_policy())).ok();
    writeln!(out, "{SEPARATOR}").ok();
    writeln!(out, "{body}").ok();
    Ok(String::from_utf8(out).expect("ascii header and json body"))
}

pub fn from_str(text: &str) -> Result<ClassifierModel> {
    let mut lines = text.split_inclusive('\n');
    let mut consumed = 0;
    let mut next = || {
        lines.next().map(|l| {
            consumed += l.len();
            l.trim_end()
        })
    };
    if next() != Some(MAGIC) {
        return Err(Error::ModelFormat("missing magic line".into()));
    }
    let mut header = Vec::new();
    loop {
        match next() {
            None => return Err(Error::ModelFormat("header is not terminated".into())),
            Some(SEPARATOR) => break,
            Some(line) => {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::ModelFormat(format!("malformed header line `{line}`")))?;
                header.push((k.trim().to_string(), v.trim().to_string()));
            }
        }
    }
    let get = |key: &str| header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    match get("format_version").map(str::parse::<u32>) {
        Some(Ok(FORMAT_VERSION)) => {}
        Some(Ok(v)) => return Err(Error::ModelFormat(format!("unsupported format version {v}"))),
        _ => return Err(Error::ModelFormat("missing format_version".into())),
    }
    let model: ClassifierModel =
        serde_json::from_str(&text[consumed..]).map_err(|e| Error::ModelFormat(e.to_string()))?;
    model.validate()?;
    for (key, expect) in [("n", model.dim()), ("m", model.classes()), ("t", model.degree() as usize)] {
        if get(key).and_then(|v| v.parse::<usize>().ok()) != Some(expect) {
            return Err(Error::ModelFormat(format!("header `{key}` disagrees with the body")));
        }
    }
    Ok(model)
}

pub fn save(model: &ClassifierModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ClassifierModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}
