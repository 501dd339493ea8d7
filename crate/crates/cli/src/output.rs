use std::path::{Path, PathBuf};

use sfq_core::units::format_sig;

use crate::failure::{Failure, Outcome};

/// Significant digits for every number written to a CSV file.
pub const SIG_DIGITS: usize = 12;

pub fn num(x: f64) -> String {
    format_sig(x, SIG_DIGITS)
}

pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(name: &str, contents: String) -> Self {
        Self {
            name: name.to_string(),
            contents,
        }
    }

    pub fn csv(name: &str, header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> Self {
        let mut s = String::from(header);
        s.push('\n');
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        Self::new(name, s)
    }

    pub fn json<T: serde::Serialize>(name: &str, value: &T) -> Outcome<Self> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Numerical(e.to_string()))?;
        s.push('\n');
        Ok(Self::new(name, s))
    }
}

/// Fails if any of `names` already exists in `dir` and overwriting was not
/// requested.
pub fn check_free(dir: &Path, names: &[String], force: bool) -> Outcome<()> {
    if force {
        return Ok(());
    }
    for n in names {
        let p = dir.join(n);
        if p.exists() {
            return Err(Failure::config(format!(
                "{} exists; pass --force to overwrite",
                p.display()
            )));
        }
    }
    Ok(())
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Outcome<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for a in artifacts {
        let p = dir.join(&a.name);
        std::fs::write(&p, &a.contents)?;
        written.push(p);
    }
    Ok(written)
}
