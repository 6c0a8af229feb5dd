//! Experiment files: TOML documents with `include` and an optional `compare`
//! block.
//!
//! A file may name other files under `include` (a string or a list, resolved
//! relative to the including file). Included tables are merged first and the
//! including file overrides them key by key, recursing into sub-tables.
//!
//! A `compare` array lists methods. Each entry needs a `name` and may set any
//! run field except `problem`; it is merged over the top-level table.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use shiftcomp::harness::RunConfig;
use toml::{Table, Value};

const MAX_INCLUDE_DEPTH: usize = 16;

/// Command-line values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
    pub eps: Option<f64>,
    pub budget_bits: Option<u64>,
    pub budget_iters: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(s) = self.seeds {
            config.seeds = s;
        }
        if let Some(e) = self.eps {
            config.eps = e;
        }
        if let Some(b) = self.budget_bits {
            config.budget.bits = Some(b);
        }
        if let Some(i) = self.budget_iters {
            config.budget.iterations = i;
        }
    }
}

/// One method of a comparison.
#[derive(Clone, Debug)]
pub struct Method {
    pub name: String,
    pub config: RunConfig,
}

/// Read `path` and resolve its includes into one table.
pub fn load_table(path: &Path) -> Result<Table> {
    let mut stack = Vec::new();
    load_rec(path, &mut stack)
}

fn load_rec(path: &Path, stack: &mut Vec<PathBuf>) -> Result<Table> {
    let canonical =
        fs::canonicalize(path).with_context(|| format!("cannot open config {}", path.display()))?;
    if stack.contains(&canonical) {
        bail!("include cycle through {}", path.display());
    }
    if stack.len() >= MAX_INCLUDE_DEPTH {
        bail!("includes nested deeper than {MAX_INCLUDE_DEPTH}");
    }
    let text = fs::read_to_string(&canonical)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut table: Table = text
        .parse()
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;

    let includes = match table.remove("include") {
        None => Vec::new(),
        Some(Value::String(s)) => vec![s],
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                other => Err(anyhow!(
                    "{}: include: expected a path string, found {}",
                    path.display(),
                    other.type_str()
                )),
            })
            .collect::<Result<_>>()?,
        Some(other) => bail!(
            "{}: include: expected a path or a list of paths, found {}",
            path.display(),
            other.type_str()
        ),
    };

    stack.push(canonical.clone());
    let dir = canonical.parent().unwrap_or(Path::new("."));
    resolve_data_path(&mut table, dir);
    let mut merged = Table::new();
    for inc in includes {
        let sub = load_rec(&dir.join(&inc), stack)?;
        merge(&mut merged, sub);
    }
    stack.pop();
    merge(&mut merged, table);
    Ok(merged)
}

/// Make a relative `problem.data.path` relative to the file that sets it.
fn resolve_data_path(table: &mut Table, dir: &Path) {
    let Some(Value::Table(problem)) = table.get_mut("problem") else {
        return;
    };
    let Some(Value::Table(data)) = problem.get_mut("data") else {
        return;
    };
    if let Some(Value::String(p)) = data.get_mut("path") {
        if Path::new(p.as_str()).is_relative() {
            *p = dir.join(p.as_str()).to_string_lossy().into_owned();
        }
    }
}

/// Merge `over` into `base`; tables merge recursively, anything else is
/// replaced.
pub fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn deserialize(table: Table, context: &str) -> Result<RunConfig> {
    serde_path_to_error::deserialize(Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        let inner = inner.trim_end();
        match (context.is_empty(), path.as_str()) {
            (true, ".") => anyhow!("config error: {inner}"),
            (true, p) => anyhow!("config error at `{p}`: {inner}"),
            (false, ".") => anyhow!("config error in {context}: {inner}"),
            (false, p) => anyhow!("config error at `{context}.{p}`: {inner}"),
        }
    })
}

fn finish(mut config: RunConfig, overrides: &Overrides, context: &str) -> Result<RunConfig> {
    overrides.apply(&mut config);
    config.validate().map_err(|e| {
        if context.is_empty() {
            anyhow!("config error: {e}")
        } else {
            anyhow!("config error in {context}: {e}")
        }
    })?;
    Ok(config)
}

/// Parse a single-run document.
pub fn parse_run(mut table: Table, overrides: &Overrides) -> Result<RunConfig> {
    if table.remove("compare").is_some() {
        bail!("config error: this file has a `compare` block; use the compare command");
    }
    finish(deserialize(table, "")?, overrides, "")
}

/// Parse a document with a `compare` block into its methods.
pub fn parse_compare(mut table: Table, overrides: &Overrides) -> Result<Vec<Method>> {
    let entries = match table.remove("compare") {
        Some(Value::Array(items)) => items,
        Some(other) => bail!(
            "config error at `compare`: expected an array of tables, found {}",
            other.type_str()
        ),
        None => bail!("config error: missing `compare` block"),
    };
    if entries.is_empty() {
        bail!("config error at `compare`: no methods listed");
    }
    let mut names = BTreeSet::new();
    let mut methods = Vec::with_capacity(entries.len());
    for (i, entry) in entries.into_iter().enumerate() {
        let at = format!("compare[{i}]");
        let Value::Table(mut entry) = entry else {
            bail!("config error at `{at}`: expected a table");
        };
        let name = match entry.remove("name") {
            Some(Value::String(s)) => s,
            Some(_) => bail!("config error at `{at}.name`: expected a string"),
            None => bail!("config error in {at}: missing field `name`"),
        };
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        {
            bail!(
                "config error at `{at}.name`: {name:?} must be non-empty and use only letters, digits, '_', '-' or '.'"
            );
        }
        if name == "summary" {
            bail!("config error at `{at}.name`: \"summary\" is reserved");
        }
        if !names.insert(name.clone()) {
            bail!("config error at `{at}.name`: duplicate method name {name:?}");
        }
        if entry.contains_key("problem") {
            bail!("config error at `{at}.problem`: methods share the top-level problem");
        }
        let mut merged = table.clone();
        merge(&mut merged, entry);
        let config = finish(deserialize(merged, &at)?, overrides, &at)?;
        methods.push(Method { name, config });
    }
    Ok(methods)
}

#[cfg(test)]
mod tests {
    use super::*;
    use shiftcomp::harness::Algorithm;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    const PROBLEM: &str = r#"
[problem]
loss = "ridge"
workers = 2
data = { type = "synthetic", rows = 20, dim = 4 }
"#;

    #[test]
    fn merge_recurses_into_tables() {
        let mut a: Table = "x = 1\n[t]\na = 1\nb = 2".parse().unwrap();
        let b: Table = "y = 2\n[t]\nb = 3".parse().unwrap();
        merge(&mut a, b);
        assert_eq!(a["x"].as_integer(), Some(1));
        assert_eq!(a["y"].as_integer(), Some(2));
        assert_eq!(a["t"]["a"].as_integer(), Some(1));
        assert_eq!(a["t"]["b"].as_integer(), Some(3));
    }

    #[test]
    fn include_is_relative_and_overridable() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("shared")).unwrap();
        write(&dir.path().join("shared"), "p.toml", PROBLEM);
        let main = write(
            dir.path(),
            "run.toml",
            "include = \"shared/p.toml\"\nalgorithm = \"gdci\"\n[problem]\nworkers = 4\n",
        );
        let cfg = parse_run(load_table(&main).unwrap(), &Overrides::default()).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Gdci);
        assert_eq!(cfg.problem.workers, 4);
    }

    #[test]
    fn data_paths_follow_the_file_that_sets_them() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("p")).unwrap();
        write(
            &dir.path().join("p"),
            "lib.toml",
            "[problem]\nloss = \"logistic\"\nworkers = 2\ndata = { type = \"libsvm\", path = \"d/x.svm\" }\n",
        );
        let main = write(
            dir.path(),
            "run.toml",
            "include = \"p/lib.toml\"\nalgorithm = \"gdci\"\n",
        );
        let t = load_table(&main).unwrap();
        let got = PathBuf::from(t["problem"]["data"]["path"].as_str().unwrap());
        let want = fs::canonicalize(dir.path().join("p"))
            .unwrap()
            .join("d/x.svm");
        assert_eq!(got, want);
    }

    #[test]
    fn include_cycles_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.toml", "include = \"b.toml\"");
        let a = dir.path().join("a.toml");
        write(dir.path(), "b.toml", "include = \"a.toml\"");
        let err = load_table(&a).unwrap_err().to_string();
        assert!(err.contains("cycle"), "{err}");
    }

    #[test]
    fn missing_algorithm_names_the_field() {
        let t: Table = PROBLEM.parse().unwrap();
        let err = parse_run(t, &Overrides::default()).unwrap_err().to_string();
        assert!(err.contains("algorithm"), "{err}");
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let t: Table = format!("algorithm = \"gdci\"\n{PROBLEM}[steps]\ngama = 1.0\n")
            .parse()
            .unwrap();
        let err = parse_run(t, &Overrides::default()).unwrap_err().to_string();
        assert!(
            err.contains("`steps.gama`") || err.contains("gama"),
            "{err}"
        );
        assert!(err.contains("steps"), "{err}");
    }

    #[test]
    fn overrides_win_and_are_validated() {
        let t: Table = format!("algorithm = \"gdci\"\neps = 1e-3\n{PROBLEM}")
            .parse()
            .unwrap();
        let o = Overrides {
            eps: Some(1e-6),
            seeds: Some(3),
            budget_iters: Some(7),
            ..Default::default()
        };
        let cfg = parse_run(t.clone(), &o).unwrap();
        assert_eq!((cfg.eps, cfg.seeds, cfg.budget.iterations), (1e-6, 3, 7));
        let bad = Overrides {
            eps: Some(0.0),
            ..Default::default()
        };
        assert!(parse_run(t, &bad).is_err());
    }

    #[test]
    fn compare_entries_merge_over_the_base() {
        let text = format!(
            "eps = 1e-4\n{PROBLEM}[[compare]]\nname = \"a\"\nalgorithm = \"gdci\"\n\
             [[compare]]\nname = \"b\"\nalgorithm = \"vr_gdci\"\neps = 1e-5\n"
        );
        let methods = parse_compare(text.parse().unwrap(), &Overrides::default()).unwrap();
        assert_eq!(methods.len(), 2);
        assert_eq!(methods[0].config.eps, 1e-4);
        assert_eq!(methods[1].config.eps, 1e-5);
        assert_eq!(methods[1].config.algorithm, Algorithm::VrGdci);
    }

    #[test]
    fn compare_rejects_bad_blocks() {
        let cases = [
            (format!("algorithm = \"gdci\"\n{PROBLEM}"), "missing `compare`"),
            (format!("compare = []\n{PROBLEM}"), "no methods"),
            (
                format!("{PROBLEM}[[compare]]\nalgorithm = \"gdci\""),
                "`name`",
            ),
            (
                format!("{PROBLEM}[[compare]]\nname = \"a\"\nalgorithm = \"gdci\"\n[[compare]]\nname = \"a\"\nalgorithm = \"gdci\""),
                "duplicate",
            ),
            (
                format!("{PROBLEM}[[compare]]\nname = \"a/b\"\nalgorithm = \"gdci\""),
                "compare[0].name",
            ),
            (
                format!("{PROBLEM}[[compare]]\nname = \"a\"\nalgorithm = \"gdci\"\n[compare.problem]\nworkers = 3"),
                "share",
            ),
            (
                format!("{PROBLEM}[[compare]]\nname = \"a\"\nalgorithm = \"gdci\"\nbogus = 1"),
                "compare[0]",
            ),
        ];
        for (text, needle) in cases {
            let err = parse_compare(text.parse().unwrap(), &Overrides::default())
                .unwrap_err()
                .to_string();
            assert!(err.contains(needle), "{needle}: {err}");
        }
    }

    #[test]
    fn run_rejects_compare_documents() {
        let text = format!("{PROBLEM}[[compare]]\nname = \"a\"\nalgorithm = \"gdci\"");
        assert!(parse_run(text.parse().unwrap(), &Overrides::default()).is_err());
    }
}
