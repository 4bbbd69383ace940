//! Layered run configuration: defaults < config file < command-line flags.
//!
//! The config file is a flat `key = value` format with one optional
//! `[subcommand]` section per command; keys before any section apply
//! globally. Unknown keys and unknown sections are hard errors. Angle-valued
//! keys accept a literal `pi` suffix (`0.2pi`, `1e-3pi`, `pi`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// Error classes mapped to exit codes: validation -> 2, numeric/io -> 1.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "error[validation]: {msg}"),
            CliError::Numeric(msg) => write!(f, "error[numeric]: {msg}"),
            CliError::Io(msg) => write!(f, "error[io]: {msg}"),
        }
    }
}

impl From<secdrive::Error> for CliError {
    fn from(err: secdrive::Error) -> Self {
        use secdrive::Error::*;
        match err {
            InvalidSpin(_) | InvalidQuantumNumber { .. } | InvalidPulse(_)
            | InvalidConfig(_) | InvalidInput(_) => CliError::Validation(err.to_string()),
            _ => CliError::Numeric(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Parses a number with an optional literal `pi` suffix.
pub fn parse_angle(raw: &str) -> Result<f64, String> {
    let s = raw.trim();
    if s.is_empty() {
        return Err("empty angle".into());
    }
    let value = match s.strip_suffix("pi") {
        Some(prefix) => {
            let prefix = prefix.trim();
            let factor = match prefix {
                "" => 1.0,
                "-" => -1.0,
                _ => prefix
                    .parse::<f64>()
                    .map_err(|_| format!("cannot parse angle '{raw}'"))?,
            };
            factor * std::f64::consts::PI
        }
        None => s
            .parse::<f64>()
            .map_err(|_| format!("cannot parse angle '{raw}'"))?,
    };
    if !value.is_finite() {
        return Err(format!("angle '{raw}' is not finite"));
    }
    Ok(value)
}

/// Parsed config file: global entries plus per-command sections, in file
/// order.
#[derive(Debug, Default)]
pub struct FileConfig {
    global: Vec<(String, String)>,
    sections: BTreeMap<String, Vec<(String, String)>>,
}

pub const COMMANDS: [&str; 8] = [
    "simulate",
    "phase",
    "levels",
    "bloch",
    "truncate",
    "adiabaticity",
    "universality",
    "selftest",
];

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {path:?}: {e}")))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = FileConfig::default();
        let mut section: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !COMMANDS.contains(&name) {
                    return Err(CliError::Validation(format!(
                        "line {}: unknown section [{name}]",
                        lineno + 1
                    )));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            let entry = (key.trim().to_string(), value.trim().to_string());
            match &section {
                Some(name) => cfg.sections.entry(name.clone()).or_default().push(entry),
                None => cfg.global.push(entry),
            }
        }
        Ok(cfg)
    }

    /// Entries that apply to `command`: global scope first, then the matching
    /// section, preserving file order (later entries override earlier ones).
    pub fn entries_for(&self, command: &str) -> Vec<(String, String)> {
        let mut out = self.global.clone();
        if let Some(section) = self.sections.get(command) {
            out.extend(section.iter().cloned());
        }
        out
    }

    /// True when the file contributes nothing to `command` despite having
    /// sections for other commands (a re-fed sidecar for the wrong command).
    fn only_foreign_sections(&self, command: &str) -> bool {
        self.global.is_empty()
            && !self.sections.is_empty()
            && !self.sections.contains_key(command)
    }
}

/// File entries validated against a command's accepted key set; later
/// occurrences override earlier ones.
pub struct Resolver {
    values: BTreeMap<String, String>,
}

/// Keys accepted for every command (informational sidecar keys included so a
/// metadata sidecar can be re-fed as a config file).
const COMMON_KEYS: [&str; 4] = ["command", "artifact_version", "output_dir", "format"];

impl Resolver {
    pub fn new(
        file: Option<&FileConfig>,
        command: &str,
        accepted: &[&str],
    ) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        if let Some(cfg) = file {
            if cfg.only_foreign_sections(command) {
                let sections: Vec<&str> =
                    cfg.sections.keys().map(String::as_str).collect();
                return Err(CliError::Validation(format!(
                    "config has no entries for command '{command}' (sections: {})",
                    sections.join(", ")
                )));
            }
            for (key, value) in cfg.entries_for(command) {
                if !accepted.contains(&key.as_str()) && !COMMON_KEYS.contains(&key.as_str()) {
                    return Err(CliError::Validation(format!(
                        "unknown key '{key}' for command '{command}'"
                    )));
                }
                values.insert(key, value);
            }
        }
        if let Some(cmd) = values.get("command") {
            if cmd != command {
                return Err(CliError::Validation(format!(
                    "config is for command '{cmd}', not '{command}'"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn f64(&self, key: &str, slot: &mut f64) -> CliResult<()> {
        if let Some(raw) = self.get(key) {
            *slot = raw.parse().map_err(|_| {
                CliError::Validation(format!("key '{key}': cannot parse '{raw}' as a number"))
            })?;
        }
        Ok(())
    }

    pub fn angle(&self, key: &str, slot: &mut f64) -> CliResult<()> {
        if let Some(raw) = self.get(key) {
            *slot = parse_angle(raw)
                .map_err(|e| CliError::Validation(format!("key '{key}': {e}")))?;
        }
        Ok(())
    }

    pub fn usize(&self, key: &str, slot: &mut usize) -> CliResult<()> {
        if let Some(raw) = self.get(key) {
            *slot = raw.parse().map_err(|_| {
                CliError::Validation(format!("key '{key}': cannot parse '{raw}' as an integer"))
            })?;
        }
        Ok(())
    }

    pub fn string(&self, key: &str, slot: &mut String) -> CliResult<()> {
        if let Some(raw) = self.get(key) {
            *slot = raw.to_string();
        }
        Ok(())
    }

    pub fn bool(&self, key: &str, slot: &mut bool) -> CliResult<()> {
        if let Some(raw) = self.get(key) {
            *slot = match raw {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                other => {
                    return Err(CliError::Validation(format!(
                        "key '{key}': cannot parse '{raw}' as a boolean (got '{other}')"
                    )))
                }
            };
        }
        Ok(())
    }
}

/// Output format of sweep files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(raw: &str) -> CliResult<Self> {
        match raw {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(CliError::Validation(format!(
                "format must be 'csv' or 'json' (got '{other}')"
            ))),
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }

    pub fn name(&self) -> &'static str {
        self.extension()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angle_parsing() {
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert_eq!(parse_angle("0.2pi").unwrap(), 0.2 * PI);
        assert_eq!(parse_angle("1e-3pi").unwrap(), 1e-3 * PI);
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("-pi").unwrap(), -PI);
        assert_eq!(parse_angle("-0.5pi").unwrap(), -0.5 * PI);
        assert!(parse_angle("twopi").is_err());
        assert!(parse_angle("").is_err());
    }

    #[test]
    fn file_sections_and_precedence() {
        let cfg = FileConfig::parse(
            "# comment\nnu = 2.0\n[phase]\nnu = 3.0\nm = -0.5\n[levels]\nn = 11\n",
        )
        .unwrap();
        let resolver = Resolver::new(Some(&cfg), "phase", &["nu", "m", "delta"]).unwrap();
        // Section entry overrides the global one.
        let mut nu = 1.0;
        resolver.f64("nu", &mut nu).unwrap();
        assert_eq!(nu, 3.0);
        let resolver = Resolver::new(Some(&cfg), "levels", &["nu", "n"]).unwrap();
        let mut nu = 1.0;
        resolver.f64("nu", &mut nu).unwrap();
        assert_eq!(nu, 2.0);
        let mut n = 0usize;
        resolver.usize("n", &mut n).unwrap();
        assert_eq!(n, 11);
    }

    #[test]
    fn unknown_keys_and_sections_are_hard_errors() {
        let cfg = FileConfig::parse("mystery = 1\n").unwrap();
        assert!(Resolver::new(Some(&cfg), "levels", &["nu", "n"]).is_err());
        assert!(FileConfig::parse("[warp]\nspeed = 9\n").is_err());
        assert!(FileConfig::parse("just a line\n").is_err());
    }

    #[test]
    fn command_key_must_match() {
        let cfg = FileConfig::parse("[levels]\ncommand = levels\nn = 5\n").unwrap();
        assert!(Resolver::new(Some(&cfg), "levels", &["nu", "n"]).is_ok());
        assert!(Resolver::new(Some(&cfg), "bloch", &["nu", "n"]).is_err());
    }

    #[test]
    fn error_display_is_single_line() {
        let e = CliError::Validation("nu must be > 0 (got -1)".into());
        let line = e.to_string();
        assert!(line.starts_with("error[validation]: "));
        assert!(!line.contains('\n'));
        assert_eq!(e.exit_code(), 2);
        assert_eq!(CliError::Numeric("x".into()).exit_code(), 1);
    }
}
