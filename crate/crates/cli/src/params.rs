//! Key resolution: `--key value` flags over the config file over defaults,
//! with `DOCFORGE_SEED` as the last fallback for `seed`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

/// Why a run stopped; each kind has its own exit status.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Input(String),
    Validation(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Config(_) => 2,
            Failure::Input(_) => 3,
            Failure::Validation(_) => 4,
        })
    }
}

impl Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

/// Library errors raised while reading data are input errors; the rest
/// reject the data or the parameters it was combined with.
impl From<docforge::Error> for Failure {
    fn from(e: docforge::Error) -> Self {
        use docforge::Error as E;
        match e {
            E::Io { .. } | E::Json(_) | E::Format { .. } | E::InvalidVocab(_) => Failure::Input(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

pub const SEED_ENV: &str = "DOCFORGE_SEED";

/// Raw values for one run plus the effective value of every key read.
pub struct Params {
    raw: BTreeMap<String, String>,
    env_seed: Option<String>,
    resolved: BTreeMap<String, String>,
}

impl Params {
    pub fn new(raw: BTreeMap<String, String>, env_seed: Option<String>) -> Self {
        Params { raw, env_seed, resolved: BTreeMap::new() }
    }

    fn lookup(&self, key: &str) -> Option<String> {
        self.raw.get(key).cloned()
    }

    fn parse<T: FromStr>(&mut self, key: &str, v: String) -> Outcome<T>
    where
        T::Err: Display,
    {
        let parsed = v
            .parse()
            .map_err(|e| Failure::Config(format!("{key}={v}: {e}")))?;
        self.resolved.insert(key.to_string(), v);
        Ok(parsed)
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, default: T) -> Outcome<T>
    where
        T::Err: Display,
    {
        match self.lookup(key) {
            Some(v) => self.parse(key, v),
            None => {
                self.resolved.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    pub fn opt<T: FromStr>(&mut self, key: &str) -> Outcome<Option<T>>
    where
        T::Err: Display,
    {
        self.lookup(key).map(|v| self.parse(key, v)).transpose()
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Outcome<T>
    where
        T::Err: Display,
    {
        self.opt(key)?
            .ok_or_else(|| Failure::Config(format!("missing required key `{key}`")))
    }

    pub fn path(&mut self, key: &str) -> Outcome<PathBuf> {
        self.require(key)
    }

    pub fn opt_path(&mut self, key: &str) -> Outcome<Option<PathBuf>> {
        self.opt(key)
    }

    /// The seed of a randomized stage: flag or config, else the environment.
    pub fn seed(&mut self) -> Outcome<u64> {
        if let Some(v) = self.lookup("seed") {
            return self.parse("seed", v);
        }
        match self.env_seed.clone() {
            Some(v) => self.parse("seed", v),
            None => Err(Failure::Config(format!(
                "this stage is randomized: set `seed` (flag or config) or {SEED_ENV}"
            ))),
        }
    }

    /// Keys and the effective values used, for the run record.
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, &str)], env: Option<&str>) -> Params {
        let raw = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        Params::new(raw, env.map(str::to_string))
    }

    #[test]
    fn defaults_are_recorded() {
        let mut p = params(&[("k", "7")], None);
        assert_eq!(p.get("k", 100usize).unwrap(), 7);
        assert_eq!(p.get("probes", 16usize).unwrap(), 16);
        assert_eq!(p.resolved()["probes"], "16");
    }

    #[test]
    fn seed_falls_back_to_environment() {
        assert_eq!(params(&[], Some("9")).seed().unwrap(), 9);
        assert_eq!(params(&[("seed", "3")], Some("9")).seed().unwrap(), 3);
        assert!(matches!(params(&[], None).seed(), Err(Failure::Config(_))));
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(params(&[("k", "many")], None).get("k", 1usize), Err(Failure::Config(_))));
        assert!(matches!(params(&[], None).path("store"), Err(Failure::Config(_))));
    }
}
