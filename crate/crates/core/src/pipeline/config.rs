//! `key = value` configuration with `#` comments. Unknown keys are
//! rejected so that typos do not silently fall back to defaults.

use std::path::Path;

use crate::error::{Error, Result};
use crate::preference::{is_combining, model::is_known_function, CombineMode, DEFAULT_ALPHA, DEFAULT_FUNCTIONS};
use crate::repair::{DEFAULT_PENALTY, DEFAULT_SPAN_CAP};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// List length used by `select`.
    pub nbest_n: usize,
    /// List length used by `train` and `evaluate`.
    pub eval_n: usize,
    pub repair: bool,
    pub repair_penalty: f64,
    pub span_cap: usize,
    pub alpha: f64,
    /// Minimum pattern count kept by specialisation.
    pub k: usize,
    pub max_sweeps: usize,
    pub phase2_delta: f64,
    pub ridge: f64,
    pub fallback_general: bool,
    /// Weight of word similarity against bracket F1.
    pub word_weight: f64,
    pub functions: Vec<String>,
    pub combine: CombineMode,
    pub slt0_scoring: bool,
    /// Folds for cross-fitted object tables while fitting scaling factors;
    /// 1 scores training analyses with tables built from themselves.
    pub table_folds: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            nbest_n: 5,
            eval_n: 10,
            repair: true,
            repair_penalty: DEFAULT_PENALTY,
            span_cap: DEFAULT_SPAN_CAP,
            alpha: DEFAULT_ALPHA,
            k: 1,
            max_sweeps: 20,
            phase2_delta: 0.1,
            ridge: 1e-6,
            fallback_general: true,
            word_weight: 0.5,
            functions: DEFAULT_FUNCTIONS.iter().map(|s| s.to_string()).collect(),
            combine: CombineMode::Average,
            slt0_scoring: false,
            table_folds: 5,
            seed: 1,
        }
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, found {v:?}")),
    }
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("bad number {v:?}"))
}

impl Config {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "nbest_n" => self.nbest_n = num(v)?,
            "eval_n" => self.eval_n = num(v)?,
            "repair" => self.repair = parse_bool(v)?,
            "repair_penalty" => self.repair_penalty = num(v)?,
            "span_cap" => self.span_cap = num(v)?,
            "alpha" => self.alpha = num(v)?,
            "k" => self.k = num(v)?,
            "max_sweeps" => self.max_sweeps = num(v)?,
            "phase2_delta" => self.phase2_delta = num(v)?,
            "ridge" => self.ridge = num(v)?,
            "fallback_general" => self.fallback_general = parse_bool(v)?,
            "word_weight" => self.word_weight = num(v)?,
            "functions" => {
                self.functions = v
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            }
            "combine" => self.combine = v.parse()?,
            "slt0_scoring" => self.slt0_scoring = parse_bool(v)?,
            "table_folds" => self.table_folds = num(v)?,
            "seed" => self.seed = num(v)?,
            other => return Err(format!("unknown setting '{other}'")),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format("config", i + 1, format!("expected key = value, found {line:?}")))?;
            c.set(k, v).map_err(|m| Error::format("config", i + 1, m))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&crate::error::read_file(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.nbest_n == 0 || self.eval_n == 0 {
            return bad("list lengths must be positive".into());
        }
        if self.span_cap == 0 {
            return bad("span_cap must be positive".into());
        }
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.table_folds == 0 {
            return bad("table_folds must be at least 1".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.word_weight) {
            return bad(format!("word_weight must lie in [0, 1], got {}", self.word_weight));
        }
        if self.ridge < 0.0 || self.phase2_delta <= 0.0 || !self.repair_penalty.is_finite() {
            return bad("ridge must be non-negative and phase2_delta positive".into());
        }
        if !self.functions.iter().any(|f| f == crate::preference::SPEECH) {
            return bad("the speech function must be registered".into());
        }
        for f in &self.functions {
            if !is_known_function(f) {
                return bad(format!("unknown preference function '{f}'"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        if !self.functions.iter().all(|f| seen.insert(f)) {
            return bad("duplicate preference function".into());
        }
        Ok(())
    }

    /// Registered combining functions, in order.
    pub fn combining_functions(&self) -> Vec<String> {
        self.functions.iter().filter(|f| is_combining(f)).cloned().collect()
    }

    pub fn to_file_string(&self) -> String {
        format!(
            "nbest_n = {}\neval_n = {}\nrepair = {}\nrepair_penalty = {:?}\nspan_cap = {}\nalpha = {:?}\nk = {}\n\
             max_sweeps = {}\nphase2_delta = {:?}\nridge = {:?}\nfallback_general = {}\nword_weight = {:?}\n\
             functions = {}\ncombine = {}\nslt0_scoring = {}\ntable_folds = {}\nseed = {}\n",
            self.nbest_n,
            self.eval_n,
            self.repair,
            self.repair_penalty,
            self.span_cap,
            self.alpha,
            self.k,
            self.max_sweeps,
            self.phase2_delta,
            self.ridge,
            self.fallback_general,
            self.word_weight,
            self.functions.join(","),
            self.combine,
            self.slt0_scoring,
            self.table_folds,
            self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.to_file_string()).unwrap(), c);
        assert_eq!(c.combining_functions().len(), 6);
    }

    #[test]
    fn overrides_and_errors() {
        let c = Config::parse("# comment\nk = 2\nfunctions = speech, rules\nfallback_general = no # inline\n").unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.functions, vec!["speech", "rules"]);
        assert!(!c.fallback_general);
        assert!(matches!(Config::parse("bogus = 1"), Err(Error::Format { line: 1, .. })));
        assert!(Config::parse("k = two").is_err());
        assert!(matches!(Config::parse("functions = rules"), Err(Error::Validation(_))));
        assert!(Config::parse("alpha = 0").is_err());
        assert!(Config::parse("functions = speech,speech").is_err());
    }
}
