//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::str::FromStr;

use psdim_core::{Error, MapSpec, Result, C};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    /// Lines of `key = value`; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Config(format!("bad key {key:?}")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// `key=value` strings; later ones win.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {:?} is not key=value", o.as_ref())))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.entries.get(key).map(String::as_str).unwrap_or(default)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key} = {v:?} does not parse"))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.parsed(key)?.ok_or_else(|| Error::Config(format!("missing {key}")))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Comma-separated list of floats.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.entries.get(key) else { return Ok(None) };
        v.split(',')
            .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("{key}: {x:?} is not a number"))))
            .collect::<Result<Vec<f64>>>()
            .map(Some)
    }

    /// `{prefix}_re` and `{prefix}_im`; `None` when neither is set.
    pub fn complex(&self, prefix: &str) -> Result<Option<C>> {
        let (re, im) = (format!("{prefix}_re"), format!("{prefix}_im"));
        if !self.has(&re) && !self.has(&im) {
            return Ok(None);
        }
        Ok(Some(C::new(self.f64_or(&re, 0.0)?, self.f64_or(&im, 0.0)?)))
    }

    /// `family = tan` with `lambda_re/lambda_im`, or `family = mobius_exp`
    /// with the coefficient pairs `a, b, c, d`.
    pub fn map_spec(&self) -> Result<MapSpec> {
        match self.str_or("family", "tan") {
            "tan" | "tangent" => {
                let lambda = self.complex("lambda")?.ok_or_else(|| Error::Config("missing lambda_re/lambda_im".into()))?;
                MapSpec::tangent(lambda)
            }
            "mobius_exp" => {
                let coeff = |p: &str| self.complex(p)?.ok_or_else(|| Error::Config(format!("missing {p}_re/{p}_im")));
                MapSpec::mobius_exp(coeff("a")?, coeff("b")?, coeff("c")?, coeff("d")?)
            }
            other => Err(Error::Config(format!("unknown family {other:?}"))),
        }
    }
}

/// `0+3.14159265i`, `-1.5`, `2i` and the like, split into `{key}_re` and
/// `{key}_im` entries in full round-trip precision.
pub fn complex_overrides(key: &str, text: &str) -> Result<Vec<String>> {
    let z = C::from_str(text.trim()).map_err(|_| Error::Config(format!("{key}: {text:?} is not a complex number")))?;
    Ok(vec![format!("{key}_re={:?}", z.re), format!("{key}_im={:?}", z.im)])
}
