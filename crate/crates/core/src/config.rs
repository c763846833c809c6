//! Numerical knobs shared by every routine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericConfig {
    /// Trapezoid nodes on the unit circle.
    pub angular_nodes: usize,
    /// Relative tolerance for implicit solves.
    pub root_tol: f64,
    pub max_iter: usize,
    /// Half-width of the slab used by the mollified oracle.
    pub mollify_eps: f64,
    pub mc_samples: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig { angular_nodes: 256, root_tol: 1e-13, max_iter: 200, mollify_eps: 1e-3, mc_samples: 200_000 }
    }
}

impl NumericConfig {
    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.angular_nodes = nodes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.angular_nodes < 16 {
            return Err(Error::Config(format!("angular_nodes must be at least 16, got {}", self.angular_nodes)));
        }
        if !(self.root_tol > 0.0 && self.root_tol.is_finite()) {
            return Err(Error::Config(format!("root_tol must be positive, got {}", self.root_tol)));
        }
        if !(self.mollify_eps > 0.0 && self.mollify_eps.is_finite()) {
            return Err(Error::Config(format!("mollify_eps must be positive, got {}", self.mollify_eps)));
        }
        if self.max_iter == 0 || self.mc_samples == 0 {
            return Err(Error::Config("max_iter and mc_samples must be positive".into()));
        }
        Ok(())
    }

    /// Apply a flat `key = value` text on top of `self`.
    ///
    /// Blank lines and lines starting with `#` are ignored. Keys are the
    /// field names of this struct.
    pub fn apply_text(mut self, text: &str) -> Result<Self> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, e)))?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse `{v}` for {key}"))
        }
        match key {
            "angular_nodes" => self.angular_nodes = parse(key, value)?,
            "root_tol" => self.root_tol = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "mollify_eps" => self.mollify_eps = parse(key, value)?,
            "mc_samples" => self.mc_samples = parse(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }
}
