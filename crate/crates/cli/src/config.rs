use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Evenly spaced values from `start` to `stop` inclusive, in units of π.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Grid {
    pub const fn new(start: f64, stop: f64, steps: usize) -> Self {
        Self { start, stop, steps }
    }

    pub fn validate(&self, name: &str, lo: f64, hi: f64) -> Result<(), CliError> {
        if self.steps == 0 {
            return Err(CliError::Config(format!("{name}: grid needs at least one step")));
        }
        for v in [self.start, self.stop] {
            if !(lo..=hi).contains(&v) {
                return Err(CliError::Config(format!("{name}: {v} outside [{lo}, {hi}] (units of pi)")));
            }
        }
        Ok(())
    }

    /// Grid values in radians.
    pub fn radians(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start * std::f64::consts::PI];
        }
        let step = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| (self.start + step * i as f64) * std::f64::consts::PI)
            .collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.steps)
    }
}

/// `START:STOP:STEPS`, or a single value.
impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
        match parts.as_slice() {
            [v] => Ok(Grid::new(num(v)?, num(v)?, 1)),
            [a, b, n] => Ok(Grid::new(
                num(a)?,
                num(b)?,
                n.trim().parse().map_err(|e| format!("`{n}`: {e}"))?,
            )),
            _ => Err(format!("expected START:STOP:STEPS or a single value, got `{s}`")),
        }
    }
}

/// Reads a JSON config, or returns the defaults when no file is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Overwrites `target` with `flag` when the flag was given.
pub fn set<T>(target: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *target = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_and_values() {
        let g: Grid = "0.2:1:5".parse().unwrap();
        assert_eq!(g, Grid::new(0.2, 1.0, 5));
        let r = g.radians();
        assert_eq!(r.len(), 5);
        assert!((r[4] - std::f64::consts::PI).abs() < 1e-15);
        let single: Grid = "1".parse().unwrap();
        assert_eq!(single.radians(), vec![std::f64::consts::PI]);
        assert!("1:2".parse::<Grid>().is_err());
        assert!("a:1:2".parse::<Grid>().is_err());
        assert!(Grid::new(0.0, 1.5, 3).validate("theta", 0.0, 1.0).is_err());
        assert!(Grid::new(0.0, 1.0, 0).validate("theta", 0.0, 1.0).is_err());
    }

    #[test]
    fn flags_override_file_values() {
        #[derive(Default, Deserialize)]
        #[serde(default)]
        struct C {
            a: u32,
            b: u32,
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"a": 3, "b": 4}"#).unwrap();
        let mut c: C = load(Some(&path)).unwrap();
        set(&mut c.b, Some(9));
        set(&mut c.a, None);
        assert_eq!((c.a, c.b), (3, 9));
        let d: C = load(None).unwrap();
        assert_eq!((d.a, d.b), (0, 0));
        std::fs::write(&path, "{").unwrap();
        assert!(load::<C>(Some(&path)).is_err());
    }
}
