//! TOML run configuration: a scenario (canned or custom), integration
//! overrides, output settings and optional sweep axes.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenarios::{Overrides, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub integration: Overrides,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write the final state as a binary dump (custom systems only).
    #[serde(default)]
    pub state_dump: bool,
}

/// Cartesian product of parameter axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axes: Vec<Axis>,
}

/// Dotted path into the configuration, e.g. `scenario.s4.beta` or
/// `scenario.s2.points_b.1`, and the values it takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    pub values: Vec<toml::Value>,
}

/// One concrete configuration of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    /// `path=value` pairs, one per axis.
    pub assignments: Vec<(String, String)>,
    pub config: RunConfig,
}

impl RunConfig {
    pub fn new(scenario: Scenario) -> Self {
        RunConfig {
            scenario,
            integration: Overrides::default(),
            output: OutputConfig::default(),
            sweep: None,
        }
    }

    /// Parse and validate.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.integration.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::config("integration.dt", "dt must be positive"));
            }
        }
        if let Some(h) = self.integration.horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::config("integration.horizon", "horizon must be positive"));
            }
        }
        if self.output.state_dump && !matches!(self.scenario, Scenario::Custom(_)) {
            return Err(Error::config(
                "output.state_dump",
                "state dumps are only available for custom systems",
            ));
        }
        if let Some(sweep) = &self.sweep {
            for (i, axis) in sweep.axes.iter().enumerate() {
                if axis.values.is_empty() {
                    return Err(Error::config(format!("sweep.axes[{i}].values"), "axis has no values"));
                }
                if !axis.path.starts_with("scenario.") && !axis.path.starts_with("integration.") {
                    return Err(Error::config(
                        format!("sweep.axes[{i}].path"),
                        "sweeps may only vary `scenario.*` or `integration.*`",
                    ));
                }
            }
        }
        let head = format!("scenario.{}", self.scenario.id());
        self.scenario.validate().map_err(|e| e.under(&head))
    }

    /// Expand the sweep into concrete configurations, last axis fastest.
    /// A configuration without a sweep expands to itself.
    pub fn expand(&self) -> Result<Vec<SweepPoint>> {
        let mut base = self.clone();
        let axes = base.sweep.take().map(|s| s.axes).unwrap_or_default();
        let tree = toml::Value::try_from(&base).map_err(|e| Error::Parse(e.to_string()))?;
        let mut points = vec![(tree, Vec::new())];
        for axis in &axes {
            let mut next = Vec::with_capacity(points.len() * axis.values.len());
            for (tree, assigned) in &points {
                for v in &axis.values {
                    let mut t = tree.clone();
                    set_path(&mut t, &axis.path, v.clone())?;
                    let mut a: Vec<(String, String)> = assigned.clone();
                    a.push((axis.path.clone(), v.to_string()));
                    next.push((t, a));
                }
            }
            points = next;
        }
        points
            .into_iter()
            .enumerate()
            .map(|(index, (tree, assignments))| {
                let config: RunConfig = tree.try_into().map_err(|e: toml::de::Error| {
                    Error::Parse(format!("sweep point {index}: {e}"))
                })?;
                config.validate()?;
                Ok(SweepPoint {
                    index,
                    assignments,
                    config,
                })
            })
            .collect()
    }
}

fn set_path(tree: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let bad = |msg: &str| Error::config(format!("sweep `{path}`"), msg.to_string());
    let mut parts = path.split('.').peekable();
    let mut node = tree;
    while let Some(key) = parts.next() {
        let last = parts.peek().is_none();
        node = match node {
            toml::Value::Table(t) => {
                if last {
                    t.insert(key.to_string(), value);
                    return Ok(());
                }
                t.entry(key.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()))
            }
            toml::Value::Array(a) => {
                let i: usize = key.parse().map_err(|_| bad("array segments must be indices"))?;
                let slot = a.get_mut(i).ok_or_else(|| bad("index out of range"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(bad("path descends into a scalar")),
        };
    }
    Err(bad("empty path"))
}
