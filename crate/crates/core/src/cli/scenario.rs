//! Scenario files: named maps and balls plus the command that uses them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::Polyline;
use crate::geom::Vector;
use crate::glue::GlueTolerances;
use crate::maps::{compose, construct_builtin, BallDiffeo, Builtin, Region, SmoothMap};
use crate::verify::{CheckSpec, SuiteSize};

pub const SCENARIO_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Extend,
    Linearize,
    Glue,
    Insert,
    Verify,
    Demo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Extend => "extend",
            Command::Linearize => "linearize",
            Command::Glue => "glue",
            Command::Insert => "insert",
            Command::Verify => "verify",
            Command::Demo => "demo",
        }
    }
}

/// A map built from built-in families and other named maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MapExpr {
    Builtin(Builtin),
    /// `compose: [A, B]` is `A ∘ B`.
    Compose(Vec<String>),
    Inverse(String),
}

fn default_margin() -> f64 {
    0.5
}

/// `B̄(center, radius)`, optionally carried by a named parametrization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    pub center: Vector,
    pub radius: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub source: String,
    pub target: String,
    pub map: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Polyline>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertSpec {
    /// The map `F` on `Ω`.
    pub outer: String,
    /// `Ω`; everything when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Region>,
    /// Ball `D₂` carrying the inner map `G`.
    pub inner: String,
    /// Ball `D₁` containing `D₂`.
    pub container: String,
    /// Where the correction may act; inside `D̊₁`.
    pub working_region: Region,
}

/// A user-specified check against named maps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioCheck {
    #[serde(flatten)]
    pub spec: CheckSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteScale {
    #[default]
    Full,
    Quick,
}

impl SuiteScale {
    pub fn size(self) -> SuiteSize {
        match self {
            SuiteScale::Full => SuiteSize::default(),
            SuiteScale::Quick => SuiteSize::quick(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<PathBuf>,
    /// Lattice points per axis for the grid file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_per_axis: Option<usize>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: String,
    pub dimension: usize,
    pub command: Command,
    #[serde(default)]
    pub maps: BTreeMap<String, MapExpr>,
    #[serde(default)]
    pub balls: BTreeMap<String, BallSpec>,
    /// Ball whose map is extended or linearized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairSpec>,
    /// Working region `U` for gluing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insert: Option<InsertSpec>,
    /// Map checked by the verify command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default)]
    pub tolerances: GlueTolerances,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub suite: SuiteScale,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<ScenarioCheck>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn schema(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Schema(format!("{path}: {msg}"))
}

/// Parse and validate a scenario.
pub fn parse_scenario(text: &[u8]) -> Result<Scenario> {
    let text = std::str::from_utf8(text)
        .map_err(|e| Error::Schema(format!("scenario is not UTF-8: {e}")))?;
    let mut de = serde_json::Deserializer::from_str(text);
    let s: Scenario = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let inner = e.inner();
        let path = e.path().to_string();
        Error::Schema(format!(
            "{path} (line {}, column {}): {inner}",
            inner.line(),
            inner.column()
        ))
    })?;
    s.validate()?;
    Ok(s)
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn require<'a, T>(&self, v: &'a Option<T>, field: &str) -> Result<&'a T> {
        v.as_ref().ok_or_else(|| {
            schema(
                field,
                format!("required by the {} command", self.command.name()),
            )
        })
    }

    fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(schema(
                "version",
                format!(
                    "unsupported version {:?}, expected {SCENARIO_VERSION:?}",
                    self.version
                ),
            ));
        }
        if self.dimension < 2 {
            return Err(schema("dimension", "must be at least 2"));
        }
        for (name, expr) in &self.maps {
            let path = format!("maps.{name}");
            match expr {
                MapExpr::Builtin(_) => {}
                MapExpr::Compose(parts) => {
                    if parts.is_empty() {
                        return Err(schema(&path, "empty composition"));
                    }
                    for (k, p) in parts.iter().enumerate() {
                        self.map_name(p, &format!("{path}.compose[{k}]"))?;
                    }
                }
                MapExpr::Inverse(p) => self.map_name(p, &format!("{path}.inverse"))?,
            }
        }
        // resolving catches cycles and per-family dimension errors
        for name in self.maps.keys() {
            self.resolve_map(name)?;
        }
        for (name, b) in &self.balls {
            let path = format!("balls.{name}");
            if let Some(m) = &b.map {
                self.map_name(m, &format!("{path}.map"))?;
            }
            if b.center.dim() != self.dimension {
                return Err(schema(
                    &format!("{path}.center"),
                    format!("expected {} coordinates", self.dimension),
                ));
            }
        }
        match self.command {
            Command::Extend | Command::Linearize => {
                let b = self.require(&self.input, "input")?;
                self.ball_name(b, "input")?;
                if self.command == Command::Extend {
                    self.require(&self.eps, "eps")?;
                }
            }
            Command::Glue => {
                self.require(&self.region, "region")?;
                self.require(&self.eps, "eps")?;
                if self.pairs.is_empty() {
                    return Err(schema("pairs", "the glue command needs at least one pair"));
                }
                for (k, p) in self.pairs.iter().enumerate() {
                    self.ball_name(&p.source, &format!("pairs[{k}].source"))?;
                    self.ball_name(&p.target, &format!("pairs[{k}].target"))?;
                    self.map_name(&p.map, &format!("pairs[{k}].map"))?;
                    if let Some(r) = &p.route {
                        if r.vertices.iter().any(|v| v.dim() != self.dimension) {
                            return Err(schema(
                                &format!("pairs[{k}].route"),
                                "vertex of the wrong dimension",
                            ));
                        }
                    }
                }
            }
            Command::Insert => {
                let ins = self.require(&self.insert, "insert")?;
                self.map_name(&ins.outer, "insert.outer")?;
                self.ball_name(&ins.inner, "insert.inner")?;
                self.ball_name(&ins.container, "insert.container")?;
            }
            Command::Verify => {
                let s = self.require(&self.subject, "subject")?;
                self.map_name(s, "subject")?;
            }
            Command::Demo => {}
        }
        for (k, c) in self.checks.iter().enumerate() {
            if let Some(r) = &c.reference {
                self.map_name(r, &format!("checks[{k}].reference"))?;
            }
        }
        Ok(())
    }

    fn map_name(&self, name: &str, path: &str) -> Result<()> {
        if name == "identity" || self.maps.contains_key(name) {
            Ok(())
        } else {
            Err(schema(path, format!("unknown map `{name}`")))
        }
    }

    fn ball_name(&self, name: &str, path: &str) -> Result<()> {
        if self.balls.contains_key(name) {
            Ok(())
        } else {
            Err(schema(path, format!("unknown ball `{name}`")))
        }
    }

    /// Build a named map. `identity` is always available.
    pub fn resolve_map(&self, name: &str) -> Result<Arc<SmoothMap>> {
        self.resolve_inner(name, &mut BTreeSet::new())
    }

    fn resolve_inner(&self, name: &str, stack: &mut BTreeSet<String>) -> Result<Arc<SmoothMap>> {
        let n = self.dimension;
        if name == "identity" && !self.maps.contains_key(name) {
            return Ok(Arc::new(SmoothMap::identity(n)));
        }
        let expr = self
            .maps
            .get(name)
            .ok_or_else(|| schema("maps", format!("unknown map `{name}`")))?;
        if !stack.insert(name.to_string()) {
            return Err(schema(
                &format!("maps.{name}"),
                "definition refers to itself",
            ));
        }
        let path = format!("maps.{name}");
        let map = match expr {
            MapExpr::Builtin(b) => construct_builtin(n, b.clone(), Region::All)
                .map_err(|e| schema(&format!("{path}.builtin"), e))?
                .with_label(name),
            MapExpr::Compose(parts) => {
                let maps = parts
                    .iter()
                    .map(|p| self.resolve_inner(p, stack))
                    .collect::<Result<Vec<_>>>()?;
                compose(maps)
                    .map_err(|e| schema(&path, e))?
                    .with_label(name)
            }
            MapExpr::Inverse(p) => self.resolve_inner(p, stack)?.inverted(),
        };
        stack.remove(name);
        Ok(Arc::new(map))
    }

    /// Build a named ball; the parametrization is validated as a ball
    /// diffeomorphism.
    pub fn resolve_ball(&self, name: &str) -> Result<BallDiffeo> {
        let spec = self
            .balls
            .get(name)
            .ok_or_else(|| schema("balls", format!("unknown ball `{name}`")))?;
        let map = match &spec.map {
            Some(m) => self.resolve_map(m)?,
            None => Arc::new(SmoothMap::identity(self.dimension)),
        };
        BallDiffeo::new(map, spec.center.clone(), spec.radius, spec.margin)
            .map_err(|e| e.at(format!("balls.{name}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": "1", "dimension": 2, "command": "extend",
        "maps": {"H": {"builtin": {"family": "rotation", "angle": 0.5, "center": [0, 0]}}},
        "balls": {"B": {"map": "H", "center": [0, 0], "radius": 1}},
        "input": "B", "eps": 0.5
    }"#;

    #[test]
    fn minimal_scenario_fills_defaults() {
        let s = parse_scenario(MINIMAL.as_bytes()).unwrap();
        assert_eq!(s.balls["B"].margin, 0.5);
        assert_eq!(s.seed, 1);
        assert_eq!(s.tolerances, GlueTolerances::default());
    }

    #[test]
    fn misspelled_family_names_the_path() {
        let bad = MINIMAL.replace("\"rotation\"", "\"rotaton\"");
        let err = parse_scenario(bad.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("maps.H.builtin"), "{err}");
        assert!(err.contains("rotaton"), "{err}");
    }

    #[test]
    fn unresolved_name_is_a_schema_error() {
        let bad = MINIMAL.replace("\"map\": \"H\"", "\"map\": \"K\"");
        let err = parse_scenario(bad.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        assert!(err.to_string().contains("balls.B.map"));
    }

    #[test]
    fn dimension_mismatch_is_a_schema_error() {
        let bad = MINIMAL.replace("\"center\": [0, 0]}}}", "\"center\": [0, 0, 0]}}}");
        assert!(matches!(
            parse_scenario(bad.as_bytes()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn self_reference_is_rejected() {
        let bad = MINIMAL.replace(
            r#""H": {"builtin": {"family": "rotation", "angle": 0.5, "center": [0, 0]}}"#,
            r#""H": {"compose": ["H"]}"#,
        );
        assert!(parse_scenario(bad.as_bytes())
            .unwrap_err()
            .to_string()
            .contains("refers to itself"));
    }
}
