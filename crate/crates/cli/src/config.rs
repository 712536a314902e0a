//! Run configuration: a TOML (or JSON) file merged with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use poissonstab::builtin::{builtin_spec, rikitake_equilibrium_seeds, BuiltinId};
use poissonstab::{ModelSpec, Params, Tolerances};
use serde::{Deserialize, Serialize};

/// Either `builtin` (with `parameters`) or an inline definition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub builtin: Option<String>,
    pub name: Option<String>,
    pub variables: Vec<String>,
    pub field: Vec<String>,
    pub integrals: Vec<String>,
    pub nu: Option<String>,
    pub parameters: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub count: Vec<usize>,
}

impl GridSpec {
    pub fn points(&self) -> anyhow::Result<Vec<Vec<f64>>> {
        let n = self.min.len();
        if self.max.len() != n || self.count.len() != n || n == 0 {
            bail!("grid min, max and count must have one entry per variable");
        }
        if self.count.contains(&0) {
            bail!("grid counts must be positive");
        }
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let c = self.count[i];
                (0..c)
                    .map(|k| {
                        if c == 1 {
                            0.5 * (self.min[i] + self.max[i])
                        } else {
                            self.min[i] + (self.max[i] - self.min[i]) * k as f64 / (c - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSection {
    pub points: Vec<Vec<f64>>,
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitSection {
    pub epsilons: Option<Vec<f64>>,
    pub t_max_factor: f64,
    pub csv_dir: Option<PathBuf>,
}

impl Default for OrbitSection {
    fn default() -> Self {
        OrbitSection {
            epsilons: None,
            t_max_factor: 20.0,
            csv_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub count: usize,
    pub rng_seed: u64,
    /// Prepend the identity map to the random probes.
    pub identity: bool,
    pub tolerance: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection {
            count: 20,
            rng_seed: 42,
            identity: false,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub seeds: SeedSection,
    pub tolerances: Tolerances,
    pub orbits: OrbitSection,
    pub probes: ProbeSection,
    pub output: OutputSection,
    pub try_hamiltonian_permutations: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }

    pub fn builtin_id(&self) -> anyhow::Result<Option<BuiltinId>> {
        self.model
            .builtin
            .as_deref()
            .map(|name| BuiltinId::from_name(name, &self.model.parameters))
            .transpose()
            .map_err(Into::into)
    }

    pub fn model_spec(&self) -> anyhow::Result<ModelSpec> {
        if let Some(id) = self.builtin_id()? {
            return Ok(builtin_spec(&id)?);
        }
        let m = &self.model;
        if m.variables.is_empty() {
            bail!("no model given: set model.builtin or an inline model (or pass --builtin)");
        }
        Ok(ModelSpec {
            name: m.name.clone(),
            variables: m.variables.clone(),
            field: m.field.clone(),
            integrals: m.integrals.clone(),
            nu: m.nu.clone(),
            parameters: m.parameters.clone(),
        })
    }

    /// Explicit seeds, then grid points; Rikitake builtins fall back to
    /// samples on their equilibrium lines.
    pub fn seed_points(&self) -> anyhow::Result<Vec<Vec<f64>>> {
        let mut seeds = self.seeds.points.clone();
        if let Some(g) = &self.seeds.grid {
            seeds.extend(g.points()?);
        }
        if seeds.is_empty() {
            if let Some(BuiltinId::Rikitake1 { beta } | BuiltinId::Rikitake2 { beta }) = self.builtin_id()? {
                seeds = rikitake_equilibrium_seeds(beta, 6)?
                    .into_iter()
                    .map(|p| p.to_vec())
                    .collect();
            }
        }
        Ok(seeds)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if let Err(e) = self.tolerances.validate() {
            bail!("invalid tolerances: {e}");
        }
        if !(self.orbits.t_max_factor > 0.0) {
            bail!("orbits.t_max_factor must be positive");
        }
        if !(self.probes.tolerance > 0.0) {
            bail!("probes.tolerance must be positive");
        }
        let n = self.model_spec()?.variables.len();
        let seeds = self.seed_points()?;
        if let Some(bad) = seeds.iter().find(|s| s.len() != n) {
            bail!("seed {bad:?} has {} coordinates, model has {n}", bad.len());
        }
        Ok(())
    }
}

pub fn parse_param(text: &str) -> Result<(String, f64), String> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{text}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value in `{text}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

pub fn parse_point(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad coordinate `{s}`: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let text = r#"
            try_hamiltonian_permutations = true
            [model]
            builtin = "rikitake1"
            parameters = { beta = 2.0 }
            [seeds]
            points = [[0.0, 0.0, 1.0]]
            grid = { min = [0, 0, -1], max = [0, 0, 1], count = [1, 1, 3] }
            [tolerances]
            frame = 1e-10
        "#;
        let c: RunConfig = toml::from_str(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.tolerances.frame, 1e-10);
        assert_eq!(c.tolerances.equilibrium, Tolerances::default().equilibrium);
        assert_eq!(c.seed_points().unwrap().len(), 4);
        assert_eq!(c.builtin_id().unwrap(), Some(BuiltinId::Rikitake1 { beta: 2.0 }));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[model]\nbuiltn = \"x\"").is_err());
    }

    #[test]
    fn rikitake_default_seeds() {
        let mut c = RunConfig::default();
        c.model.builtin = Some("rikitake2".into());
        assert_eq!(c.seed_points().unwrap().len(), 6);
        c.model.builtin = None;
        assert!(c.model_spec().is_err());
    }

    #[test]
    fn flag_parsers() {
        assert_eq!(parse_param("beta=2.5").unwrap(), ("beta".into(), 2.5));
        assert!(parse_param("beta").is_err());
        assert_eq!(parse_point("0, 0,1").unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(parse_point("0,a,1").is_err());
    }
}
