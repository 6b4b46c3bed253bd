//! Scenario files: systems, references, transfer tasks and run settings.
//!
//! Scenarios are TOML. A minimal file needs a horizon and one system:
//!
//! ```toml
//! horizon = 2
//!
//! [systems.plant]
//! a = [[1.0]]
//! b = [[1.0]]
//! c = [[1.0]]
//! d = [[0.0]]
//! x0 = [0.0]
//! ```
//!
//! Matrices are row lists. A matrix may also be time-varying, either affine in
//! the step index (`{ base = [[..]], slope = [[..]] }` meaning `base + t·slope`)
//! or listed per step (`{ steps = [[[..]], ...] }`).
//!
//! References are keyed by name and tagged by `kind`:
//! `sine` (`amplitude`, `period`, `phase`), `pulse` (`amplitude`, `period`,
//! `on` = list of active residues of `t mod period`) or `samples` (`values`,
//! the stacked output of length `n_y·T`). Generated signals are applied to
//! every output channel.
//!
//! Tasks (`[[tasks]]` with `guest`, `host`, `reference` and an optional `name`)
//! run ILC on the guest and transfer its trajectory to the host.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::behavior::DEFAULT_MEMBERSHIP_TOL;
use crate::error::{Error, Result};
use crate::ilc::{IlcConfig, DEFAULT_ERR_TOL, DEFAULT_MAX_ITERS};
use crate::similarity::DEFAULT_SIMILARITY_TOL;
use crate::system_model::{LtvSystem, SystemSpec};
use crate::transfer::{TransferOptions, DEFAULT_EXPERIENCE_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub ilc: IlcSettings,
    #[serde(default)]
    pub transfer: TransferSettings,
    pub systems: BTreeMap<String, SystemSpec>,
    #[serde(default)]
    pub references: BTreeMap<String, ReferenceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<TaskSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub membership: f64,
    pub similarity: f64,
    pub experience: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            membership: DEFAULT_MEMBERSHIP_TOL,
            similarity: DEFAULT_SIMILARITY_TOL,
            experience: DEFAULT_EXPERIENCE_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IlcSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub max_iters: usize,
    pub err_tol: f64,
}

impl Default for IlcSettings {
    fn default() -> Self {
        Self {
            gamma: None,
            max_iters: DEFAULT_MAX_ITERS,
            err_tol: DEFAULT_ERR_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSettings {
    pub allow_dissimilar: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceSpec {
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    Pulse {
        #[serde(default = "one")]
        amplitude: f64,
        period: usize,
        on: Vec<usize>,
    },
    Samples {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl ReferenceSpec {
    /// Sample onto `horizon` steps for `n_y` output channels, stacked by step.
    pub fn sample(&self, name: &str, horizon: usize, n_y: usize) -> Result<DVector<f64>> {
        let per_step = |f: &dyn Fn(usize) -> f64| {
            DVector::from_iterator(
                horizon * n_y,
                (0..horizon).flat_map(|t| std::iter::repeat_n(f(t), n_y)),
            )
        };
        match self {
            ReferenceSpec::Sine {
                amplitude,
                period,
                phase,
            } => {
                if period.is_nan() || *period <= 0.0 {
                    return Err(Error::Scenario(format!(
                        "reference {name}: sine period must be positive"
                    )));
                }
                Ok(per_step(&|t| {
                    amplitude * (std::f64::consts::TAU * t as f64 / period + phase).sin()
                }))
            }
            ReferenceSpec::Pulse {
                amplitude,
                period,
                on,
            } => {
                if *period == 0 {
                    return Err(Error::Scenario(format!(
                        "reference {name}: pulse period must be positive"
                    )));
                }
                let active: BTreeSet<usize> = on.iter().copied().collect();
                Ok(per_step(&|t| {
                    if active.contains(&(t % period)) {
                        *amplitude
                    } else {
                        0.0
                    }
                }))
            }
            ReferenceSpec::Samples { values } => {
                Error::check_len("reference samples", horizon * n_y, values.len())
                    .map_err(|e| Error::Scenario(format!("reference {name}: {e}")))?;
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Scenario(format!(
                        "reference {name}: non-finite sample"
                    )));
                }
                Ok(DVector::from_vec(values.clone()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub guest: String,
    pub host: String,
    pub reference: String,
}

/// A resolved transfer job.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub name: String,
    pub guest: String,
    pub host: String,
    pub reference: String,
}

/// Validated scenario with expanded systems and sampled references.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub horizon: usize,
    pub systems: BTreeMap<String, LtvSystem>,
    pub references: BTreeMap<String, DVector<f64>>,
    pub tasks: Vec<Task>,
    pub tolerances: Tolerances,
    pub ilc: IlcConfig,
    pub allow_dissimilar: bool,
    pub output_dir: Option<PathBuf>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_toml_str(&text).map_err(|e| match e {
        Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
        other => other,
    })
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::Scenario(format!("parse error: {e}")))?;
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Scenario(format!("schema error at `{path}`: {}", e.into_inner()))
        })?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let horizon = file.horizon;
        if horizon == 0 {
            return Err(Error::EmptyHorizon);
        }
        if file.systems.is_empty() {
            return Err(Error::Scenario("at least one system is required".into()));
        }
        let mut systems = BTreeMap::new();
        for (name, spec) in &file.systems {
            let sys = spec.validate(horizon).map_err(|e| match e {
                Error::DimensionMismatch { .. } | Error::NonFinite { .. } | Error::Scenario(_) => {
                    Error::Scenario(format!("system {name}: {e}"))
                }
                other => other,
            })?;
            systems.insert(name.clone(), sys);
        }
        let (first_name, first) = systems.iter().next().expect("checked non-empty");
        let (n_u, n_y) = (first.n_u(), first.n_y());
        if let Some((name, sys)) = systems
            .iter()
            .find(|(_, s)| s.n_u() != n_u || s.n_y() != n_y)
        {
            return Err(Error::Incompatible(format!(
                "system {name} has (n_u, n_y) = ({}, {}) but {first_name} has ({n_u}, {n_y})",
                sys.n_u(),
                sys.n_y()
            )));
        }

        let references = file
            .references
            .iter()
            .map(|(name, spec)| Ok((name.clone(), spec.sample(name, horizon, n_y)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;

        let mut tasks = Vec::with_capacity(file.tasks.len());
        let mut names = BTreeSet::new();
        for spec in &file.tasks {
            for sys in [&spec.guest, &spec.host] {
                if !systems.contains_key(sys) {
                    return Err(Error::UnknownSystem(sys.clone()));
                }
            }
            if !references.contains_key(&spec.reference) {
                return Err(Error::UnknownReference(spec.reference.clone()));
            }
            let name = spec
                .name
                .clone()
                .unwrap_or_else(|| format!("{}_to_{}_{}", spec.guest, spec.host, spec.reference));
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(Error::Scenario(format!(
                    "task name {name:?} must be non-empty and use only [A-Za-z0-9_-]"
                )));
            }
            if !names.insert(name.clone()) {
                return Err(Error::Scenario(format!("duplicate task name {name}")));
            }
            tasks.push(Task {
                name,
                guest: spec.guest.clone(),
                host: spec.host.clone(),
                reference: spec.reference.clone(),
            });
        }

        let ilc = IlcConfig {
            gamma: file.ilc.gamma,
            max_iters: file.ilc.max_iters,
            err_tol: file.ilc.err_tol,
            initial_input: None,
        };
        Ok(Self {
            horizon,
            systems,
            references,
            tasks,
            tolerances: file.tolerances,
            ilc,
            allow_dissimilar: file.transfer.allow_dissimilar,
            output_dir: file.output_dir.clone(),
            file,
        })
    }

    /// Serialize the underlying description back to TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.file).map_err(|e| Error::Scenario(format!("serialize: {e}")))
    }

    pub fn system(&self, name: &str) -> Result<&LtvSystem> {
        self.systems
            .get(name)
            .ok_or_else(|| Error::UnknownSystem(name.to_string()))
    }

    pub fn reference(&self, name: &str) -> Result<&DVector<f64>> {
        self.references
            .get(name)
            .ok_or_else(|| Error::UnknownReference(name.to_string()))
    }

    pub fn transfer_options(&self) -> TransferOptions {
        TransferOptions {
            experience_tol: self.tolerances.experience,
            membership_tol: self.tolerances.membership,
            allow_dissimilar: self.allow_dissimilar,
        }
    }

    /// Distinct `(host, guest)` pairs in task order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut seen = BTreeSet::new();
        self.tasks
            .iter()
            .map(|t| (t.host.clone(), t.guest.clone()))
            .filter(|p| seen.insert(p.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
horizon = 2

[systems.plant]
a = [[1.0]]
b = [[1.0]]
c = [[1.0]]
d = [[0.0]]
x0 = [0.0]
"#;

    #[test]
    fn minimal_scenario_loads() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.horizon, 2);
        assert!(s.tasks.is_empty());
        assert!(s.pairs().is_empty());
        assert_eq!(s.ilc.max_iters, 500);
        assert_eq!(s.tolerances.similarity, 1e-8);
    }

    #[test]
    fn sine_generator_samples_quarter_pi_steps() {
        let text =
            format!("{MINIMAL}\n[references.r1]\nkind = \"sine\"\namplitude = 1.0\nperiod = 8.0\n")
                .replace("horizon = 2", "horizon = 25");
        let s = Scenario::from_toml_str(&text).unwrap();
        let r = s.reference("r1").unwrap();
        assert_eq!(r.len(), 25);
        for t in 0..25 {
            let expected = (std::f64::consts::FRAC_PI_4 * t as f64).sin();
            assert!((r[t] - expected).abs() < 1e-14, "t = {t}");
        }
    }

    #[test]
    fn pulse_generator_uses_mod_period() {
        let spec = ReferenceSpec::Pulse {
            amplitude: 1.0,
            period: 8,
            on: vec![1, 2, 3, 4],
        };
        let r = spec.sample("r2", 17, 1).unwrap();
        let expected = [
            0., 1., 1., 1., 1., 0., 0., 0., 0., 1., 1., 1., 1., 0., 0., 0., 0.,
        ];
        assert_eq!(r.as_slice(), &expected);
    }

    #[test]
    fn unknown_system_in_task() {
        let text = format!(
            "{MINIMAL}\n[references.r]\nkind = \"samples\"\nvalues = [0.0, 1.0]\n\n\
             [[tasks]]\nguest = \"sigma9\"\nhost = \"plant\"\nreference = \"r\"\n"
        );
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert_eq!(err.to_string(), "unknown system: sigma9");
    }

    #[test]
    fn parse_error_carries_line() {
        let err = Scenario::from_toml_str("horizon = 2\n[systems.plant\n").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("parse error") && msg.contains("line 2"),
            "{msg}"
        );
    }

    #[test]
    fn schema_error_carries_field_path() {
        let text = MINIMAL.replace("x0 = [0.0]", "x0 = \"zero\"");
        let msg = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(msg.contains("systems.plant.x0"), "{msg}");
    }

    #[test]
    fn mixed_output_dimensions_rejected() {
        let text = format!(
            "{MINIMAL}\n[systems.wide]\na = [[1.0]]\nb = [[1.0]]\nc = [[1.0], [2.0]]\n\
             d = [[0.0], [0.0]]\nx0 = [0.0]\n"
        );
        assert!(matches!(
            Scenario::from_toml_str(&text),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn dimension_error_names_system_and_matrix() {
        let text = MINIMAL.replace("b = [[1.0]]", "b = [[1.0], [2.0]]");
        let msg = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(
            msg.contains("system plant") && msg.contains("B(0)"),
            "{msg}"
        );
    }

    #[test]
    fn round_trip_through_toml() {
        let text = format!(
            "{MINIMAL}\n[systems.other]\na = {{ base = [[0.5]], slope = [[0.05]] }}\n\
             b = {{ steps = [[[1.0]], [[2.0]]] }}\nc = [[1.0]]\nd = [[0.0]]\nx0 = [1.5]\n\n\
             [references.r]\nkind = \"pulse\"\nperiod = 2\non = [1]\n\n\
             [[tasks]]\nname = \"job\"\nguest = \"other\"\nhost = \"plant\"\nreference = \"r\"\n"
        );
        let s = Scenario::from_toml_str(&text).unwrap();
        let again = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(s, again);
    }
}
