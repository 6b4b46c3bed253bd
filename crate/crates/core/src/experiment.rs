//! Runs scenarios end to end and writes the CSV reports.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::DVector;

use crate::behavior::BehaviorDecomposition;
use crate::error::{Error, Result};
use crate::ilc::{gradient_ilc, IlcConfig, IlcRun};
use crate::scenario::{Scenario, Task};
use crate::similarity::SimilarityReport;
use crate::system_model::Trajectory;
use crate::transfer::{TransferPlan, TransferResult};

const EXAMPLE_1: &str = include_str!("../scenarios/example1.toml");
const EXAMPLE_2: &str = include_str!("../scenarios/example2.toml");

/// Built-in reproductions of the two numerical studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemoExample {
    /// Host/guest pair, two tracking references.
    MultipleTasks,
    /// Two guests of different similarity, one reference.
    DifferentSimilarity,
}

impl DemoExample {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Self::MultipleTasks),
            2 => Ok(Self::DifferentSimilarity),
            other => Err(Error::InvalidParameter(format!(
                "unknown example {other}; expected 1 or 2"
            ))),
        }
    }

    pub fn scenario_text(self) -> &'static str {
        match self {
            Self::MultipleTasks => EXAMPLE_1,
            Self::DifferentSimilarity => EXAMPLE_2,
        }
    }

    pub fn scenario(self) -> Result<Scenario> {
        Scenario::from_toml_str(self.scenario_text())
    }
}

#[derive(Clone, Debug)]
pub struct PairResult {
    pub host: String,
    pub guest: String,
    pub report: SimilarityReport,
}

#[derive(Clone, Debug)]
pub struct IlcResult {
    pub task: Task,
    pub reference: DVector<f64>,
    pub run: IlcRun,
}

#[derive(Clone, Debug)]
pub struct TaskResult {
    pub task: Task,
    pub horizon: usize,
    pub reference: DVector<f64>,
    pub ilc: IlcRun,
    pub guest: Trajectory,
    pub host: Trajectory,
    pub transfer: TransferResult,
    pub similar: bool,
    pub mean_index: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentResults {
    pub pairs: Vec<PairResult>,
    pub ilc_runs: Vec<IlcResult>,
    pub tasks: Vec<TaskResult>,
}

impl ExperimentResults {
    pub fn pair(&self, host: &str, guest: &str) -> Option<&PairResult> {
        self.pairs
            .iter()
            .find(|p| p.host == host && p.guest == guest)
    }

    pub fn task(&self, name: &str) -> Option<&TaskResult> {
        self.tasks.iter().find(|t| t.task.name == name)
    }
}

/// Pipeline state shared across the stages of one scenario run.
pub struct Experiment<'a> {
    scenario: &'a Scenario,
    decompositions: BTreeMap<String, BehaviorDecomposition>,
}

impl<'a> Experiment<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let decompositions = scenario
            .systems
            .iter()
            .map(|(name, sys)| {
                Ok((
                    name.clone(),
                    BehaviorDecomposition::new(&sys.lift(), sys.x0())?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            scenario,
            decompositions,
        })
    }

    pub fn decomposition(&self, name: &str) -> Result<&BehaviorDecomposition> {
        self.decompositions
            .get(name)
            .ok_or_else(|| Error::UnknownSystem(name.to_string()))
    }

    /// Similarity reports for every distinct host/guest pair in the tasks.
    pub fn similarity(&self) -> Result<Vec<PairResult>> {
        self.scenario
            .pairs()
            .into_iter()
            .map(|(host, guest)| {
                let report = SimilarityReport::compute(
                    self.decomposition(&host)?,
                    self.decomposition(&guest)?,
                    self.scenario.tolerances.similarity,
                )?;
                if report.similar {
                    info!("{guest} -> {host}: similar");
                } else {
                    warn!(
                        "{guest} -> {host}: behaviors are not similar (residual {:e}); \
                         similarity indexes are reported anyway",
                        report.feasibility_residual
                    );
                }
                Ok(PairResult {
                    host,
                    guest,
                    report,
                })
            })
            .collect()
    }

    /// Guest-side ILC for every task.
    pub fn learn(&self, config: &IlcConfig) -> Result<Vec<IlcResult>> {
        self.scenario
            .tasks
            .iter()
            .map(|task| {
                let sys = self.scenario.system(&task.guest)?;
                let reference = self.scenario.reference(&task.reference)?.clone();
                let run = gradient_ilc(&sys.lift(), sys.x0(), &reference, config)?;
                info!(
                    "{}: ILC on {} finished after {} iterations, rms error {:e}",
                    task.name,
                    task.guest,
                    run.iterations,
                    run.final_rms()
                );
                Ok(IlcResult {
                    task: task.clone(),
                    reference,
                    run,
                })
            })
            .collect()
    }

    /// Similarity, guest ILC and transfer for every task.
    pub fn run(&self, config: &IlcConfig) -> Result<ExperimentResults> {
        let pairs = self.similarity()?;
        let ilc_runs = self.learn(config)?;
        let options = self.scenario.transfer_options();

        let mut plans: BTreeMap<(String, String), TransferPlan> = BTreeMap::new();
        for pair in &pairs {
            let plan = TransferPlan::new(
                self.decomposition(&pair.host)?,
                self.decomposition(&pair.guest)?,
                &pair.report,
                options,
            )?;
            plans.insert((pair.host.clone(), pair.guest.clone()), plan);
        }

        let mut tasks = Vec::with_capacity(ilc_runs.len());
        for learned in &ilc_runs {
            let task = &learned.task;
            let guest_sys = self.scenario.system(&task.guest)?;
            let guest = guest_sys.rollout(&learned.run.u_final, guest_sys.x0())?;
            let plan = &plans[&(task.host.clone(), task.guest.clone())];
            let transfer = plan.transfer(&guest.w)?;
            let host_input_len = self.decomposition(&task.host)?.lifted().input_len();
            let host = Trajectory::from_stacked(transfer.w_h.clone(), host_input_len)?;
            let pair = pairs
                .iter()
                .find(|p| p.host == task.host && p.guest == task.guest)
                .expect("every task pair has a report");
            tasks.push(TaskResult {
                task: task.clone(),
                horizon: self.scenario.horizon,
                reference: learned.reference.clone(),
                ilc: learned.run.clone(),
                guest,
                host,
                transfer,
                similar: pair.report.similar,
                mean_index: pair.report.mean_index(),
            });
        }
        Ok(ExperimentResults {
            pairs,
            ilc_runs,
            tasks,
        })
    }
}

/// Full pipeline with the scenario's own ILC settings.
pub fn run_scenario(scenario: &Scenario) -> Result<ExperimentResults> {
    Experiment::new(scenario)?.run(&scenario.ilc)
}

pub fn run_demo(example: DemoExample) -> Result<ExperimentResults> {
    run_scenario(&example.scenario()?)
}

/// Fixed-width decimal with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn channel_headers(prefix: &str, channels: usize) -> Vec<String> {
    if channels == 1 {
        vec![prefix.to_string()]
    } else {
        (0..channels).map(|i| format!("{prefix}_{i}")).collect()
    }
}

/// `host, guest, k, s_k, theta_k_radians`, one row per index and pair.
pub fn write_similarity_csv(pairs: &[PairResult], path: &Path) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv_writer(path)?;
    w.write_record(["host", "guest", "k", "s_k", "theta_k_radians"])
        .map_err(&err)?;
    for pair in pairs {
        let angles = pair.report.angles();
        for (k, (s, theta)) in pair.report.s.iter().zip(angles.iter()).enumerate() {
            w.write_record([
                pair.host.clone(),
                pair.guest.clone(),
                (k + 1).to_string(),
                format_float(*s),
                format_float(*theta),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ilc_csv(run: &IlcRun, path: &Path) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "error_norm"]).map_err(&err)?;
    for (k, e) in run.error_norms.iter().enumerate() {
        w.write_record([k.to_string(), format_float(*e)])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `t, reference, guest_u, guest_y, host_u, host_y`; channels get an `_i`
/// suffix when there is more than one.
pub fn write_trajectory_csv(result: &TaskResult, path: &Path) -> Result<()> {
    let err = csv_err(path);
    let horizon = result.horizon;
    let n_u = result.guest.u.len() / horizon;
    let n_y = result.guest.y.len() / horizon;

    let mut header = vec!["t".to_string()];
    header.extend(channel_headers("reference", n_y));
    header.extend(channel_headers("guest_u", n_u));
    header.extend(channel_headers("guest_y", n_y));
    header.extend(channel_headers("host_u", n_u));
    header.extend(channel_headers("host_y", n_y));

    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(&err)?;
    for t in 0..horizon {
        let mut row = vec![t.to_string()];
        let block = |v: &DVector<f64>, n: usize| {
            v.rows(t * n, n)
                .iter()
                .map(|x| format_float(*x))
                .collect::<Vec<_>>()
        };
        row.extend(block(&result.reference, n_y));
        row.extend(block(&result.guest.u, n_u));
        row.extend(block(&result.guest.y, n_y));
        row.extend(block(&result.host.u, n_u));
        row.extend(block(&result.host.y, n_y));
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary_csv(tasks: &[TaskResult], path: &Path) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv_writer(path)?;
    w.write_record([
        "task",
        "host",
        "guest",
        "reference",
        "similar",
        "mean_similarity_index",
        "distance",
        "guest_residual",
        "host_residual",
        "ilc_final_error",
    ])
    .map_err(&err)?;
    for r in tasks {
        w.write_record([
            r.task.name.clone(),
            r.task.host.clone(),
            r.task.guest.clone(),
            r.task.reference.clone(),
            r.similar.to_string(),
            format_float(r.mean_index),
            format_float(r.transfer.distance),
            format_float(r.transfer.guest_residual),
            format_float(r.transfer.host_residual),
            format_float(r.ilc.final_error()),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write every report present in `results` under `dir`; returns the written
/// paths in write order. `similarity.csv` is always written.
pub fn emit_outputs(results: &ExperimentResults, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();

    let path = dir.join("similarity.csv");
    write_similarity_csv(&results.pairs, &path)?;
    written.push(path);

    if !results.tasks.is_empty() {
        for r in &results.tasks {
            let path = dir.join(format!("trajectory_{}.csv", r.task.name));
            write_trajectory_csv(r, &path)?;
            written.push(path);
        }
        let path = dir.join("summary.csv");
        write_summary_csv(&results.tasks, &path)?;
        written.push(path);
    }
    for r in &results.ilc_runs {
        let path = dir.join(format!("ilc_{}.csv", r.task.name));
        write_ilc_csv(&r.run, &path)?;
        written.push(path);
    }
    Ok(written)
}
