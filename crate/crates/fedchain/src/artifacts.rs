//! Run directories.
//!
//! A run writes `config.json`, then streams `metrics.csv.partial` and
//! `events.jsonl.partial`. Only after the run succeeds are the partial files
//! renamed and the DAG (`dag.json`, `dag.dot`, `dag_events.jsonl`) and final
//! model (`model.json`) written, so a failed run leaves `.partial` files only.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::datafile::{self, DataFileError};
use crate::export::{dag_event_lines, DagSnapshot};
use crate::metrics::FileSink;
use crate::simnet::{self, run_experiment, RunOptions, RunOutput, SimError};

pub const CONFIG: &str = "config.json";
pub const METRICS: &str = "metrics.csv";
pub const EVENTS: &str = "events.jsonl";
pub const DAG_JSON: &str = "dag.json";
pub const DAG_DOT: &str = "dag.dot";
pub const DAG_EVENTS: &str = "dag_events.jsonl";
pub const MODEL: &str = "model.json";
pub const DATA_DIR: &str = "data";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Data(#[from] DataFileError),
}

fn io_at(path: &Path) -> impl Fn(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn partial(path: &Path) -> PathBuf {
    let mut name = path.file_name().expect("file name").to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), RunError> {
    fs::write(&path, contents).map_err(io_at(&path))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirOptions {
    /// Also write each split as CSV under `data/`.
    pub datasets: bool,
    pub run: RunOptions,
}

/// Run `cfg` writing every artifact into `dir`.
pub fn run_to_dir(
    cfg: &ExperimentConfig,
    dir: &Path,
    opts: &DirOptions,
) -> Result<RunOutput, RunError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    write(dir.join(CONFIG), cfg.to_json() + "\n")?;
    let metrics = dir.join(METRICS);
    let events = dir.join(EVENTS);
    for stale in [&metrics, &events] {
        if stale.exists() {
            fs::remove_file(stale).map_err(io_at(stale))?;
        }
    }
    let (metrics_tmp, events_tmp) = (partial(&metrics), partial(&events));
    let mut sink = FileSink::create(&metrics_tmp, &events_tmp, cfg.sim.seed).map_err(io_at(dir))?;
    let out = run_experiment(cfg, &opts.run, &mut sink)?;
    sink.finish().map_err(io_at(dir))?;
    fs::rename(&metrics_tmp, &metrics).map_err(io_at(&metrics))?;
    fs::rename(&events_tmp, &events).map_err(io_at(&events))?;

    let snapshot = DagSnapshot::from_dag(&out.dag);
    write(dir.join(DAG_JSON), snapshot.to_json() + "\n")?;
    write(dir.join(DAG_DOT), snapshot.to_dot())?;
    write(dir.join(DAG_EVENTS), dag_event_lines(&out.dag))?;
    let model = serde_json::to_string(&out.model).expect("model serializes");
    write(dir.join(MODEL), model + "\n")?;

    if opts.datasets {
        let data_dir = dir.join(DATA_DIR);
        fs::create_dir_all(&data_dir).map_err(io_at(&data_dir))?;
        let (train, validation, test) =
            simnet::datasets(cfg).map_err(|source| SimError::Model { round: 0, source })?;
        let named = train
            .iter()
            .enumerate()
            .map(|(h, d)| (format!("hospital_{h}.csv"), d))
            .chain([
                ("validation.csv".to_string(), &validation),
                ("test.csv".to_string(), &test),
            ]);
        for (name, d) in named {
            let path = data_dir.join(name);
            let file = fs::File::create(&path).map_err(io_at(&path))?;
            datafile::write_dataset(d, io::BufWriter::new(file))?;
        }
    }
    Ok(out)
}

/// Load the DAG snapshot of a finished run directory.
pub fn load_snapshot(dir: &Path) -> Result<DagSnapshot, RunError> {
    let path = dir.join(DAG_JSON);
    let text = fs::read_to_string(&path).map_err(io_at(&path))?;
    DagSnapshot::from_json(&text).map_err(|e| RunError::Io {
        path,
        source: io::Error::new(io::ErrorKind::InvalidData, e),
    })
}
