//! Parameter sweeps: every (value, seed) pair of one axis runs on the rayon
//! pool, and each cell's metrics are averaged over its seeds.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use semnet_core::engine::{mean_record, run_with_inputs, RunInputs, SimConfig, Summary, SweepAxis};
use semnet_core::metrics::MetricsRecord;
use serde::Serialize;

use crate::config::{load_inputs, InputFiles};
use crate::error::Error;
use crate::output::write_metrics;

/// One seed's outcome within a cell.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
    pub summary: Summary,
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub value: f64,
    pub config: SimConfig,
    pub runs: Vec<SeedRun>,
}

impl SweepCell {
    /// Tick-by-tick mean over seeds.
    pub fn mean_series(&self) -> Vec<MetricsRecord> {
        let len = self.runs.iter().map(|r| r.records.len()).min().unwrap_or(0);
        (0..len)
            .map(|i| {
                let rows: Vec<MetricsRecord> = self.runs.iter().map(|r| r.records[i]).collect();
                mean_record(&rows).expect("cell has runs")
            })
            .collect()
    }

    pub fn mean_final(&self) -> MetricsRecord {
        let rows: Vec<MetricsRecord> = self.runs.iter().map(|r| r.summary.final_metrics).collect();
        mean_record(&rows).expect("cell has runs")
    }

    pub fn mean_convergence_time(&self) -> f64 {
        self.runs.iter().map(|r| r.summary.convergence.time).sum::<f64>() / self.runs.len() as f64
    }

    pub fn mean_convergence_cvg(&self) -> f64 {
        self.runs.iter().map(|r| r.summary.convergence.cvg).sum::<f64>() / self.runs.len() as f64
    }
}

/// Parses `a..b` (inclusive) or a comma-separated list of seeds.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Validation(format!("seeds: cannot parse {s:?}, expected a..b or a,b,c"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

pub fn parse_values(s: &str) -> Result<Vec<f64>, Error> {
    let values: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::Validation(format!("values: cannot parse {s:?}")))?;
    if values.is_empty() {
        return Err(Error::Validation("values: at least one value is needed".into()));
    }
    Ok(values)
}

/// Runs the cross product of `values` and `seeds`. Inputs are generated once
/// per seed; none of the sweepable axes affects them.
pub fn sweep(
    base: &SimConfig,
    files: &InputFiles,
    axis: SweepAxis,
    values: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepCell>, Error> {
    let configs = values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            axis.apply(&mut cfg, v)?;
            Ok(cfg)
        })
        .collect::<Result<Vec<SimConfig>, Error>>()?;

    let inputs: Vec<RunInputs> = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.engine.seed = seed;
            load_inputs(&cfg, files)
        })
        .collect::<Result<_, _>>()?;

    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..seeds.len()).map(move |s| (c, s)))
        .collect();
    let runs: Vec<SeedRun> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let mut cfg = configs[c].clone();
            cfg.engine.seed = seeds[s];
            let out = run_with_inputs(&cfg, &inputs[s], &mut ())?;
            Ok(SeedRun {
                seed: seeds[s],
                records: out.records,
                summary: out.summary,
            })
        })
        .collect::<Result<_, Error>>()?;

    let mut runs = runs.into_iter();
    Ok(configs
        .into_iter()
        .zip(values)
        .map(|(config, &value)| SweepCell {
            value,
            config,
            runs: runs.by_ref().take(seeds.len()).collect(),
        })
        .collect())
}

#[derive(Serialize)]
struct AggregateRow<'a> {
    axis: &'a str,
    value: f64,
    runs: usize,
    kd: f64,
    cvg: f64,
    f_measure: f64,
    mean_edge_weight: f64,
    convergence_cvg: f64,
    convergence_time: f64,
}

/// Writes `<axis>=<value>.csv` with each cell's mean series, plus
/// `aggregate.csv` with one row of final means per cell.
pub fn write_sweep(dir: &Path, axis: SweepAxis, cells: &[SweepCell]) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_err = |path: &Path, e: csv::Error| Error::io(path, std::io::Error::other(e));
    for cell in cells {
        let path = dir.join(format!("{}={}.csv", axis.name(), cell.value));
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_metrics(std::io::BufWriter::new(f), &cell.mean_series()).map_err(|e| csv_err(&path, e))?;
    }
    let path = dir.join("aggregate.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    for cell in cells {
        let m = cell.mean_final();
        w.serialize(AggregateRow {
            axis: axis.name(),
            value: cell.value,
            runs: cell.runs.len(),
            kd: m.kd,
            cvg: m.cvg,
            f_measure: m.f_measure,
            mean_edge_weight: m.mean_edge_weight,
            convergence_cvg: cell.mean_convergence_cvg(),
            convergence_time: cell.mean_convergence_time(),
        })
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}
