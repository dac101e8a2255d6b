//! `report`: hypervolume area-under-curve series and metric summaries, computed from the files
//! `run` wrote. Nothing is re-simulated.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::CliError;
use crate::plan::{seed_dir, CellMeta, CELL_META};

/// One seed's observation series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSeries {
    pub seed: u64,
    pub timestamps: Vec<f64>,
    pub hypervolume: Vec<f64>,
    /// One column per metric, in [`CellMeta::metrics`] order.
    pub metrics: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub dir: PathBuf,
    pub meta: CellMeta,
    pub runs: Vec<SeedSeries>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat {
            mean,
            std,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// One row of `summary.csv`: statistics over seeds of each run's mean metric values.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: String,
    pub scenario: String,
    pub configuration: String,
    pub seeds: usize,
    pub metrics: Vec<(String, Stat)>,
    pub hypervolume: Stat,
    /// Final HV-AUC value per seed, summarized.
    pub auc: Stat,
}

/// Cumulative trapezoidal integral of `values` over `times`, starting at t = 0. Before the first
/// sample the series is held at its first value.
pub fn cumulative_auc(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let (mut t0, mut v0, mut acc) = (0.0, values.first().copied().unwrap_or(0.0), 0.0);
    for (&t, &v) in times.iter().zip(values) {
        acc += 0.5 * (v0 + v) * (t - t0);
        out.push(acc);
        (t0, v0) = (t, v);
    }
    out
}

/// Pointwise mean over seeds of the AUC series. All seeds must share the same timestamps.
pub fn mean_auc(cell: &Cell) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let first = cell.runs.first().ok_or_else(|| CliError::BadRun {
        path: cell.dir.clone(),
        reason: "no seed runs".into(),
    })?;
    let mut sum = vec![0.0; first.timestamps.len()];
    for run in &cell.runs {
        if run.timestamps != first.timestamps {
            return Err(CliError::IncompatibleRuns(format!(
                "{}: seed {} has {} observations, seed {} has {}",
                cell.meta.name,
                first.seed,
                first.timestamps.len(),
                run.seed,
                run.timestamps.len()
            )));
        }
        for (s, a) in sum.iter_mut().zip(cumulative_auc(&run.timestamps, &run.hypervolume)) {
            *s += a;
        }
    }
    let n = cell.runs.len() as f64;
    Ok((first.timestamps.clone(), sum.into_iter().map(|s| s / n).collect()))
}

fn read_seed(dir: &Path, seed: u64, metrics: &[String]) -> Result<SeedSeries, CliError> {
    let path = dir.join("observations.csv");
    let mut reader = csv::Reader::from_path(&path).map_err(CliError::csv(&path))?;
    let headers = reader.headers().map_err(CliError::csv(&path))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::BadRun {
            path: path.clone(),
            reason: format!("column `{name}` missing"),
        })
    };
    let t_col = column("timestamp")?;
    let hv_col = column("hypervolume")?;
    let m_cols = metrics.iter().map(|m| column(m)).collect::<Result<Vec<_>, _>>()?;

    let mut series = SeedSeries {
        seed,
        timestamps: Vec::new(),
        hypervolume: Vec::new(),
        metrics: vec![Vec::new(); metrics.len()],
    };
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(CliError::csv(&path))?;
        let num = |col: usize| -> Result<f64, CliError> {
            record[col].parse().map_err(|_| CliError::BadRun {
                path: path.clone(),
                reason: format!("row {}: `{}` is not a number", line + 1, &record[col]),
            })
        };
        series.timestamps.push(num(t_col)?);
        series.hypervolume.push(num(hv_col)?);
        for (out, &col) in series.metrics.iter_mut().zip(&m_cols) {
            out.push(num(col)?);
        }
    }
    Ok(series)
}

pub fn load_cell(dir: &Path) -> Result<Cell, CliError> {
    let path = dir.join(CELL_META);
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    let meta: CellMeta = serde_json::from_str(&text).map_err(|e| CliError::BadRun {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let runs = meta
        .seeds
        .iter()
        .map(|&seed| read_seed(&seed_dir(dir, seed), seed, &meta.metrics))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Cell {
        dir: dir.to_path_buf(),
        meta,
        runs,
    })
}

/// Cell directories named by `runs`: each entry is a cell itself or a directory of cells.
pub fn discover_cells(runs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut cells = Vec::new();
    for dir in runs {
        if dir.join(CELL_META).is_file() {
            cells.push(dir.clone());
            continue;
        }
        let entries = fs::read_dir(dir).map_err(CliError::io(dir))?;
        let mut found: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.join(CELL_META).is_file())
            .collect();
        if found.is_empty() {
            return Err(CliError::BadRun {
                path: dir.clone(),
                reason: "contains no run cells".into(),
            });
        }
        found.sort();
        cells.extend(found);
    }
    Ok(cells)
}

pub fn summarize(cell: &Cell) -> Result<SummaryRow, CliError> {
    let (_, auc) = mean_auc(cell)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let finals: Vec<f64> = cell
        .runs
        .iter()
        .map(|r| {
            cumulative_auc(&r.timestamps, &r.hypervolume)
                .last()
                .copied()
                .unwrap_or(0.0)
        })
        .collect();
    debug_assert!(auc
        .last()
        .is_none_or(|a| (a - mean(&finals)).abs() < 1e-6 * a.abs().max(1.0)));
    let metrics = cell
        .meta
        .metrics
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let per_seed: Vec<f64> = cell.runs.iter().map(|r| mean(&r.metrics[i])).collect();
            (name.clone(), Stat::of(&per_seed))
        })
        .collect();
    let hv: Vec<f64> = cell.runs.iter().map(|r| mean(&r.hypervolume)).collect();
    Ok(SummaryRow {
        cell: cell.meta.name.clone(),
        scenario: cell.meta.scenario.clone(),
        configuration: cell.meta.configuration.clone(),
        seeds: cell.runs.len(),
        metrics,
        hypervolume: Stat::of(&hv),
        auc: Stat::of(&finals),
    })
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(CliError::csv(path))?;
    let mut header = vec!["cell", "scenario", "configuration", "seeds"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    if let Some(first) = rows.first() {
        for (name, _) in &first.metrics {
            header.push(format!("{name}_mean"));
            header.push(format!("{name}_std"));
        }
    }
    header.extend(["hypervolume_mean", "hypervolume_std", "hv_auc_mean", "hv_auc_std"].map(String::from));
    w.write_record(&header).map_err(CliError::csv(path))?;
    for row in rows {
        let mut rec = vec![
            row.cell.clone(),
            row.scenario.clone(),
            row.configuration.clone(),
            row.seeds.to_string(),
        ];
        for (_, s) in &row.metrics {
            rec.push(s.mean.to_string());
            rec.push(s.std.to_string());
        }
        for s in [&row.hypervolume, &row.auc] {
            rec.push(s.mean.to_string());
            rec.push(s.std.to_string());
        }
        w.write_record(&rec).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

/// What `report` produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub timestamps: Vec<f64>,
    /// (cell name, configuration label, mean AUC series) per cell.
    pub series: Vec<(String, String, Vec<f64>)>,
    pub summary: Vec<SummaryRow>,
}

impl Report {
    pub fn final_auc(&self, cell: &str) -> Option<f64> {
        self.series
            .iter()
            .find(|(name, ..)| name == cell)
            .and_then(|(_, _, s)| s.last().copied())
    }
}

/// Loads every cell, checks they cover the same observation times, and writes `auc.csv`,
/// `auc.svg` and `summary.csv` to `out`.
pub fn report(runs: &[PathBuf], out: &Path) -> Result<Report, CliError> {
    let cells = discover_cells(runs)?
        .iter()
        .map(|d| load_cell(d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut timestamps: Option<(String, Vec<f64>)> = None;
    let mut series = Vec::new();
    let mut summary = Vec::new();
    for cell in &cells {
        let (t, auc) = mean_auc(cell)?;
        match &timestamps {
            None => timestamps = Some((cell.meta.name.clone(), t)),
            Some((name, first)) if *first != t => {
                return Err(CliError::IncompatibleRuns(format!(
                    "{name} has {} observations, {} has {}",
                    first.len(),
                    cell.meta.name,
                    t.len()
                )));
            }
            Some(_) => {}
        }
        series.push((cell.meta.name.clone(), cell.meta.configuration.clone(), auc));
        summary.push(summarize(cell)?);
    }
    let timestamps = timestamps.map(|(_, t)| t).unwrap_or_default();
    let report = Report {
        timestamps,
        series,
        summary,
    };

    fs::create_dir_all(out).map_err(CliError::io(out))?;
    write_auc_csv(&out.join("auc.csv"), &report)?;
    plot_auc(&out.join("auc.svg"), &report)?;
    write_summary(&out.join("summary.csv"), &report.summary)?;
    Ok(report)
}

fn write_auc_csv(path: &Path, report: &Report) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(CliError::csv(path))?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(report.series.iter().map(|(name, ..)| name.clone()));
    w.write_record(&header).map_err(CliError::csv(path))?;
    for (i, t) in report.timestamps.iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(report.series.iter().map(|(_, _, s)| s[i].to_string()));
        w.write_record(&rec).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

fn plot_auc(path: &Path, report: &Report) -> Result<(), CliError> {
    let plot = |e: &dyn std::fmt::Display| CliError::Plot(e.to_string());
    let hours = |t: f64| t / 3600.0;
    let x_max = report.timestamps.last().copied().map_or(1.0, hours).max(1e-9);
    let y_max = report
        .series
        .iter()
        .filter_map(|(_, _, s)| s.last().copied())
        .fold(0.0, f64::max)
        .max(1e-9)
        * 1.05;

    let root = SVGBackend::new(path, (960, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Mean hypervolume area under curve", ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(0.0..x_max, 0.0..y_max)
        .map_err(|e| plot(&e))?;
    chart
        .configure_mesh()
        .x_desc("simulation time [h]")
        .y_desc("HV-AUC [HV·s]")
        .draw()
        .map_err(|e| plot(&e))?;
    for (i, (name, label, auc)) in report.series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let points = report.timestamps.iter().zip(auc).map(|(&t, &a)| (hours(t), a));
        chart
            .draw_series(LineSeries::new(points, color.stroke_width(2)))
            .map_err(|e| plot(&e))?
            .label(format!("{label} ({name})"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperLeft)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot(&e))?;
    root.present().map_err(|e| plot(&e))?;
    Ok(())
}
