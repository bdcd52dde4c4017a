use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::generate::{generate_dataset, SimulationConfig};
use crate::error::Result;
use crate::linmodel::ObservationMatrix;
use crate::pipeline::{run_pipeline, PipelineConfig};
use crate::selection::StabilityOptions;
use crate::whitening::WhiteningKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub n: usize,
    pub p: usize,
    pub q_grid: Vec<usize>,
    pub sparsity: f64,
    pub phi1: f64,
    pub resample_counts: Vec<usize>,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n: 30,
            p: 3,
            q_grid: (1..=10).map(|k| 100 * k).collect(),
            sparsity: 0.01,
            phi1: 0.9,
            resample_counts: vec![500, 1000, 5000],
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub q: usize,
    pub resamples: usize,
    pub seconds: f64,
    pub whitening: WhiteningKind,
}

/// Wall-clock of the full pipeline for every (q, resample count) pair.
pub fn timing_benchmark(cfg: &BenchConfig, base: &PipelineConfig) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for &q in &cfg.q_grid {
        let sim = SimulationConfig {
            n: cfg.n,
            p: cfg.p,
            q,
            phi1: cfg.phi1,
            sparsity: cfg.sparsity,
            seed: cfg.seed,
            ..Default::default()
        };
        let data = generate_dataset(&sim, 0)?;
        let y = ObservationMatrix::raw(data.y);
        for &resamples in &cfg.resample_counts {
            let mut pcfg = base.clone().with_seed(cfg.seed);
            pcfg.stability = StabilityOptions {
                n_resamples: resamples,
                ..pcfg.stability
            };
            let start = Instant::now();
            let res = run_pipeline(&y, &data.x, &pcfg)?;
            let seconds = start.elapsed().as_secs_f64();
            log::info!("q = {q}, resamples = {resamples}: {seconds:.2} s");
            rows.push(TimingRow {
                q,
                resamples,
                seconds,
                whitening: res.whitening.operator.kind(),
            });
        }
    }
    Ok(rows)
}

pub fn write_timing_csv<W: Write>(rows: &[TimingRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["q", "resamples", "seconds", "whitening"])?;
    for r in rows {
        wtr.write_record([
            r.q.to_string(),
            r.resamples.to_string(),
            format!("{:.6}", r.seconds),
            r.whitening.name().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
