use std::path::Path;

use super::{EvalReport, HarnessError};
use crate::decoding::{Heatmap, Solution};
use crate::instances::Task;

/// `id length|size <indices>`: tour order for TSP, sorted set for MIS.
pub fn format_solution(id: usize, solution: &Solution) -> String {
    let mut line = match solution {
        Solution::Tour(t) => format!("{id} {}", t.length()),
        Solution::Set(s) => format!("{id} {}", s.size()),
    };
    for i in solution.indices() {
        line.push(' ');
        line.push_str(&i.to_string());
    }
    line
}

/// `id` then `i j score` per directed edge (TSP) or `i score` per node (MIS).
pub fn format_heatmap(id: usize, heatmap: &Heatmap) -> String {
    let mut line = id.to_string();
    match heatmap.task {
        Task::Tsp => {
            for (&(i, j), s) in heatmap.edges.iter().zip(&heatmap.scores) {
                line.push_str(&format!(" {i} {j} {s}"));
            }
        }
        Task::Mis => {
            for (i, s) in heatmap.scores.iter().enumerate() {
                line.push_str(&format!(" {i} {s}"));
            }
        }
    }
    line
}

/// Per-instance CSV `seed,id,objective,gap`; `gap` is empty for unlabeled
/// instances. Contains no timings, so equal runs give equal bytes.
pub fn write_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "id", "objective", "gap"])?;
    for r in &report.records {
        w.write_record([
            r.seed.to_string(),
            r.id.to_string(),
            r.objective.to_string(),
            r.gap.map(|g| g.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-instance wall-clock CSV `seed,id,chain,decode,refine,total` in seconds.
pub fn write_times(report: &EvalReport, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "id", "chain", "decode", "refine", "total"])?;
    for r in &report.records {
        w.write_record([
            r.seed.to_string(),
            r.id.to_string(),
            format!("{:.6}", r.times.chain),
            format!("{:.6}", r.times.decode),
            format!("{:.6}", r.times.refine),
            format!("{:.6}", r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}
