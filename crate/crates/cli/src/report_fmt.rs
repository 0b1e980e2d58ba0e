//! Rendering of simulation reports as CSV or an aligned text comparison.

use anyhow::Result;

use earlyexit_core::sim::{compare_strategies, SimReport};

/// Fixed CSV columns, one row per (strategy, task).
pub const CSV_COLUMNS: [&str; 8] = [
    "strategy",
    "task",
    "accuracy",
    "mean_latency_ms",
    "reduction_pct",
    "mean_layers",
    "over_inference_count",
    "n",
];

pub fn to_csv(report: &SimReport) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_COLUMNS)?;
    for row in &report.rows {
        writer.write_record([
            row.strategy.as_str(),
            row.task.as_str(),
            &format!("{:.4}", row.accuracy),
            &format!("{:.4}", row.mean_latency_ms),
            &format!("{:.1}", row.reduction_pct),
            &format!("{:.2}", row.mean_layers),
            &row.over_inference_count.to_string(),
            &row.sample_count.to_string(),
        ])?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

/// Aligned per-task comparison across every strategy in the report.
/// Best accuracy and best latency per task are starred; ties share the star.
pub fn to_text(report: &SimReport) -> Result<String> {
    let mut strategies: Vec<String> = report.rows.iter().map(|r| r.strategy.clone()).collect();
    strategies.sort();
    strategies.dedup();
    if strategies.is_empty() {
        return Ok(format!(
            "empty report (switch_count {})\n",
            report.switch_count
        ));
    }
    let comparison = compare_strategies(report, &strategies)?;

    let mut out = String::new();
    let width = strategies.iter().map(|s| s.len()).max().unwrap().max(8);
    for task_cmp in &comparison.tasks {
        out.push_str(&format!("task: {}\n", task_cmp.task));
        out.push_str(&format!(
            "  {:<width$}  {:>10}  {:>16}  {:>12}\n",
            "strategy",
            "accuracy",
            "mean_latency_ms",
            "mean_layers",
            width = width
        ));
        for cell in &task_cmp.cells {
            let row = report.row(&cell.strategy, &task_cmp.task).unwrap();
            out.push_str(&format!(
                "  {:<width$}  {:>9.4}{} {:>15.4}{} {:>12.2}\n",
                cell.strategy,
                cell.accuracy,
                if cell.best_accuracy { "*" } else { " " },
                cell.mean_latency_ms,
                if cell.best_latency { "*" } else { " " },
                row.mean_layers,
                width = width
            ));
        }
        out.push('\n');
    }
    out.push_str(&format!("scene switches: {}\n", report.switch_count));
    Ok(out)
}
