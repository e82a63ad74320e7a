//! CSV writers. Every file has a header row; numbers use `.` decimals and
//! the shortest representation that round-trips, so identical runs give
//! identical bytes.

use std::io::Write;

use bnsim_core::{ExactSolution, Network};

use crate::experiment::{SummaryRow, TraceRow};
use crate::study::{AveragedRow, PhaseAverage};

pub const TRACE_HEADER: [&str; 6] = [
    "phase",
    "trials",
    "rmse_frequency",
    "rmse_archive",
    "mass_total",
    "mass_conditional",
];

pub const SUMMARY_HEADER: [&str; 11] = [
    "experiment",
    "n_obs",
    "update",
    "method",
    "trials",
    "n_gen",
    "gen_size",
    "rmse_archive",
    "rmse_frequency",
    "mass_archive",
    "mass_cond",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            r.phase.to_string(),
            r.trials.to_string(),
            opt(r.rmse_frequency),
            opt(r.rmse_archive),
            r.mass_total.to_string(),
            r.mass_conditional.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.n_obs.to_string(),
            r.update.to_string(),
            r.method.to_string(),
            r.trials.to_string(),
            r.n_gen.to_string(),
            opt(r.gen_size),
            opt(r.rmse_archive),
            opt(r.rmse_frequency),
            r.mass_archive.to_string(),
            r.mass_cond.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Averaged summary with the number of contributing networks appended.
pub fn write_study_summary<W: Write>(out: W, rows: &[AveragedRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = SUMMARY_HEADER.to_vec();
    header.push("networks");
    w.write_record(&header)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.n_obs.to_string(),
            r.update.to_string(),
            r.method.to_string(),
            r.trials.to_string(),
            opt(r.n_gen),
            opt(r.gen_size),
            opt(r.rmse_archive),
            opt(r.rmse_frequency),
            opt(r.mass_archive),
            opt(r.mass_cond),
            r.networks.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_phase_table<W: Write>(out: W, rows: &[PhaseAverage]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment",
        "phase",
        "n_obs",
        "rmse_frequency",
        "rmse_archive",
        "mass_total",
        "mass_conditional",
        "networks",
    ])?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.phase.to_string(),
            r.n_obs.to_string(),
            opt(r.rmse_frequency),
            opt(r.rmse_archive),
            opt(r.mass_total),
            opt(r.mass_conditional),
            r.networks.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per node: its name, `P(evidence)`, then its posterior, padded
/// with empty cells up to the largest cardinality.
pub fn write_posterior<W: Write>(out: W, net: &Network, sol: &ExactSolution) -> csv::Result<()> {
    let widest = net.nodes().iter().map(|n| n.cardinality).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["node".to_string(), "evidence_probability".to_string()];
    header.extend((0..widest).map(|s| format!("state_{s}")));
    w.write_record(&header)?;
    for n in net.node_ids() {
        let mut row = vec![
            net.node(n).name.clone(),
            sol.evidence_probability.to_string(),
        ];
        let beliefs = sol.posterior.node(n);
        row.extend((0..widest).map(|s| {
            match (sol.posterior.is_defined(), beliefs.get(s)) {
                (true, Some(p)) => p.to_string(),
                _ => String::new(),
            }
        }));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
