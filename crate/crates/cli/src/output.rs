//! CSV logs and plain-text reports.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use cwbc_core::simkit::{RunSummary, SweepRow};
use cwbc_core::SimLog;

use crate::format::g9;

pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|i| format!("q{i}")));
    cols.extend((0..n).map(|i| format!("qd{i}")));
    for c in ["xee_x", "xee_y", "xc_x", "xc_y", "fox_x", "fox_y", "fop_x", "fop_y", "effort"] {
        cols.push(c.into());
    }
    cols.extend((0..n).map(|i| format!("tau{i}")));
    for c in ["E_kin", "E_bal", "E_op", "E_amp", "E_total"] {
        cols.push(c.into());
    }
    cols.join(",")
}

pub fn write_csv(log: &SimLog, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{}", csv_header(log.dof))?;
    let mut line = String::new();
    for r in &log.rows {
        line.clear();
        let e = &r.energy;
        let values = std::iter::once(r.t)
            .chain(r.q.iter().copied())
            .chain(r.qd.iter().copied())
            .chain([r.x_ee.x, r.x_ee.y, r.x_c.x, r.x_c.y, r.f_ox.x, r.f_ox.y, r.f_op.x, r.f_op.y, r.effort])
            .chain(r.torque.tau.iter().copied())
            .chain([e.kinetic, e.potential_balance, e.potential_operator, e.potential_amplified, e.total]);
        for (i, v) in values.enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&g9(v));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_csv_file(log: &SimLog, path: &Path) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_csv(log, &mut out)?;
    out.flush()
}

pub fn summary_text(summary: &RunSummary, steps: usize) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k:<24} {v}");
    };
    kv("k_ff", g9(summary.k_ff));
    kv("rows", steps.to_string());
    kv("completed", summary.completed().to_string());
    if let Some(d) = summary.divergence {
        kv("divergence_time_s", g9(d.time));
        kv("divergence_speed", g9(d.speed));
    }
    kv("cumulative_effort", g9(summary.cumulative_effort));
    kv("peak_fox_x", g9(summary.peak_fox.x));
    kv("peak_fox_y", g9(summary.peak_fox.y));
    kv("peak_fox_norm", g9(summary.peak_fox_norm));
    kv("steady_ee_error_m", g9(summary.errors.ee));
    kv("steady_com_error_m", g9(summary.errors.com));
    kv("oscillating", summary.oscillation.oscillating.to_string());
    kv("oscillation_period_s", g9(summary.oscillation.period));
    kv("passivity_tolerance", g9(summary.passivity.tolerance));
    kv("passivity_violations", summary.passivity.violations.to_string());
    kv("max_violation", g9(summary.passivity.max_violation));
    kv("initial_energy", g9(summary.initial_energy));
    kv("final_energy", g9(summary.final_energy));
    s
}

/// File name of the per-run CSV in a sweep.
pub fn sweep_csv_name(k_ff: f64) -> String {
    format!("timeseries_kff_{}.csv", g9(k_ff))
}

/// One row per factor; the effort ratio is relative to `k_FF = 0` when it is
/// part of the sweep and completed, `-` otherwise.
pub fn sweep_report(rows: &[SweepRow]) -> String {
    let baseline = rows
        .iter()
        .find(|r| r.k_ff == 0.0)
        .and_then(|r| r.summary())
        .filter(|s| s.completed())
        .map(|s| s.cumulative_effort);
    let header = [
        "k_ff", "effort", "ratio", "peak_fox", "ee_err", "com_err", "oscill", "viol", "status",
    ];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
    for row in rows {
        let cells = match row.summary() {
            Some(s) => vec![
                g9(row.k_ff),
                g9(s.cumulative_effort),
                baseline.map_or("-".into(), |b| g9(s.cumulative_effort / b)),
                g9(s.peak_fox_norm),
                g9(s.errors.ee),
                g9(s.errors.com),
                if s.oscillation.oscillating { "yes" } else { "no" }.into(),
                s.passivity.violations.to_string(),
                match s.divergence {
                    Some(d) => format!("diverged@{}", g9(d.time)),
                    None => "ok".into(),
                },
            ],
            None => {
                let mut v = vec![g9(row.k_ff)];
                v.extend(std::iter::repeat_n("-".to_string(), 7));
                v.push("error".into());
                v
            }
        };
        table.push(cells);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:>w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_expands_with_dof() {
        assert_eq!(
            csv_header(2),
            "t,q0,q1,qd0,qd1,xee_x,xee_y,xc_x,xc_y,fox_x,fox_y,fop_x,fop_y,effort,tau0,tau1,E_kin,E_bal,E_op,E_amp,E_total"
        );
    }

    #[test]
    fn sweep_file_names() {
        assert_eq!(sweep_csv_name(0.0), "timeseries_kff_0.csv");
        assert_eq!(sweep_csv_name(1.5), "timeseries_kff_1.5.csv");
    }
}
