//! Markdown tables juxtaposing computed results with the reference values.

use std::fmt::Write;

use nalgebra::DMatrix;
use opdg::bundled::reference as refv;
use opdg::experiment::{Baseline, IdentReport, SweepCell};
use opdg::game::Method;
use opdg::linalg::max_abs;

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.digits$}"))
}

/// One row per method: feasibility, trajectory error, time and the sign
/// condition's pass rate on the equilibrium trajectory.
pub fn comparison_table(reports: &[IdentReport]) -> String {
    let mut s = String::from("| method | feasible | e_x | time [s] | pass rate | misalignment [samples] |\n|---|---|---|---|---|---|\n");
    for r in reports {
        let (rate, mis) = match &r.verification {
            Some(v) => (format!("{:.4}", v.pass_rate), v.max_misalignment.map_or("undefined".into(), |m| m.to_string())),
            None => ("n/a".into(), "n/a".into()),
        };
        let time = if r.feasible { format!("{:.3}", r.wall_time_seconds) } else { "n/a".into() };
        writeln!(s, "| {} | {} | {} | {time} | {rate} | {mis} |", r.method, r.feasible, opt(r.e_x, 4)).unwrap();
    }
    s
}

fn deviation(computed: &DMatrix<f64>, reference: &[f64]) -> f64 {
    max_abs(&(computed - DMatrix::from_row_slice(computed.nrows(), computed.ncols(), reference)))
}

fn report(reports: &[IdentReport], m: Method) -> Option<&IdentReport> {
    reports.iter().find(|r| r.method == m)
}

fn weights_section(s: &mut String, r: Option<&IdentReport>, qp: &[f64], rp: &[f64]) {
    match r.and_then(|r| r.potential.as_ref()) {
        Some(pot) => {
            writeln!(s, "| entry | computed | reference |\n|---|---|---|").unwrap();
            writeln!(s, "| Qp[1,1] | {:.4} | {:.2} |", pot.qp[(0, 0)], qp[0]).unwrap();
            writeln!(s, "| Rp[1,1] | {:.4} | {:.2} |", pot.rp[(0, 0)], rp[0]).unwrap();
            writeln!(s, "| max abs deviation of Qp | {:.4} | |", deviation(&pot.qp, qp)).unwrap();
            writeln!(s, "| max abs deviation of Rp | {:.4} | |\n", deviation(&pot.rp, rp)).unwrap();
        }
        None => {
            let why = r.and_then(|r| r.error.clone()).unwrap_or_else(|| "not run".into());
            writeln!(s, "No weights: {why}.\n").unwrap();
            if let Some(f) = r.and_then(|r| r.feasibility.as_ref()) {
                writeln!(
                    s,
                    "Pre-check: columns independent {:?}, dimension margin {}, ranks {:?}, advisory \"{}\"{}.\n",
                    f.condition_a,
                    f.condition_b_value,
                    f.consistency_ranks,
                    f.advisory,
                    if f.extrapolated { " (extrapolated)" } else { "" }
                )
                .unwrap();
            }
        }
    }
}

fn sweep_section(s: &mut String, cells: &[SweepCell], reports: &[IdentReport], seeds: usize) {
    writeln!(s, "## Noise sweep ({seeds} seeds per level, median with range)\n").unwrap();
    let levels: Vec<String> = refv::EX2_SNRS
        .iter()
        .map(|v| if v.is_finite() { format!("{v} dB") } else { "noise-free".into() })
        .collect();
    writeln!(s, "| method | {} |", levels.join(" | ")).unwrap();
    writeln!(s, "|---|{}", "---|".repeat(levels.len())).unwrap();
    for (m, reference) in [(Method::Wtdo, refv::EX2_WTDO_ERRORS), (Method::Ido, refv::EX2_IDO_ERRORS)] {
        let mut row = format!("| {m} |");
        for snr in &refv::EX2_SNRS[..4] {
            let cell = cells.iter().find(|c| c.method == m && c.snr_db == *snr);
            let text = match cell {
                Some(c) => format!(" {} ({}–{}) |", opt(c.median, 4), opt(c.min, 4), opt(c.max, 4)),
                None => " n/a |".into(),
            };
            row.push_str(&text);
        }
        write!(row, " {} |", opt(report(reports, m).and_then(|r| r.e_x), 4)).unwrap();
        writeln!(s, "{row}").unwrap();
        let refs: Vec<String> = reference.iter().map(|v| format!("{v:.3}")).collect();
        writeln!(s, "| {m} reference | {} |", refs.join(" | ")).unwrap();
    }
    s.push('\n');
}

/// Full summary of a reproduction run.
pub fn reproduction(name: &str, base: &Baseline, reports: &[IdentReport], sweep: Option<&[SweepCell]>, seeds: usize) -> String {
    let mut s = format!("# Reproduction of {name}\n\n## Equilibrium gains\n\n");
    let first = name == "example1";
    let refs: [&[f64]; 2] = if first { [&refv::EX1_K1, &refv::EX1_K2] } else { [&refv::EX2_KH, &refv::EX2_KA] };
    let reference_run = first.then_some((refv::EX1_ERRORS, refv::EX1_TIMES));
    writeln!(s, "Coupled residual {:.3e} after {} iterations.\n", base.ne.residual, base.ne.iterations).unwrap();
    writeln!(s, "| player | max abs deviation from reference gain |\n|---|---|").unwrap();
    for (i, (k, r)) in base.ne.k.iter().zip(refs).enumerate() {
        writeln!(s, "| {} | {:.4} |", i + 1, deviation(k, r)).unwrap();
    }
    s.push_str("\n## Identification (noise-free)\n\n");
    s.push_str(&comparison_table(reports));
    if let Some((errors, times)) = reference_run {
        writeln!(
            s,
            "\nReference e_x: TFO {} / WTDO {} / IDO {}; reference times {} / {} / {} s on unspecified hardware.\n",
            errors[0], errors[1], errors[2], times[0], times[1], times[2]
        )
        .unwrap();
    } else {
        s.push_str("\nReference: TFO not applicable; WTDO e_x 0.002, IDO e_x 0.026.\n\n");
    }
    if name == "example1" {
        s.push_str("## TFO weights\n\n");
        weights_section(&mut s, report(reports, Method::Tfo), &refv::EX1_QP, &refv::EX1_RP);
    } else {
        s.push_str("## WTDO weights\n\n");
        weights_section(&mut s, report(reports, Method::Wtdo), &refv::EX2_QP, &refv::EX2_RP);
    }
    if let Some(cells) = sweep {
        sweep_section(&mut s, cells, reports, seeds);
    }
    s.push_str("## Files\n\n- `game.json`, `ne.json`\n- `report_<method>.json` per method\n- `trajectory_ne.csv` and `trajectory_<method>.csv` per feasible method\n- `gradients_<method>.csv`: input gradients of the original and potential Hamiltonians\n");
    if sweep.is_some() {
        s.push_str("- `sweep.json`: per-seed errors of the noise sweep\n");
    }
    s
}
