//! Pass/fail checks over experiment results.

use crate::convergence::ConvergenceReport;
use crate::report::Check;
use crate::sweep::{SweepRow, Variant};
use crate::waterfall::WaterfallRow;

fn find(rows: &[SweepRow], variant: Variant, load: f64) -> Option<&SweepRow> {
    rows.iter().find(|r| r.variant == variant && (r.load - load).abs() < 1e-9)
}

/// Trained plain learners within `slack` of vanilla IRSA at loads up to
/// `low_max`, and CI-separated above it at each of `high_loads`.
pub fn protocol_ordering(rows: &[SweepRow], low_max: f64, slack: f64, high_loads: &[f64]) -> Check {
    let mut failures = Vec::new();
    let mut seen = 0;
    for r in rows.iter().filter(|r| r.variant == Variant::DecRl) {
        let Some(v) = find(rows, Variant::VanillaIrsa, r.load) else { continue };
        let (d, v) = (&r.summary, &v.summary);
        if r.load <= low_max + 1e-9 {
            seen += 1;
            if d.mean < v.mean - slack {
                failures.push(format!("G={:.1}: {:.3} < {:.3} - {slack}", r.load, d.mean, v.mean));
            }
        } else if high_loads.iter().any(|g| (g - r.load).abs() < 1e-9) {
            seen += 1;
            if !d.separated_above(v) {
                failures.push(format!(
                    "G={:.1}: dec_rl [{:.3}, {:.3}] not above vanilla [{:.3}, {:.3}]",
                    r.load, d.ci_low, d.ci_high, v.ci_low, v.ci_high
                ));
            }
        }
    }
    let passed = failures.is_empty() && seen > 0;
    let detail = if passed {
        format!("{seen} loads checked")
    } else if seen == 0 {
        "no comparable loads".into()
    } else {
        failures.join("; ")
    };
    Check::new("protocol ordering", passed, detail)
}

/// Averaged-trace ε-convergence time at each load no later than its limit.
pub fn convergence_speed(report: &ConvergenceReport, limits: &[(f64, usize)]) -> Check {
    let mut parts = Vec::new();
    let mut passed = true;
    for &(load, limit) in limits {
        match report.point(load, false) {
            Some(p) => {
                let ok = p.mean_trace_time.index().is_some_and(|t| t <= limit);
                passed &= ok;
                parts.push(format!(
                    "G={load}: {} (limit {limit}; per-run mean {:.1} ± {:.1})",
                    p.mean_trace_time,
                    p.summary.mean,
                    p.summary.half_width()
                ));
            }
            None => {
                passed = false;
                parts.push(format!("G={load}: missing"));
            }
        }
    }
    Check::new("convergence speed", passed, parts.join("; "))
}

/// Mean convergence time with virtual experience at most `factor` times the
/// plain learner's at each load.
pub fn virtual_speedup(report: &ConvergenceReport, loads: &[f64], factor: f64) -> Check {
    let mut parts = Vec::new();
    let mut passed = true;
    for &load in loads {
        match (report.point(load, false), report.point(load, true)) {
            (Some(plain), Some(virt)) => {
                let ratio = virt.summary.mean / plain.summary.mean;
                let ok = ratio.is_finite() && ratio <= factor;
                passed &= ok;
                parts.push(format!(
                    "G={load}: virtual {:.0} ± {:.0} vs plain {:.0} ± {:.0}, ratio {ratio:.2} (limit {factor})",
                    virt.summary.mean,
                    virt.summary.half_width(),
                    plain.summary.mean,
                    plain.summary.half_width()
                ));
            }
            _ => {
                passed = false;
                parts.push(format!("G={load}: missing"));
            }
        }
    }
    Check::new("virtual-experience speedup", passed, parts.join("; "))
}

/// Vanilla IRSA lower at `high` than at `low`, and the learned envelope
/// never below the random strategy above `threshold`.
pub fn waterfall(sweep: &[SweepRow], rows: &[WaterfallRow], low: f64, high: f64, threshold: f64) -> Check {
    let onset = match (find(sweep, Variant::VanillaIrsa, low), find(sweep, Variant::VanillaIrsa, high)) {
        (Some(a), Some(b)) => Some((a.summary.mean, b.summary.mean)),
        _ => None,
    };
    let mut passed = onset.is_some_and(|(a, b)| b < a);
    let mut parts = vec![match onset {
        Some((a, b)) => format!("vanilla G={low}: {a:.3}, G={high}: {b:.3}"),
        None => "vanilla points missing".into(),
    }];
    let above: Vec<&WaterfallRow> = rows.iter().filter(|r| r.load > threshold + 1e-9).collect();
    passed &= !above.is_empty();
    for r in above {
        let ok = r.dec_rl_envelope >= r.random.mean;
        passed &= ok;
        parts.push(format!("G={:.1}: envelope {:.3} vs random {:.3}", r.load, r.dec_rl_envelope, r.random.mean));
    }
    Check::new("waterfall behaviour", passed, parts.join("; "))
}
