//! Text and JSON renderings of a [`ReportDocument`].

use std::fmt::Write as _;

use super::pipeline::ReportDocument;
use crate::theorem::{ConditionReport, HessianReport};

/// Pretty JSON. Deserializing and re-rendering gives the same bytes.
pub fn render_json(doc: &ReportDocument) -> Result<String, serde_json::Error> {
    serde_json::to_string_pretty(doc)
}

fn condition_line(out: &mut String, label: &str, r: &ConditionReport) {
    let _ = writeln!(
        out,
        "{label}: {} (max residual {:.3e}, tol {:.1e}, {} points, {} rejected)",
        if r.passed { "pass" } else { "FAIL" },
        r.max_residual,
        r.tolerance,
        r.accepted,
        r.rejected
    );
}

fn hessian_line(out: &mut String, label: &str, h: &HessianReport) {
    let _ = writeln!(
        out,
        "{label}: rank {}..{} of {} over {} points{}",
        h.min_rank,
        h.max_rank,
        h.dim,
        h.points,
        if h.nontrivial { "" } else { " (trivial)" }
    );
}

pub fn render_text(doc: &ReportDocument) -> String {
    let mut out = String::new();
    let p = &doc.problem;
    let _ = writeln!(out, "problem: {} (n = {}, {} samples, seed {})", p.name, p.dim, p.samples, p.seed);
    let _ = writeln!(out, "sigma: {}", p.sigma_source);
    if let Some(r) = &doc.sigma_consistency {
        condition_line(&mut out, "sigma-consistency", r);
    }
    if let Some(r) = &doc.sigma_condition {
        condition_line(&mut out, "sigma-condition", r);
    }
    if let Some(d) = &doc.dependence {
        let _ = writeln!(
            out,
            "dependence: {} (spread {:.3e}, tol {:.1e}, {} pairs, L in [{:.4}, {:.4}])",
            if d.dependent { "pass" } else { "FAIL" },
            d.max_spread,
            d.tolerance,
            d.pairs,
            d.l_range.0,
            d.l_range.1
        );
    }
    if let Some(fit) = &doc.fit {
        let _ = writeln!(out, "family: {}", fit.chosen);
        let _ = writeln!(out, "fit residual: {:.3e}", fit.residual);
        if let Some(q) = fit.homogeneous_root {
            let _ = writeln!(out, "homogeneous root: p = {q}");
        }
    }
    if let Some(d) = &doc.deformation {
        match &d.formula {
            Some(f) => {
                let _ = writeln!(out, "Phi(t) = {f}");
            }
            None => {
                let _ = writeln!(
                    out,
                    "Phi: tabulated on [{:.4}, {:.4}] with {} nodes",
                    d.interval.0,
                    d.interval.1,
                    d.grid.unwrap_or(0)
                );
            }
        }
    }
    if let Some(v) = &doc.verify {
        condition_line(&mut out, "verify", &v.direct);
    }
    if let Some(h) = &doc.hessian_lagrangian {
        hessian_line(&mut out, "hessian(L)", h);
    }
    if let Some(h) = &doc.hessian_deformed {
        hessian_line(&mut out, "hessian(Phi(L))", h);
    }
    if let Some(t2) = &doc.theorem2 {
        match (&t2.report, &t2.skipped) {
            (Some(r), _) if r.wedge.passed => {
                let _ = writeln!(
                    out,
                    "theorem2: wedge residual {:.3e} <= {:.0e}, Phi = L^(1/{})",
                    r.wedge.max_residual, r.wedge.tolerance, r.lagrangian_degree
                );
            }
            (Some(r), _) => condition_line(&mut out, "theorem2", &r.wedge),
            (None, Some(reason)) => {
                let _ = writeln!(out, "theorem2: not applicable ({reason})");
            }
            (None, None) => {}
        }
    }
    if let Some(d) = &doc.dissipative {
        condition_line(&mut out, "force = d_J of D", &d.force_is_vertical_differential);
        condition_line(&mut out, "energy balance", &d.energy_balance);
        if let Some(r) = &d.rayleigh {
            condition_line(&mut out, "rayleigh balance", &r.balance);
        }
    }
    if let Some(t) = &doc.trajectory {
        let _ = writeln!(
            out,
            "trajectory: {} states to t = {:.3}{}",
            t.states,
            t.horizon,
            if t.truncated { " (truncated)" } else { "" }
        );
        let _ = writeln!(out, "  energy drift E_L: {:.3e}", t.energy_drift_raw);
        if let Some(d) = t.energy_drift_deformed {
            let _ = writeln!(out, "  energy drift E_Phi(L): {d:.3e}");
        }
        if let Some(r) = t.el_residual_deformed {
            let _ = writeln!(out, "  EL residual Phi(L): {r:.3e}");
        }
    }
    if let Some(n) = &doc.note {
        let _ = writeln!(out, "note: {n}");
    }
    for d in &doc.diagnostics {
        let _ = writeln!(out, "diagnostic: {d}");
    }
    let _ = writeln!(out, "verdict: {:?}", doc.verdict);
    out
}
