//! The JSON report and the human tables derived from it.

use std::fmt::Write as _;

use poissonstab::equilibria::{EquilibriumRecord, SeedOutcome};
use poissonstab::invariant::{InvariantReport, ProbeResult};
use poissonstab::model::IntegralCheck;
use poissonstab::orbits::OrbitFamily;
use poissonstab::{ModelSpec, Tolerances};
use serde::Serialize;
use serde_json::Value;

pub const TOOL_NAME: &str = "poissonstab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for Tool {
    fn default() -> Self {
        Tool {
            name: TOOL_NAME,
            version: TOOL_VERSION,
        }
    }
}

/// Result of analyzing one realization at an equilibrium.
#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub hamiltonian_index: usize,
    pub record: Option<EquilibriumRecord>,
    pub invariant: Option<InvariantReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumEntry {
    pub seed: Vec<f64>,
    /// `ok`, or `failed: …` when no equilibrium was found from this seed.
    pub status: String,
    pub search: SeedOutcome,
    pub analysis: Option<Analysis>,
    /// The other choices of Hamiltonian, when requested.
    pub alternates: Vec<Analysis>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RealizationCheck {
    pub max_residual: Option<f64>,
    pub skipped_points: usize,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Validation {
    pub sample_count: usize,
    pub integrals: Vec<String>,
    pub first_integrals: IntegralCheck,
    pub realization: RealizationCheck,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitSummary {
    pub family: OrbitFamily,
    pub conservation_bound: f64,
    pub csv_files: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeSummary {
    pub rng_seed: u64,
    pub count: usize,
    pub tolerance: f64,
    pub target: Option<Analysis>,
    pub results: Vec<ProbeResult>,
    pub max_relative_change: Option<f64>,
    pub max_eigen_mismatch: Option<f64>,
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub tool: Tool,
    pub command: String,
    pub model: ModelSpec,
    pub tolerances: Tolerances,
    pub validation: Option<Validation>,
    pub equilibria: Vec<EquilibriumEntry>,
    pub orbits: Option<OrbitSummary>,
    pub probes: Option<ProbeSummary>,
    /// Why an analysis-level failure happened, if it did.
    pub messages: Vec<String>,
    pub stats: Option<Stats>,
}

impl ReportDocument {
    pub fn new(command: &str, model: ModelSpec, tolerances: Tolerances) -> Self {
        ReportDocument {
            tool: Tool::default(),
            command: command.into(),
            model,
            tolerances,
            validation: None,
            equilibria: Vec::new(),
            orbits: None,
            probes: None,
            messages: Vec::new(),
            stats: None,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self).map(|mut s| {
            s.push('\n');
            s
        })
    }
}

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.6}"),
        None => "-".into(),
    }
}

fn point(v: &Value) -> String {
    match v.as_array() {
        Some(a) => format!("({})", a.iter().map(num).collect::<Vec<_>>().join(", ")),
        None => "-".into(),
    }
}

fn text(v: &Value) -> String {
    v.as_str().map_or_else(|| "-".into(), str::to_string)
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = line(header.iter().map(|s| s.to_string()).collect());
    out.push('\n');
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect()));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.clone()));
        out.push('\n');
    }
    out
}

fn analysis_row(seed: String, status: String, a: &Value) -> Vec<String> {
    let rec = &a["record"];
    let inv = &a["invariant"];
    vec![
        seed,
        status,
        point(&rec["point"]),
        text(&rec["classification"]),
        a["hamiltonian_index"].as_u64().map_or("-".into(), |i| format!("C{}", i + 1)),
        num(&inv["I_value"]),
        text(&inv["verdict"]),
        num(&inv["eigen_check"]["max_mismatch"]),
        num(&inv["arnold"]["restricted_det"]),
    ]
}

/// Human-readable rendering of a report, derived from its JSON form.
pub fn render(doc: &Value) -> String {
    let mut out = String::new();
    let model = &doc["model"];
    let _ = writeln!(
        out,
        "{} {} | {} | model {}",
        text(&doc["tool"]["name"]),
        text(&doc["tool"]["version"]),
        text(&doc["command"]),
        model["name"].as_str().unwrap_or("(inline)")
    );

    if let Some(v) = doc.get("validation").filter(|v| !v.is_null()) {
        let fi = &v["first_integrals"];
        let names = v["integrals"].as_array().cloned().unwrap_or_default();
        let tol = fi["tol"].as_f64().unwrap_or(f64::NAN);
        let rows: Vec<Vec<String>> = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let r = &fi["max_residual"][i];
                let ok = r.as_f64().is_some_and(|r| r <= tol);
                vec![
                    format!("C{}", i + 1),
                    text(name),
                    num(r),
                    point(&fi["worst_point"][i]),
                    if ok { "ok" } else { "FAIL" }.into(),
                ]
            })
            .collect();
        out.push_str(&table(&["integral", "expression", "max residual", "worst point", "status"], &rows));
        let re = &v["realization"];
        let _ = writeln!(
            out,
            "realization residual {} over {} points ({} skipped): {}",
            num(&re["max_residual"]),
            v["sample_count"],
            re["skipped_points"],
            if re["pass"].as_bool() == Some(true) { "ok" } else { "FAIL" }
        );
    }

    if let Some(eq) = doc["equilibria"].as_array().filter(|a| !a.is_empty()) {
        let mut rows = Vec::new();
        for e in eq {
            let seed = point(&e["seed"]);
            let status = text(&e["status"]);
            match e.get("analysis").filter(|a| !a.is_null()) {
                Some(a) => rows.push(analysis_row(seed, status, a)),
                None => rows.push(vec![seed, status, "-".into(), "-".into(), "-".into(), "-".into(), "-".into(), "-".into(), "-".into()]),
            }
            for alt in e["alternates"].as_array().into_iter().flatten() {
                rows.push(analysis_row(String::new(), "alternate".into(), alt));
            }
        }
        out.push_str(&table(
            &["seed", "status", "equilibrium", "class", "H", "I", "verdict", "eig mismatch", "restricted det"],
            &rows,
        ));
    }

    if let Some(o) = doc.get("orbits").filter(|o| !o.is_null()) {
        let fam = &o["family"];
        let _ = writeln!(
            out,
            "orbit family around {}: I = {}, predicted period limit {}",
            point(&fam["equilibrium"]),
            num(&fam["invariant"]),
            num(&fam["predicted_limit"])
        );
        let rows: Vec<Vec<String>> = fam["entries"]
            .as_array()
            .into_iter()
            .flatten()
            .map(|e| {
                let drift = e["conservation_drift"]
                    .as_array()
                    .map(|d| d.iter().filter_map(Value::as_f64).fold(0.0f64, f64::max))
                    .map_or("-".into(), |d| format!("{d:.1e}"));
                vec![
                    num(&e["epsilon"]),
                    num(&e["period"]),
                    e["closure"].as_f64().map_or("-".into(), |c| format!("{c:.1e}")),
                    drift,
                    num(&e["diameter"]),
                    e["failure"].as_str().unwrap_or("ok").into(),
                ]
            })
            .collect();
        out.push_str(&table(&["epsilon", "period", "closure", "max drift", "diameter", "status"], &rows));
        for f in o["csv_files"].as_array().into_iter().flatten() {
            let _ = writeln!(out, "wrote {}", text(f));
        }
    }

    if let Some(p) = doc.get("probes").filter(|p| !p.is_null()) {
        let _ = writeln!(
            out,
            "{} probes (rng seed {}): max relative change {}, max eigenvalue mismatch {}: {}",
            p["count"],
            p["rng_seed"],
            p["max_relative_change"].as_f64().map_or("-".into(), |v| format!("{v:.3e}")),
            p["max_eigen_mismatch"].as_f64().map_or("-".into(), |v| format!("{v:.3e}")),
            if p["pass"].as_bool() == Some(true) { "ok" } else { "FAIL" }
        );
        if let Some(e) = p["error"].as_str() {
            let _ = writeln!(out, "error: {e}");
        }
    }
    for m in doc["messages"].as_array().into_iter().flatten() {
        let _ = writeln!(out, "note: {}", text(m));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn table_alignment() {
        let t = table(&["a", "long header"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "a    long header\n---  -----------\nxyz  1\n");
    }

    #[test]
    fn render_tolerates_missing_fields() {
        let doc = json!({"tool": {"name": "poissonstab", "version": "0"}, "command": "classify",
                         "model": {"name": null}, "equilibria": [{"seed": [1, 2, 3], "status": "failed: no equilibrium", "analysis": null, "alternates": []}]});
        let s = render(&doc);
        assert!(s.contains("failed: no equilibrium"));
        assert!(s.contains("(inline)"));
    }
}
