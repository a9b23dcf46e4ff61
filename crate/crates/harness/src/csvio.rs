//! Plot-ready CSV exports, 17 significant digits.

use std::path::Path;

use anyhow::{Context, Result};

use nls_core::dynamics::Monitors;
use nls_core::hum::ConvergenceRow;

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn monitors_csv(m: &Monitors) -> String {
    let mut out = String::from("t,mass,energy,h1,h2,virial,linf\n");
    for i in 0..m.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt(m.t[i]),
            fmt(m.mass[i]),
            fmt(m.energy[i]),
            fmt(m.h1[i]),
            fmt(m.h2[i]),
            fmt(m.virial[i]),
            fmt(m.linf[i]),
        ));
    }
    out
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("iter,residual,contraction_estimate\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.iter,
            fmt(r.residual),
            fmt(r.contraction_estimate)
        ));
    }
    out
}

/// Generic column table.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = fmt(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        // value survives a parse round trip exactly
        let back: f64 = s.parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn monitors_header() {
        let m = Monitors::default();
        assert!(monitors_csv(&m).starts_with("t,mass,energy,h1,h2,virial,linf\n"));
    }
}
