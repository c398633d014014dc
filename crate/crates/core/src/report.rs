//! Report output: JSON, aligned text tables and CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eval::NoiseSpec;
use crate::pipeline::{EvalReport, PipelineConfig};
use crate::wire::{Accounting, KB};

/// Every setting that influences the numbers, printed at the top of each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub seed: u64,
    pub frames: u32,
    pub feature_dim: usize,
    pub query_cap: usize,
    pub score_threshold: f64,
    pub grid_resolution: f64,
    pub lambda: f64,
    pub beta: f64,
    pub attention: String,
    pub residual: bool,
    pub nms_threshold: f64,
    pub accounting: Accounting,
    pub ap_interpolation: String,
    pub cogt_samples: Option<usize>,
}

impl Settings {
    pub fn from_config(cfg: &PipelineConfig, frames: u32) -> Self {
        Self {
            seed: cfg.seed,
            frames,
            feature_dim: cfg.emulator.feature_dim,
            query_cap: cfg.emulator.query_cap,
            score_threshold: cfg.filter.score_threshold,
            grid_resolution: crate::quality::GRID_RESOLUTION,
            lambda: cfg.routing.lambda,
            beta: cfg.attention.beta,
            attention: cfg.attention.mode.to_string(),
            residual: cfg.attention.residual,
            nms_threshold: cfg.nms_threshold,
            accounting: cfg.accounting,
            ap_interpolation: "all-point".to_string(),
            cogt_samples: cfg.cogt.map(|c| c.samples_per_frame),
        }
    }

    pub fn header(&self) -> String {
        let mut s = format!(
            "# seed={} frames={} d={} query_cap={} threshold={} grid={}m lambda={} beta={} attention={} residual={} nms={} accounting={} ap={}",
            self.seed,
            self.frames,
            self.feature_dim,
            self.query_cap,
            self.score_threshold,
            self.grid_resolution,
            self.lambda,
            self.beta,
            self.attention,
            self.residual,
            self.nms_threshold,
            match self.accounting {
                Accounting::FeatureOnly => "feature-only",
                Accounting::FullPayload => "full-payload",
            },
            self.ap_interpolation,
        );
        if let Some(n) = self.cogt_samples {
            let _ = write!(s, " cogt={n}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub settings: Settings,
    pub reports: Vec<EvalReport>,
}

impl RunReport {
    pub fn to_json(&self) -> crate::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per strategy.
    pub fn comparison_table(&self) -> String {
        let mut out = self.settings.header();
        out.push('\n');
        out.push_str(&strategy_table(&self.reports));
        out
    }

    /// One row per noise level.
    pub fn sweep_table(&self) -> String {
        let mut out = self.settings.header();
        out.push('\n');
        out.push_str(&noise_table(&self.reports));
        out
    }

    pub fn bandwidth_table(&self) -> String {
        let mut out = self.settings.header();
        out.push('\n');
        out.push_str(&bandwidth_table(&self.reports));
        out
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec(), &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(rule.iter().map(String::as_str).collect(), &mut out);
    for row in rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

pub fn strategy_table(reports: &[EvalReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.strategy.display_name().to_string(),
                pct(r.ap50),
                pct(r.ap70),
                r.bandwidth.log2_display(),
            ]
        })
        .collect();
    render(&["Method", "AP@0.5", "AP@0.7", "Comm(log2 B)"], &rows)
}

pub fn noise_table(reports: &[EvalReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| vec![r.noise.label(), r.strategy.display_name().to_string(), pct(r.ap50), pct(r.ap70)])
        .collect();
    render(&["Noise(m/deg)", "Method", "AP@0.5", "AP@0.7"], &rows)
}

pub fn bandwidth_table(reports: &[EvalReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let b = &r.bandwidth;
            vec![
                r.strategy.display_name().to_string(),
                b.log2_display(),
                format!("{:.2}", b.mean_kb()),
                format!("{:.2}", b.median_kb()),
                format!("{:.2}", b.min as f64 / KB),
                format!("{:.2}", b.max as f64 / KB),
                format!("{:.2}", b.variance_kb2()),
            ]
        })
        .collect();
    render(&["Method", "log2 B", "mean KB", "median KB", "min KB", "max KB", "var KB^2"], &rows)
}

/// `sigma_t,sigma_r,ap50,ap70`, one line per report.
pub fn sweep_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("sigma_t,sigma_r,ap50,ap70\n");
    for r in reports {
        let _ = writeln!(out, "{},{},{:.6},{:.6}", r.noise.sigma_t, r.noise.sigma_r, r.ap50, r.ap70);
    }
    out
}

pub fn parse_levels(text: &str) -> crate::Result<Vec<NoiseSpec>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| crate::Error::InvalidConfig(format!("bad noise level {t:?}")))
            };
            match t.split_once('/') {
                Some((a, b)) => Ok(NoiseSpec::new(parse(a)?, parse(b)?)),
                None => {
                    let v = parse(t)?;
                    Ok(NoiseSpec::new(v, v))
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Strategy;
    use crate::wire::BandwidthReport;

    fn report(strategy: Strategy, noise: NoiseSpec, ap50: f64) -> EvalReport {
        EvalReport {
            strategy,
            noise,
            frames: 2,
            ap50,
            ap70: ap50 / 2.0,
            bandwidth: BandwidthReport::from_frame_bytes(vec![12288, 12288]).unwrap(),
        }
    }

    #[test]
    fn tables_are_aligned() {
        let t = strategy_table(&[
            report(Strategy::None, NoiseSpec::default(), 0.5),
            report(Strategy::Instance, NoiseSpec::default(), 0.75),
        ]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("No Fusion"));
        assert!(lines[3].contains("75.00") && lines[3].contains("13.58"));
        assert_eq!(lines[0].len(), lines[1].len());
    }

    #[test]
    fn csv_and_levels() {
        let levels = parse_levels("0.0, 0.2/0.1").unwrap();
        assert_eq!(levels, vec![NoiseSpec::new(0.0, 0.0), NoiseSpec::new(0.2, 0.1)]);
        assert!(parse_levels("x").is_err());
        assert!(parse_levels("-1").is_err());
        let csv = sweep_csv(&[report(Strategy::Instance, levels[1], 0.5)]);
        assert_eq!(csv, "sigma_t,sigma_r,ap50,ap70\n0.2,0.1,0.500000,0.250000\n");
    }
}
