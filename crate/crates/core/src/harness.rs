//! Experiment harness: parameter sweeps over seeds and schemes, CSV export,
//! and small self-contained SVG charts.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_scheme, Scheme};
use crate::qos::TrafficSpec;
use crate::scenario::{build_scenario, Deployment, RoadConfig, Scenario};
use crate::solvers::AcsConfig;

/// Which parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Total sliceable spectrum, Hz.
    AggregateSpectrum,
    /// Probability that a vehicle runs delay-sensitive traffic.
    SensitiveProb,
    /// Vehicles per meter per lane.
    AvDensity,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::AggregateSpectrum => "spectrum",
            SweepAxis::SensitiveProb => "sensitive-prob",
            SweepAxis::AvDensity => "density",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spectrum" => Ok(SweepAxis::AggregateSpectrum),
            "sensitive-prob" => Ok(SweepAxis::SensitiveProb),
            "density" => Ok(SweepAxis::AvDensity),
            other => Err(format!("unknown sweep axis '{other}'")),
        }
    }
}

/// Everything needed to reproduce one experiment family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub road: RoadConfig,
    pub qos: TrafficSpec,
    pub acs: AcsConfig,
    /// Total sliceable spectrum, Hz.
    pub total_hz: f64,
    pub sensitive_prob: f64,
    /// AP build power (W); also fixes AP coverage radii.
    pub ap_power_w: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            road: RoadConfig::default(),
            qos: TrafficSpec::default(),
            acs: AcsConfig::default(),
            total_hz: 20e6,
            sensitive_prob: 0.8,
            ap_power_w: 2.5,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.qos.validate().map_err(|e| e.to_string())?;
        self.acs.validate()?;
        if !(self.total_hz > 0.0) {
            return Err("total_hz must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.sensitive_prob) {
            return Err("sensitive_prob must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Build the scenario for one sweep point.
    pub fn scenario_at(
        &self,
        axis: SweepAxis,
        value: f64,
        seed: u64,
    ) -> Result<(Scenario, f64), String> {
        let mut road = self.road.clone();
        let mut total_hz = self.total_hz;
        let mut sensitive_prob = self.sensitive_prob;
        match axis {
            SweepAxis::AggregateSpectrum => total_hz = value,
            SweepAxis::SensitiveProb => sensitive_prob = value,
            SweepAxis::AvDensity => road.av_density_per_m = value,
        }
        let deployment = Deployment::default_two_enb_four_ap(self.ap_power_w);
        let scenario = build_scenario(&road, &deployment, sensitive_prob, seed)
            .map_err(|e| e.to_string())?;
        Ok((scenario, total_hz))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
}

/// One (seed, sweep point, scheme) outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub axis: String,
    pub axis_value: f64,
    pub scheme: String,
    pub feasible: bool,
    pub throughput_bps: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub beta_w: Option<f64>,
    pub ap_powers: Vec<f64>,
    pub iterations: Option<usize>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

fn run_point(config: &ExperimentConfig, plan: &ExperimentPlan, value: f64, seed: u64) -> Vec<ResultRow> {
    let base = ResultRow {
        seed,
        axis: plan.axis.as_str().to_string(),
        axis_value: value,
        scheme: String::new(),
        feasible: false,
        throughput_bps: None,
        beta1: None,
        beta2: None,
        beta_w: None,
        ap_powers: vec![],
        iterations: None,
        wall_time_s: 0.0,
        error: None,
    };
    let (scenario, total_hz) = match config.scenario_at(plan.axis, value, seed) {
        Ok(v) => v,
        Err(e) => {
            return plan
                .schemes
                .iter()
                .map(|s| ResultRow {
                    scheme: s.as_str().to_string(),
                    error: Some(e.clone()),
                    ..base.clone()
                })
                .collect();
        }
    };
    plan.schemes
        .iter()
        .map(|&scheme| {
            let start = Instant::now();
            let r = run_scheme(scheme, &scenario, total_hz, &config.qos, &config.acs);
            ResultRow {
                scheme: scheme.as_str().to_string(),
                feasible: r.feasible,
                throughput_bps: r.throughput_bps,
                beta1: r.slicing.map(|s| s.beta1),
                beta2: r.slicing.map(|s| s.beta2),
                beta_w: r.slicing.map(|s| s.beta_w),
                ap_powers: r.ap_powers,
                iterations: r.iterations,
                wall_time_s: start.elapsed().as_secs_f64(),
                ..base.clone()
            }
        })
        .collect()
}

/// Run the whole plan. Points run in parallel; output order is deterministic
/// (by sweep value, then seed, then scheme order of the plan).
pub fn run_plan(config: &ExperimentConfig, plan: &ExperimentPlan) -> Vec<ResultRow> {
    let points: Vec<(f64, u64)> = plan
        .values
        .iter()
        .flat_map(|&v| plan.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let run_all = || -> Vec<Vec<ResultRow>> {
        points
            .par_iter()
            .map(|&(value, seed)| run_point(config, plan, value, seed))
            .collect()
    };
    let nested = match std::env::var("AVNET_SPECTRUM_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(run_all))
            .unwrap_or_else(|_| run_all()),
        _ => run_all(),
    };
    nested.into_iter().flatten().collect()
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Fixed-column CSV serialization of sweep results.
pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(
        "seed,axis,axis_value,scheme,feasible,throughput_bps,beta1,beta2,beta_w,ap_powers_w,iterations,wall_time_s,error\n",
    );
    for r in rows {
        let powers = r
            .ap_powers
            .iter()
            .map(|p| format!("{p}"))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.seed,
            r.axis,
            r.axis_value,
            r.scheme,
            r.feasible,
            fmt_opt_f64(r.throughput_bps),
            fmt_opt_f64(r.beta1),
            fmt_opt_f64(r.beta2),
            fmt_opt_f64(r.beta_w),
            powers,
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            r.wall_time_s,
            r.error.clone().unwrap_or_default(),
        ));
    }
    out
}

/// Mean of feasible throughputs per (scheme, axis value), in plan order.
fn mean_series(rows: &[ResultRow]) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut schemes: Vec<String> = Vec::new();
    for r in rows {
        if !schemes.contains(&r.scheme) {
            schemes.push(r.scheme.clone());
        }
    }
    let mut values: Vec<f64> = Vec::new();
    for r in rows {
        if !values.iter().any(|v| (v - r.axis_value).abs() < 1e-12) {
            values.push(r.axis_value);
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    schemes
        .into_iter()
        .map(|scheme| {
            let pts: Vec<(f64, f64)> = values
                .iter()
                .filter_map(|&v| {
                    let samples: Vec<f64> = rows
                        .iter()
                        .filter(|r| {
                            r.scheme == scheme
                                && (r.axis_value - v).abs() < 1e-12
                                && r.feasible
                        })
                        .filter_map(|r| r.throughput_bps)
                        .collect();
                    if samples.is_empty() {
                        None
                    } else {
                        Some((v, samples.iter().sum::<f64>() / samples.len() as f64))
                    }
                })
                .collect();
            (scheme, pts)
        })
        .collect()
}

/// Minimal multi-series line chart; no external dependencies.
fn svg_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let (w, h, ml, mb, mt, mr) = (720.0, 480.0, 80.0, 60.0, 40.0, 30.0);
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (x0, x1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    let (y0, y1) = pts
        .iter()
        .fold((0.0f64, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.1), b.max(p.1))
        });
    let (x0, x1) = if x0 < x1 { (x0, x1) } else { (0.0, 1.0) };
    let (y0, y1) = if y0 < y1 { (y0, y1) } else { (0.0, 1.0) };
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mb - mt);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n\
         <line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{x_label}</text>\n\
         <text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{y_label}</text>\n",
        w / 2.0,
        h - mb,
        w - mr,
        h - mb,
        h - mb,
        w / 2.0,
        h - 16.0,
        h / 2.0,
        h / 2.0,
    );
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let xv = x0 + frac * (x1 - x0);
        let yv = y0 + frac * (y1 - y0);
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{:.3}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{:.3}</text>\n",
            sx(xv),
            h - mb + 18.0,
            xv,
            ml - 6.0,
            sy(yv) + 4.0,
            yv,
        ));
    }
    for (idx, (name, points)) in series.iter().enumerate() {
        if points.is_empty() {
            continue;
        }
        let color = colors[idx % colors.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in points {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            w - mr - 120.0,
            mt + 18.0 * (idx as f64 + 1.0)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write `results.csv` and, optionally, summary charts into `out_dir`.
pub fn emit_outputs(
    rows: &[ResultRow],
    out_dir: &Path,
    plots: bool,
    axis: SweepAxis,
) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("results.csv"), rows_to_csv(rows))?;
    if plots {
        let throughput = svg_line_chart(
            "Mean network throughput (feasible runs)",
            axis.as_str(),
            "throughput (bit/s)",
            &mean_series(rows),
        );
        std::fs::write(out_dir.join("throughput.svg"), throughput)?;

        // Slicing ratios of the proposed scheme across the sweep.
        let mut beta_series: Vec<(String, Vec<(f64, f64)>)> = ["beta1", "beta2", "beta_w"]
            .iter()
            .map(|n| (n.to_string(), Vec::new()))
            .collect();
        let mut values: Vec<f64> = rows
            .iter()
            .filter(|r| r.scheme == "proposed")
            .map(|r| r.axis_value)
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        for v in values {
            let select: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.scheme == "proposed" && (r.axis_value - v).abs() < 1e-12)
                .collect();
            let mean_of = |f: fn(&ResultRow) -> Option<f64>| {
                let xs: Vec<f64> = select.iter().filter_map(|r| f(r)).collect();
                (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
            };
            for (idx, getter) in [
                (0usize, (|r: &ResultRow| r.beta1) as fn(&ResultRow) -> Option<f64>),
                (1, |r: &ResultRow| r.beta2),
                (2, |r: &ResultRow| r.beta_w),
            ] {
                if let Some(m) = mean_of(getter) {
                    beta_series[idx].1.push((v, m));
                }
            }
        }
        let slicing = svg_line_chart(
            "Mean slicing ratios (proposed)",
            axis.as_str(),
            "slicing ratio",
            &beta_series,
        );
        std::fs::write(out_dir.join("slicing.svg"), slicing)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let mut bad = ExperimentConfig::default();
        bad.total_hz = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = ExperimentConfig::default();
        bad.sensitive_prob = 1.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn axis_names_round_trip() {
        for axis in [
            SweepAxis::AggregateSpectrum,
            SweepAxis::SensitiveProb,
            SweepAxis::AvDensity,
        ] {
            assert_eq!(axis.as_str().parse::<SweepAxis>().unwrap(), axis);
        }
        assert!("bogus".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn small_sweep_is_deterministic_and_complete() {
        let config = ExperimentConfig::default();
        let plan = ExperimentPlan {
            axis: SweepAxis::AvDensity,
            values: vec![0.05],
            seeds: vec![1, 2],
            schemes: vec![Scheme::MaxSinr],
        };
        let a = run_plan(&config, &plan);
        let b = run_plan(&config, &plan);
        assert_eq!(a.len(), 2);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.throughput_bps, rb.throughput_bps);
            assert_eq!(ra.feasible, rb.feasible);
        }
        let csv = rows_to_csv(&a);
        assert!(csv.lines().count() == 3);
        assert!(csv.starts_with("seed,axis,axis_value,scheme"));
    }

    #[test]
    fn emit_writes_csv_and_plots() {
        let rows = vec![ResultRow {
            seed: 1,
            axis: "density".into(),
            axis_value: 0.05,
            scheme: "proposed".into(),
            feasible: true,
            throughput_bps: Some(4.2e8),
            beta1: Some(0.4),
            beta2: Some(0.35),
            beta_w: Some(0.25),
            ap_powers: vec![2.5, 2.4, 2.4, 2.5],
            iterations: Some(12),
            wall_time_s: 0.1,
            error: None,
        }];
        let dir = std::env::temp_dir().join(format!("avnet-harness-test-{}", std::process::id()));
        emit_outputs(&rows, &dir, true, SweepAxis::AvDensity).unwrap();
        assert!(dir.join("results.csv").exists());
        assert!(dir.join("throughput.svg").exists());
        assert!(dir.join("slicing.svg").exists());
        std::fs::remove_dir_all(&dir).ok();
    }
}
