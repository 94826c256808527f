//! Trace aggregation and the self-contained SVG chart writer.
//!
//! Each input CSV is one run. Runs are grouped into series by algorithm:
//! the batch manifest next to the file is consulted first, falling back to
//! the `<algo>__seed<k>.csv` naming convention. A series draws the mean
//! progress-of-elimination over its runs against log-scaled time, with a
//! one-standard-deviation band when there is more than one run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use domlab::simulate::read_trace_csv;

pub struct Series {
    pub label: String,
    pub runs: usize,
    /// (round, mean, standard deviation) ascending in round, rounds >= 1.
    pub points: Vec<(u64, f64, f64)>,
}

pub fn collect_series(files: &[PathBuf]) -> Result<Vec<Series>> {
    let mut samples: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    let mut run_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut manifests: BTreeMap<PathBuf, Option<serde_json::Value>> = BTreeMap::new();

    for file in files {
        let label = series_label(file, &mut manifests)?;
        let rows = read_trace_csv(
            File::open(file).with_context(|| format!("opening {}", file.display()))?,
        )
        .with_context(|| format!("parsing {}", file.display()))?;
        let per_round = samples.entry(label.clone()).or_default();
        let mut any = false;
        for row in rows {
            if row.metric == "poe" && row.round >= 1 {
                per_round.entry(row.round).or_default().push(row.value);
                any = true;
            }
        }
        if !any {
            bail!("{}: no poe rows past round 0", file.display());
        }
        *run_counts.entry(label).or_insert(0) += 1;
    }

    let mut out = Vec::new();
    for (label, per_round) in samples {
        let runs = run_counts[&label];
        let points: Vec<(u64, f64, f64)> = per_round
            .into_iter()
            .filter(|(_, values)| values.len() == runs)
            .map(|(round, values)| {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let std = if values.len() < 2 {
                    0.0
                } else {
                    let var =
                        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
                    var.sqrt()
                };
                (round, mean, std)
            })
            .collect();
        if points.is_empty() {
            bail!("series `{label}`: runs share no checkpoint rounds");
        }
        out.push(Series {
            label,
            runs,
            points,
        });
    }
    Ok(out)
}

/// Algorithm label for one file: the manifest entry when a manifest sits
/// next to it, otherwise the file stem up to the seed suffix.
fn series_label(
    file: &Path,
    manifests: &mut BTreeMap<PathBuf, Option<serde_json::Value>>,
) -> Result<String> {
    let dir = file.parent().unwrap_or(Path::new(".")).to_path_buf();
    let manifest = manifests.entry(dir.clone()).or_insert_with(|| {
        let text = std::fs::read_to_string(dir.join("manifest.json")).ok()?;
        serde_json::from_str(&text).ok()
    });
    if let Some(manifest) = manifest {
        let name = file.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(runs) = manifest.get("runs").and_then(|r| r.as_array()) {
            for run in runs {
                if run.get("file").and_then(|f| f.as_str()) == Some(name) {
                    if let Some(algo) = run.get("algo").and_then(|a| a.as_str()) {
                        return Ok(algo.to_string());
                    }
                }
            }
        }
    }
    let stem = file
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow::anyhow!("{}: not a readable file name", file.display()))?;
    Ok(stem.split("__seed").next().unwrap_or(stem).to_string())
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 62.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub fn render_svg(series: &[Series]) -> String {
    let max_round = series
        .iter()
        .flat_map(|s| s.points.last())
        .map(|&(round, _, _)| round)
        .max()
        .unwrap_or(1);
    let decades = ((max_round as f64).log10().ceil() as i64).max(1);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |round: u64| LEFT + (round as f64).log10() / decades as f64 * plot_w;
    let y = |value: f64| TOP + (1.0 - value.clamp(0.0, 1.0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        svg,
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );

    // Gridlines and tick labels.
    for quarter in 0..=4 {
        let value = quarter as f64 / 4.0;
        let gy = y(value);
        let _ = writeln!(
            svg,
            "  <line x1=\"{LEFT:.2}\" y1=\"{gy:.2}\" x2=\"{:.2}\" y2=\"{gy:.2}\" \
             stroke=\"#dddddd\"/>",
            LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{value:.2}</text>",
            LEFT - 8.0,
            gy + 4.0
        );
    }
    for exp in 0..=decades {
        let round = 10u64.pow(exp as u32);
        let gx = x(round);
        let _ = writeln!(
            svg,
            "  <line x1=\"{gx:.2}\" y1=\"{TOP:.2}\" x2=\"{gx:.2}\" y2=\"{:.2}\" \
             stroke=\"#dddddd\"/>",
            TOP + plot_h
        );
        let label = if exp <= 2 {
            round.to_string()
        } else {
            format!("10^{exp}")
        };
        let _ = writeln!(
            svg,
            "  <text x=\"{gx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{label}</text>",
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        svg,
        "  <rect x=\"{LEFT:.2}\" y=\"{TOP:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" \
         fill=\"none\" stroke=\"#333333\"/>"
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">round (log scale)</text>",
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        "  <text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.2})\">progress of elimination</text>",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.runs > 1 {
            let mut band = String::new();
            for &(round, mean, std) in &s.points {
                let _ = write!(band, "{:.2},{:.2} ", x(round), y(mean + std));
            }
            for &(round, mean, std) in s.points.iter().rev() {
                let _ = write!(band, "{:.2},{:.2} ", x(round), y(mean - std));
            }
            let _ = writeln!(
                svg,
                "  <polygon fill=\"{color}\" fill-opacity=\"0.18\" stroke=\"none\" \
                 points=\"{}\"/>",
                band.trim_end()
            );
        }
        let mut line = String::new();
        for &(round, mean, _) in &s.points {
            let _ = write!(line, "{:.2},{:.2} ", x(round), y(mean));
        }
        let _ = writeln!(
            svg,
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>",
            line.trim_end()
        );

        let ly = TOP + 10.0 + i as f64 * 18.0;
        let lx = LEFT + plot_w + 14.0;
        let _ = writeln!(
            svg,
            "  <line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"1.8\"/>",
            lx + 22.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
