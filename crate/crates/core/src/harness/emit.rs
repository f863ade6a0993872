use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::sweep::{Method, SweepResult, SweepRow};
use crate::{Error, Result};

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in &result.rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn plot_error(e: impl std::fmt::Display) -> Error {
    Error::Plot(e.to_string())
}

/// Line chart of the mean power in dBm against the swept value, one series
/// per (method, N).
pub fn plot_svg(result: &SweepResult, path: &Path) -> Result<()> {
    let aggregates = result.aggregate();
    let x_min = result.values.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = result.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x_lo, x_hi) = if x_max > x_min { (x_min, x_max) } else { (x_min - 1.0, x_min + 1.0) };
    let y_min = aggregates.iter().map(|a| a.mean_power_dbm).fold(f64::INFINITY, f64::min);
    let y_max = aggregates.iter().map(|a| a.mean_power_dbm).fold(f64::NEG_INFINITY, f64::max);
    let pad = ((y_max - y_min) * 0.08).max(0.5);

    let root = SVGBackend::new(path, (800, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("Transmit power vs {}", result.parameter), ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x_lo..x_hi, (y_min - pad)..(y_max + pad))
        .map_err(plot_error)?;
    chart.configure_mesh().x_desc(result.parameter.as_str()).y_desc("mean power (dBm)").draw().map_err(plot_error)?;

    let mut series_index = 0;
    for n in result.tpa_counts() {
        for method in [Method::Benchmark, Method::Proposed] {
            let points: Vec<(f64, f64)> = aggregates
                .iter()
                .filter(|a| a.num_tpas == n && a.method == method)
                .map(|a| (a.param, a.mean_power_dbm))
                .collect();
            if points.is_empty() {
                continue;
            }
            let color = Palette99::pick(series_index).to_rgba();
            series_index += 1;
            let label = format!("{} N={n}", if method == Method::Benchmark { "benchmark" } else { "proposed" });
            chart
                .draw_series(LineSeries::new(points.clone(), color.stroke_width(2)))
                .map_err(plot_error)?
                .label(label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
            chart
                .draw_series(PointSeries::of_element(points, 4, color.filled(), &|c, s, st| Circle::new(c, s, st)))
                .map_err(plot_error)?;
        }
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.85)).border_style(BLACK).draw().map_err(plot_error)?;
    root.present().map_err(plot_error)?;
    Ok(())
}

/// Writes `sweep_<parameter>.csv` (and `.svg` when `plots` is set) under
/// `out_dir` and returns the paths written.
pub fn emit(result: &SweepResult, out_dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let stem = format!("sweep_{}", result.parameter);
    let csv_path = out_dir.join(format!("{stem}.csv"));
    write_csv(result, &csv_path)?;
    let mut written = vec![csv_path];
    if plots {
        let svg_path = out_dir.join(format!("{stem}.svg"));
        plot_svg(result, &svg_path)?;
        written.push(svg_path);
    }
    Ok(written)
}
