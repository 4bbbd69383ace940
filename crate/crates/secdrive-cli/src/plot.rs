//! Minimal SVG line charts from sweep CSV files. No external services or
//! libraries; the output is a single self-contained `<svg>` document.

use std::path::PathBuf;

use clap::Args;

use crate::config::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Sweep CSV file (first column is the x axis)
    #[arg(long)]
    pub input: PathBuf,
    /// Output SVG path (default: the input with an .svg extension)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Series to draw, by column name (default: every column)
    #[arg(long)]
    pub series: Vec<String>,
    /// Logarithmic y axis (requires positive values)
    #[arg(long)]
    pub log_y: bool,
}

struct Table {
    x_name: String,
    x: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
}

fn parse_csv(text: &str) -> CliResult<Table> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Validation("empty CSV".into()))?;
    let names: Vec<&str> = header.split(',').collect();
    if names.len() < 2 {
        return Err(CliError::Validation(
            "CSV needs an axis column and at least one series".into(),
        ));
    }
    let mut x = Vec::new();
    let mut columns: Vec<(String, Vec<f64>)> = names[1..]
        .iter()
        .map(|n| (n.to_string(), Vec::new()))
        .collect();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(CliError::Validation(format!(
                "row {}: expected {} fields, got {}",
                lineno + 2,
                names.len(),
                fields.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                CliError::Validation(format!("row {}: cannot parse '{s}'", lineno + 2))
            })
        };
        x.push(parse(fields[0])?);
        for (k, field) in fields[1..].iter().enumerate() {
            columns[k].1.push(parse(field)?);
        }
    }
    if x.len() < 2 {
        return Err(CliError::Validation("need at least two rows".into()));
    }
    Ok(Table {
        x_name: names[0].to_string(),
        x,
        columns,
    })
}

const PALETTE: [&str; 6] = [
    "#1f6fb2", "#d1495b", "#3f8f4a", "#8a5fbf", "#c9803a", "#4a4a4a",
];
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;

pub fn run_plot(args: &PlotArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::Io(format!("cannot read {:?}: {e}", args.input)))?;
    let table = parse_csv(&text)?;

    let selected: Vec<&(String, Vec<f64>)> = if args.series.is_empty() {
        table.columns.iter().collect()
    } else {
        args.series
            .iter()
            .map(|want| {
                table
                    .columns
                    .iter()
                    .find(|(name, _)| name == want)
                    .ok_or_else(|| {
                        CliError::Validation(format!("no series named '{want}' in the CSV"))
                    })
            })
            .collect::<CliResult<_>>()?
    };

    let y_map = |y: f64| -> CliResult<f64> {
        if args.log_y {
            if y <= 0.0 {
                return Err(CliError::Validation(format!(
                    "log_y requires positive values (found {y})"
                )));
            }
            Ok(y.log10())
        } else {
            Ok(y)
        }
    };
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, values) in &selected {
        for &v in values.iter() {
            let v = y_map(v)?;
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    if y_min == y_max {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let x_min = table.x.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = table.x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let to_px = |x: f64, y: f64| {
        (
            MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w,
            MARGIN_T + (y_max - y) / (y_max - y_min) * plot_h,
        )
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n"
    ));
    // Axis extremes.
    let label = |v: f64| {
        if v == 0.0 {
            "0".to_string()
        } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
            format!("{v:.3e}")
        } else {
            let s = format!("{v:.4}");
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        }
    };
    svg.push_str(&format!(
        "<text x=\"{MARGIN_L}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        HEIGHT - MARGIN_B + 20.0,
        label(x_min)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B + 20.0,
        label(x_max)
    ));
    let y_label = |v: f64| {
        if args.log_y {
            format!("1e{}", label(v))
        } else {
            label(v)
        }
    };
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
        MARGIN_L - 6.0,
        HEIGHT - MARGIN_B,
        y_label(y_min)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
        MARGIN_L - 6.0,
        MARGIN_T + 12.0,
        y_label(y_max)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        table.x_name
    ));

    for (idx, (name, values)) in selected.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut points = String::new();
        for (&x, &y) in table.x.iter().zip(values.iter()) {
            let (px, py) = to_px(x, y_map(y)?);
            points.push_str(&format!("{px:.2},{py:.2} "));
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
             points=\"{}\"/>\n",
            points.trim_end()
        ));
        let legend_y = MARGIN_T + 16.0 + 18.0 * idx as f64;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"3\" fill=\"{color}\"/>\n",
            MARGIN_L + 10.0,
            legend_y - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{legend_y}\" font-size=\"12\">{name}</text>\n",
            MARGIN_L + 28.0
        ));
    }
    svg.push_str("</svg>\n");

    let output = args
        .output
        .clone()
        .unwrap_or_else(|| args.input.with_extension("svg"));
    std::fs::write(&output, svg)
        .map_err(|e| CliError::Io(format!("cannot write {output:?}: {e}")))?;
    println!("wrote {}", output.display());
    Ok(())
}
