//! `plot`: static SVG of a sweep CSV. One series per (estimator, link,
//! distribution): the median cosine distance as a polyline over signal
//! strength, with the interquartile range as a shaded band.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;

use stein_index::simlab::{read_sweep_csv, summarize, CellSummary};

use crate::fit::write_file;
use crate::{CliError, PlotArgs, Status};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Series sorted by signal strength, keyed by `(estimator, link, dist)`.
fn series(cells: Vec<CellSummary>) -> BTreeMap<(String, String, String), Vec<CellSummary>> {
    let mut out: BTreeMap<_, Vec<CellSummary>> = BTreeMap::new();
    for c in cells {
        out.entry((c.estimator.clone(), c.link.clone(), c.dist.clone())).or_default().push(c);
    }
    for v in out.values_mut() {
        v.sort_by(|a, b| a.signal_strength.total_cmp(&b.signal_strength));
    }
    out
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if hi - lo > 1e-12 {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

pub fn render(cells: Vec<CellSummary>, title: &str) -> String {
    let groups = series(cells);
    let several_estimators = groups.keys().map(|k| &k.0).collect::<std::collections::BTreeSet<_>>().len() > 1;
    let all = || groups.values().flatten();
    let (x0, x1) = span(all().map(|c| c.signal_strength));
    let (y0, y1) = span(all().flat_map(|c| [c.q1, c.q3, c.median]));
    let (y0, y1) = (y0.max(0.0).min(y1 - 1e-6), y1);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    )
    .unwrap();

    // axes, ticks and labels
    writeln!(
        s,
        r#"<g stroke="black" fill="none"><line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}"/></g>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph,
        TOP + ph
    )
    .unwrap();
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        writeln!(
            s,
            r#"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="black"/><text x="{0:.1}" y="{3:.1}" text-anchor="middle">{4:.3}</text>"#,
            sx(xv),
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            xv
        )
        .unwrap();
        writeln!(
            s,
            r#"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="black"/><text x="{3:.1}" y="{4:.1}" text-anchor="end">{5:.3}</text>"#,
            LEFT - 5.0,
            sy(yv),
            LEFT,
            LEFT - 8.0,
            sy(yv) + 4.0,
            yv
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">signal_strength</text>
<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">cosine_distance</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    )
    .unwrap();

    for (i, ((estimator, link, dist), cells)) in groups.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = if several_estimators {
            format!("{estimator}: {link}, {dist}")
        } else {
            format!("{link}, {dist}")
        };
        let band: Vec<String> = cells
            .iter()
            .map(|c| format!("{:.2},{:.2}", sx(c.signal_strength), sy(c.q3)))
            .chain(cells.iter().rev().map(|c| format!("{:.2},{:.2}", sx(c.signal_strength), sy(c.q1))))
            .collect();
        let line: Vec<String> = cells
            .iter()
            .map(|c| format!("{:.2},{:.2}", sx(c.signal_strength), sy(c.median)))
            .collect();
        writeln!(s, r#"<g data-series="{}">"#, escape(&label)).unwrap();
        writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" ")).unwrap();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" ")).unwrap();
        for c in cells {
            writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"><title>n={} median={:.4} q1={:.4} q3={:.4} trials={}</title></circle>"#,
                sx(c.signal_strength),
                sy(c.median),
                c.n,
                c.median,
                c.q1,
                c.q3,
                c.count
            )
            .unwrap();
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&label)
        )
        .unwrap();
        writeln!(s, "</g>").unwrap();
    }
    s.push_str("</svg>\n");
    s
}

pub fn run(a: PlotArgs) -> Result<Status, CliError> {
    let out = a
        .common
        .out
        .clone()
        .ok_or_else(|| CliError::Input("--out is required".into()))?;
    let file = fs::File::open(&a.input).map_err(|source| CliError::Read {
        path: a.input.clone(),
        source,
    })?;
    let rows = read_sweep_csv(BufReader::new(file)).map_err(|e| CliError::Input(format!("{}: {e}", a.input.display())))?;
    let cells = summarize(&rows);
    if cells.is_empty() {
        return Err(CliError::Input(format!("{}: no successful trials to plot", a.input.display())));
    }
    let title = a.title.unwrap_or_else(|| "cosine distance vs signal strength".into());
    write_file(&out, render(cells, &title).as_bytes())?;
    Ok(Status::Done)
}
