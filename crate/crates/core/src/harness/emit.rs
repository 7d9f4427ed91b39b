//! CSV and SVG output for phase grids.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::phase::{CrossingCurve, PhaseGrid, TrialRecord};
use crate::solver::Mode;

pub const CSV_HEADER: [&str; 11] = [
    "k", "n", "m", "method", "lambda", "trial", "seed", "success", "rel_err", "iters", "wall_ms",
];

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    k: usize,
    n: usize,
    m: usize,
    method: String,
    lambda: f64,
    trial: usize,
    seed: u64,
    success: u8,
    rel_err: f64,
    iters: usize,
    wall_ms: f64,
}

impl From<&TrialRecord> for CsvRow {
    fn from(r: &TrialRecord) -> Self {
        Self {
            k: r.k,
            n: r.n,
            m: r.m,
            method: r.method.to_string(),
            lambda: r.lambda,
            trial: r.trial,
            seed: r.seed,
            success: r.success as u8,
            rel_err: r.rel_err,
            iters: r.iters,
            wall_ms: r.wall_ms,
        }
    }
}

impl TryFrom<CsvRow> for TrialRecord {
    type Error = Error;

    fn try_from(r: CsvRow) -> Result<Self> {
        let success = match r.success {
            0 => false,
            1 => true,
            other => return Err(Error::Parse(format!("success must be 0 or 1, got {other}"))),
        };
        Ok(Self {
            k: r.k,
            n: r.n,
            m: r.m,
            method: r.method.parse()?,
            lambda: r.lambda,
            trial: r.trial,
            seed: r.seed,
            success,
            rel_err: r.rel_err,
            iters: r.iters,
            wall_ms: r.wall_ms,
        })
    }
}

/// One row per trial under the fixed header. An empty grid yields the
/// header alone.
pub fn records_to_csv(records: &[TrialRecord]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(CsvRow::from(r))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    rdr.deserialize::<CsvRow>()
        .map(|row| TrialRecord::try_from(row?))
        .collect()
}

pub fn write_grid_csv(grid: &PhaseGrid, path: &Path) -> Result<()> {
    let text = records_to_csv(&grid.records)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_grid_csv(path: &Path) -> Result<PhaseGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(PhaseGrid::from_records(parse_csv(&text)?))
}

/// Per-cell summary with Wilson 95% intervals.
pub fn cell_summary(grid: &PhaseGrid) -> String {
    let mut out = String::from("k,m,method,lambda,successes,trials,fraction,wilson_lo,wilson_hi,failures,mean_iters\n");
    for (key, c) in &grid.cells {
        let (lo, hi) = c.wilson95();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{:.4},{:.4},{},{:.1}",
            key.k,
            key.m,
            key.method,
            key.lambda(),
            c.successes,
            c.trials,
            c.fraction(),
            lo,
            hi,
            c.failures,
            c.mean_iters
        );
    }
    out
}

const CELL_W: f64 = 28.0;
const CELL_H: f64 = 8.0;
const MARGIN_L: f64 = 50.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;

/// Heat map of one series' success fractions over `(k, m)` (dark =
/// failure, light = success) with crossing curves drawn on top. Curves
/// flagged `dashed` use a dash pattern.
pub fn heatmap_svg(
    grid: &PhaseGrid,
    method: Mode,
    lambda: f64,
    curves: &[(&CrossingCurve, bool)],
) -> String {
    let lambda = if method == Mode::Jbp { lambda } else { 0.0 };
    let ks = &grid.k_values;
    let m_max = grid.m_ranges.values().map(|r| r.1).max().unwrap_or(1);
    let width = MARGIN_L + CELL_W * ks.len() as f64 + 20.0;
    let height = MARGIN_T + CELL_H * m_max as f64 + MARGIN_B;
    let x_of = |k: usize| -> Option<f64> {
        ks.iter()
            .position(|&v| v == k)
            .map(|i| MARGIN_L + CELL_W * (i as f64 + 0.5))
    };
    let y_of = |m: f64| MARGIN_T + CELL_H * (m_max as f64 - m + 0.5);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (key, cell) in grid
        .cells
        .iter()
        .filter(|(key, _)| key.method == method && key.lambda_bits == lambda.to_bits())
    {
        let Some(xc) = x_of(key.k) else { continue };
        let shade = (cell.fraction() * 255.0).round() as u8;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="{CELL_W}" height="{CELL_H}" fill="rgb({shade},{shade},{shade})"/>"#,
            xc - CELL_W / 2.0,
            y_of(key.m as f64) - CELL_H / 2.0
        );
    }
    for (curve, dashed) in curves {
        let pts: Vec<String> = curve
            .points
            .iter()
            .filter_map(|p| Some(format!("{:.1},{:.1}", x_of(p.k)?, y_of(p.m50?))))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let dash = if *dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="rgb(220,30,30)" stroke-width="2"{dash}><title>{} 50% success</title></polyline>"#,
            pts.join(" "),
            curve.method
        );
    }
    // axes
    let base = MARGIN_T + CELL_H * m_max as f64;
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{base}" x2="{:.1}" y2="{base}" stroke="black"/>"#,
        MARGIN_L + CELL_W * ks.len() as f64
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{base}" stroke="black"/>"#
    );
    for &k in ks {
        if let Some(x) = x_of(k) {
            let _ = writeln!(
                svg,
                r#"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{k}</text>"#,
                base + 14.0
            );
        }
    }
    let step = if m_max > 100 { 20 } else { 10 };
    for m in (0..=m_max).step_by(step) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{m}</text>"#,
            MARGIN_L - 4.0,
            y_of(m as f64) + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">k</text>"#,
        MARGIN_L + CELL_W * ks.len() as f64 / 2.0,
        base + 32.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">m</text>"#,
        MARGIN_T + CELL_H * m_max as f64 / 2.0,
        MARGIN_T + CELL_H * m_max as f64 / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn write_svg(svg: &str, path: &Path) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::PhaseConfig;
    use crate::harness::phase::{crossing_curve, run_phase_experiment};

    fn grid() -> PhaseGrid {
        run_phase_experiment(&PhaseConfig {
            k_values: vec![2, 4],
            trials: 4,
            master_seed: 77,
            ..PhaseConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn empty_grid_is_header_only() {
        let text = records_to_csv(&[]).unwrap();
        assert_eq!(text, "k,n,m,method,lambda,trial,seed,success,rel_err,iters,wall_ms\n");
        let grid = PhaseGrid::from_records(parse_csv(&text).unwrap());
        assert_eq!(grid, PhaseGrid::default());
    }

    #[test]
    fn round_trip() {
        let g = grid();
        let text = records_to_csv(&g.records).unwrap();
        assert!(text.starts_with("k,n,m,method,lambda,trial,seed,success,rel_err,iters,wall_ms\n"));
        let back = PhaseGrid::from_records(parse_csv(&text).unwrap());
        assert_eq!(back, g);
        assert_eq!(records_to_csv(&back.records).unwrap(), text);
    }

    #[test]
    fn round_trip_through_file() {
        let g = grid();
        let dir = std::env::temp_dir().join(format!("jointsparse-emit-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("grid.csv");
        write_grid_csv(&g, &path).unwrap();
        assert_eq!(read_grid_csv(&path).unwrap(), g);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn nan_error_round_trips() {
        let mut g = grid();
        g.records[0].rel_err = f64::NAN;
        g.records[0].success = false;
        let back = parse_csv(&records_to_csv(&g.records).unwrap()).unwrap();
        assert!(back[0].rel_err.is_nan());
        assert_eq!(back[1..], g.records[1..]);
    }

    #[test]
    fn rejects_bad_csv() {
        assert!(parse_csv("a,b\n1,2\n").is_err());
        let bad = "k,n,m,method,lambda,trial,seed,success,rel_err,iters,wall_ms\n2,4,1,LASSO,0,0,1,0,0.5,10,0\n";
        assert!(parse_csv(bad).is_err());
        let bad = "k,n,m,method,lambda,trial,seed,success,rel_err,iters,wall_ms\n2,4,1,BP,0,0,1,7,0.5,10,0\n";
        assert!(parse_csv(bad).is_err());
    }

    #[test]
    fn io_errors_carry_the_path() {
        let path = Path::new("/nonexistent-dir/grid.csv");
        let err = write_grid_csv(&grid(), path).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/grid.csv"));
    }

    #[test]
    fn svg_has_cells_and_two_curves() {
        let g = grid();
        let jbp = crossing_curve(&g, Mode::Jbp, 1.0);
        let bp = crossing_curve(&g, Mode::BpTime, 0.0);
        let svg = heatmap_svg(&g, Mode::Jbp, 1.0, &[(&jbp, false), (&bp, true)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        // one rectangle per JBP cell plus the background
        let cells = g.cells.keys().filter(|k| k.method == Mode::Jbp).count();
        assert_eq!(svg.matches("<rect").count(), cells + 1);
        let summary = cell_summary(&g);
        assert_eq!(summary.lines().count(), g.cells.len() + 1);
    }
}
