use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use conelab_core::cone::Figure1Frame;

/// Writes artifacts into one directory and remembers their names.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// File-name friendly rendering of a time or radius.
pub fn tag(v: f64) -> String {
    format!("{v}")
}

const PANEL: f64 = 240.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// One square panel per frame with the lifted curves as closed polylines and
/// the ray through the collision midpoint.
pub fn figure1_svg(frames: &[Figure1Frame]) -> String {
    let extent = frames
        .iter()
        .flat_map(|f| f.curves.iter())
        .flat_map(|c| c.points.iter())
        .map(|p| p.0.abs().max(p.1.abs()))
        .fold(1e-12, f64::max);
    let scale = 0.45 * PANEL / extent;
    let width = PANEL * frames.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{h}" viewBox="0 0 {width} {h}">"#,
        h = PANEL + 20.0
    );
    for (i, f) in frames.iter().enumerate() {
        let (cx, cy) = (PANEL * (i as f64 + 0.5), PANEL * 0.5);
        let _ = writeln!(
            s,
            r##"<line x1="{cx}" y1="{cy}" x2="{x2:.2}" y2="{cy}" stroke="#999" stroke-dasharray="4 3"/>"##,
            x2 = cx + 0.48 * PANEL
        );
        for (k, c) in f.curves.iter().enumerate() {
            let pts: Vec<String> =
                c.points.iter().map(|p| format!("{:.2},{:.2}", cx + scale * p.0, cy - scale * p.1)).collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="none" stroke="{}" stroke-width="1.2"/>"#,
                pts.join(" "),
                COLORS[k % COLORS.len()]
            );
        }
        let label = if f.truncated { format!("t = {} (broken)", f.t) } else { format!("t = {}", f.t) };
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="middle">{label}</text>"#,
            y = PANEL + 12.0
        );
    }
    s.push_str("</svg>\n");
    s
}
