//! `CHDFIELD` plain-text snapshot files.
//!
//! ```text
//! CHDFIELD 1
//! nx ny lx ly t
//! v_00
//! v_01
//! ...
//! ```
//!
//! Values are x-major (row-major for an `nx x ny` matrix), one per line, in
//! 17-significant-digit scientific notation.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ChdError, Result};
use crate::grid::{Field, GridSpec};

pub const MAGIC: &str = "CHDFIELD 1";

pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn encode(field: &Field, t: f64) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(26 * (g.len() + 4));
    out.push_str(MAGIC);
    out.push('\n');
    let _ = writeln!(
        out,
        "{} {} {} {} {}",
        g.nx,
        g.ny,
        format_real(g.lx),
        format_real(g.ly),
        format_real(t)
    );
    for v in field.values() {
        out.push_str(&format_real(*v));
        out.push('\n');
    }
    out
}

pub fn decode(text: &str) -> Result<(Field, f64)> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, msg: &str| ChdError::Parse {
        line,
        msg: msg.to_string(),
    };
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(err(1, "missing `CHDFIELD 1` header")),
    }
    let (_, header) = lines.next().ok_or_else(|| err(2, "missing grid line"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 {
        return Err(err(2, "expected `nx ny lx ly t`"));
    }
    let nx: usize = parts[0].parse().map_err(|_| err(2, "bad nx"))?;
    let ny: usize = parts[1].parse().map_err(|_| err(2, "bad ny"))?;
    let lx: f64 = parts[2].parse().map_err(|_| err(2, "bad lx"))?;
    let ly: f64 = parts[3].parse().map_err(|_| err(2, "bad ly"))?;
    let t: f64 = parts[4].parse().map_err(|_| err(2, "bad t"))?;
    let grid = GridSpec::new(nx, ny, lx, ly)?;
    let mut values = Vec::with_capacity(grid.len());
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        values.push(line.parse::<f64>().map_err(|_| err(n + 1, "bad value"))?);
    }
    Ok((Field::new(grid, values)?, t))
}

pub fn write(path: &Path, field: &Field, t: f64) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, encode(field, t))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<(Field, f64)> {
    decode(&std::fs::read_to_string(path)?)
}
