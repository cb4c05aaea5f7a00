//! Snapshot and diagnostics files.
//!
//! A snapshot is a sequence of field blocks. Each block starts with the line
//! `nx ny dx dy time name` followed by `ny` rows of `nx` space-separated
//! values (row `j` holds cells `(0, j) .. (nx - 1, j)`). Fields appear in the
//! order `rho eta tau mom_x [mom_y]`. Numbers use the shortest decimal form
//! that parses back to the same `f64`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::{DiagnosticsRecord, CSV_HEADER};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, State, VectorField};

const MOMENTUM_NAMES: [&str; 2] = ["mom_x", "mom_y"];

pub fn write_snapshot(s: &State, g: &Grid, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let mut block = |name: &str, f: &ScalarField| -> std::io::Result<()> {
        writeln!(w, "{} {} {} {} {} {}", g.nx, g.ny, g.dx, g.dy, s.time, name)?;
        for j in 0..g.ny {
            let row: Vec<String> = (0..g.nx).map(|i| f.get(i, j).to_string()).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    };
    block("rho", &s.rho)?;
    block("eta", &s.eta)?;
    block("tau", &s.tau)?;
    for (c, name) in MOMENTUM_NAMES.iter().enumerate().take(s.mom.dim()) {
        block(name, s.mom.comp(c))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub time: f64,
    pub fields: Vec<(String, ScalarField)>,
}

impl Snapshot {
    pub fn field(&self, name: &str) -> Option<&ScalarField> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn to_state(&self) -> Option<State> {
        let mom: Vec<ScalarField> = MOMENTUM_NAMES
            .iter()
            .map_while(|n| self.field(n).cloned())
            .collect();
        if mom.is_empty() {
            return None;
        }
        Some(State {
            rho: self.field("rho")?.clone(),
            eta: self.field("eta")?.clone(),
            tau: self.field("tau")?.clone(),
            mom: VectorField::from_components(mom),
            time: self.time,
        })
    }
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(path)?;
    let bad = |msg: String| Error::Snapshot {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut snap: Option<Snapshot> = None;
    while let Some((ln, header)) = lines.next() {
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 6 {
            return Err(bad(format!("line {}: expected `nx ny dx dy time name`", ln + 1)));
        }
        let num = |k: usize| -> Result<f64> {
            parts[k]
                .parse()
                .map_err(|_| bad(format!("line {}: bad number `{}`", ln + 1, parts[k])))
        };
        let size = |k: usize| -> Result<usize> {
            parts[k]
                .parse()
                .map_err(|_| bad(format!("line {}: bad size `{}`", ln + 1, parts[k])))
        };
        let (nx, ny, dx, dy, time) = (size(0)?, size(1)?, num(2)?, num(3)?, num(4)?);
        let mut data = Vec::with_capacity(nx * ny);
        for _ in 0..ny {
            let (rl, row) = lines.next().ok_or_else(|| bad(format!("field `{}` is truncated", parts[5])))?;
            let before = data.len();
            for tok in row.split_whitespace() {
                data.push(
                    tok.parse::<f64>()
                        .map_err(|_| bad(format!("line {}: bad value `{tok}`", rl + 1)))?,
                );
            }
            if data.len() - before != nx {
                return Err(bad(format!("line {}: expected {nx} values", rl + 1)));
            }
        }
        let field = ScalarField::from_vec(nx, ny, data)?;
        let s = snap.get_or_insert_with(|| Snapshot {
            nx,
            ny,
            dx,
            dy,
            time,
            fields: Vec::new(),
        });
        if (s.nx, s.ny) != (nx, ny) || s.dx != dx || s.dy != dy || s.time != time {
            return Err(bad(format!("line {}: block header disagrees with the first block", ln + 1)));
        }
        s.fields.push((parts[5].to_string(), field));
    }
    snap.ok_or_else(|| bad("empty snapshot".into()))
}

pub fn diagnostics_csv(history: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(64 * (history.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

pub fn write_diagnostics(history: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    fs::write(path, diagnostics_csv(history))?;
    Ok(())
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = fs::read_to_string(path)?;
    let bad = |msg: String| Error::Snapshot {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad("missing or unexpected CSV header".into()));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let values = line
                .split(',')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", k + 1)))?;
            DiagnosticsRecord::from_values(&values)
                .ok_or_else(|| bad(format!("row {}: expected {} columns", k + 1, DiagnosticsRecord::FIELD_COUNT)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    #[test]
    fn snapshot_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.txt");
        let g = Grid::new_2d(5, 4, 1.0, 0.7, Boundary::NoSlipBox).unwrap();
        let s = State {
            rho: ScalarField::from_fn(&g, |x, y| (x * 13.0).sin() + y / 3.0),
            eta: ScalarField::from_fn(&g, |x, y| 1.0 / (1.0 + x + y)),
            tau: ScalarField::from_fn(&g, |x, _| x.exp() * 1e-300),
            mom: VectorField::from_fn(&g, |x, y| [x - y, -1e17 * x]),
            time: 0.1 + 0.2,
        };
        write_snapshot(&s, &g, &path).unwrap();
        let snap = read_snapshot(&path).unwrap();
        assert_eq!((snap.nx, snap.ny, snap.dx, snap.dy), (5, 4, g.dx, g.dy));
        assert_eq!(snap.to_state().unwrap(), s);
        let first = std::fs::read_to_string(&path).unwrap();
        assert!(first.starts_with(&format!("5 4 {} {} {} rho\n", g.dx, g.dy, s.time)));
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "2 2 0.5 0.5 0 rho\n1 2\n").unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Snapshot { .. })));
    }

    #[test]
    fn diagnostics_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let rows = vec![
            DiagnosticsRecord {
                time: 0.0,
                kinetic: 1.5,
                ..DiagnosticsRecord::default()
            },
            DiagnosticsRecord {
                time: 0.1,
                energy_residual: -3e-9,
                mass_tau: 2.0 / 3.0,
                ..DiagnosticsRecord::default()
            },
        ];
        write_diagnostics(&rows, &path).unwrap();
        assert_eq!(read_diagnostics(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        for line in text.lines() {
            assert_eq!(line.split(',').count(), DiagnosticsRecord::FIELD_COUNT);
        }
    }
}
