//! Plain-text table files.
//!
//! ```text
//! mm-tables v1
//! z_min=<f64> z_max=<f64> J=<int> lambda=<f64> beta=<f64>
//! z,A,b,sigma,N_lambda
//! <one row per node, ascending z>
//! ```
//!
//! Floats are written in shortest round-trip form, so a saved table loads
//! back bit for bit.

use super::{Grid, MacroTables, TabulatedFunction1D};
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

const MAGIC: &str = "mm-tables v1";
const HEADER: &str = "z,A,b,sigma,N_lambda";

pub fn write_tables(tables: &MacroTables, mut w: impl Write) -> Result<()> {
    let g = tables.grid();
    writeln!(w, "{MAGIC}")?;
    writeln!(
        w,
        "z_min={} z_max={} J={} lambda={} beta={}",
        g.z_min(),
        g.z_max(),
        g.len(),
        tables.lambda,
        tables.beta
    )?;
    writeln!(w, "{HEADER}")?;
    for j in 0..g.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            g.node(j),
            tables.free_energy.values()[j],
            tables.drift.values()[j],
            tables.diffusion.values()[j],
            tables.n_lambda.values()[j]
        )?;
    }
    Ok(())
}

pub fn save_tables(tables: &MacroTables, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tables(tables, &mut w)?;
    w.flush()?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("invalid {what} `{s}`")))
}

pub fn read_tables(r: impl BufRead) -> Result<MacroTables> {
    let mut lines = r.lines();
    let mut next = |n: usize| -> Result<String> {
        match lines.next() {
            Some(l) => Ok(l?),
            None => Err(parse_err(n, "unexpected end of file")),
        }
    };
    if next(1)?.trim() != MAGIC {
        return Err(parse_err(1, format!("expected `{MAGIC}`")));
    }
    let meta = next(2)?;
    let mut fields = std::collections::HashMap::new();
    for tok in meta.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| parse_err(2, format!("malformed field `{tok}`")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| parse_err(2, format!("missing `{k}`")));
    let z_min = parse_f64(get("z_min")?, 2, "z_min")?;
    let z_max = parse_f64(get("z_max")?, 2, "z_max")?;
    let nodes: usize = get("J")?
        .parse()
        .map_err(|_| parse_err(2, "invalid J"))?;
    let lambda = parse_f64(get("lambda")?, 2, "lambda")?;
    let beta = parse_f64(get("beta")?, 2, "beta")?;
    let grid = Grid::new(z_min, z_max, nodes).map_err(|e| parse_err(2, e.to_string()))?;
    if next(3)?.trim() != HEADER {
        return Err(parse_err(3, format!("expected header `{HEADER}`")));
    }
    let mut cols: [Vec<f64>; 4] = Default::default();
    let tol = 1e-9 * (z_max - z_min);
    for j in 0..nodes {
        let n = j + 4;
        let row = next(n)?;
        let parts: Vec<&str> = row.split(',').collect();
        if parts.len() != 5 {
            return Err(parse_err(n, format!("expected 5 columns, got {}", parts.len())));
        }
        let z = parse_f64(parts[0], n, "z")?;
        if (z - grid.node(j)).abs() > tol {
            return Err(parse_err(n, format!("node z={z} does not match the grid")));
        }
        for (c, p) in cols.iter_mut().zip(&parts[1..]) {
            c.push(parse_f64(p, n, "value")?);
        }
    }
    let [a, b, s, nl] = cols;
    let table = |v| TabulatedFunction1D::new(grid, v);
    MacroTables::new(table(a)?, table(b)?, table(s)?, table(nl)?, lambda, beta)
        .map_err(|e| parse_err(nodes + 3, e.to_string()))
}

pub fn load_tables(path: impl AsRef<Path>) -> Result<MacroTables> {
    read_tables(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> MacroTables {
        let g = Grid::new(0.0, std::f64::consts::PI, 17).unwrap();
        let f = |h: fn(f64) -> f64| TabulatedFunction1D::from_fn(g, h).unwrap();
        MacroTables::new(
            f(|z| (z - 1.3).powi(2) / 3.0),
            f(|z| -z.sin() * 1e-7),
            f(|z| 1.0 + 0.1 * z.cos()),
            f(|z| (-z).exp() * 0.1234567890123),
            1e5,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        save_tables(&t, &p).unwrap();
        let u = load_tables(&p).unwrap();
        assert_eq!(t, u);
        assert_eq!(u.lambda, 1e5);
        assert_eq!(u.grid().len(), 17);
    }

    fn parse(s: &str) -> Result<MacroTables> {
        read_tables(s.as_bytes())
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn rejects_non_monotone_bounds() {
        let s = "mm-tables v1\nz_min=2 z_max=1 J=2 lambda=1 beta=1\nz,A,b,sigma,N_lambda\n";
        assert_eq!(line_of(parse(s).unwrap_err()), 2);
    }

    #[test]
    fn rejects_truncated_file() {
        let mut buf = Vec::new();
        write_tables(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert_eq!(line_of(parse(&cut).unwrap_err()), 11);
    }

    #[test]
    fn rejects_bad_magic_and_rows() {
        assert_eq!(line_of(parse("tables\n").unwrap_err()), 1);
        let s = "mm-tables v1\nz_min=0 z_max=1 J=2 lambda=1 beta=1\nz,A,b,sigma,N_lambda\n0,0,0,1,1\n1,0,x,1,1\n";
        assert_eq!(line_of(parse(s).unwrap_err()), 5);
        let s = "mm-tables v1\nz_min=0 z_max=1 J=2 lambda=1 beta=1\nz,A,b,sigma,N_lambda\n0,0,0,1,1\n1,0,0,0,1\n";
        assert!(matches!(parse(s), Err(Error::Parse { .. })));
    }

    proptest! {
        #[test]
        fn arbitrary_values_round_trip(vals in proptest::collection::vec(-1e300f64..1e300, 4), pos in proptest::collection::vec(1e-300f64..1e300, 4)) {
            let g = Grid::new(-0.1, 0.3, 4).unwrap();
            let t = MacroTables::new(
                TabulatedFunction1D::new(g, vals.clone()).unwrap(),
                TabulatedFunction1D::new(g, vals.iter().map(|v| -v).collect()).unwrap(),
                TabulatedFunction1D::new(g, pos.clone()).unwrap(),
                TabulatedFunction1D::new(g, pos.iter().rev().copied().collect()).unwrap(),
                3.7e-3,
                0.01,
            ).unwrap();
            let mut buf = Vec::new();
            write_tables(&t, &mut buf).unwrap();
            prop_assert_eq!(read_tables(buf.as_slice()).unwrap(), t);
        }
    }
}
