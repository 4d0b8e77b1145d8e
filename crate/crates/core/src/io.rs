//! Serialization of portraits and curves: CSV, JSON and a compact binary
//! portrait format.
//!
//! Binary layout (little endian): magic `HPLK1\0\0\0`, `u32` counts of `B`
//! and `A` values, `f64` ω, B lo/hi, A lo/hi and tolerance, then per cell
//! `f64` ρ, `f64` uncertainty and a flag byte (bit 0 locked, bit 1
//! converged, bit 2 boundary), cells in row-major order with `A` rows.

use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::spectral::Curve;
use crate::torus::{Axis, GridSpec, Portrait, MAX_CELLS};

pub const CSV_HEADER: &str = "# hplk-csv v1";
pub const BINARY_MAGIC: &[u8; 8] = b"HPLK1\0\0\0";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("not an HPLK1 file")]
    BadMagic,
    #[error("invalid portrait data: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, FormatError>;

/// Output format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Binary,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "bin" | "binary" => Ok(Format::Binary),
            _ => Err(format!("unknown format '{s}' (csv, json, bin)")),
        }
    }
}

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn write_portrait_csv(p: &Portrait, mut w: impl Write) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    writeln!(w, "# omega={} tol={}", fmt_f64(p.grid.omega), fmt_f64(p.tol))?;
    writeln!(w, "B,A,rho,uncertainty,locked,converged,boundary")?;
    let (bs, as_) = (p.grid.b.values(), p.grid.a.values());
    for (ia, a) in as_.iter().enumerate() {
        for (ib, b) in bs.iter().enumerate() {
            let i = p.index(ib, ia);
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt_f64(*b),
                fmt_f64(*a),
                fmt_f64(p.rho[i]),
                fmt_f64(p.uncertainty[i]),
                p.locked[i] as u8,
                p.converged[i] as u8,
                p.boundary[i] as u8
            )?;
        }
    }
    Ok(())
}

pub fn write_curves_csv(curves: &[Curve], mut w: impl Write) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    writeln!(w, "A,B,equation,sign,residual")?;
    for c in curves {
        for pt in &c.points {
            writeln!(w, "{},{},{},{},{}", fmt_f64(pt.a), fmt_f64(pt.b), c.spec.equation.tag(), c.spec.sign.tag(), fmt_f64(pt.residual))?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, mut w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_portrait_binary(p: &Portrait, mut w: impl Write) -> Result<()> {
    let g = &p.grid;
    let count = |n: usize| u32::try_from(n).map_err(|_| FormatError::Invalid(format!("axis length {n}")));
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&count(g.b.n)?.to_le_bytes())?;
    w.write_all(&count(g.a.n)?.to_le_bytes())?;
    for x in [g.omega, g.b.lo, g.b.hi, g.a.lo, g.a.hi, p.tol] {
        w.write_all(&x.to_le_bytes())?;
    }
    for i in 0..p.len() {
        w.write_all(&p.rho[i].to_le_bytes())?;
        w.write_all(&p.uncertainty[i].to_le_bytes())?;
        let flags = p.locked[i] as u8 | (p.converged[i] as u8) << 1 | (p.boundary[i] as u8) << 2;
        w.write_all(&[flags])?;
    }
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub fn read_portrait_binary(mut r: impl Read) -> Result<Portrait> {
    if &read_array::<8>(&mut r)? != BINARY_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let nb = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let na = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let cells = nb.checked_mul(na).filter(|&c| c <= MAX_CELLS).ok_or_else(|| FormatError::Invalid(format!("{nb}x{na} cells")))?;
    let mut head = [0.0; 6];
    for x in head.iter_mut() {
        *x = read_f64(&mut r)?;
    }
    let [omega, b_lo, b_hi, a_lo, a_hi, tol] = head;
    let invalid = |e: crate::torus::TorusError| FormatError::Invalid(e.to_string());
    let grid = GridSpec { omega, b: Axis::new(b_lo, b_hi, nb).map_err(invalid)?, a: Axis::new(a_lo, a_hi, na).map_err(invalid)? };
    let mut p = Portrait {
        grid,
        tol,
        rho: Vec::with_capacity(cells),
        uncertainty: Vec::with_capacity(cells),
        locked: Vec::with_capacity(cells),
        converged: Vec::with_capacity(cells),
        boundary: Vec::with_capacity(cells),
    };
    for _ in 0..cells {
        p.rho.push(read_f64(&mut r)?);
        p.uncertainty.push(read_f64(&mut r)?);
        let [flags] = read_array::<1>(&mut r)?;
        if flags > 7 {
            return Err(FormatError::Invalid(format!("flag byte {flags}")));
        }
        p.locked.push(flags & 1 != 0);
        p.converged.push(flags & 2 != 0);
        p.boundary.push(flags & 4 != 0);
    }
    if r.read(&mut [0u8])? != 0 {
        return Err(FormatError::Invalid("trailing bytes".into()));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{CurveEquation, CurvePoint, CurveSpec, Sign};

    fn sample() -> Portrait {
        let grid = GridSpec { omega: 2.0, b: Axis::new(-1.0, 1.0, 3).unwrap(), a: Axis::new(0.0, 0.5, 2).unwrap() };
        Portrait {
            grid,
            tol: 1e-6,
            rho: vec![-0.5, 0.0, 0.5, -0.25, 0.0, 1.0 / 3.0],
            uncertainty: vec![1e-9; 6],
            locked: vec![false, true, false, false, true, false],
            converged: vec![true; 6],
            boundary: vec![false, true, true, false, false, false],
        }
    }

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(-1.5), "-1.5");
        assert_eq!(fmt_f64(2.5e-7), "2.5e-7");
        assert_eq!(fmt_f64(3e20), "3e20");
        assert_eq!(fmt_f64(0.1 + 0.2).parse::<f64>().unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn binary_round_trip() {
        let p = sample();
        let mut buf = Vec::new();
        write_portrait_binary(&p, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 48 + 6 * 17);
        assert_eq!(read_portrait_binary(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn binary_rejects_corruption() {
        let mut buf = Vec::new();
        write_portrait_binary(&sample(), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_portrait_binary(bad.as_slice()), Err(FormatError::BadMagic)));
        assert!(matches!(read_portrait_binary(&buf[..buf.len() - 1]), Err(FormatError::Io(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_portrait_binary(long.as_slice()), Err(FormatError::Invalid(_))));
    }

    #[test]
    fn portrait_csv_layout() {
        let mut buf = Vec::new();
        write_portrait_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[2], "B,A,rho,uncertainty,locked,converged,boundary");
        assert_eq!(lines.len(), 3 + 6);
        assert_eq!(lines[4], "0,0,0,1e-9,1,1,1");
    }

    #[test]
    fn curve_csv_and_json() {
        let curve = Curve {
            spec: CurveSpec::new(CurveEquation::E1, Sign::Minus, 1.0),
            points: vec![CurvePoint { b: 0.25, a: 1.0, residual: 1e-13 }],
        };
        let mut buf = Vec::new();
        write_curves_csv(std::slice::from_ref(&curve), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().nth(2), Some("1,0.25,e1,minus,1e-13"));
        let mut js = Vec::new();
        write_json(&curve, &mut js).unwrap();
        let back: Curve = serde_json::from_slice(&js).unwrap();
        assert_eq!(back, curve);
    }
}
