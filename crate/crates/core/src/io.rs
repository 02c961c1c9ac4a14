//! Profile CSV format and float formatting shared by the CLI outputs.
//!
//! All floats are serialized with 17 significant digits so that re-running a
//! manifest reproduces bit-identical files.

use crate::error::{Error, Result};
use crate::fields::{FieldNode, ProfileFields};
use crate::params::ModelParams;
use std::io::{BufRead, Write};

pub const PROFILE_HEADER: &str = "Z,w,sigma,rho,psi,dpsi,Q,H1,H2,H3,F,Delta";

/// 17-significant-digit representation that round-trips f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_profile_csv<W: Write>(out: &mut W, fields: &ProfileFields) -> Result<()> {
    writeln!(out, "{PROFILE_HEADER}")?;
    for n in &fields.nodes {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(n.z),
            fmt_f64(n.w),
            fmt_f64(n.sigma),
            fmt_f64(n.rho),
            fmt_f64(n.psi),
            fmt_f64(n.dpsi),
            fmt_f64(n.q),
            fmt_f64(n.h1),
            fmt_f64(n.h2),
            fmt_f64(n.h3),
            fmt_f64(n.f),
            fmt_f64(n.delta),
        )?;
    }
    Ok(())
}

pub fn read_profile_csv<R: BufRead>(input: R, params: ModelParams) -> Result<ProfileFields> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty profile CSV".into()))??;
    if header.trim() != PROFILE_HEADER {
        return Err(Error::Parse(format!("unexpected header: {header}")));
    }
    let mut nodes = Vec::new();
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 2)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 12 {
            return Err(Error::Parse(format!("line {}: expected 12 columns", ln + 2)));
        }
        // lambda_w is not part of the interchange format; consumers that need
        // it (the verification pass) differentiate w on the grid instead
        nodes.push(FieldNode {
            z: vals[0],
            w: vals[1],
            sigma: vals[2],
            rho: vals[3],
            psi: vals[4],
            dpsi: vals[5],
            q: vals[6],
            h1: vals[7],
            h2: vals[8],
            h3: vals[9],
            f: vals[10],
            lambda_w: f64::NAN,
            delta: vals[11],
        });
    }
    Ok(ProfileFields { params, z2: 0.0, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_roundtrip() {
        for v in [std::f64::consts::PI, 1.0 / 3.0, 1e-300, -2.2250738585072014e-308] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
