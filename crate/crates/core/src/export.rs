//! JSON and CSV writers for reports, penalty paths and optimal-value samples.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::global::PenaltyPath;
use crate::inner::InnerStatus;
use crate::perturbation::OptimalValueSamples;

/// Pretty-printed JSON followed by a newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

fn status_str(s: InnerStatus) -> &'static str {
    match s {
        InnerStatus::Converged => "converged",
        InnerStatus::BudgetExhausted => "budget_exhausted",
    }
}

/// Columns `lambda, x1..xn, f, phi, value, status`, one row per rung.
pub fn write_path_csv<W: Write>(path: &PenaltyPath, out: W) -> Result<()> {
    let dim = path.region.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["lambda".to_string()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    header.extend(["f", "phi", "value", "status"].map(String::from));
    w.write_record(&header)?;
    for r in &path.rungs {
        let mut row = vec![r.lambda.to_string()];
        row.extend(r.x.coords().iter().map(f64::to_string));
        row.extend([r.f_val.to_string(), r.phi_val.to_string(), r.value().to_string(), status_str(r.inner_status).to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `p, h, slope` with `slope = (h(p) − h(0))/p`.
pub fn write_value_function_csv<W: Write>(samples: &OptimalValueSamples, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "h", "slope"])?;
    for ((p, h), s) in samples.p_grid.iter().zip(&samples.h_vals).zip(&samples.slope_trace) {
        w.write_record([p.to_string(), h.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_path_csv_file(path: &PenaltyPath, file: &Path) -> Result<()> {
    write_path_csv(path, BufWriter::new(File::create(file)?))
}

pub fn write_value_function_csv_file(samples: &OptimalValueSamples, file: &Path) -> Result<()> {
    write_value_function_csv(samples, BufWriter::new(File::create(file)?))
}

/// `v` with six significant digits: fixed notation for `1e−4 ≤ |v| < 1e6`, scientific otherwise.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag) as usize, v)
    } else {
        format!("{v:.5e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::global::Rung;
    use crate::problem::{Point, Region};

    #[test]
    fn significant_digits() {
        assert_eq!(sig6(2.0), "2.00000");
        assert_eq!(sig6(-0.125), "-0.125000");
        assert_eq!(sig6(123456.0), "123456");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(12345.67), "12345.7");
        assert_eq!(sig6(1e-9), "1.00000e-9");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(f64::INFINITY), "inf");
    }

    #[test]
    fn path_csv_layout() {
        let path = PenaltyPath {
            rungs: vec![Rung {
                lambda: 2.0,
                x: Point::new(vec![1.0, -0.5]).unwrap(),
                f_val: 3.0,
                phi_val: 0.25,
                inner_status: InnerStatus::Converged,
            }],
            fstar: None,
            region: Region::cube(2, -1.0, 1.0).unwrap(),
        };
        let mut buf = Vec::new();
        write_path_csv(&path, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "lambda,x1,x2,f,phi,value,status\n2,1,-0.5,3,0.25,3.5,converged\n");
    }

    #[test]
    fn value_function_csv_layout() {
        let s = OptimalValueSamples::from_values(vec![0.5, 0.25], vec![-1.0, -0.25], 0.0).unwrap();
        let mut buf = Vec::new();
        write_value_function_csv(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "p,h,slope\n0.5,-1,-2\n0.25,-0.25,-1\n");
    }
}
