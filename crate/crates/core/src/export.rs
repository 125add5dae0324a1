//! CSV writers. Numbers carry 12 significant digits; infinities are written
//! as `inf` / `-inf`.

use crate::capacity::CapacityPoint;
use crate::error::{Error, Result};
use crate::rd_ba::RdCurve;
use crate::scalar::{InfoUnit, Real};

/// Formats like C's `%.12g`.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= DIGITS {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub(crate) fn num<T: Real>(x: T) -> String {
    fmt_sig(x.as_f64())
}

pub(crate) fn flag(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

/// Builds CSV text from a header and rows of already formatted fields.
pub(crate) fn write_csv<I, R>(header: &[String], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::Internal(format!("csv: {e}"));
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

/// `mu,D,R_<unit>,F_mu_nats,iterations,converged`, rows in curve order.
pub fn curve_csv<T: Real>(curve: &RdCurve<T>, unit: InfoUnit) -> Result<String> {
    let header: Vec<String> = ["mu", "D", &format!("R_{}", unit.suffix()), "F_mu_nats", "iterations", "converged"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_csv(
        &header,
        curve.points.iter().map(|p| {
            vec![
                num(p.mu),
                num(p.distortion),
                num(unit.from_bits(p.rate_bits)),
                num(p.objective_nats),
                p.iterations.to_string(),
                flag(p.converged).to_string(),
            ]
        }),
    )
}

/// `D0,B,C_<unit>,sensing_cost,input_cost,converged`.
pub fn capacity_csv<T: Real>(points: &[CapacityPoint<T>], unit: InfoUnit) -> Result<String> {
    let header: Vec<String> = ["D0", "B", &format!("C_{}", unit.suffix()), "sensing_cost", "input_cost", "converged"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_csv(
        &header,
        points.iter().map(|p| {
            vec![
                num(p.d0),
                num(p.b),
                num(unit.from_bits(p.capacity_bits)),
                num(p.sensing_cost_attained),
                num(p.input_cost_attained),
                flag(p.converged).to_string(),
            ]
        }),
    )
}

/// `D0,px_0,...,px_{n-1}`: the maximizing input of every capacity point.
pub fn input_dist_csv<T: Real>(points: &[CapacityPoint<T>]) -> Result<String> {
    let n = points.first().map_or(0, |p| p.px_star.len());
    let mut header = vec!["D0".to_string()];
    header.extend((0..n).map(|i| format!("px_{i}")));
    write_csv(
        &header,
        points.iter().map(|p| {
            std::iter::once(num(p.d0))
                .chain(p.px_star.probs().iter().map(|&v| num(v)))
                .collect::<Vec<_>>()
        }),
    )
}
