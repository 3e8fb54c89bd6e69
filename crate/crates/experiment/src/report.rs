//! CSV and text output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

use crate::metrics::{CustomerRecord, INDICATORS};
use crate::runner::ArmResult;

/// Formats like C's `%g`: six significant digits, trailing zeros dropped,
/// scientific notation outside `[1e-4, 1e6)`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_per_customer(dir: &Path, results: &[ArmResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, "per_customer.csv")?);
    w.write_record([
        "method",
        "strategy",
        "run",
        "customer",
        "max_gains",
        "min_gains",
        "gains_init",
        "gains_interest",
        "gains_final",
        "percentage",
        "rel_percentage",
        "deal",
        "rounds",
    ])?;
    for res in results {
        let (m, s) = res.arm.to_string().split_once('_').map(|(a, b)| (a.to_string(), b.to_string())).unwrap();
        for run in &res.runs {
            for r in &run.records {
                w.write_record(customer_row(&m, &s, r))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn customer_row(method: &str, strategy: &str, r: &CustomerRecord) -> Vec<String> {
    vec![
        method.to_string(),
        strategy.to_string(),
        r.run.to_string(),
        r.customer.to_string(),
        fmt_g(r.max_gains),
        fmt_g(r.min_gains),
        fmt_g(r.gains_init),
        fmt_g(r.gains_interest),
        fmt_g(r.gains_final),
        fmt_g(r.percentage),
        fmt_g(r.rel_percentage),
        u8::from(r.deal).to_string(),
        r.rounds.to_string(),
    ]
}

/// One row per customer index, one column per arm.
pub fn write_moving_avg(dir: &Path, results: &[ArmResult], window: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, "moving_avg.csv")?);
    let series: Vec<Vec<f64>> = results.iter().map(|r| r.moving_rel_percentage(window)).collect();
    let mut header = vec!["customer".to_string()];
    header.extend(results.iter().map(|r| r.arm.to_string()));
    w.write_record(&header)?;
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    for i in 0..len {
        let mut row = vec![i.to_string()];
        row.extend(series.iter().map(|s| fmt_g(s[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows are indicators; each arm contributes a mean and a std column.
pub fn write_summary(dir: &Path, results: &[ArmResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, "summary.csv")?);
    let summaries: Vec<_> = results.iter().map(ArmResult::summary).collect();
    let mut header = vec!["indicator".to_string()];
    for r in results {
        header.push(format!("{}_mean", r.arm));
        header.push(format!("{}_std", r.arm));
    }
    w.write_record(&header)?;
    for (i, name) in INDICATORS.iter().enumerate() {
        let mut row = vec![name.to_string()];
        for s in &summaries {
            row.push(fmt_g(s.values[i].0));
            row.push(fmt_g(s.values[i].1));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_traces(dir: &Path, results: &[ArmResult]) -> Result<()> {
    let mut w = create(dir, "traces.jsonl")?;
    for res in results {
        for run in &res.runs {
            for line in &run.traces {
                serde_json::to_writer(&mut w, line)?;
                writeln!(w)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_gains_tables(dir: &Path, results: &[ArmResult]) -> Result<()> {
    for res in results {
        for (r, run) in res.runs.iter().enumerate() {
            if let Some(t) = &run.gains_table {
                t.write_csv(create(dir, &format!("gains_table_{}_run{r}.csv", res.arm))?)?;
            }
        }
    }
    Ok(())
}

/// Writes every output file into `dir`, creating it if needed.
pub fn write_all(dir: &Path, results: &[ArmResult], window: usize, traces: bool) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    write_per_customer(dir, results)?;
    write_moving_avg(dir, results, window)?;
    write_summary(dir, results)?;
    write_gains_tables(dir, results)?;
    if traces {
        write_traces(dir, results)?;
    }
    Ok(())
}

/// Plain-text version of the summary for the terminal.
pub fn summary_table(results: &[ArmResult]) -> String {
    let summaries: Vec<_> = results.iter().map(ArmResult::summary).collect();
    let mut out = format!("{:<16}", "indicator");
    for r in results {
        out += &format!("{:>22}", r.arm.to_string());
    }
    out.push('\n');
    for (i, name) in INDICATORS.iter().enumerate() {
        out += &format!("{name:<16}");
        for s in &summaries {
            let (m, sd) = s.values[i];
            out += &format!("{:>22}", format!("{} ({})", fmt_g(m), fmt_g(sd)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_g_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (863.33, "863.33"),
            (-1023.61, "-1023.61"),
            (2.0 / 3.0, "0.666667"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234567, "1.23457e-05"),
            (999999.5, "1e+06"),
            (66.92642186245412, "66.9264"),
            (f64::NAN, "nan"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g(x), s, "{x}");
        }
    }
}
