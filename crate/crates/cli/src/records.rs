//! `metrics.csv`: one header row, then one row per evaluation point.
//! `env_step` is an integer; every other column is written with 17
//! significant digits so values round-trip exactly.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use hredq_core::metrics::RunRecord;

pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_records<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RunRecord::COLUMNS)?;
    for r in records {
        let mut row = vec![r.env_step.to_string()];
        row.extend(r.values().iter().map(|&v| format_real(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != RunRecord::COLUMNS {
        bail!("unexpected metrics header {header:?}");
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let step: u64 = row[0]
            .parse()
            .with_context(|| format!("row {}: env_step", i + 1))?;
        let mut values = [0.0; 10];
        for (j, v) in values.iter_mut().enumerate() {
            *v = row[j + 1]
                .parse()
                .with_context(|| format!("row {}: {}", i + 1, RunRecord::COLUMNS[j + 1]))?;
        }
        out.push(RunRecord::from_values(step, values));
    }
    Ok(out)
}

pub fn read_records_file(path: &Path) -> Result<Vec<RunRecord>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_records(f).with_context(|| format!("reading {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip_exactly() {
        let r = RunRecord {
            env_step: 1000,
            mean_return: -12.345678901234567,
            success_rate: 0.3,
            q_mean: 1.0 / 3.0,
            q_low: -1e-300,
            q_high: f64::MAX,
            frac_below_qmin: 0.0,
            frac_above_qmax: 1.0,
            alpha: 0.1 + 0.2,
            critic_loss: f64::NAN,
            policy_loss: -0.0,
        };
        let mut buf = Vec::new();
        write_records(&mut buf, &[r, r]).unwrap();
        let back = read_records(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back[0].values().iter().zip(r.values()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("env_step,mean_return,success_rate,"));
    }
}
