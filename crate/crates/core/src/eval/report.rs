use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const METRICS_HEADER: &str = "experiment,train_size,seed,macro_p,macro_r,macro_f,micro_p,accuracy,rand_index";

/// One line of the metrics CSV; `rand_index` is blank for supervised runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub experiment: String,
    pub train_size: usize,
    pub seed: u64,
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f: f64,
    pub micro_p: f64,
    pub accuracy: f64,
    pub rand_index: Option<f64>,
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(METRICS_HEADER.split(','))?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_blank_rand_index() {
        let row = MetricsRow {
            experiment: "B-H".into(),
            train_size: 39,
            seed: 1,
            macro_p: 0.5,
            macro_r: 0.25,
            macro_f: 1.0 / 3.0,
            micro_p: 0.75,
            accuracy: 0.75,
            rand_index: None,
        };
        let mut buf = Vec::new();
        write_metrics_csv(std::slice::from_ref(&row), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(METRICS_HEADER));
        assert!(lines.next().unwrap().ends_with(",0.75,"));
        assert_eq!(read_metrics_csv(&buf[..]).unwrap(), vec![row]);

        let mut empty = Vec::new();
        write_metrics_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), METRICS_HEADER);
    }
}
