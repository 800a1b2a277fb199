//! Dataset CSV: columns `y, x_0 .. x_{d-1}, provenance`.

use std::path::Path;

use crate::synth::{LabeledSample, Provenance, SampleSet};

use super::HarnessError;

pub fn dataset_header(d: usize) -> Vec<String> {
    let mut h = vec!["y".to_string()];
    h.extend((0..d).map(|j| format!("x_{j}")));
    h.push("provenance".into());
    h
}

pub fn write_dataset(path: &Path, set: &SampleSet) -> Result<(), HarnessError> {
    let d = set.dim().unwrap_or(0);
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    w.write_record(dataset_header(d)).map_err(|e| HarnessError::io(path, e))?;
    for s in set.iter() {
        let mut rec = Vec::with_capacity(d + 2);
        rec.push(s.y.to_string());
        rec.extend(s.x.iter().map(|v| v.to_string()));
        rec.push(s.provenance.name().to_string());
        w.write_record(&rec).map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<SampleSet, HarnessError> {
    let bad = |line: usize, why: String| HarnessError::Format { path: path.into(), line, reason: why };
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    let header = r.headers().map_err(|e| HarnessError::io(path, e))?.clone();
    let d = header.len().saturating_sub(2);
    let expected = dataset_header(d);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(bad(1, format!("expected header {}", expected.join(","))));
    }
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let y: i8 = rec[0].trim().parse().map_err(|_| bad(line, format!("bad label {:?}", &rec[0])))?;
        if y != 1 && y != -1 {
            return Err(bad(line, format!("label must be 1 or -1, got {y}")));
        }
        let x = (1..=d)
            .map(|j| rec[j].trim().parse::<f64>().map_err(|_| bad(line, format!("bad value {:?}", &rec[j]))))
            .collect::<Result<Vec<_>, _>>()?;
        let provenance = Provenance::parse(rec[d + 1].trim())
            .ok_or_else(|| bad(line, format!("bad provenance {:?}", &rec[d + 1])))?;
        samples.push(LabeledSample { x, y, provenance });
    }
    Ok(SampleSet::new(samples))
}
