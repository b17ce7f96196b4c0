//! Text weight snapshots: a header line, then per tensor a line
//! `name dim0xdim1...` followed by one line of space-separated values in
//! shortest round-trip notation.

use std::fmt::Write as _;

use super::tensor::Parameterized;
use crate::error::{Error, Result};

const HEADER: &str = "chanaccess-weights v1";

pub fn write_snapshot<P: Parameterized + ?Sized>(model: &P) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for (name, t) in model.named_tensors() {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{name} {}", dims.join("x"));
        let values: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&values.join(" "));
        out.push('\n');
    }
    out
}

/// Loads a snapshot into `model`, which must have the same architecture.
pub fn read_snapshot<P: Parameterized + ?Sized>(model: &mut P, text: &str) -> Result<()> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(Error::Snapshot("missing header".into()));
    }
    let expected: Vec<(String, Vec<usize>)> = model
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    for ((name, shape), tensor) in expected.into_iter().zip(model.tensors_mut()) {
        let head = lines.next().ok_or_else(|| Error::Snapshot(format!("missing tensor {name}")))?;
        let dims = shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
        if head != format!("{name} {dims}") {
            return Err(Error::Snapshot(format!("expected `{name} {dims}`, found `{head}`")));
        }
        let body = lines.next().unwrap_or("");
        let values: Vec<f64> = body
            .split_ascii_whitespace()
            .map(|v| v.parse::<f64>().map_err(|e| Error::Snapshot(format!("{name}: {e}"))))
            .collect::<Result<_>>()?;
        if values.len() != tensor.len() {
            return Err(Error::Snapshot(format!("{name}: {} values for {} slots", values.len(), tensor.len())));
        }
        tensor.data_mut().copy_from_slice(&values);
    }
    Ok(())
}
