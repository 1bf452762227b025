//! Convergence-curve assembly, communication accounting, and CSV export.

use crate::error::{Error, Result};
use crate::trainers::RoundResult;
use std::io::Write;
use std::path::Path;

/// Per-round summary kept in a curve (the global parameters are dropped).
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    /// Measured wall time; recorded but excluded from determinism checks.
    pub wall_ms: u64,
}

impl From<&RoundResult> for RoundRecord {
    fn from(r: &RoundResult) -> Self {
        RoundRecord {
            round: r.round,
            train_loss: r.train_loss,
            test_accuracy: r.test_accuracy,
            bytes_up: r.bytes_up,
            bytes_down: r.bytes_down,
            wall_ms: r.wall_ms,
        }
    }
}

/// An immutable, completed run: identifying strings plus one record per
/// round, rounds strictly increasing from 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceCurve {
    run_id: String,
    config_echo: String,
    records: Vec<RoundRecord>,
}

impl ConvergenceCurve {
    pub fn new(run_id: String, config_echo: String, records: Vec<RoundRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid_input("a curve needs at least one record"));
        }
        for (i, rec) in records.iter().enumerate() {
            if rec.round != i + 1 {
                return Err(Error::invalid_input(format!(
                    "record {i} carries round {}, expected {}",
                    rec.round,
                    i + 1
                )));
            }
        }
        Ok(ConvergenceCurve {
            run_id,
            config_echo,
            records,
        })
    }

    pub fn from_rounds(run_id: String, config_echo: String, rounds: &[RoundResult]) -> Result<Self> {
        Self::new(
            run_id,
            config_echo,
            rounds.iter().map(RoundRecord::from).collect(),
        )
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn config_echo(&self) -> &str {
        &self.config_echo
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("curves are non-empty")
    }
}

/// Totals of the per-round byte counters: `(bytes_up, bytes_down)`.
pub fn cumulative_bytes(curve: &ConvergenceCurve) -> (u64, u64) {
    curve
        .records()
        .iter()
        .fold((0, 0), |(up, down), r| (up + r.bytes_up, down + r.bytes_down))
}

/// Earliest round attaining the maximum test accuracy: `(round, accuracy)`.
pub fn best_accuracy(curve: &ConvergenceCurve) -> (usize, f64) {
    let mut best = &curve.records()[0];
    for r in &curve.records()[1..] {
        if r.test_accuracy > best.test_accuracy {
            best = r;
        }
    }
    (best.round, best.test_accuracy)
}

/// Six significant digits, scientific notation; round-trips through an f64
/// parse at that precision.
fn fmt_sig6(v: f64) -> String {
    format!("{v:.5e}")
}

/// Write the curve as CSV: fixed header, one row per record, floats with six
/// significant digits, newline-terminated.
pub fn export_csv(curve: &ConvergenceCurve, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut emit = |line: String| -> Result<()> {
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))
    };
    emit("round,train_loss,test_accuracy,bytes_up,bytes_down,wall_ms".to_string())?;
    for r in curve.records() {
        emit(format!(
            "{},{},{},{},{},{}",
            r.round,
            fmt_sig6(r.train_loss),
            fmt_sig6(r.test_accuracy),
            r.bytes_up,
            r.bytes_down,
            r.wall_ms
        ))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
