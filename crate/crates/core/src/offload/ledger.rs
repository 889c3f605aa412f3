use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub slot: usize,
    pub generated_bits: f64,
    pub completed_bits: f64,
    pub expired_bits: f64,
    pub generated_tasks: usize,
    pub completed_tasks: usize,
    pub expired_tasks: usize,
    /// Completed over generated tasks, cumulative through this slot.
    pub success_rate: f64,
}

/// Per-slot accounting of generated, completed and expired work.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLedger {
    pub rows: Vec<SlotMetrics>,
    pub generated_bits: f64,
    pub completed_bits: f64,
    pub expired_bits: f64,
    pub generated_tasks: usize,
    pub completed_tasks: usize,
    pub expired_tasks: usize,
}

impl MetricsLedger {
    /// Closes `slot` with the given flows and returns its row.
    pub fn settle(
        &mut self,
        slot: usize,
        generated: &[f64],
        completed: &[f64],
        expired: &[f64],
    ) -> SlotMetrics {
        let sum = |v: &[f64]| v.iter().fold(0.0, |a, b| a + b);
        self.generated_bits += sum(generated);
        self.completed_bits += sum(completed);
        self.expired_bits += sum(expired);
        self.generated_tasks += generated.len();
        self.completed_tasks += completed.len();
        self.expired_tasks += expired.len();
        let row = SlotMetrics {
            slot,
            generated_bits: sum(generated),
            completed_bits: sum(completed),
            expired_bits: sum(expired),
            generated_tasks: generated.len(),
            completed_tasks: completed.len(),
            expired_tasks: expired.len(),
            success_rate: self.success_rate(),
        };
        self.rows.push(row);
        row
    }

    /// Completed over generated tasks; 1 when nothing was generated.
    pub fn success_rate(&self) -> f64 {
        if self.generated_tasks == 0 {
            1.0
        } else {
            self.completed_tasks as f64 / self.generated_tasks as f64
        }
    }

    /// Objective value: total bits completed within deadline.
    pub fn objective(&self) -> f64 {
        self.completed_bits
    }

    pub fn in_flight_bits(&self) -> f64 {
        self.generated_bits - self.completed_bits - self.expired_bits
    }

    pub fn mean_throughput(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.rows.iter().map(|r| r.completed_bits).sum::<f64>() / self.rows.len() as f64
        }
    }

    /// `slot,generated_bits,completed_bits,expired_bits,success_rate`
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "slot,generated_bits,completed_bits,expired_bits,success_rate")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.slot, r.generated_bits, r.completed_bits, r.expired_bits, r.success_rate
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuous_success_is_one() {
        let mut l = MetricsLedger::default();
        let r = l.settle(0, &[], &[], &[]);
        assert_eq!(r.success_rate, 1.0);
        assert_eq!(l.mean_throughput(), 0.0);
    }

    #[test]
    fn csv_layout() {
        let mut l = MetricsLedger::default();
        l.settle(0, &[2e5, 3e5], &[], &[]);
        l.settle(1, &[], &[2e5], &[3e5]);
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "slot,generated_bits,completed_bits,expired_bits,success_rate\n\
             0,500000,0,0,0\n1,0,200000,300000,0.5\n"
        );
        assert_eq!(l.in_flight_bits(), 0.0);
    }
}
