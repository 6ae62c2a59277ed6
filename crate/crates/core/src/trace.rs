//! Time series of mode occupations and energies, with CSV and JSON sidecar
//! serialization.
//!
//! CSV header: `t,eps_h,eps_w,eps_c,nbar_h,nbar_w,nbar_c`, followed by
//! `stderr_h,stderr_w,stderr_c` for stochastic traces.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Mode, ModeTriple, ThermalInit};
use crate::scalar::Real;

/// Descriptive metadata stored next to a trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    /// `unitary`, `spontaneous`, `dephasing`, `open:kappa=<κ>` or
    /// `classical:<matching>`.
    pub model: String,
    pub init_nbar: [f64; 3],
    pub omega: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl TraceMetadata {
    pub fn new<T: Real>(model: impl Into<String>, init: &ThermalInit<T>, modes: &ModeTriple<T>) -> Self {
        Self {
            model: model.into(),
            init_nbar: init.occupations().map(Real::as_f64),
            omega: modes.as_array().map(Real::as_f64),
            ..Default::default()
        }
    }
}

/// Mean occupations and energies of the three modes on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyTrace<T> {
    pub times: Vec<T>,
    /// Occupations `n̄_i(t)`, indexed by [`Mode::index`].
    pub nbar: [Vec<T>; 3],
    /// Energies `ε_i(t) = ω_i (n̄_i(t) + 1/2)`.
    pub eps: [Vec<T>; 3],
    /// Standard errors of the energies for Monte-Carlo traces.
    pub stderr: Option<[Vec<T>; 3]>,
    pub metadata: TraceMetadata,
}

impl<T: Real> EnergyTrace<T> {
    /// Builds a trace from occupations, deriving the energies from `modes`.
    pub fn from_occupations(
        times: Vec<T>,
        nbar: [Vec<T>; 3],
        modes: &ModeTriple<T>,
        metadata: TraceMetadata,
    ) -> Self {
        for series in &nbar {
            assert_eq!(series.len(), times.len(), "series length mismatch");
        }
        let eps = Mode::ALL.map(|mode| {
            nbar[mode.index()]
                .iter()
                .map(|&n| modes.energy(mode, n))
                .collect()
        });
        Self {
            times,
            nbar,
            eps,
            stderr: None,
            metadata,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn energy(&self, mode: Mode) -> &[T] {
        &self.eps[mode.index()]
    }

    pub fn occupation(&self, mode: Mode) -> &[T] {
        &self.nbar[mode.index()]
    }

    /// Checks that every sample is finite, naming the first offending column.
    pub fn ensure_finite(&self) -> Result<()> {
        let mut columns: Vec<(String, &Vec<T>)> = vec![("t".into(), &self.times)];
        for mode in Mode::ALL {
            columns.push((format!("eps_{}", mode.label()), &self.eps[mode.index()]));
            columns.push((format!("nbar_{}", mode.label()), &self.nbar[mode.index()]));
        }
        if let Some(se) = &self.stderr {
            for mode in Mode::ALL {
                columns.push((format!("stderr_{}", mode.label()), &se[mode.index()]));
            }
        }
        for (name, col) in columns {
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::domain(
                    "EnergyTrace::ensure_finite",
                    format!("column {name} row {row} of trace '{}' is not finite", self.metadata.model),
                ));
            }
        }
        Ok(())
    }

    fn header(&self) -> Vec<&'static str> {
        let mut header = vec!["t", "eps_h", "eps_w", "eps_c", "nbar_h", "nbar_w", "nbar_c"];
        if self.stderr.is_some() {
            header.extend(["stderr_h", "stderr_w", "stderr_c"]);
        }
        header
    }

    /// Writes the CSV body. Fails on non-finite samples.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::result::Result<(), TraceIoError> {
        self.ensure_finite()?;
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(self.header())?;
        for i in 0..self.len() {
            let mut row = vec![self.times[i].to_string()];
            row.extend(self.eps.iter().map(|c| c[i].to_string()));
            row.extend(self.nbar.iter().map(|c| c[i].to_string()));
            if let Some(se) = &self.stderr {
                row.extend(se.iter().map(|c| c[i].to_string()));
            }
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Reads a CSV body written by [`write_csv`](Self::write_csv). Metadata
    /// is left at its default; see [`read_sidecar`].
    pub fn read_csv<R: Read>(reader: R) -> std::result::Result<Self, TraceIoError> {
        let mut csv = csv::Reader::from_reader(reader);
        let headers = csv.headers()?.clone();
        let index = |name: &str| headers.iter().position(|h| h == name);
        let required = ["t", "eps_h", "eps_w", "eps_c", "nbar_h", "nbar_w", "nbar_c"];
        let mut cols = Vec::new();
        for name in required {
            cols.push(index(name).ok_or_else(|| TraceIoError::Format(format!("missing column {name}")))?);
        }
        let stderr_cols: Option<Vec<usize>> = ["stderr_h", "stderr_w", "stderr_c"]
            .iter()
            .map(|n| index(n))
            .collect();

        let mut times = Vec::new();
        let mut eps: [Vec<T>; 3] = Default::default();
        let mut nbar: [Vec<T>; 3] = Default::default();
        let mut stderr: [Vec<T>; 3] = Default::default();
        for (row, record) in csv.records().enumerate() {
            let record = record?;
            let parse = |col: usize| -> std::result::Result<T, TraceIoError> {
                let field = record.get(col).unwrap_or("");
                field
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| TraceIoError::Format(format!("row {row}: cannot parse {field:?}")))
            };
            times.push(parse(cols[0])?);
            for k in 0..3 {
                eps[k].push(parse(cols[1 + k])?);
                nbar[k].push(parse(cols[4 + k])?);
            }
            if let Some(sc) = &stderr_cols {
                for k in 0..3 {
                    stderr[k].push(parse(sc[k])?);
                }
            }
        }
        Ok(Self {
            times,
            nbar,
            eps,
            stderr: stderr_cols.map(|_| stderr),
            metadata: TraceMetadata::default(),
        })
    }

    /// Writes the metadata as pretty-printed JSON.
    pub fn write_sidecar<W: Write>(&self, writer: W) -> std::result::Result<(), TraceIoError> {
        serde_json::to_writer_pretty(writer, &self.metadata)?;
        Ok(())
    }
}

/// Reads trace metadata written by [`EnergyTrace::write_sidecar`].
pub fn read_sidecar<R: Read>(reader: R) -> std::result::Result<TraceMetadata, TraceIoError> {
    Ok(serde_json::from_reader(reader)?)
}

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed trace: {0}")]
    Format(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EnergyTrace<f64> {
        let modes = ModeTriple::default();
        let init = ThermalInit::from_occupations(0.5, 2.5, 2.0).unwrap();
        let times = vec![0.0, 0.5, 1.0];
        let nbar = [vec![0.5, 0.6, 0.7], vec![2.5, 2.4, 2.3], vec![2.0, 1.9, 1.8]];
        EnergyTrace::from_occupations(times, nbar, &modes, TraceMetadata::new("unitary", &init, &modes))
    }

    #[test]
    fn energies_follow_frequencies() {
        let t = sample();
        assert_eq!(t.energy(Mode::Hot)[0], 2.0);
        assert_eq!(t.energy(Mode::Cold)[2], 2.3);
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let mut t = sample();
        t.stderr = Some([vec![0.1; 3], vec![0.2; 3], vec![0.3; 3]]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,eps_h,eps_w,eps_c,nbar_h,nbar_w,nbar_c,stderr_h,stderr_w,stderr_c\n"));
        let back = EnergyTrace::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.times, t.times);
        assert_eq!(back.eps, t.eps);
        assert_eq!(back.nbar, t.nbar);
        assert_eq!(back.stderr, t.stderr);
    }

    #[test]
    fn non_finite_rows_are_rejected() {
        let mut t = sample();
        t.eps[2][1] = f64::NAN;
        let err = t.write_csv(Vec::new()).unwrap_err();
        assert!(err.to_string().contains("eps_c row 1"), "{err}");
    }

    #[test]
    fn sidecar_round_trip() {
        let mut t = sample();
        t.metadata.seed = Some(7);
        let mut buf = Vec::new();
        t.write_sidecar(&mut buf).unwrap();
        assert_eq!(read_sidecar(buf.as_slice()).unwrap(), t.metadata);
    }
}
