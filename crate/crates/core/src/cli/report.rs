//! Report envelope and plot data.

use serde::Serialize;

use super::config::RunConfig;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Report<'a, R: Serialize> {
    pub schema: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub input: &'a RunConfig,
    pub result: R,
    pub status: &'a str,
    pub exit_code: i32,
}

impl<'a, R: Serialize> Report<'a, R> {
    pub fn new(command: &'a str, input: &'a RunConfig, result: R, status: &'a str, exit_code: i32) -> Self {
        Self {
            schema: SCHEMA,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: input.seed,
            input,
            result,
            status,
            exit_code,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Column data for plotting.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory csv");
        for row in &self.rows {
            // shortest round-trip representation
            w.write_record(row.iter().map(|v| format!("{v:?}"))).expect("in-memory csv");
        }
        let bytes = w.into_inner().expect("in-memory csv");
        String::from_utf8(bytes).expect("csv output is utf-8")
    }
}
