//! Versioned CSV tables.
//!
//! Every file starts with a line `#sibandit:<kind>:v<version>` followed by an
//! ordinary CSV header. Readers reject other kinds, unknown versions and
//! unexpected headers.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    RegretTrace,
    IndexDiagnostics,
    Summary,
    IndexSummary,
    Smoothness,
    SmoothnessBins,
    LinkGrid,
}

impl Table {
    pub fn kind(self) -> &'static str {
        match self {
            Table::RegretTrace => "regret_trace",
            Table::IndexDiagnostics => "index_diagnostics",
            Table::Summary => "summary",
            Table::IndexSummary => "index_summary",
            Table::Smoothness => "smoothness",
            Table::SmoothnessBins => "smoothness_bins",
            Table::LinkGrid => "link_grid",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            Table::RegretTrace => &["trial", "t", "arm", "inst_regret", "cum_regret"],
            Table::IndexDiagnostics => &["trial", "epoch", "arm", "index_error", "objective"],
            Table::Summary => &["t", "mean_cum_regret", "std_cum_regret", "algorithm"],
            Table::IndexSummary => &["epoch", "arm", "mean_index_error", "trials", "algorithm"],
            Table::Smoothness => &["trial", "beta_est", "beta_raw", "b_max", "l1", "l2", "l3", "n0"],
            Table::SmoothnessBins => &[
                "trial",
                "arm",
                "bin",
                "lo",
                "hi",
                "samples",
                "grid_points",
                "max_discrepancy",
            ],
            Table::LinkGrid => &["z", "link", "in_domain"],
        }
    }

    pub fn version_line(self) -> String {
        format!("#sibandit:{}:v{}", self.kind(), SCHEMA_VERSION)
    }
}

/// Writes `rows` under the versioned header of `table`.
pub fn write_table<W: Write>(out: W, table: Table, rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = out;
    writeln!(out, "{}", table.version_line())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(table.header())?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_file(path: &Path, table: Table, rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let file = File::create(path)?;
    write_table(std::io::BufWriter::new(file), table, rows)
}

/// Checks the version line and header, returning the data records.
pub fn read_table<R: Read>(input: R, table: Table) -> Result<Vec<csv::StringRecord>> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let first = first.trim_end();
    let rest = first
        .strip_prefix("#sibandit:")
        .ok_or_else(|| Error::Schema(format!("missing version line, found `{first}`")))?;
    let (kind, version) = rest
        .rsplit_once(':')
        .ok_or_else(|| Error::Schema(format!("malformed version line `{first}`")))?;
    if kind != table.kind() {
        return Err(Error::Schema(format!("expected a {} table, found {kind}", table.kind())));
    }
    if version != format!("v{SCHEMA_VERSION}") {
        return Err(Error::Schema(format!("unknown {kind} version {version}")));
    }
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(table.header().iter().copied()) {
        return Err(Error::Schema(format!(
            "{kind} header `{}` does not match `{}`",
            header.iter().collect::<Vec<_>>().join(","),
            table.header().join(",")
        )));
    }
    r.records().map(|rec| rec.map_err(Error::from)).collect()
}

pub fn read_table_file(path: &Path, table: Table) -> Result<Vec<csv::StringRecord>> {
    read_table(File::open(path)?, table)
}

pub(crate) fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Schema(format!("bad `{name}` value in row {:?}", rec.position().map(|p| p.line()))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_table(&mut buf, Table::Summary, vec![vec!["1".into(), "0.5".into(), "0".into(), "x".into()]]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("#sibandit:summary:v1\nt,mean_cum_regret,std_cum_regret,algorithm\n"));
        let rows = read_table(&buf[..], Table::Summary).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(field::<f64>(&rows[0], 1, "mean").unwrap(), 0.5);
    }

    #[test]
    fn rejects_unknown_versions_and_kinds() {
        let v2 = "#sibandit:summary:v2\nt,mean_cum_regret,std_cum_regret,algorithm\n";
        assert!(matches!(read_table(v2.as_bytes(), Table::Summary), Err(Error::Schema(_))));
        let plain = "t,mean_cum_regret,std_cum_regret,algorithm\n";
        assert!(matches!(read_table(plain.as_bytes(), Table::Summary), Err(Error::Schema(_))));
        let other = "#sibandit:regret_trace:v1\ntrial,t,arm,inst_regret,cum_regret\n";
        assert!(matches!(read_table(other.as_bytes(), Table::Summary), Err(Error::Schema(_))));
        let header = "#sibandit:summary:v1\nt,mean,std,algorithm\n";
        assert!(matches!(read_table(header.as_bytes(), Table::Summary), Err(Error::Schema(_))));
    }

    #[test]
    fn empty_table_has_header() {
        let mut buf = Vec::new();
        write_table(&mut buf, Table::RegretTrace, Vec::new()).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "#sibandit:regret_trace:v1\ntrial,t,arm,inst_regret,cum_regret\n"
        );
        assert!(read_table(&buf[..], Table::RegretTrace).unwrap().is_empty());
    }
}
