//! CSV tables with a versioned schema comment on the first line.

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub fn schema_line(name: &str) -> String {
    format!("# hetqkd-{name} v{SCHEMA_VERSION}")
}

/// Formats a float with the shortest representation that round-trips.
pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn render(name: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields");
    format!("{}\n{body}", schema_line(name))
}

/// Parses a table written by [`render`], rejecting any other schema or version.
pub fn parse(text: &str, name: &str) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let want = schema_line(name);
    if first.trim_end() != want {
        return Err(CliError::Config(format!("expected schema {want:?}, found {first:?}")));
    }
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let bad = |e: csv::Error| CliError::Config(format!("{name} table: {e}"));
    let header = r.headers().map_err(bad)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(bad))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}
