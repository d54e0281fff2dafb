//! Result tables and their serializations: CSV with RFC-4180 quoting,
//! JSON with numbers carried as decimal strings, and the sidecar
//! metadata record written next to every output file.
//!
//! Reals are printed with 17 significant digits so a double round-trips
//! bit-exactly through either format; runtime and other per-run noise
//! live only in the sidecar, keeping the data files byte-reproducible.

use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Debug)]
pub enum Field {
    Int(u64),
    Real(f64),
    Text(String),
}

impl Field {
    pub fn render(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Real(x) => format_real(*x),
            Field::Text(s) => s.clone(),
        }
    }
}

/// 17 significant digits, '.' decimal separator, round-trip exact.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Table {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn write_csv(table: &Table) -> String {
    let mut out = String::new();
    let header: Vec<String> = table.columns.iter().map(|c| csv_quote(c)).collect();
    let _ = writeln!(out, "{}", header.join(","));
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|f| csv_quote(&f.render())).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// RFC-4180 reader for the writer above: quoted fields, doubled quotes,
/// one record per line. Returns (header, records) as raw strings.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let mut records: Vec<Vec<String>> = Vec::new();
    let mut record: Vec<String> = Vec::new();
    let mut cell = String::new();
    let mut quoted = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if quoted {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    cell.push('"');
                }
                '"' => quoted = false,
                _ => cell.push(c),
            }
        } else {
            match c {
                '"' if cell.is_empty() => quoted = true,
                '"' => return Err("stray quote inside unquoted field".into()),
                ',' => record.push(std::mem::take(&mut cell)),
                '\r' => {}
                '\n' => {
                    record.push(std::mem::take(&mut cell));
                    records.push(std::mem::take(&mut record));
                }
                _ => cell.push(c),
            }
        }
    }
    if quoted {
        return Err("unterminated quoted field".into());
    }
    if !cell.is_empty() || !record.is_empty() {
        record.push(cell);
        records.push(record);
    }
    if records.is_empty() {
        return Err("empty csv".into());
    }
    let header = records.remove(0);
    for r in &records {
        if r.len() != header.len() {
            return Err(format!(
                "record has {} fields, header has {}",
                r.len(),
                header.len()
            ));
        }
    }
    Ok((header, records))
}

pub fn write_json(table: &Table) -> String {
    let columns: Vec<serde_json::Value> =
        table.columns.iter().map(|c| serde_json::Value::from(*c)).collect();
    let rows: Vec<serde_json::Value> = table
        .rows
        .iter()
        .map(|row| {
            serde_json::Value::from(
                row.iter().map(|f| serde_json::Value::from(f.render())).collect::<Vec<_>>(),
            )
        })
        .collect();
    let doc = serde_json::json!({ "columns": columns, "rows": rows });
    let mut text = serde_json::to_string_pretty(&doc).expect("tables serialize");
    text.push('\n');
    text
}

pub fn read_json(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let as_strings = |v: &serde_json::Value| -> Result<Vec<String>, String> {
        v.as_array()
            .ok_or("expected an array")?
            .iter()
            .map(|x| x.as_str().map(str::to_string).ok_or("expected a string".into()))
            .collect()
    };
    let columns = as_strings(&doc["columns"])?;
    let rows = doc["rows"]
        .as_array()
        .ok_or("expected a rows array")?
        .iter()
        .map(as_strings)
        .collect::<Result<Vec<_>, _>>()?;
    for r in &rows {
        if r.len() != columns.len() {
            return Err("row width mismatch".into());
        }
    }
    Ok((columns, rows))
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Sidecar metadata written as `<out>.meta.json`: the resolved config
/// and its hash for reproducibility, versions, and the runtime, which
/// is deliberately kept out of the data file.
pub fn sidecar(
    config: &str,
    threads: usize,
    runtime_ms: u128,
    extras: &[(&str, String)],
) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("config".into(), config.into());
    doc.insert(
        "config_hash".into(),
        format!("{:016x}", fnv1a64(config.as_bytes())).into(),
    );
    doc.insert("tool_version".into(), env!("CARGO_PKG_VERSION").into());
    doc.insert("threads".into(), threads.to_string().into());
    doc.insert("runtime_ms".into(), runtime_ms.to_string().into());
    for (k, v) in extras {
        doc.insert((*k).into(), v.clone().into());
    }
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(doc))
        .expect("sidecars serialize");
    text.push('\n');
    text
}

pub fn sidecar_path(out: &Path) -> std::path::PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}
