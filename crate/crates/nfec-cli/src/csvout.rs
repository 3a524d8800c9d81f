//! Deterministic CSV assembly: '\n' newlines, '.' decimal separator,
//! 17-significant-digit floats, header row first (after any '#' metadata
//! comment lines). Byte-identical output for identical inputs.

/// 17 significant digits: one leading digit plus 16 decimals in scientific
/// notation.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvBuilder {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvBuilder {
    pub fn new(header: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_headers(header: Vec<String>) -> Self {
        Self {
            comments: Vec::new(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, text: &str) {
        self.comments.push(format!("# {text}"));
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.header.len(), "CSV row arity mismatch");
        self.rows.push(cells);
    }

    pub fn finish(self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Writes to the given path, or stdout when no path is set.
pub fn emit(out: Option<&std::path::Path>, content: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
