use std::io::{self, IsTerminal, Write};

/// Rows printed as comma-separated text, or as aligned columns when stdout
/// is a terminal.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, aligned: bool) -> String {
        let mut out = String::new();
        if aligned {
            let widths: Vec<usize> = (0..self.header.len())
                .map(|c| {
                    self.rows
                        .iter()
                        .map(|r| r[c].len())
                        .chain([self.header[c].len()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            for line in std::iter::once(&self.header).chain(&self.rows) {
                let cells: Vec<String> = line
                    .iter()
                    .zip(&widths)
                    .map(|(cell, &w)| format!("{cell:>w$}"))
                    .collect();
                out.push_str(cells.join("  ").trim_end());
                out.push('\n');
            }
        } else {
            for line in std::iter::once(&self.header).chain(&self.rows) {
                out.push_str(&line.join(","));
                out.push('\n');
            }
        }
        out
    }

    pub fn print(&self) {
        let aligned = io::stdout().is_terminal();
        let _ = io::stdout().lock().write_all(self.render(aligned).as_bytes());
    }
}
