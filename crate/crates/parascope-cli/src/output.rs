//! Table rendering: markdown for humans, CSV for machines.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Md,
    Csv,
}

pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: Vec<S>) {
        let cells: Vec<String> = cells.into_iter().map(Into::into).collect();
        assert_eq!(cells.len(), self.columns.len(), "ragged table row");
        self.rows.push(cells);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Md => self.render_md(),
            Format::Csv => self.render_csv(),
        }
    }

    fn render_md(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            out.push('|');
            for (i, cell) in cells.iter().enumerate() {
                let _ = write!(out, " {:>width$} |", cell, width = widths[i]);
            }
            out.push('\n');
        };
        line(&mut out, &self.columns);
        out.push('|');
        for w in &widths {
            let _ = write!(out, "{}|", "-".repeat(w + 2));
        }
        out.push('\n');
        for row in &self.rows {
            line(&mut out, row);
        }
        out
    }

    fn render_csv(&self) -> String {
        let escape = |cell: &str| {
            if cell.contains(',') || cell.contains('"') {
                format!("\"{}\"", cell.replace('"', "\"\""))
            } else {
                cell.to_string()
            }
        };
        let mut out = String::new();
        out.push_str(
            &self
                .columns
                .iter()
                .map(|c| escape(c))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|c| escape(c)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// Durations formatted like the reference tables: days below a year, years
/// above, one decimal under ten units.
pub fn format_duration(seconds: f64) -> String {
    let days = seconds / 86_400.0;
    if days < 365.25 {
        if days < 10.0 {
            format!("{days:.1} d")
        } else {
            format!("{days:.0} d")
        }
    } else {
        let years = days / 365.25;
        if years < 10.0 {
            format!("{years:.1} y")
        } else {
            format!("{years:.0} y")
        }
    }
}

/// Counts like 1.26e12 rendered as `1.26 T`.
pub fn format_count(value: f64) -> String {
    let (scaled, suffix) = if value >= 1e12 {
        (value / 1e12, " T")
    } else if value >= 1e9 {
        (value / 1e9, " B")
    } else if value >= 1e6 {
        (value / 1e6, " M")
    } else if value >= 1e3 {
        (value / 1e3, " K")
    } else {
        (value, "")
    };
    if scaled >= 100.0 {
        format!("{scaled:.0}{suffix}")
    } else if scaled >= 10.0 {
        format!("{scaled:.1}{suffix}")
    } else {
        format!("{scaled:.2}{suffix}")
    }
}

pub fn format_gib(value: f64) -> String {
    if value >= 1000.0 {
        format!("{:.1} K", value / 1000.0)
    } else if value >= 100.0 {
        format!("{value:.0}")
    } else if value >= 10.0 {
        format!("{value:.1}")
    } else {
        format!("{value:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations_follow_reference_style() {
        assert_eq!(format_duration(6.8 * 86400.0), "6.8 d");
        assert_eq!(format_duration(32.0 * 86400.0), "32 d");
        assert_eq!(format_duration(100.0 * 86400.0), "100 d");
        assert_eq!(format_duration(1.3 * 365.25 * 86400.0), "1.3 y");
        assert_eq!(format_duration(630.0 * 365.25 * 86400.0), "630 y");
    }

    #[test]
    fn csv_escapes_commas() {
        let mut t = Table::new(vec!["a", "b"]);
        t.row(vec!["x,y", "plain"]);
        assert_eq!(t.render(Format::Csv), "a,b\n\"x,y\",plain\n");
    }
}
