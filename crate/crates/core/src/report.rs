//! Run reports: tables with per-row verdicts, summary checks and notes,
//! written as CSV for machines and aligned text for people.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// One entry per row; rows without a verdict are `None`.
    pub verdicts: Vec<Option<bool>>,
}

impl Table {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        Table {
            title: title.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    /// Appends a row; a verdict adds the trailing `verdict` cell.
    pub fn push(&mut self, mut cells: Vec<String>, verdict: Option<bool>) {
        if let Some(v) = verdict {
            cells.push(verdict_str(v).to_string());
        }
        assert_eq!(cells.len(), self.columns.len(), "row width in table {}", self.title);
        self.rows.push(cells);
        self.verdicts.push(verdict);
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.unwrap_or(true))
    }

    fn csv(&self, out: &mut String) {
        let line = |cells: &[String]| cells.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(",");
        out.push_str(&line(&self.columns));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
    }

    fn text(&self, out: &mut String) {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            padded.join("  ").trim_end().to_string()
        };
        let _ = writeln!(out, "== {}", self.title);
        let _ = writeln!(out, "{}", line(&self.columns));
        for r in &self.rows {
            let _ = writeln!(out, "{}", line(r));
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub mode: String,
    pub tables: Vec<Table>,
    /// Verdicts that belong to the whole run rather than a row.
    pub checks: Vec<(String, bool)>,
    pub notes: Vec<String>,
    /// `(parameter, |I|, arg I)` for external plotting.
    pub sweep: Option<Vec<(f64, f64, f64)>>,
}

impl Report {
    pub fn new(mode: &str) -> Self {
        Report {
            mode: mode.to_string(),
            ..Default::default()
        }
    }

    /// True iff every verdict passes; a report without verdicts passes.
    pub fn passed(&self) -> bool {
        self.tables.iter().all(Table::passed) && self.checks.iter().all(|c| c.1)
    }

    /// Tables as CSV, separated by blank lines, each with its header row.
    pub fn csv(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            t.csv(&mut out);
        }
        out
    }

    pub fn text(&self) -> String {
        let mut out = format!("phasekit {}\n", self.mode);
        for t in &self.tables {
            out.push('\n');
            t.text(&mut out);
        }
        if !self.checks.is_empty() || !self.notes.is_empty() {
            out.push('\n');
        }
        for (name, ok) in &self.checks {
            let _ = writeln!(out, "check {name}: {}", verdict_str(*ok));
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        let _ = writeln!(out, "\nresult: {}", verdict_str(self.passed()));
        out
    }

    pub fn sweep_csv(&self) -> Option<String> {
        let rows = self.sweep.as_ref()?;
        let mut out = String::from("parameter,abs,arg\n");
        for (p, a, g) in rows {
            let _ = writeln!(out, "{},{},{}", num(*p), num(*a), num(*g));
        }
        Some(out)
    }
}

pub fn verdict_str(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

/// Shortest round-trip form, so reports are exact and reproducible.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut t = Table::new("demo", &["A", "value", "verdict"]);
        t.push(vec![num(100.0), num(0.125)], Some(true));
        t.push(vec![num(1000.0), "a,b".into()], Some(false));
        let mut r = Report::new("compare");
        r.tables.push(t);
        r.notes.push("slope -3".into());
        r
    }

    #[test]
    fn csv_has_header_and_quotes() {
        let csv = sample().csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "A,value,verdict");
        assert_eq!(lines[1], "1e2,1.25e-1,pass");
        assert_eq!(lines[2], "1e3,\"a,b\",fail");
    }

    #[test]
    fn text_is_aligned() {
        let text = sample().text();
        assert!(text.contains("A    value    verdict\n"), "{text}");
        assert!(text.contains("1e3  a,b      fail\n"), "{text}");
        assert!(text.contains("note: slope -3"));
        assert!(text.ends_with("result: fail\n"));
    }

    #[test]
    fn verdicts_decide_the_result() {
        let mut r = sample();
        assert!(!r.passed());
        r.tables[0].verdicts[1] = Some(true);
        assert!(r.passed());
        r.checks.push(("decay".into(), false));
        assert!(!r.passed());
        assert!(Report::new("oracle").passed());
    }

    #[test]
    fn sweep_rows() {
        let mut r = Report::new("oracle");
        assert!(r.sweep_csv().is_none());
        r.sweep = Some(vec![(1.0, 0.5, -0.25)]);
        assert_eq!(r.sweep_csv().unwrap(), "parameter,abs,arg\n1e0,5e-1,-2.5e-1\n");
    }
}
