use crate::{tool_line, RunConfig};

/// `# key=value` provenance lines opening every report.
pub fn header(config: &RunConfig) -> String {
    format!(
        "{}\n# config_hash={}\n# scenario={}\n",
        tool_line(),
        config.hash(),
        config.scenario
    )
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// CSV with a provenance header.
pub struct Table {
    head: String,
    notes: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(config: &RunConfig, columns: &[&'static str]) -> Self {
        Self {
            head: header(config),
            notes: Vec::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn note(&mut self, note: &str) {
        self.notes.push(note.to_string());
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut out = self.head.clone();
        for n in &self.notes {
            out.push_str(&format!("# note={n}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}
