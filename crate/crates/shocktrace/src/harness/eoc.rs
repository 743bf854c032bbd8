//! Experimental order of convergence: log-ratio of a quantity across
//! consecutive mesh widths.

/// Per-pair EoC column; the first rung is blank, and non-positive values
/// yield blank entries (flagged by `None`).
pub fn eoc(values: &[f64], widths: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(values.len(), widths.len(), "one width per value");
    let mut out = vec![None; values.len()];
    for k in 1..values.len() {
        let (e0, e1) = (values[k - 1], values[k]);
        if e0 > 0.0 && e1 > 0.0 && widths[k - 1] > widths[k] {
            out[k] = Some((e0 / e1).ln() / (widths[k - 1] / widths[k]).ln());
        }
    }
    out
}

/// One named quantity column with its EoC column.
#[derive(Debug, Clone)]
pub struct EocColumn {
    pub label: String,
    pub values: Vec<f64>,
    pub eocs: Vec<Option<f64>>,
}

/// Convergence table over a mesh ladder.
#[derive(Debug, Clone)]
pub struct EocTable {
    pub cells: Vec<usize>,
    pub columns: Vec<EocColumn>,
}

impl EocTable {
    pub fn new(cells: Vec<usize>) -> Self {
        EocTable {
            cells,
            columns: Vec::new(),
        }
    }

    pub fn push(&mut self, label: &str, values: Vec<f64>) {
        assert_eq!(values.len(), self.cells.len());
        let widths: Vec<f64> = self.cells.iter().map(|&n| 1.0 / n as f64).collect();
        let eocs = eoc(&values, &widths);
        self.columns.push(EocColumn {
            label: label.to_string(),
            values,
            eocs,
        });
    }

    pub fn column(&self, label: &str) -> Option<&EocColumn> {
        self.columns.iter().find(|c| c.label == label)
    }
}
