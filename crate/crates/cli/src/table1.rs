//! The bundled benchmark table used by `polariton-scan --diff`.

const DATA: &str = include_str!("../data/table1.csv");

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    /// A number for truncated-basis rows, `ex-pA` or `ex-dE` for exact rows.
    pub method: String,
    pub n_max: Option<usize>,
    pub lambda: f64,
    pub de01: f64,
    pub de13: f64,
    pub occupation: f64,
}

impl TableRow {
    pub fn l_max(&self) -> Option<usize> {
        self.method.parse().ok()
    }
}

pub fn rows() -> Vec<TableRow> {
    DATA.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("l_max") && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            TableRow {
                method: f[0].to_string(),
                n_max: f[1].parse().ok(),
                lambda: f[2].parse().expect("bundled table"),
                de01: f[3].parse().expect("bundled table"),
                de13: f[4].parse().expect("bundled table"),
                occupation: f[5].parse().expect("bundled table"),
            }
        })
        .collect()
}

/// The truncated-basis row for `(l_max, n_max, lambda)`, if tabulated.
pub fn lookup(l_max: usize, n_max: usize, lambda: f64) -> Option<TableRow> {
    rows()
        .into_iter()
        .find(|r| r.l_max() == Some(l_max) && r.n_max == Some(n_max) && (r.lambda - lambda).abs() < 1e-12)
}

/// The exact row for `form` (`ex-pA` / `ex-dE`) at `lambda`.
pub fn lookup_exact(method: &str, lambda: f64) -> Option<TableRow> {
    rows().into_iter().find(|r| r.method == method && (r.lambda - lambda).abs() < 1e-12)
}
