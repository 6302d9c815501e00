//! Delimited-text datasets: header-first, comma or tab separated, with a
//! schema mapping column names to roles.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use itr_core::{Dataset, Observation};
use serde::{Deserialize, Serialize};

use crate::Error;

/// Which columns carry the treatment, cost, outcome and covariates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub treatment: String,
    pub cost: String,
    pub outcome: String,
    pub covariates: Vec<String>,
    /// Decision covariates, a subset of `covariates`. Defaults to all.
    #[serde(default)]
    pub v: Option<Vec<String>>,
}

impl Schema {
    /// Schema with the conventional `t`, `c`, `y` names and `V = W`.
    pub fn standard(covariates: Vec<String>) -> Self {
        Self {
            treatment: "t".into(),
            cost: "c".into(),
            outcome: "y".into(),
            covariates,
            v: None,
        }
    }

    fn v_index(&self) -> Result<Vec<usize>, Error> {
        let Some(v) = &self.v else {
            return Ok((0..self.covariates.len()).collect());
        };
        v.iter()
            .map(|name| {
                self.covariates
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::Schema(format!("V column '{name}' is not a covariate")))
            })
            .collect()
    }
}

/// Tab when the header line contains one, comma otherwise.
pub fn detect_delimiter(header: &str) -> u8 {
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset, Error> {
    let io_err = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut first = String::new();
    BufReader::new(File::open(path).map_err(io_err)?)
        .read_line(&mut first)
        .map_err(io_err)?;
    let delim = detect_delimiter(&first);
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delim)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column '{name}'")))
    };
    let t_col = col(&schema.treatment)?;
    let c_col = col(&schema.cost)?;
    let y_col = col(&schema.outcome)?;
    let w_cols: Vec<usize> = schema.covariates.iter().map(|n| col(n)).collect::<Result<_, _>>()?;
    let v_index = schema.v_index()?;

    let mut obs = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let cell = |j: usize, name: &str| -> Result<f64, Error> {
            let s = rec.get(j).unwrap_or("");
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("non-numeric value '{s}' in column '{name}' at row {row}")))
        };
        let t = cell(t_col, &schema.treatment)?;
        if t != 0.0 && t != 1.0 {
            return Err(Error::Parse(format!("treatment not in {{0,1}} at row {row}")));
        }
        let w = w_cols
            .iter()
            .zip(&schema.covariates)
            .map(|(&j, n)| cell(j, n))
            .collect::<Result<Vec<_>, _>>()?;
        obs.push(Observation::new(w, t as u8, cell(c_col, &schema.cost)?, cell(y_col, &schema.outcome)?));
    }
    Ok(Dataset::new(obs, v_index, schema.covariates.clone())?)
}

/// Write `ds` as comma-separated text. Values use the shortest decimal form
/// that parses back to the same bits.
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), Error> {
    let io_err = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut f = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    let mut header: Vec<String> = ds.covariate_names().to_vec();
    header.extend(["t", "c", "y"].map(String::from));
    writeln!(f, "{}", header.join(",")).map_err(io_err)?;
    for o in ds.observations() {
        let mut line: Vec<String> = o.w.iter().map(|x| x.to_string()).collect();
        line.push(o.t.to_string());
        line.push(o.c.to_string());
        line.push(o.y.to_string());
        writeln!(f, "{}", line.join(",")).map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}
