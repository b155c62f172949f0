//! Dataset snapshots as CSV: a header row `f0,...,f{k-1},label`, label last.

use std::io::{Read, Write};

use fedchain_core::local_model::{Dataset, ModelError};

#[derive(Debug, thiserror::Error)]
pub enum DataFileError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("dataset CSV: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn write_dataset<W: Write>(data: &Dataset, sink: W) -> Result<(), DataFileError> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header: Vec<String> = (0..data.features()).map(|f| format!("f{f}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.row(i).iter().map(|x| x.to_string()).collect();
        row.push(data.label(i).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Read a snapshot; `classes` is not stored in the file and must be supplied.
pub fn read_dataset<R: Read>(source: R, classes: usize) -> Result<Dataset, DataFileError> {
    let mut r = csv::Reader::from_reader(source);
    let features = r
        .headers()?
        .len()
        .checked_sub(1)
        .ok_or_else(|| DataFileError::Format("missing label column".into()))?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        let parse_err = |col: usize| {
            DataFileError::Format(format!("row {line}, column {col}: {:?}", &row[col]))
        };
        for col in 0..features {
            x.push(row[col].parse::<f64>().map_err(|_| parse_err(col))?);
        }
        y.push(
            row[features]
                .parse::<usize>()
                .map_err(|_| parse_err(features))?,
        );
    }
    Ok(Dataset::new(features, classes, x, y)?)
}
