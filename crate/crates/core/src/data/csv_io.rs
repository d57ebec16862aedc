use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use super::dataset::{parse_date, Column, Dataset};
use super::schema::{Role, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub missing_tokens: BTreeSet<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            missing_tokens: ["", "NA", "NULL", "null"]
                .into_iter()
                .map(String::from)
                .collect(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, options)
}

/// Parses every cell per its schema role. Extra header columns are ignored.
pub fn read_csv<R: Read>(reader: R, schema: &Schema, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    let mut positions: HashMap<&str, usize> = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        if positions.insert(name, i).is_some() {
            return Err(Error::DuplicateColumn(name.to_string()));
        }
    }
    let source: Vec<usize> = schema
        .columns()
        .iter()
        .map(|c| {
            positions
                .get(c.name.as_str())
                .copied()
                .ok_or_else(|| Error::MissingColumn(c.name.clone()))
        })
        .collect::<Result<_>>()?;

    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); schema.len()];
    for record in rdr.records() {
        let record = record?;
        for (j, &src) in source.iter().enumerate() {
            let raw = record.get(src).unwrap_or("");
            let value = if options.missing_tokens.contains(raw) {
                None
            } else {
                Some(raw.to_string())
            };
            cells[j].push(value);
        }
    }

    let mut columns = Vec::with_capacity(schema.len());
    for (spec, values) in schema.columns().iter().zip(cells) {
        if !spec.nullable {
            if let Some(row) = values.iter().position(Option::is_none) {
                return Err(Error::ParseError {
                    row,
                    column: spec.name.clone(),
                    value: String::new(),
                    expected: "a non-missing value",
                });
            }
        }
        let column = match spec.role {
            Role::Categorical | Role::Identifier | Role::Target => Column::categorical(&values),
            Role::Numeric => {
                let parsed = values
                    .iter()
                    .enumerate()
                    .map(|(row, v)| match v {
                        None => Ok(None),
                        Some(s) => s
                            .trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .map(Some)
                            .ok_or_else(|| Error::ParseError {
                                row,
                                column: spec.name.clone(),
                                value: s.clone(),
                                expected: "a finite number",
                            }),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Column::numeric(&parsed)
            }
            Role::Date => {
                let parsed = values
                    .iter()
                    .enumerate()
                    .map(|(row, v)| match v {
                        None => Ok(None),
                        Some(s) => parse_date(s).map(Some).ok_or_else(|| Error::ParseError {
                            row,
                            column: spec.name.clone(),
                            value: s.clone(),
                            expected: "a YYYY-MM-DD date",
                        }),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Column::dates(&parsed)
            }
        };
        columns.push(column);
    }
    Dataset::new(schema.clone(), columns)
}

/// Writes the dataset in schema order; missing cells become empty fields.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(ds.schema().columns().iter().map(|c| c.name.as_str()))?;
    let cols: Vec<&Column> = ds.columns().map(|(_, c)| c).collect();
    let mut record: Vec<String> = Vec::with_capacity(cols.len());
    for row in 0..ds.n_rows() {
        record.clear();
        record.extend(
            cols.iter()
                .map(|c| c.cell_str(row).map(|s| s.into_owned()).unwrap_or_default()),
        );
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::ColumnSpec;

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSpec::new("Age", Role::Numeric),
            ColumnSpec::new("Weight", Role::Numeric),
            ColumnSpec::new("Notified", Role::Date),
            ColumnSpec::new("Outcome", Role::Target),
        ])
        .unwrap()
    }

    #[test]
    fn empty_weight_cell_is_missing() {
        let text = "Outcome,Weight,Age,Notified\nCured,50,30,2021-01-01\nLFU,,41,2021-01-02\nCured,61.5,52,2021-01-03\n";
        let ds = read_csv(text.as_bytes(), &schema(), &CsvOptions::default()).unwrap();
        assert_eq!(ds.column("Weight").unwrap().missing(), [false, true, false]);
        assert_eq!(ds.column("Age").unwrap().numeric_at(1), Some(41.0));
    }

    #[test]
    fn header_without_target_is_missing_column() {
        let text = "Weight,Age,Notified\n50,30,2021-01-01\n";
        let err = read_csv(text.as_bytes(), &schema(), &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "Outcome"));
    }

    #[test]
    fn duplicate_header_is_rejected() {
        let text = "Outcome,Weight,Weight,Age,Notified\nCured,1,2,3,2021-01-01\n";
        let err = read_csv(text.as_bytes(), &schema(), &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateColumn(c) if c == "Weight"));
    }

    #[test]
    fn month_thirteen_is_a_parse_error_at_that_cell() {
        let text = "Outcome,Weight,Age,Notified\nCured,50,30,2021-01-01\nLFU,50,30,2021-13-01\n";
        let err = read_csv(text.as_bytes(), &schema(), &CsvOptions::default()).unwrap_err();
        match err {
            Error::ParseError { row, column, value, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "Notified");
                assert_eq!(value, "2021-13-01");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_is_located() {
        let text = "Outcome,Weight,Age,Notified\nCured,heavy,30,2021-01-01\n";
        let err = read_csv(text.as_bytes(), &schema(), &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ParseError { row: 0, ref column, .. } if column == "Weight"));
    }

    #[test]
    fn custom_delimiter_and_tokens() {
        let opts = CsvOptions {
            delimiter: b';',
            missing_tokens: ["?".to_string()].into_iter().collect(),
        };
        let text = "Outcome;Weight;Age;Notified\nCured;?;30;2021-01-01\n";
        let ds = read_csv(text.as_bytes(), &schema(), &opts).unwrap();
        assert!(ds.column("Weight").unwrap().is_missing(0));
    }

    #[test]
    fn quoted_fields_round_trip() {
        let schema = Schema::new(vec![
            ColumnSpec::new("facility", Role::Categorical),
            ColumnSpec::new("y", Role::Target),
        ])
        .unwrap();
        let text = "facility,y\n\"PHC, North \"\"A\"\"\",LFU\n";
        let ds = read_csv(text.as_bytes(), &schema, &CsvOptions::default()).unwrap();
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        let again = read_csv(out.as_slice(), &schema, &CsvOptions::default()).unwrap();
        assert_eq!(
            again.column("facility").unwrap().cell_str(0).unwrap(),
            "PHC, North \"A\""
        );
    }
}
