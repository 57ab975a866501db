//! File formats: CSV matrices, PGM images and paired-file datasets.
//!
//! A dataset directory holds `index.txt` with one id per line and, for each
//! id, `<id>_clean.<ext>` and `<id>_noisy.<ext>` where `<ext>` is `csv` or
//! `pgm`. Blank lines and lines starting with `#` in the index are ignored.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::TrainingPair;
use crate::{Error, Matrix, Result, Vector};

/// Parses a headerless CSV matrix, one row per line.
pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            offset: e.position().map_or(0, |p| p.byte() as usize),
            message: e.to_string(),
        })?;
        let offset = record.position().map_or(0, |p| p.byte() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    offset,
                    message: format!("'{field}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    offset,
                    message: format!("row has {} fields, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
    let m = Matrix::from_row_slice(rows.len(), ncols, &flat);
    crate::linalg::check_finite(&m, "CSV matrix")?;
    Ok(m)
}

/// CSV text with shortest round-trip formatting of every entry.
pub fn format_matrix_csv(m: &Matrix) -> String {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in 0..m.nrows() {
        writer
            .write_record(m.row(r).iter().map(|v| v.to_string()))
            .expect("writing to memory cannot fail");
    }
    String::from_utf8(writer.into_inner().expect("in-memory buffer")).expect("CSV output is UTF-8")
}

pub fn load_matrix_csv(path: &Path) -> Result<Matrix> {
    parse_matrix_csv(&fs::read_to_string(path)?)
}

pub fn save_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, format_matrix_csv(m))?;
    Ok(())
}

/// Vector stored as a single CSV row (a single column is also accepted).
pub fn load_vector_csv(path: &Path) -> Result<Vector> {
    matrix_to_vector(&load_matrix_csv(path)?)
        .ok_or_else(|| Error::invalid(format!("{} does not hold a single row or column", path.display())))
}

pub fn save_vector_csv(path: &Path, v: &Vector) -> Result<()> {
    save_matrix_csv(path, &Matrix::from_row_slice(1, v.len(), v.as_slice()))
}

fn matrix_to_vector(m: &Matrix) -> Option<Vector> {
    match m.shape() {
        (1, _) => Some(m.row(0).transpose()),
        (_, 1) => Some(m.column(0).into_owned()),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// ASCII `P2`.
    Plain,
    /// Binary `P5`.
    Binary,
}

struct PgmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmHeader<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("digits are ASCII")
            .parse()
            .map_err(|_| Error::Parse {
                offset: start,
                message: format!("{what} is too large"),
            })
    }
}

/// Decodes a `P2` or `P5` image with maxval ≤ 255 to values in `[0, 1]`.
pub fn parse_pgm(bytes: &[u8]) -> Result<Matrix> {
    let mut h = PgmHeader { bytes, pos: 0 };
    let format = match bytes.get(..2) {
        Some(b"P2") => PgmFormat::Plain,
        Some(b"P5") => PgmFormat::Binary,
        _ => return Err(h.err("missing P2/P5 magic number")),
    };
    h.pos = 2;
    let width = h.number("width")?;
    let height = h.number("height")?;
    h.skip_space_and_comments();
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse {
            offset: maxval_at,
            message: format!("maxval {maxval} unsupported, expected 1..=255"),
        });
    }
    if width == 0 || height == 0 {
        return Err(h.err("image has zero size"));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| h.err("image dimensions overflow"))?;
    let scale = maxval as f64;
    let mut values = Vec::with_capacity(count);
    match format {
        PgmFormat::Binary => {
            if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
                return Err(h.err("expected a whitespace byte after maxval"));
            }
            h.pos += 1;
            let data = &bytes[h.pos..];
            if data.len() < count {
                return Err(Error::Parse {
                    offset: bytes.len(),
                    message: format!("expected {count} pixel bytes, found {}", data.len()),
                });
            }
            for (i, &b) in data[..count].iter().enumerate() {
                if usize::from(b) > maxval {
                    return Err(Error::Parse {
                        offset: h.pos + i,
                        message: format!("pixel {b} exceeds maxval {maxval}"),
                    });
                }
                values.push(f64::from(b) / scale);
            }
        }
        PgmFormat::Plain => {
            for _ in 0..count {
                h.skip_space_and_comments();
                let at = h.pos;
                let v = h.number("pixel value")?;
                if v > maxval {
                    return Err(Error::Parse {
                        offset: at,
                        message: format!("pixel {v} exceeds maxval {maxval}"),
                    });
                }
                values.push(v as f64 / scale);
            }
        }
    }
    Ok(Matrix::from_row_slice(height, width, &values))
}

/// Encodes with maxval 255; values are clamped to `[0, 1]` and rounded.
pub fn format_pgm(img: &Matrix, format: PgmFormat) -> Vec<u8> {
    let (h, w) = img.shape();
    let level = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    match format {
        PgmFormat::Binary => {
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            for r in 0..h {
                out.extend(img.row(r).iter().map(|&v| level(v)));
            }
            out
        }
        PgmFormat::Plain => {
            let mut out = format!("P2\n{w} {h}\n255\n");
            for r in 0..h {
                let line: Vec<String> = img.row(r).iter().map(|&v| level(v).to_string()).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
            out.into_bytes()
        }
    }
}

pub fn load_pgm(path: &Path) -> Result<Matrix> {
    parse_pgm(&fs::read(path)?)
}

pub fn save_pgm(path: &Path, img: &Matrix, format: PgmFormat) -> Result<()> {
    fs::write(path, format_pgm(img, format))?;
    Ok(())
}

/// Loads a matrix from `.pgm` or `.csv` according to the extension.
pub fn load_image(path: &Path) -> Result<Matrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => load_pgm(path),
        _ => load_matrix_csv(path),
    }
}

/// One `(clean, noisy)` entry of a dataset directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub id: String,
    pub clean: Matrix,
    pub noisy: Matrix,
}

pub const INDEX_FILE: &str = "index.txt";

fn read_index(dir: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(dir.join(INDEX_FILE))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn entry_file(dir: &Path, id: &str, role: &str) -> Result<PathBuf> {
    for ext in ["csv", "pgm"] {
        let p = dir.join(format!("{id}_{role}.{ext}"));
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::invalid(format!("no {id}_{role}.csv or .pgm in {}", dir.display())))
}

pub fn load_dataset_entries(dir: &Path) -> Result<Vec<DatasetEntry>> {
    read_index(dir)?
        .into_iter()
        .map(|id| {
            let clean = load_image(&entry_file(dir, &id, "clean")?)?;
            let noisy = load_image(&entry_file(dir, &id, "noisy")?)?;
            if clean.shape() != noisy.shape() {
                return Err(Error::invalid(format!("entry {id}: clean and noisy shapes differ")));
            }
            Ok(DatasetEntry { id, clean, noisy })
        })
        .collect()
}

/// Loads a dataset whose entries are vectors (single-row or single-column).
pub fn load_dataset(dir: &Path) -> Result<Vec<TrainingPair>> {
    load_dataset_entries(dir)?
        .into_iter()
        .map(|e| {
            let x = matrix_to_vector(&e.clean);
            let y = matrix_to_vector(&e.noisy);
            match (x, y) {
                (Some(x), Some(y)) => TrainingPair::new(x, y),
                _ => Err(Error::invalid(format!("entry {} is not a vector pair", e.id))),
            }
        })
        .collect()
}

/// Writes `pairs` as `pair00000_clean.csv`, … plus the index.
pub fn save_dataset(dir: &Path, pairs: &[TrainingPair]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let width = pairs.len().saturating_sub(1).to_string().len().max(5);
    let mut index = fs::File::create(dir.join(INDEX_FILE))?;
    for (i, p) in pairs.iter().enumerate() {
        let id = format!("pair{i:0width$}");
        save_vector_csv(&dir.join(format!("{id}_clean.csv")), &p.x_clean)?;
        save_vector_csv(&dir.join(format!("{id}_noisy.csv")), &p.y_noisy)?;
        writeln!(index, "{id}")?;
    }
    Ok(())
}

/// Writes image pairs as `<id>_clean.pgm` / `<id>_noisy.pgm` plus the index.
pub fn save_image_dataset(dir: &Path, images: &[(String, Matrix, Matrix)], format: PgmFormat) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut index = fs::File::create(dir.join(INDEX_FILE))?;
    for (id, clean, noisy) in images {
        save_pgm(&dir.join(format!("{id}_clean.pgm")), clean, format)?;
        save_pgm(&dir.join(format!("{id}_noisy.pgm")), noisy, format)?;
        writeln!(index, "{id}")?;
    }
    Ok(())
}
