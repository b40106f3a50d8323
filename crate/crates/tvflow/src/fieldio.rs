//! Raw field dumps: one text header line
//! `tvflow-field v1 dim=<d> n=<n1[,n2]> L=<L1[,L2]>` followed by the cell
//! values as little-endian `f64` in row-major order.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use tvflow_core::{Grid, ScalarField};

const MAGIC: &str = "tvflow-field v1";

#[derive(Debug, thiserror::Error)]
pub enum FieldIoError {
    #[error("bad header: {0}")]
    Header(String),
    #[error("expected {expected} data bytes, found {found}")]
    Length { expected: usize, found: usize },
    #[error("invalid field: {0}")]
    Field(#[from] tvflow_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn header_line(grid: &Grid) -> String {
    // `{}` prints the shortest representation that parses back exactly.
    format!("{MAGIC} dim={} n={} L={}\n", grid.dim(), join(grid.counts()), join(grid.extents()))
}

pub fn write_field<W: Write>(mut w: W, u: &ScalarField) -> io::Result<()> {
    let mut buf = header_line(u.grid()).into_bytes();
    buf.reserve(8 * u.len());
    for v in u.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>, FieldIoError> {
    s.split(',')
        .map(|t| t.parse().map_err(|_| FieldIoError::Header(format!("cannot parse {key}={s}"))))
        .collect()
}

pub fn parse_header(line: &str) -> Result<Grid, FieldIoError> {
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| FieldIoError::Header(format!("missing `{MAGIC}` prefix")))?;
    let (mut dim, mut n, mut l) = (None, None, None);
    for tok in rest.split_whitespace() {
        match tok.split_once('=') {
            Some(("dim", v)) => dim = Some(parse_list::<usize>(v, "dim")?),
            Some(("n", v)) => n = Some(parse_list::<usize>(v, "n")?),
            Some(("L", v)) => l = Some(parse_list::<f64>(v, "L")?),
            _ => return Err(FieldIoError::Header(format!("unexpected token `{tok}`"))),
        }
    }
    let missing = |k: &str| FieldIoError::Header(format!("missing {k}="));
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let n = n.ok_or_else(|| missing("n"))?;
    let l = l.ok_or_else(|| missing("L"))?;
    if dim.len() != 1 || n.len() != dim[0] || l.len() != dim[0] {
        return Err(FieldIoError::Header("dim, n and L disagree".into()));
    }
    Ok(Grid::new(&n, &l)?)
}

pub fn read_field<R: BufRead>(mut r: R) -> Result<ScalarField, FieldIoError> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.pop() != Some(b'\n') {
        return Err(FieldIoError::Header("unterminated header line".into()));
    }
    let line = String::from_utf8(line).map_err(|_| FieldIoError::Header("header is not UTF-8".into()))?;
    let grid = parse_header(&line)?;
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let expected = 8 * grid.cell_count();
    if data.len() != expected {
        return Err(FieldIoError::Length {
            expected,
            found: data.len(),
        });
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(ScalarField::new(grid, values)?)
}

pub fn save_field(path: &Path, u: &ScalarField) -> io::Result<()> {
    let mut buf = Vec::new();
    write_field(&mut buf, u)?;
    fs::write(path, buf)
}

pub fn load_field(path: &Path) -> Result<ScalarField, FieldIoError> {
    let bytes = fs::read(path)?;
    read_field(&bytes[..])
}
