//! File formats: JSON with 17 significant digits per float, and the CSV
//! layouts for counts, angle sets, HOM profiles and MZI fringes.

use std::fs;
use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::splitter::{FringeSample, HomProfile};
use crate::tomo::{AngleSet, CountsRecord};

pub const COUNTS_HEADER: [&str; 3] = ["angle_set_id", "coincidences", "integration_time_s"];
pub const ANGLES_HEADER: [&str; 4] = ["id", "a_qwp1", "a_qwp2", "a_hwp1"];
pub const PROFILE_HEADER: [&str; 2] = ["delay_fs", "counts"];
pub const FRINGES_HEADER: [&str; 3] = ["phi_p2", "i_r", "i_t"];

/// Floats as `d.dddddddddddddddde±x`: 17 significant digits, enough to
/// round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON whose floats carry 17 significant digits.
struct SigDigits(PrettyFormatter<'static>);

impl Formatter for SigDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize: {e}")))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

pub fn from_json_str<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        line: e.line() as u64,
        column: e.column() as u64,
        message: e.to_string(),
    })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json_str(&read_text(path)?, &path.display().to_string())
}

fn csv_text(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_csv<T: DeserializeOwned>(text: &str, header: &[&str], origin: &str) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| csv_error(e, origin))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: 1,
            column: 1,
            message: format!("header {:?}, expected {:?}", found.iter().collect::<Vec<_>>(), header),
        });
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| csv_error(e, origin)))
        .collect()
}

fn csv_error(e: csv::Error, origin: &str) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let column = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.field().map(|f| f + 1).unwrap_or(1),
        _ => 1,
    };
    Error::Parse {
        path: origin.to_string(),
        line,
        column,
        message: e.to_string(),
    }
}

#[derive(Deserialize)]
struct CountsRow {
    angle_set_id: usize,
    coincidences: u64,
    integration_time_s: f64,
}

pub fn counts_to_csv(records: &[CountsRecord]) -> String {
    csv_text(
        &COUNTS_HEADER,
        records.iter().map(|r| {
            vec![
                r.angle_set_id.to_string(),
                r.coincidences.to_string(),
                fmt_f64(r.integration_time),
            ]
        }),
    )
}

/// Counts from CSV. The file carries no pair count, so `trials_scale` is the
/// integration time: rates are assumed steady and the scale is fitted.
pub fn counts_from_csv(text: &str, origin: &str) -> Result<Vec<CountsRecord>> {
    let rows: Vec<CountsRow> = parse_csv(text, &COUNTS_HEADER, origin)?;
    rows.into_iter()
        .enumerate()
        .map(|(k, r)| {
            if !(r.integration_time_s > 0.0) {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: k as u64 + 2,
                    column: 3,
                    message: format!("integration_time_s must be positive, got {}", r.integration_time_s),
                });
            }
            Ok(CountsRecord {
                angle_set_id: r.angle_set_id,
                coincidences: r.coincidences,
                integration_time: r.integration_time_s,
                trials_scale: r.integration_time_s,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct AngleRow {
    id: usize,
    a_qwp1: f64,
    a_qwp2: f64,
    a_hwp1: f64,
}

pub fn angles_to_csv(sets: &[AngleSet]) -> String {
    csv_text(
        &ANGLES_HEADER,
        sets.iter().enumerate().map(|(i, s)| {
            vec![(i + 1).to_string(), fmt_f64(s.a_qwp1), fmt_f64(s.a_qwp2), fmt_f64(s.a_hwp1)]
        }),
    )
}

/// Angle sets from CSV, ordered by id; ids must be exactly `1..=n`.
pub fn angles_from_csv(text: &str, origin: &str) -> Result<Vec<AngleSet>> {
    let mut rows: Vec<AngleRow> = parse_csv(text, &ANGLES_HEADER, origin)?;
    rows.sort_by_key(|r| r.id);
    for (k, r) in rows.iter().enumerate() {
        if r.id != k + 1 {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: 0,
                column: 1,
                message: format!("angle-set ids must run 1..={} without gaps", rows.len()),
            });
        }
    }
    Ok(rows
        .into_iter()
        .map(|r| AngleSet::new(r.a_qwp1, r.a_qwp2, r.a_hwp1))
        .collect())
}

pub fn profile_to_csv(profile: &HomProfile) -> String {
    csv_text(
        &PROFILE_HEADER,
        profile
            .delays
            .iter()
            .zip(&profile.expected_coincidences)
            .map(|(t, n)| vec![fmt_f64(*t), fmt_f64(*n)]),
    )
}

#[derive(Deserialize)]
struct ProfileRow {
    delay_fs: f64,
    counts: f64,
}

/// `(delay_fs, counts)` pairs.
pub fn profile_from_csv(text: &str, origin: &str) -> Result<Vec<(f64, f64)>> {
    let rows: Vec<ProfileRow> = parse_csv(text, &PROFILE_HEADER, origin)?;
    Ok(rows.into_iter().map(|r| (r.delay_fs, r.counts)).collect())
}

pub fn fringes_to_csv(fringes: &[FringeSample]) -> String {
    csv_text(
        &FRINGES_HEADER,
        fringes
            .iter()
            .map(|f| vec![fmt_f64(f.phi_p2), fmt_f64(f.i_r), fmt_f64(f.i_t)]),
    )
}

pub fn fringes_from_csv(text: &str, origin: &str) -> Result<Vec<FringeSample>> {
    parse_csv(text, &FRINGES_HEADER, origin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomo::table1;

    #[test]
    fn floats_have_17_digits() {
        assert_eq!(fmt_f64(1.21), "1.2100000000000000e0");
        assert_eq!(fmt_f64(-0.000125), "-1.2500000000000000e-4");
        let s = to_json_string(&serde_json::json!({"x": 0.1, "n": 3})).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn angles_round_trip() {
        let text = angles_to_csv(&table1());
        assert!(text.starts_with("id,a_qwp1,a_qwp2,a_hwp1\n"));
        assert_eq!(angles_from_csv(&text, "t").unwrap(), table1().to_vec());
    }

    #[test]
    fn counts_parse_errors_locate_field() {
        let text = "angle_set_id,coincidences,integration_time_s\n1,10,1.0\n2,abc,1.0\n";
        match counts_from_csv(text, "c.csv") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, 2);
            }
            other => panic!("{other:?}"),
        }
        let text = "id,coincidences,integration_time_s\n1,10,1.0\n";
        assert!(matches!(counts_from_csv(text, "c.csv"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn json_errors_carry_position() {
        match from_json_str::<serde_json::Value>("{\n  \"a\": [1,\n}", "x.json") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column >= 1);
            }
            other => panic!("{other:?}"),
        }
    }
}
