//! Dataset persistence: one CSV per entity plus a JSON manifest.
//!
//! Column order (all files carry a header row, dates are ISO-8601):
//!
//! * `courses.csv`: `course_id,rating,region`
//! * `packages.csv`: `package_id,course_id,active_from,active_to,play_month,play_dow,
//!   lunch,caddie,competition,holiday,pair_party,min_party_size,min_num_parties,
//!   num_laps,price,promotion_type,shortness`
//! * `bookings.csv`: `user_id,course_id,package_id,booked_at,play_date,price_paid,
//!   lunch,caddie,competition,holiday,pair_party,min_party_size,min_num_parties,
//!   num_laps,party_size,num_parties`
//! * `holidays.csv`: `date`
//!
//! Flags are written as `0`/`1`, money as integer minor units.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{
    Booking, Course, CourseId, Dataset, Money, OptionVector, Package, PackageId, PromotionType,
    UserId,
};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub courses: PathBuf,
    pub packages: PathBuf,
    pub bookings: PathBuf,
    pub holidays: PathBuf,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            courses: "courses.csv".into(),
            packages: "packages.csv".into(),
            bookings: "bookings.csv".into(),
            holidays: "holidays.csv".into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CourseRow {
    course_id: u32,
    rating: f64,
    region: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct PackageRow {
    package_id: u32,
    course_id: u32,
    active_from: NaiveDate,
    active_to: NaiveDate,
    play_month: u32,
    play_dow: u32,
    lunch: u8,
    caddie: u8,
    competition: u8,
    holiday: u8,
    pair_party: u8,
    min_party_size: u8,
    min_num_parties: u8,
    num_laps: u8,
    price: Money,
    promotion_type: PromotionType,
    shortness: i64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BookingRow {
    user_id: u32,
    course_id: u32,
    package_id: u32,
    booked_at: NaiveDate,
    play_date: NaiveDate,
    price_paid: Money,
    lunch: u8,
    caddie: u8,
    competition: u8,
    holiday: u8,
    pair_party: u8,
    min_party_size: u8,
    min_num_parties: u8,
    num_laps: u8,
    party_size: u8,
    num_parties: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct HolidayRow {
    date: NaiveDate,
}

fn flag(v: u8) -> std::result::Result<bool, String> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(format!("flag must be 0 or 1, got {other}")),
    }
}

#[allow(clippy::too_many_arguments)]
fn options_from(
    lunch: u8,
    caddie: u8,
    competition: u8,
    holiday: u8,
    pair_party: u8,
    min_party_size: u8,
    min_num_parties: u8,
    num_laps: u8,
) -> std::result::Result<OptionVector, String> {
    Ok(OptionVector {
        lunch: flag(lunch)?,
        caddie: flag(caddie)?,
        competition: flag(competition)?,
        holiday: flag(holiday)?,
        pair_party: flag(pair_party)?,
        min_party_size,
        min_num_parties,
        num_laps,
    })
}

impl From<&Package> for PackageRow {
    fn from(p: &Package) -> Self {
        let o = &p.options;
        Self {
            package_id: p.id.0,
            course_id: p.course_id.0,
            active_from: p.active_from,
            active_to: p.active_to,
            play_month: p.play_month,
            play_dow: p.play_dow,
            lunch: o.lunch.into(),
            caddie: o.caddie.into(),
            competition: o.competition.into(),
            holiday: o.holiday.into(),
            pair_party: o.pair_party.into(),
            min_party_size: o.min_party_size,
            min_num_parties: o.min_num_parties,
            num_laps: o.num_laps,
            price: p.price,
            promotion_type: p.promotion_type,
            shortness: p.shortness,
        }
    }
}

impl TryFrom<PackageRow> for Package {
    type Error = String;

    fn try_from(r: PackageRow) -> std::result::Result<Self, String> {
        Ok(Package {
            id: PackageId(r.package_id),
            course_id: CourseId(r.course_id),
            active_from: r.active_from,
            active_to: r.active_to,
            play_month: r.play_month,
            play_dow: r.play_dow,
            options: options_from(
                r.lunch,
                r.caddie,
                r.competition,
                r.holiday,
                r.pair_party,
                r.min_party_size,
                r.min_num_parties,
                r.num_laps,
            )?,
            price: r.price,
            promotion_type: r.promotion_type,
            shortness: r.shortness,
        })
    }
}

impl From<&Booking> for BookingRow {
    fn from(b: &Booking) -> Self {
        let o = &b.options;
        Self {
            user_id: b.user_id.0,
            course_id: b.course_id.0,
            package_id: b.package_id.0,
            booked_at: b.booked_at,
            play_date: b.play_date,
            price_paid: b.price_paid,
            lunch: o.lunch.into(),
            caddie: o.caddie.into(),
            competition: o.competition.into(),
            holiday: o.holiday.into(),
            pair_party: o.pair_party.into(),
            min_party_size: o.min_party_size,
            min_num_parties: o.min_num_parties,
            num_laps: o.num_laps,
            party_size: b.party_size,
            num_parties: b.num_parties,
        }
    }
}

impl TryFrom<BookingRow> for Booking {
    type Error = String;

    fn try_from(r: BookingRow) -> std::result::Result<Self, String> {
        Ok(Booking {
            user_id: UserId(r.user_id),
            course_id: CourseId(r.course_id),
            package_id: PackageId(r.package_id),
            booked_at: r.booked_at,
            play_date: r.play_date,
            price_paid: r.price_paid,
            options: options_from(
                r.lunch,
                r.caddie,
                r.competition,
                r.holiday,
                r.pair_party,
                r.min_party_size,
                r.min_num_parties,
                r.num_laps,
            )?,
            party_size: r.party_size,
            num_parties: r.num_parties,
        })
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads every row of `path`, converting each with `convert`. Errors carry
/// the 1-based data row number (header excluded).
pub fn read_csv<R, T, F>(path: &Path, mut convert: F) -> Result<Vec<T>>
where
    R: DeserializeOwned,
    F: FnMut(R) -> std::result::Result<T, String>,
{
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<R>().enumerate() {
        let row = i as u64 + 1;
        let parse_err = |message: String| Error::Parse {
            file: path.to_path_buf(),
            row,
            message,
        };
        let raw = rec.map_err(|e| parse_err(e.to_string()))?;
        out.push(convert(raw).map_err(parse_err)?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes the four entity files and `manifest.json` into `dir`, creating it
/// if needed.
pub fn write_dataset(dir: &Path, d: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = DatasetManifest::default();
    write_csv(
        &dir.join(&manifest.courses),
        d.courses.iter().map(|c| CourseRow {
            course_id: c.id.0,
            rating: c.rating,
            region: c.region,
        }),
    )?;
    write_csv(
        &dir.join(&manifest.packages),
        d.packages.iter().map(PackageRow::from),
    )?;
    write_csv(
        &dir.join(&manifest.bookings),
        d.bookings.iter().map(BookingRow::from),
    )?;
    write_csv(
        &dir.join(&manifest.holidays),
        d.holiday_calendar.iter().map(|&date| HolidayRow { date }),
    )?;
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

/// Loads a dataset from a directory holding `manifest.json`, or from the
/// manifest file itself. Bookings come back sorted by `booked_at`.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let base = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let manifest: DatasetManifest = read_json(&manifest_path)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported dataset format version {}",
            manifest.format_version
        )));
    }
    let courses = read_csv(&base.join(&manifest.courses), |r: CourseRow| {
        Ok(Course {
            id: CourseId(r.course_id),
            rating: r.rating,
            region: r.region,
        })
    })?;
    let packages = read_csv(&base.join(&manifest.packages), |r: PackageRow| Package::try_from(r))?;
    let bookings = read_csv(&base.join(&manifest.bookings), |r: BookingRow| Booking::try_from(r))?;
    let holidays = read_csv(&base.join(&manifest.holidays), |r: HolidayRow| Ok(r.date))?;
    let mut d = Dataset {
        courses,
        packages,
        bookings,
        holiday_calendar: holidays.into_iter().collect(),
    };
    d.sort_bookings();
    Ok(d)
}
