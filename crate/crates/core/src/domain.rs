//! Core data types shared by every stage: courses, packages, bookings and
//! the dataset that houses them, plus validation and option extraction.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// Money in integer minor currency units.
pub type Money = i64;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(CourseId);
id_type!(PackageId);
id_type!(UserId);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Course {
    pub id: CourseId,
    /// Average review rating in `[1.0, 5.0]`.
    pub rating: f64,
    /// Geographic grouping; only the generator uses it.
    pub region: u32,
}

/// The binary package options summed over by the option similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionFlag {
    Lunch,
    Caddie,
    Competition,
    Holiday,
    PairParty,
}

pub const NUM_OPTION_FLAGS: usize = 5;

impl OptionFlag {
    /// Canonical order of the flag set.
    pub const ALL: [OptionFlag; NUM_OPTION_FLAGS] = [
        OptionFlag::Lunch,
        OptionFlag::Caddie,
        OptionFlag::Competition,
        OptionFlag::Holiday,
        OptionFlag::PairParty,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            OptionFlag::Lunch => "lunch",
            OptionFlag::Caddie => "caddie",
            OptionFlag::Competition => "competition",
            OptionFlag::Holiday => "holiday",
            OptionFlag::PairParty => "pair_party",
        }
    }
}

impl fmt::Display for OptionFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OptionVector {
    pub lunch: bool,
    pub caddie: bool,
    pub competition: bool,
    /// Play date falls on a weekend or a calendar holiday.
    pub holiday: bool,
    pub pair_party: bool,
    pub min_party_size: u8,
    pub min_num_parties: u8,
    pub num_laps: u8,
}

impl Default for OptionVector {
    fn default() -> Self {
        Self {
            lunch: false,
            caddie: false,
            competition: false,
            holiday: false,
            pair_party: false,
            min_party_size: 1,
            min_num_parties: 1,
            num_laps: 1,
        }
    }
}

impl OptionVector {
    pub fn flag(&self, flag: OptionFlag) -> bool {
        match flag {
            OptionFlag::Lunch => self.lunch,
            OptionFlag::Caddie => self.caddie,
            OptionFlag::Competition => self.competition,
            OptionFlag::Holiday => self.holiday,
            OptionFlag::PairParty => self.pair_party,
        }
    }

    pub fn set_flag(&mut self, flag: OptionFlag, value: bool) {
        match flag {
            OptionFlag::Lunch => self.lunch = value,
            OptionFlag::Caddie => self.caddie = value,
            OptionFlag::Competition => self.competition = value,
            OptionFlag::Holiday => self.holiday = value,
            OptionFlag::PairParty => self.pair_party = value,
        }
    }

    pub fn flags(&self) -> [bool; NUM_OPTION_FLAGS] {
        OptionFlag::ALL.map(|k| self.flag(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromotionType {
    None,
    EarlyBird,
    LastMinute,
    Limited,
}

impl PromotionType {
    pub const ALL: [PromotionType; 4] = [
        PromotionType::None,
        PromotionType::EarlyBird,
        PromotionType::LastMinute,
        PromotionType::Limited,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PromotionType::None => "none",
            PromotionType::EarlyBird => "early_bird",
            PromotionType::LastMinute => "last_minute",
            PromotionType::Limited => "limited",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Package {
    pub id: PackageId,
    pub course_id: CourseId,
    pub active_from: NaiveDate,
    pub active_to: NaiveDate,
    /// 1 = January.
    pub play_month: u32,
    /// ISO weekday, 1 = Monday.
    pub play_dow: u32,
    pub options: OptionVector,
    pub price: Money,
    pub promotion_type: PromotionType,
    /// `active_to - active_from` in days.
    pub shortness: i64,
}

impl Package {
    /// True when the active window intersects `[start, end]`.
    pub fn is_active_during(&self, start: NaiveDate, end: NaiveDate) -> bool {
        self.active_from <= end && self.active_to >= start
    }

    pub fn is_active_on(&self, date: NaiveDate) -> bool {
        self.active_from <= date && date <= self.active_to
    }
}

/// Ordered 0/1 projection of a package onto the option flag set.
pub fn option_flags(p: &Package) -> [u8; NUM_OPTION_FLAGS] {
    p.options.flags().map(u8::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booking {
    pub user_id: UserId,
    pub course_id: CourseId,
    pub package_id: PackageId,
    pub booked_at: NaiveDate,
    pub play_date: NaiveDate,
    pub price_paid: Money,
    /// Snapshot of the package options at booking time.
    pub options: OptionVector,
    pub party_size: u8,
    pub num_parties: u8,
}

/// Weekend or a listed calendar holiday.
pub fn is_holiday(date: NaiveDate, calendar: &BTreeSet<NaiveDate>) -> bool {
    date.weekday().number_from_monday() >= 6 || calendar.contains(&date)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub courses: Vec<Course>,
    pub packages: Vec<Package>,
    pub bookings: Vec<Booking>,
    pub holiday_calendar: BTreeSet<NaiveDate>,
}

impl Dataset {
    /// Stable sort of bookings by `booked_at`.
    pub fn sort_bookings(&mut self) {
        self.bookings.sort_by_key(|b| b.booked_at);
    }

    /// Bookings grouped per user, each list in `booked_at` order.
    pub fn histories(&self) -> BTreeMap<UserId, Vec<Booking>> {
        group_by_user(&self.bookings)
    }

    pub fn date_span(&self) -> Option<(NaiveDate, NaiveDate)> {
        let first = self.bookings.iter().map(|b| b.booked_at).min()?;
        let last = self.bookings.iter().map(|b| b.booked_at).max()?;
        Some((first, last))
    }
}

pub fn group_by_user(bookings: &[Booking]) -> BTreeMap<UserId, Vec<Booking>> {
    let mut out: BTreeMap<UserId, Vec<Booking>> = BTreeMap::new();
    for b in bookings {
        out.entry(b.user_id).or_default().push(b.clone());
    }
    for list in out.values_mut() {
        list.sort_by_key(|b| b.booked_at);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    DuplicateId,
    RatingRange,
    DateOrder,
    Shortness,
    NegativePrice,
    MonthRange,
    WeekdayRange,
    OptionCount,
    MissingCourse,
    MissingPackage,
    CourseMismatch,
    PlayDateOutsideWindow,
    PartyCount,
    BookingOrder,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::DuplicateId => "duplicate id",
            Rule::RatingRange => "rating outside [1, 5]",
            Rule::DateOrder => "active_to before active_from",
            Rule::Shortness => "shortness differs from active window length",
            Rule::NegativePrice => "negative price",
            Rule::MonthRange => "play_month outside 1..=12",
            Rule::WeekdayRange => "play_dow outside 1..=7",
            Rule::OptionCount => "option count below 1",
            Rule::MissingCourse => "unknown course",
            Rule::MissingPackage => "unknown package",
            Rule::CourseMismatch => "package belongs to a different course",
            Rule::PlayDateOutsideWindow => "play date outside package active window",
            Rule::PartyCount => "party size or party count below 1",
            Rule::BookingOrder => "bookings not sorted by booked_at",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub entity: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

fn options_valid(o: &OptionVector) -> bool {
    o.min_party_size >= 1 && o.min_num_parties >= 1 && o.num_laps >= 1
}

/// Checks every type invariant; an empty report means the dataset is valid.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut report = Vec::new();
    let mut push = |entity: String, rule: Rule| report.push(Violation { entity, rule });

    let mut courses = HashSet::new();
    for c in &d.courses {
        let entity = format!("course {}", c.id);
        if !courses.insert(c.id) {
            push(entity.clone(), Rule::DuplicateId);
        }
        if !(1.0..=5.0).contains(&c.rating) {
            push(entity, Rule::RatingRange);
        }
    }

    let mut packages: HashMap<PackageId, &Package> = HashMap::new();
    for p in &d.packages {
        let entity = format!("package {}", p.id);
        if packages.insert(p.id, p).is_some() {
            push(entity.clone(), Rule::DuplicateId);
        }
        if !courses.contains(&p.course_id) {
            push(entity.clone(), Rule::MissingCourse);
        }
        if p.active_to < p.active_from {
            push(entity.clone(), Rule::DateOrder);
        }
        if (p.active_to - p.active_from).num_days() != p.shortness {
            push(entity.clone(), Rule::Shortness);
        }
        if p.price < 0 {
            push(entity.clone(), Rule::NegativePrice);
        }
        if !(1..=12).contains(&p.play_month) {
            push(entity.clone(), Rule::MonthRange);
        }
        if !(1..=7).contains(&p.play_dow) {
            push(entity.clone(), Rule::WeekdayRange);
        }
        if !options_valid(&p.options) {
            push(entity, Rule::OptionCount);
        }
    }

    let mut previous: Option<NaiveDate> = None;
    for (row, b) in d.bookings.iter().enumerate() {
        let entity = format!("booking {row} (user {})", b.user_id);
        if !courses.contains(&b.course_id) {
            push(entity.clone(), Rule::MissingCourse);
        }
        match packages.get(&b.package_id) {
            None => push(entity.clone(), Rule::MissingPackage),
            Some(p) => {
                if p.course_id != b.course_id {
                    push(entity.clone(), Rule::CourseMismatch);
                }
                if !p.is_active_on(b.play_date) {
                    push(entity.clone(), Rule::PlayDateOutsideWindow);
                }
            }
        }
        if b.price_paid < 0 {
            push(entity.clone(), Rule::NegativePrice);
        }
        if b.party_size < 1 || b.num_parties < 1 {
            push(entity.clone(), Rule::PartyCount);
        }
        if !options_valid(&b.options) {
            push(entity.clone(), Rule::OptionCount);
        }
        if previous.is_some_and(|prev| b.booked_at < prev) {
            push(entity, Rule::BookingOrder);
        }
        previous = Some(b.booked_at);
    }
    report
}

/// Lookup tables over a dataset's courses and packages.
#[derive(Debug, Clone)]
pub struct Catalog {
    courses: HashMap<CourseId, Course>,
    packages: HashMap<PackageId, Package>,
    by_course: BTreeMap<CourseId, Vec<PackageId>>,
    course_ids: Vec<CourseId>,
}

impl Catalog {
    pub fn new(courses: &[Course], packages: &[Package]) -> Self {
        let mut by_course: BTreeMap<CourseId, Vec<PackageId>> = BTreeMap::new();
        for p in packages {
            by_course.entry(p.course_id).or_default().push(p.id);
        }
        for ids in by_course.values_mut() {
            ids.sort();
        }
        let mut course_ids: Vec<CourseId> = courses.iter().map(|c| c.id).collect();
        course_ids.sort();
        course_ids.dedup();
        Self {
            courses: courses.iter().map(|c| (c.id, c.clone())).collect(),
            packages: packages.iter().map(|p| (p.id, p.clone())).collect(),
            by_course,
            course_ids,
        }
    }

    pub fn from_dataset(d: &Dataset) -> Self {
        Self::new(&d.courses, &d.packages)
    }

    pub fn course(&self, id: CourseId) -> Option<&Course> {
        self.courses.get(&id)
    }

    pub fn package(&self, id: PackageId) -> Option<&Package> {
        self.packages.get(&id)
    }

    pub fn course_ids(&self) -> &[CourseId] {
        &self.course_ids
    }

    /// Every package, in (course id, package id) order.
    pub fn packages(&self) -> impl Iterator<Item = &Package> {
        self.by_course
            .values()
            .flatten()
            .filter_map(|id| self.packages.get(id))
    }

    /// Packages of `course` whose active window intersects `[start, end]`,
    /// in package id order.
    pub fn active_packages(
        &self,
        course: CourseId,
        start: NaiveDate,
        end: NaiveDate,
    ) -> impl Iterator<Item = &Package> {
        self.by_course
            .get(&course)
            .into_iter()
            .flatten()
            .filter_map(|id| self.packages.get(id))
            .filter(move |p| p.is_active_during(start, end))
    }

    pub fn course_packages(&self, course: CourseId) -> impl Iterator<Item = &Package> {
        self.by_course
            .get(&course)
            .into_iter()
            .flatten()
            .filter_map(|id| self.packages.get(id))
    }
}
