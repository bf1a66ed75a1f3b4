//! Calendar months and policy rates.
//!
//! Rates are stored as integer basis points so that gaps and squared errors
//! are exact; conversion to percentage points only happens for display.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const MONTH_NAMES: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UnitsError {
    #[error("invalid meeting date {0:?}: expected YYYY-MM")]
    Date(String),
    #[error("invalid rate {0:?}: expected a percentage such as 1.75 or 1.75%")]
    RateSyntax(String),
    #[error("rate {0} bp is not a multiple of 25 bp")]
    RateStep(u32),
}

/// Calendar month and year of a meeting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeetingDate {
    year: u16,
    month: u8,
}

impl MeetingDate {
    pub fn new(year: u16, month: u8) -> Result<Self, UnitsError> {
        if !(1..=12).contains(&month) {
            return Err(UnitsError::Date(format!("{year}-{month}")));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> u16 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    pub fn month_name(self) -> &'static str {
        MONTH_NAMES[usize::from(self.month - 1)]
    }

    /// "May 2018"
    pub fn long_name(self) -> String {
        format!("{} {}", self.month_name(), self.year)
    }

    /// "May 2018" with the month abbreviated the way the report tables do ("Jan. 2018").
    pub fn short_name(self) -> String {
        let name = self.month_name();
        if name.len() <= 4 {
            format!("{} {}", name, self.year)
        } else {
            format!("{}. {}", &name[..3], self.year)
        }
    }

    /// The calendar month before this one.
    pub fn previous_month(self) -> Self {
        if self.month == 1 {
            Self { year: self.year - 1, month: 12 }
        } else {
            Self { year: self.year, month: self.month - 1 }
        }
    }
}

impl fmt::Display for MeetingDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MeetingDate {
    type Err = UnitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || UnitsError::Date(s.to_string());
        let (y, m) = s.trim().split_once('-').ok_or_else(err)?;
        if y.len() != 4 || m.is_empty() || m.len() > 2 {
            return Err(err());
        }
        let year: u16 = y.parse().map_err(|_| err())?;
        let month: u8 = m.parse().map_err(|_| err())?;
        Self::new(year, month).map_err(|_| err())
    }
}

impl Serialize for MeetingDate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MeetingDate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A Fed Funds target (lower boundary) in basis points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct PolicyRate(u32);

impl PolicyRate {
    pub const STEP_BP: u32 = 25;

    pub fn from_bp(bp: u32) -> Result<Self, UnitsError> {
        if !bp.is_multiple_of(Self::STEP_BP) {
            return Err(UnitsError::RateStep(bp));
        }
        Ok(Self(bp))
    }

    pub fn bp(self) -> u32 {
        self.0
    }

    /// Signed difference `self - other` in basis points.
    pub fn diff_bp(self, other: PolicyRate) -> i64 {
        i64::from(self.0) - i64::from(other.0)
    }

    /// Parses "1.75", "1.75%", "2" or "2.0%" exactly, without going through floats.
    pub fn parse_percent(text: &str) -> Result<Self, UnitsError> {
        let err = || UnitsError::RateSyntax(text.to_string());
        let t = text.trim().trim_end_matches('%').trim();
        let (whole, frac) = match t.split_once('.') {
            Some((w, f)) => (w, f),
            None => (t, ""),
        };
        if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        if !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let frac = frac.trim_end_matches('0');
        if frac.len() > 2 {
            return Err(err());
        }
        let whole: u32 = whole.parse().map_err(|_| err())?;
        let frac_bp: u32 = if frac.is_empty() {
            0
        } else {
            let v: u32 = frac.parse().map_err(|_| err())?;
            if frac.len() == 1 {
                v * 10
            } else {
                v
            }
        };
        let bp = whole.checked_mul(100).and_then(|w| w.checked_add(frac_bp)).ok_or_else(err)?;
        Self::from_bp(bp)
    }

    /// "1.50%"
    pub fn fixed_percent(self) -> String {
        format!("{}.{:02}%", self.0 / 100, self.0 % 100)
    }

    /// "1.5%", "1.25%", "2.0%" (table style: at least one decimal, no trailing zero beyond it).
    pub fn table_percent(self) -> String {
        let frac = self.0 % 100;
        if frac.is_multiple_of(10) {
            format!("{}.{}%", self.0 / 100, frac / 10)
        } else {
            format!("{}.{:02}%", self.0 / 100, frac)
        }
    }
}

impl TryFrom<u32> for PolicyRate {
    type Error = UnitsError;

    fn try_from(bp: u32) -> Result<Self, Self::Error> {
        Self::from_bp(bp)
    }
}

impl From<PolicyRate> for u32 {
    fn from(rate: PolicyRate) -> u32 {
        rate.0
    }
}

impl fmt::Display for PolicyRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fixed_percent())
    }
}

/// Serde adapter writing a [`PolicyRate`] as a percent string ("1.25") in
/// human-edited files. Use with `#[serde(with = "percent")]`.
pub mod percent {
    use super::PolicyRate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rate: &PolicyRate, serializer: S) -> Result<S::Ok, S::Error> {
        let s = rate.fixed_percent();
        serializer.serialize_str(s.trim_end_matches('%'))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<PolicyRate, D::Error> {
        let s = String::deserialize(deserializer)?;
        PolicyRate::parse_percent(&s).map_err(serde::de::Error::custom)
    }
}

/// Formats a signed basis-point gap in percentage points the way the report
/// tables do: "0.25%", "-0.25%", "0".
pub fn format_gap_bp(gap_bp: i64) -> String {
    if gap_bp == 0 {
        return "0".to_string();
    }
    let sign = if gap_bp < 0 { "-" } else { "" };
    let abs = gap_bp.unsigned_abs();
    let frac = abs % 100;
    let frac = if frac.is_multiple_of(10) {
        format!("{}", frac / 10)
    } else {
        format!("{frac:02}")
    };
    format!("{sign}{}.{frac}%", abs / 100)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dates_parse_and_print() {
        let d: MeetingDate = "2018-05".parse().unwrap();
        assert_eq!(d.long_name(), "May 2018");
        assert_eq!(d.short_name(), "May 2018");
        assert_eq!(d.to_string(), "2018-05");
        let s: MeetingDate = "2018-09".parse().unwrap();
        assert_eq!(s.short_name(), "Sep. 2018");
        assert_eq!(s.previous_month().long_name(), "August 2018");
        assert_eq!("2018-01".parse::<MeetingDate>().unwrap().previous_month().to_string(), "2017-12");
        assert!("2018-13".parse::<MeetingDate>().is_err());
        assert!("May 2018".parse::<MeetingDate>().is_err());
    }

    #[test]
    fn rate_parsing_is_exact() {
        assert_eq!(PolicyRate::parse_percent("1.75%").unwrap().bp(), 175);
        assert_eq!(PolicyRate::parse_percent("1.5").unwrap().bp(), 150);
        assert_eq!(PolicyRate::parse_percent("2").unwrap().bp(), 200);
        assert_eq!(PolicyRate::parse_percent("2.250").unwrap().bp(), 225);
        assert!(PolicyRate::parse_percent("1.7").is_err());
        assert!(PolicyRate::parse_percent("1.333").is_err());
        assert!(PolicyRate::parse_percent("abc").is_err());
        assert!(PolicyRate::parse_percent("-1.0").is_err());
    }

    #[test]
    fn rate_display() {
        let r = PolicyRate::from_bp(150).unwrap();
        assert_eq!(r.fixed_percent(), "1.50%");
        assert_eq!(r.table_percent(), "1.5%");
        assert_eq!(PolicyRate::from_bp(125).unwrap().table_percent(), "1.25%");
        assert_eq!(PolicyRate::from_bp(200).unwrap().table_percent(), "2.0%");
    }

    #[test]
    fn gap_display() {
        assert_eq!(format_gap_bp(25), "0.25%");
        assert_eq!(format_gap_bp(-25), "-0.25%");
        assert_eq!(format_gap_bp(0), "0");
        assert_eq!(format_gap_bp(50), "0.5%");
    }

    #[test]
    fn rate_serde_rejects_off_step() {
        assert!(serde_json::from_str::<PolicyRate>("130").is_err());
        assert_eq!(serde_json::from_str::<PolicyRate>("150").unwrap().bp(), 150);
    }
}
