//! Annual climate forcing: piecewise-linear in time, repeating every year.

use std::path::Path;

use crate::error::{ConfigError, Error, Result};
use crate::real::Real;

/// Length of the forcing cycle, s (365 days).
pub const YEAR_SECONDS: f64 = 31_536_000.0;

const HEADER: [&str; 5] = ["time_s", "precip_m_s", "pet_m_s", "t_north_c", "t_south_c"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aspect {
    North,
    South,
}

impl Aspect {
    pub fn as_str(&self) -> &'static str {
        match self {
            Aspect::North => "north",
            Aspect::South => "south",
        }
    }
}

impl std::str::FromStr for Aspect {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "north" => Ok(Aspect::North),
            "south" => Ok(Aspect::South),
            other => Err(format!("unknown aspect '{other}' (expected north or south)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingRecord<R> {
    /// Seconds since the start of the year.
    pub time: R,
    pub precip: R,
    pub pet: R,
    pub t_north: R,
    pub t_south: R,
}

impl<R: Real> ForcingRecord<R> {
    pub fn surface_temperature(&self, aspect: Aspect) -> R {
        match aspect {
            Aspect::North => self.t_north,
            Aspect::South => self.t_south,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClimateForcing<R> {
    records: Vec<ForcingRecord<R>>,
}

impl<R: Real> ClimateForcing<R> {
    pub fn new(records: Vec<ForcingRecord<R>>) -> Result<Self> {
        Self::check(&records).map_err(Error::Configuration)?;
        Ok(Self { records })
    }

    fn check(records: &[ForcingRecord<R>]) -> std::result::Result<(), String> {
        let first = records.first().ok_or("forcing has no breakpoints")?;
        if first.time != R::zero() {
            return Err(format!("first forcing time must be 0, got {}", first.time));
        }
        for (i, r) in records.iter().enumerate() {
            validate_record(r, records.get(i.wrapping_sub(1)).map(|p| p.time))
                .map_err(|m| format!("breakpoint {i}: {m}"))?;
        }
        Ok(())
    }

    pub fn records(&self) -> &[ForcingRecord<R>] {
        &self.records
    }

    /// Forcing at time `t` (any real time; wrapped into the year).
    pub fn at(&self, t: R) -> ForcingRecord<R> {
        let year = R::lit(YEAR_SECONDS);
        let tau = wrap(t, year);
        let n = self.records.len();
        // index of the last breakpoint at or before tau
        let k = self.records.partition_point(|r| r.time <= tau) - 1;
        let a = &self.records[k];
        if tau == a.time || n == 1 {
            return ForcingRecord { time: t, ..*a };
        }
        let (b, t_b) =
            if k + 1 < n { (&self.records[k + 1], self.records[k + 1].time) } else { (&self.records[0], year) };
        let w = (tau - a.time) / (t_b - a.time);
        let lerp = |x: R, y: R| x + (y - x) * w;
        ForcingRecord {
            time: t,
            precip: lerp(a.precip, b.precip),
            pet: lerp(a.pet, b.pet),
            t_north: lerp(a.t_north, b.t_north),
            t_south: lerp(a.t_south, b.t_south),
        }
    }

    /// First breakpoint strictly after `t` (year wrap included), as an absolute time.
    pub fn next_breakpoint(&self, t: R) -> R {
        let year = R::lit(YEAR_SECONDS);
        let tau = wrap(t, year);
        let start = t - tau;
        match self.records.iter().find(|r| r.time > tau) {
            Some(r) => start + r.time,
            None => start + year,
        }
    }
}

fn wrap<R: Real>(t: R, year: R) -> R {
    let tau = t % year;
    if tau < R::zero() {
        tau + year
    } else {
        tau
    }
}

fn validate_record<R: Real>(r: &ForcingRecord<R>, previous_time: Option<R>) -> std::result::Result<(), String> {
    let values = [r.time, r.precip, r.pet, r.t_north, r.t_south];
    if values.iter().any(|v| !v.is_finite()) {
        return Err("non-finite value".into());
    }
    if let Some(p) = previous_time {
        if !(r.time > p) {
            return Err(format!("time {} does not increase (previous {})", r.time, p));
        }
    }
    if !(r.time < R::lit(YEAR_SECONDS)) {
        return Err(format!("time {} is not within the year [0, {YEAR_SECONDS})", r.time));
    }
    if r.precip < R::zero() {
        return Err(format!("negative precipitation {}", r.precip));
    }
    if r.pet < R::zero() {
        return Err(format!("negative PET {}", r.pet));
    }
    Ok(())
}

/// Reads a forcing CSV with header `time_s,precip_m_s,pet_m_s,t_north_c,t_south_c`
/// (columns in any order). Errors carry the file row number.
pub fn load_forcing<R: Real>(path: &Path) -> Result<ClimateForcing<R>> {
    let at = |line: usize, msg: String| Error::Config(ConfigError::new(path, line, msg));
    let text = std::fs::read_to_string(path).map_err(|e| at(0, format!("cannot read forcing file: {e}")))?;
    // the reader does not count skipped comment lines, so map rows to file
    // lines here
    let data_lines: Vec<usize> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, _)| i + 1)
        .collect();
    let file_line = |row: usize| data_lines.get(row).copied().unwrap_or(0);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| at(1, e.to_string()))?.clone();
    let mut columns = [0usize; 5];
    for (slot, name) in columns.iter_mut().zip(HEADER) {
        *slot = header.iter().position(|h| h == name).ok_or_else(|| at(1, format!("missing column '{name}'")))?;
    }
    if let Some(extra) = header.iter().find(|h| !HEADER.contains(h)) {
        return Err(at(1, format!("unknown column '{extra}'")));
    }

    let mut records: Vec<ForcingRecord<R>> = Vec::new();
    for (index, row) in reader.records().enumerate() {
        let line = file_line(index + 1);
        let row = row.map_err(|e| at(line, e.to_string()))?;
        let mut v = [R::zero(); 5];
        for (k, &c) in columns.iter().enumerate() {
            let field = row.get(c).ok_or_else(|| at(line, format!("missing value for '{}'", HEADER[k])))?;
            let x: f64 = field.parse().map_err(|_| at(line, format!("'{field}' is not a number ({})", HEADER[k])))?;
            v[k] = R::lit(x);
        }
        let record = ForcingRecord { time: v[0], precip: v[1], pet: v[2], t_north: v[3], t_south: v[4] };
        if records.is_empty() && record.time != R::zero() {
            return Err(at(line, format!("first time must be 0, got {}", record.time)));
        }
        validate_record(&record, records.last().map(|r| r.time)).map_err(|m| at(line, m))?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(at(1, "forcing file has no data rows".into()));
    }
    ClimateForcing::new(records)
}

/// Writes forcing in the CSV layout read by [`load_forcing`], with round-trip precision.
pub fn forcing_to_csv<R: Real>(forcing: &ClimateForcing<R>) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for r in forcing.records() {
        out.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?}\n",
            r.time.as_f64(),
            r.precip.as_f64(),
            r.pet.as_f64(),
            r.t_north.as_f64(),
            r.t_south.as_f64()
        ));
    }
    out
}

/// Synthetic annual cycle. Day 0 is mid-winter.
///
/// `T_north(t) = mean - amplitude·cos(2πt/Y)`, `T_south = T_north + south_offset`,
/// precipitation `P/Y · (1 - seasonality·cos(2πt/Y))` and PET
/// `pet_peak · max(0, -cos(2πt/Y))`, sampled at `breakpoints` equally spaced times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidalForcing<R> {
    pub mean_temperature: R,
    pub amplitude: R,
    pub south_offset: R,
    /// Annual precipitation, m.
    pub precip_annual: R,
    pub precip_seasonality: R,
    /// Summer peak PET, m/s.
    pub pet_peak: R,
    pub breakpoints: usize,
}

impl<R: Real> Default for SinusoidalForcing<R> {
    fn default() -> Self {
        Self {
            mean_temperature: R::lit(-3.0),
            amplitude: R::lit(14.0),
            south_offset: R::lit(3.0),
            precip_annual: R::lit(0.4),
            precip_seasonality: R::lit(0.5),
            pet_peak: R::lit(4.0e-3 / 86_400.0),
            breakpoints: 73,
        }
    }
}

impl<R: Real> SinusoidalForcing<R> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Configuration(m.to_string()));
        if self.breakpoints < 2 {
            return bad("sinusoidal forcing needs at least 2 breakpoints");
        }
        if !(self.amplitude >= R::zero()) || !(self.precip_annual >= R::zero()) || !(self.pet_peak >= R::zero()) {
            return bad("amplitude, precip_annual and pet_peak must be non-negative");
        }
        if !(self.precip_seasonality >= R::zero() && self.precip_seasonality <= R::one()) {
            return bad("precip_seasonality must lie in [0, 1]");
        }
        if !self.mean_temperature.is_finite() || !self.south_offset.is_finite() {
            return bad("temperatures must be finite");
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ClimateForcing<R>> {
        self.validate()?;
        let year = R::lit(YEAR_SECONDS);
        let records = (0..self.breakpoints)
            .map(|k| {
                let time = year * R::from_usize_lossy(k) / R::from_usize_lossy(self.breakpoints);
                let c = (R::lit(2.0) * R::PI() * time / year).cos();
                let t_north = self.mean_temperature - self.amplitude * c;
                ForcingRecord {
                    time,
                    precip: self.precip_annual / year * (R::one() - self.precip_seasonality * c),
                    pet: self.pet_peak * (-c).max(R::zero()),
                    t_north,
                    t_south: t_north + self.south_offset,
                }
            })
            .collect();
        ClimateForcing::new(records)
    }
}
