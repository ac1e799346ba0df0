//! Writes the bundled synthetic dataset.
//!
//! ```text
//! cargo run -p bloomcast-cli --example sample_data -- data/sample
//! ```
//!
//! Daily temperatures follow an annual cosine with a slow warming trend and
//! AR(1) weather noise. The bloom date of each year is the first day on
//! which growing degree-days above 5 °C, counted from 1 February, reach a
//! fixed requirement. About 2% of average cells are blank (recoverable from
//! the extremes), a few days have no readings at all, and a few rows are
//! absent.

use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const FIRST_YEAR: i32 = 1990;
const LAST_YEAR: i32 = 2014;
const GDD_BASE: f64 = 5.0;
const GDD_REQUIRED: f64 = 250.0;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/sample".into()));
    std::fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_401);
    let weather = Normal::<f64>::new(0.0, 1.6).unwrap();
    let spread = Normal::<f64>::new(0.0, 0.8).unwrap();

    let start = NaiveDate::from_ymd_opt(FIRST_YEAR - 1, 11, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(LAST_YEAR, 5, 31).unwrap();
    let mut temps = String::from("date,tmax_c,tmin_c,tavg_c\n");
    let mut blooms = String::from("year,bloom_date\n");
    let mut anomaly = 0.0;
    let mut gdd = 0.0;
    let mut bloomed = false;
    let mut day = start;
    while day <= end {
        if day.month() == 2 && day.day() == 1 {
            gdd = 0.0;
            bloomed = false;
        }
        let t = day.ordinal() as f64;
        let trend = 0.03 * (day.year() - FIRST_YEAR) as f64;
        anomaly = 0.7 * anomaly + weather.sample(&mut rng);
        let tavg = 15.5 - 11.0 * (2.0 * std::f64::consts::PI * (t - 20.0) / 365.25).cos() + trend + anomaly;
        let half_range = 4.0 + spread.sample(&mut rng).abs();
        let (tmax, tmin) = (tavg + half_range, tavg - half_range);

        if day.month() >= 2 && day.month() <= 5 && !bloomed {
            gdd += (tavg - GDD_BASE).max(0.0);
            if gdd >= GDD_REQUIRED && (FIRST_YEAR..=LAST_YEAR).contains(&day.year()) {
                writeln!(blooms, "{},{}", day.year(), day).unwrap();
                bloomed = true;
            }
        }

        let roll: f64 = rng.random();
        if roll < 0.003 {
            // Row absent.
        } else if roll < 0.006 {
            writeln!(temps, "{day},,,").unwrap();
        } else if roll < 0.026 {
            writeln!(temps, "{day},{tmax:.1},{tmin:.1},").unwrap();
        } else {
            writeln!(temps, "{day},{tmax:.1},{tmin:.1},{tavg:.1}").unwrap();
        }
        day += Duration::days(1);
    }
    std::fs::write(dir.join("temperature.csv"), temps)?;
    std::fs::write(dir.join("bloom.csv"), blooms)?;
    Ok(())
}
