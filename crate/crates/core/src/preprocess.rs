//! Weekly count series to standardized residual rows.
//!
//! Weekly totals are spread evenly over the week's seven days and square-root
//! transformed. A seasonal curve over day-of-year is fitted on a training
//! window with a circular Gaussian-kernel (Nadaraya-Watson) smoother, and
//! every week is then expressed as its residual from the curve at the week's
//! centre day, standardized by the training residuals' mean and sd.
//!
//! Dates in the input mark the last day of each week. Day-of-year uses the
//! non-leap calendar, with 29 February folded into day 59.

use std::io::Read;

use chrono::{Datelike, Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::matrix::{DataMatrix, Matrix};

pub const DEFAULT_BANDWIDTH: f64 = 20.0;
const YEAR_LENGTH: f64 = 365.25;
const FIT_DAYS: usize = 366;

/// Weekly counts for one unit, at regular 7-day spacing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeeklySeries {
    pub unit_id: String,
    pub observations: Vec<(NaiveDate, u64)>,
}

impl WeeklySeries {
    pub fn new(unit_id: impl Into<String>, observations: Vec<(NaiveDate, u64)>) -> Result<Self> {
        let unit_id = unit_id.into();
        for pair in observations.windows(2) {
            let gap = (pair[1].0 - pair[0].0).num_days();
            if gap != 7 {
                return Err(Error::InvalidSeries {
                    unit: unit_id,
                    reason: format!(
                        "{} follows {} after {gap} days, expected 7",
                        pair[1].0, pair[0].0
                    ),
                });
            }
        }
        Ok(Self {
            unit_id,
            observations,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.observations.iter().map(|&(d, _)| d).collect()
    }

    /// Weeks ending on or before `end`.
    pub fn until(&self, end: NaiveDate) -> Self {
        Self {
            unit_id: self.unit_id.clone(),
            observations: self
                .observations
                .iter()
                .copied()
                .take_while(|&(d, _)| d <= end)
                .collect(),
        }
    }
}

/// Fitted seasonal curve and standardization constants for one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalBaseline {
    pub unit_id: String,
    pub bandwidth: f64,
    /// Expected square-root daily count for day-of-year `i + 1`.
    pub daily_fit: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl SeasonalBaseline {
    pub fn fit_at(&self, date: NaiveDate) -> f64 {
        self.daily_fit[day_of_year(date) - 1]
    }
}

/// Day-of-year in `1..=365`, with 29 February mapped to 59 and later days of
/// a leap year shifted down by one.
pub fn day_of_year(date: NaiveDate) -> usize {
    let ordinal = date.ordinal() as usize;
    let leap = NaiveDate::from_ymd_opt(date.year(), 2, 29).is_some();
    if leap && ordinal >= 60 {
        ordinal - 1
    } else {
        ordinal
    }
}

fn week_centre(end: NaiveDate) -> NaiveDate {
    end - Duration::days(3)
}

fn transformed(count: u64) -> f64 {
    (count as f64 / 7.0).sqrt()
}

fn circular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % YEAR_LENGTH;
    d.min(YEAR_LENGTH - d)
}

pub fn fit_seasonal(train: &WeeklySeries, bandwidth: f64) -> Result<SeasonalBaseline> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::param("bandwidth", format!("{bandwidth} is not positive")));
    }
    if train.len() < 2 {
        return Err(Error::InvalidSeries {
            unit: train.unit_id.clone(),
            reason: format!("training window has {} weeks, need at least 2", train.len()),
        });
    }

    // Daily values pooled by day-of-year.
    let mut sums = [0.0f64; FIT_DAYS];
    let mut counts = [0.0f64; FIT_DAYS];
    for &(end, count) in &train.observations {
        let y = transformed(count);
        for back in 0..7 {
            let doy = day_of_year(end - Duration::days(back));
            sums[doy - 1] += y;
            counts[doy - 1] += 1.0;
        }
    }

    let daily_fit: Vec<f64> = (1..=FIT_DAYS)
        .map(|target| {
            let (mut num, mut den) = (0.0, 0.0);
            for e in 0..FIT_DAYS {
                if counts[e] == 0.0 {
                    continue;
                }
                let z = circular_gap(target as f64, (e + 1) as f64) / bandwidth;
                let w = (-0.5 * z * z).exp();
                num += w * sums[e];
                den += w * counts[e];
            }
            num / den
        })
        .collect();
    if let Some(i) = daily_fit.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidSeries {
            unit: train.unit_id.clone(),
            reason: format!("no training data near day {}; bandwidth too small", i + 1),
        });
    }

    let residuals: Vec<f64> = train
        .observations
        .iter()
        .map(|&(end, count)| transformed(count) - daily_fit[day_of_year(week_centre(end)) - 1])
        .collect();
    let k = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / k;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let sd = var.sqrt();
    let scale = 1.0 + daily_fit.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sd.is_nan() || sd <= 1e-10 * scale {
        return Err(Error::ZeroVariance {
            unit: train.unit_id.clone(),
        });
    }

    Ok(SeasonalBaseline {
        unit_id: train.unit_id.clone(),
        bandwidth,
        daily_fit,
        mean,
        sd,
    })
}

/// Standardized residual of every week in `series`.
pub fn detrend_standardize(series: &WeeklySeries, baseline: &SeasonalBaseline) -> Vec<f64> {
    series
        .observations
        .iter()
        .map(|&(end, count)| {
            let resid = transformed(count) - baseline.fit_at(week_centre(end));
            (resid - baseline.mean) / baseline.sd
        })
        .collect()
}

/// One unit's standardized residuals, labelled with week-ending dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedRow {
    pub unit_id: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

/// Fits every unit on weeks ending on or before `train_end` and
/// standardizes its full series.
pub fn preprocess_units(
    series: &[WeeklySeries],
    train_end: NaiveDate,
    bandwidth: f64,
) -> Result<(Vec<SeasonalBaseline>, Vec<StandardizedRow>)> {
    let fitted = series
        .par_iter()
        .map(|s| {
            let baseline = fit_seasonal(&s.until(train_end), bandwidth)?;
            let row = StandardizedRow {
                unit_id: s.unit_id.clone(),
                dates: s.dates(),
                values: detrend_standardize(s, &baseline),
            };
            Ok((baseline, row))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fitted.into_iter().unzip())
}

/// Stacks rows so that row `i` holds the unit assigned to node `i + 1` in
/// `node_units`.
pub fn assemble_matrix(
    rows: &[StandardizedRow],
    graph: &NetworkGraph,
    node_units: &[String],
) -> Result<DataMatrix> {
    let p = graph.p();
    if node_units.len() != p {
        return Err(Error::ShapeMismatch(format!(
            "{} unit names for {p} graph nodes",
            node_units.len()
        )));
    }
    if rows.len() != p {
        return Err(Error::ShapeMismatch(format!(
            "{} rows for {p} graph nodes",
            rows.len()
        )));
    }
    let len = rows[0].values.len();
    let mut ordered = Vec::with_capacity(p);
    for unit in node_units {
        let mut matching = rows.iter().filter(|r| &r.unit_id == unit);
        let row = matching.next().ok_or_else(|| Error::InvalidSeries {
            unit: unit.clone(),
            reason: "no row for this graph node".into(),
        })?;
        if matching.next().is_some() {
            return Err(Error::InvalidSeries {
                unit: unit.clone(),
                reason: "more than one row".into(),
            });
        }
        if row.values.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "unit `{unit}` has {} weeks, expected {len}",
                row.values.len()
            )));
        }
        if row.dates != rows[0].dates {
            return Err(Error::InvalidSeries {
                unit: unit.clone(),
                reason: format!("dates differ from unit `{}`", rows[0].unit_id),
            });
        }
        ordered.push(row.values.clone());
    }
    DataMatrix::new(Matrix::from_rows(ordered)?)
}

/// Reads `unit,date,count` records (with header) into one series per unit,
/// in order of first appearance. Records need not be sorted.
pub fn read_weekly_csv<R: Read>(reader: R) -> Result<Vec<WeeklySeries>> {
    #[derive(Deserialize)]
    struct Record {
        unit: String,
        date: String,
        count: u64,
    }

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut units: Vec<(String, Vec<(NaiveDate, u64)>)> = Vec::new();
    for (i, rec) in rdr.deserialize::<Record>().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?;
        let date = NaiveDate::parse_from_str(&rec.date, "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            reason: format!("date `{}`: {e}", rec.date),
        })?;
        match units.iter_mut().find(|(u, _)| *u == rec.unit) {
            Some((_, obs)) => obs.push((date, rec.count)),
            None => units.push((rec.unit, vec![(date, rec.count)])),
        }
    }
    units
        .into_iter()
        .map(|(unit, mut obs)| {
            obs.sort_by_key(|&(d, _)| d);
            WeeklySeries::new(unit, obs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn weekly(unit: &str, start: NaiveDate, weeks: usize, count: impl Fn(NaiveDate) -> u64) -> WeeklySeries {
        let obs = (0..weeks)
            .map(|w| {
                let end = start + Duration::days(7 * w as i64);
                (end, count(end))
            })
            .collect();
        WeeklySeries::new(unit, obs).unwrap()
    }

    fn seasonal_rate(d: NaiveDate) -> f64 {
        1000.0 * (1.0 + 0.3 * (2.0 * PI * day_of_year(d) as f64 / YEAR_LENGTH).sin())
    }

    fn seasonal_counts(end: NaiveDate) -> u64 {
        (0..7)
            .map(|b| seasonal_rate(end - Duration::days(b)))
            .sum::<f64>()
            .round() as u64
    }

    /// Deterministic pseudo-noise so residuals have positive variance.
    fn jitter(end: NaiveDate) -> i64 {
        ((end.num_days_from_ce() as i64 * 7919) % 61) - 30
    }

    #[test]
    fn day_of_year_folds_leap_day() {
        assert_eq!(day_of_year(date(2019, 1, 1)), 1);
        assert_eq!(day_of_year(date(2020, 2, 28)), 59);
        assert_eq!(day_of_year(date(2020, 2, 29)), 59);
        assert_eq!(day_of_year(date(2020, 3, 1)), 60);
        assert_eq!(day_of_year(date(2019, 3, 1)), 60);
        assert_eq!(day_of_year(date(2020, 12, 31)), 365);
    }

    #[test]
    fn irregular_spacing_rejected() {
        let err = WeeklySeries::new("a", vec![(date(2019, 1, 5), 1), (date(2019, 1, 13), 1)]);
        assert!(matches!(err, Err(Error::InvalidSeries { .. })));
    }

    #[test]
    fn constant_input_fits_constant_and_has_zero_variance() {
        let s = weekly("c", date(2017, 1, 7), 120, |_| 7 * 16);
        assert!(matches!(
            fit_seasonal(&s, 20.0),
            Err(Error::ZeroVariance { .. })
        ));
        let noisy = weekly("c", date(2017, 1, 7), 120, |e| if e.day() == 7 { 7 * 16 + 7 } else { 7 * 16 });
        let b = fit_seasonal(&noisy, 20.0).unwrap();
        assert_eq!(b.daily_fit.len(), 366);
        assert!(b.daily_fit.iter().all(|&v| (v - 4.0).abs() < 0.05));
    }

    #[test]
    fn identical_inputs_identical_baselines() {
        let a = weekly("a", date(2017, 1, 7), 130, |e| (seasonal_counts(e) as i64 + jitter(e)) as u64);
        let mut b = a.clone();
        b.unit_id = "a".into();
        assert_eq!(fit_seasonal(&a, 20.0).unwrap(), fit_seasonal(&b, 20.0).unwrap());
    }

    #[test]
    fn recovers_sinusoidal_season() {
        let s = weekly("s", date(2017, 1, 7), 130, seasonal_counts);
        // Residual variance comes only from rounding; add a little jitter.
        let s = WeeklySeries::new(
            "s",
            s.observations
                .iter()
                .map(|&(d, c)| (d, (c as i64 + jitter(d)) as u64))
                .collect(),
        )
        .unwrap();
        let b = fit_seasonal(&s, 20.0).unwrap();
        for doy in 1..=365 {
            let truth = (1000.0 * (1.0 + 0.3 * (2.0 * PI * doy as f64 / YEAR_LENGTH).sin())).sqrt();
            let rel = (b.daily_fit[doy - 1] - truth).abs() / truth;
            assert!(rel < 0.05, "day {doy}: rel error {rel}");
        }
    }

    #[test]
    fn training_residuals_are_standardized() {
        let s = weekly("s", date(2017, 1, 7), 130, |e| (seasonal_counts(e) as i64 + jitter(e)) as u64);
        let b = fit_seasonal(&s, 20.0).unwrap();
        let z = detrend_standardize(&s, &b);
        let k = z.len() as f64;
        let mean = z.iter().sum::<f64>() / k;
        let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        assert!(mean.abs() < 1e-6);
        assert!((sd - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_counts_are_fine() {
        let s = weekly("z", date(2017, 1, 7), 60, |e| if e.month() % 2 == 0 { 0 } else { 14 });
        let b = fit_seasonal(&s, 20.0).unwrap();
        assert!(detrend_standardize(&s, &b).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn level_shift_shows_after_training() {
        let shift_from = date(2020, 3, 1);
        let s = weekly("s", date(2017, 1, 7), 200, |e| {
            let base = seasonal_counts(e) as i64 + jitter(e);
            (if e >= shift_from { base + 2000 } else { base }) as u64
        });
        let train_end = date(2019, 6, 30);
        let b = fit_seasonal(&s.until(train_end), 20.0).unwrap();
        let z = detrend_standardize(&s, &b);
        let (mut before, mut after) = (Vec::new(), Vec::new());
        for (&(d, _), &v) in s.observations.iter().zip(&z) {
            if d >= shift_from {
                after.push(v);
            } else if d > train_end {
                before.push(v);
            }
        }
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(avg(&after) > avg(&before) + 1.0);
        assert!(avg(&after) > 0.0);
    }

    #[test]
    fn empty_training_window() {
        let s = weekly("s", date(2019, 7, 6), 10, |_| 10);
        assert!(fit_seasonal(&s.until(date(2019, 6, 30)), 20.0).is_err());
        assert!(fit_seasonal(&s, 0.0).is_err());
    }

    fn row(unit: &str, len: usize, offset: f64) -> StandardizedRow {
        StandardizedRow {
            unit_id: unit.into(),
            dates: (0..len).map(|w| date(2020, 1, 4) + Duration::days(7 * w as i64)).collect(),
            values: (0..len).map(|i| i as f64 + offset).collect(),
        }
    }

    #[test]
    fn assemble_orders_by_node() {
        let g = NetworkGraph::from_edge_list(3, &[(1, 2), (2, 3)]).unwrap();
        let rows = vec![row("b", 10, 1.0), row("a", 10, 0.0), row("c", 10, 2.0)];
        let units: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let x = assemble_matrix(&rows, &g, &units).unwrap();
        assert_eq!((x.p(), x.n()), (3, 10));
        assert_eq!(x.get(0, 0), 0.0);
        assert_eq!(x.get(1, 0), 1.0);
    }

    #[test]
    fn assemble_rejects_mismatches() {
        let g = NetworkGraph::from_edge_list(3, &[(1, 2), (2, 3)]).unwrap();
        let units: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let uneven = vec![row("a", 10, 0.0), row("b", 9, 0.0), row("c", 10, 0.0)];
        assert!(assemble_matrix(&uneven, &g, &units).is_err());
        let missing = vec![row("a", 10, 0.0), row("b", 10, 0.0), row("d", 10, 0.0)];
        assert!(assemble_matrix(&missing, &g, &units).is_err());
        let short = vec![row("a", 10, 0.0), row("b", 10, 0.0)];
        assert!(assemble_matrix(&short, &g, &units).is_err());
        assert!(assemble_matrix(&uneven, &g, &units[..2]).is_err());
    }

    #[test]
    fn reads_csv_grouped_by_unit() {
        let text = "unit,date,count\nb,2019-01-12,5\na,2019-01-05,3\nb,2019-01-05,4\na,2019-01-12,6\n";
        let series = read_weekly_csv(text.as_bytes()).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].unit_id, "b");
        assert_eq!(series[0].observations, vec![(date(2019, 1, 5), 4), (date(2019, 1, 12), 5)]);
        assert!(read_weekly_csv("unit,date,count\na,2019-13-01,1\n".as_bytes()).is_err());
        assert!(read_weekly_csv("unit,date,count\na,2019-01-01,-1\n".as_bytes()).is_err());
    }
}
