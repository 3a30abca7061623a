//! Metrics over simulated or recorded power traces, and AoA error
//! statistics for the bundled angle-of-arrival measurements.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::simulator::PowerTrace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),
    #[error("traces not aligned: {0}")]
    Misaligned(String),
    #[error("table integrity check failed:\n{}", .0.join("\n"))]
    TableIntegrity(Vec<String>),
}

/// Reference figures measured on the hardware prototype. These are
/// hardware-specific and are reported alongside simulated values, never
/// asserted against them.
pub mod prototype_reference {
    /// LoS log-distance intercept, dB (distance in feet).
    pub const LOS_FIT_A_DB: f64 = -56.10;
    /// LoS log-distance slope, dB/decade.
    pub const LOS_FIT_B_DB_PER_DECADE: f64 = -15.71;
    pub const LOS_FIT_R_SQUARED: f64 = 0.981;
    pub const AVAILABILITY_THRESHOLD_DB: f64 = -75.0;
    pub const AVAILABILITY_LOS_PCT: f64 = 100.0;
    pub const AVAILABILITY_STATIC_PCT: f64 = 63.0;
    pub const AVAILABILITY_VISION_PCT: f64 = 53.0;
    pub const AVAILABILITY_BARE_PCT: f64 = 0.0;
    /// Read off a plot, so only good to about two points.
    pub const AVAILABILITY_TOLERANCE_PCT: f64 = 2.0;
    pub const VISION_OVER_BARE_MEAN_GAIN_DB: f64 = 10.0;
    pub const VISION_OVER_BARE_MAX_GAIN_DB: f64 = 17.0;
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageCurve {
    pub thresholds_db: Vec<f64>,
    pub ccdf: Vec<f64>,
}

/// Empirical `P(γ > t)` for each threshold (thresholds are sorted first).
pub fn ccdf(samples: &[f64], thresholds: &[f64]) -> Result<OutageCurve, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::InsufficientData("no power samples"));
    }
    let mut thresholds_db = thresholds.to_vec();
    thresholds_db.sort_by(f64::total_cmp);
    let ccdf = thresholds_db.iter().map(|&t| exceedance(samples, t)).collect();
    Ok(OutageCurve { thresholds_db, ccdf })
}

fn exceedance(samples: &[f64], t: f64) -> f64 {
    let above = samples.iter().filter(|&&g| g > t).count();
    above as f64 / samples.len() as f64
}

/// `P(γ <= γ_th)`.
pub fn outage_probability(samples: &[f64], gamma_th: f64) -> Result<f64, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::InsufficientData("no power samples"));
    }
    let below = samples.iter().filter(|&&g| g <= gamma_th).count();
    Ok(below as f64 / samples.len() as f64)
}

/// Link availability at one threshold, as a fraction.
pub fn availability_at(samples: &[f64], gamma_th: f64) -> Result<f64, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::InsufficientData("no power samples"));
    }
    Ok(exceedance(samples, gamma_th))
}

/// Integer-dB threshold grid covering every sample of every trace.
pub fn threshold_grid(traces: &[PowerTrace], step_db: f64) -> Vec<f64> {
    let all = traces.iter().flat_map(|t| t.samples.iter().map(|s| s.power_db));
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
    if !lo.is_finite() {
        return Vec::new();
    }
    let start = (lo / step_db).floor() as i64 - 1;
    let end = (hi / step_db).ceil() as i64 + 1;
    (start..=end).map(|k| k as f64 * step_db).collect()
}

fn aligned_pairs<'a>(a: &'a PowerTrace, b: &'a PowerTrace) -> Result<Vec<(f64, f64)>, AnalysisError> {
    if a.samples.len() != b.samples.len() {
        return Err(AnalysisError::Misaligned(format!(
            "{} has {} samples, {} has {}",
            a.mode,
            a.samples.len(),
            b.mode,
            b.samples.len()
        )));
    }
    if a.samples.is_empty() {
        return Err(AnalysisError::InsufficientData("empty traces"));
    }
    a.samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| {
            if x.position_index == y.position_index {
                Ok((x.power_db, y.power_db))
            } else {
                Err(AnalysisError::Misaligned(format!(
                    "position index {} vs {}",
                    x.position_index, y.position_index
                )))
            }
        })
        .collect()
}

/// Mean over positions of `a - b`, in dB.
pub fn average_gain(a: &PowerTrace, b: &PowerTrace) -> Result<f64, AnalysisError> {
    let pairs = aligned_pairs(a, b)?;
    Ok(pairs.iter().map(|(x, y)| x - y).sum::<f64>() / pairs.len() as f64)
}

pub fn max_gain(a: &PowerTrace, b: &PowerTrace) -> Result<f64, AnalysisError> {
    let pairs = aligned_pairs(a, b)?;
    Ok(pairs.iter().map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max))
}

/// Per-distance AoA estimates for one protractor-measured angle. Printed
/// error columns are optional; when present they are cross-checked.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AoATableRow {
    pub measured_deg: f64,
    pub est_2m: Option<f64>,
    pub est_3m: Option<f64>,
    pub est_4m: Option<f64>,
    pub printed_err_2m: Option<f64>,
    pub printed_err_3m: Option<f64>,
    pub printed_err_4m: Option<f64>,
}

pub const TABLE_DISTANCES_M: [f64; 3] = [2.0, 3.0, 4.0];

impl AoATableRow {
    /// `(distance_m, estimate, printed_error)` for each column.
    pub fn cells(&self) -> [(f64, Option<f64>, Option<f64>); 3] {
        [
            (2.0, self.est_2m, self.printed_err_2m),
            (3.0, self.est_3m, self.printed_err_3m),
            (4.0, self.est_4m, self.printed_err_4m),
        ]
    }

    pub fn error_at(&self, distance_m: f64) -> Option<f64> {
        self.cells()
            .into_iter()
            .find(|c| c.0 == distance_m)
            .and_then(|c| c.1)
            .map(|est| est - self.measured_deg)
    }
}

/// Angle-of-arrival measurements shipped with the crate.
pub const BUNDLED_AOA_TABLE_CSV: &str = include_str!("../data/aoa_measurements.csv");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub distance_m: f64,
    pub n: usize,
    pub mean_abs_err_deg: f64,
    pub max_abs_err_deg: f64,
    /// Measured angle at which the largest absolute error occurs.
    pub max_abs_err_at_deg: f64,
    /// `|error|` at measured 0°, if that row was tested at this distance.
    pub boresight_err_deg: Option<f64>,
}

pub fn aoa_error_stats(rows: &[AoATableRow]) -> Result<Vec<ErrorStats>, AnalysisError> {
    if rows.is_empty() {
        return Err(AnalysisError::InsufficientData("empty AoA table"));
    }
    // sort so that the result does not depend on row order
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| a.measured_deg.total_cmp(&b.measured_deg));

    let mut stats = Vec::new();
    for d in TABLE_DISTANCES_M {
        let errors: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.error_at(d).map(|e| (r.measured_deg, e)))
            .collect();
        if errors.is_empty() {
            continue;
        }
        let n = errors.len();
        let mean_abs_err_deg = errors.iter().map(|(_, e)| e.abs()).sum::<f64>() / n as f64;
        let (max_abs_err_at_deg, max_abs_err_deg) = errors
            .iter()
            .map(|&(m, e)| (m, e.abs()))
            .fold((f64::NAN, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
        let boresight_err_deg = errors.iter().find(|(m, _)| *m == 0.0).map(|(_, e)| e.abs());
        stats.push(ErrorStats {
            distance_m: d,
            n,
            mean_abs_err_deg,
            max_abs_err_deg,
            max_abs_err_at_deg,
            boresight_err_deg,
        });
    }
    if stats.is_empty() {
        return Err(AnalysisError::InsufficientData("no populated estimates"));
    }
    Ok(stats)
}

/// Tolerance for comparing recomputed errors with one-decimal printed values.
pub const PRINTED_ERROR_TOLERANCE_DEG: f64 = 0.05;
pub const BORESIGHT_ERROR_LIMIT_DEG: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub cells_checked: usize,
    pub cells_with_printed_error: usize,
    pub max_discrepancy_deg: f64,
    pub boresight_errors: BTreeMap<String, f64>,
}

impl ConsistencyReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "table consistency: {} populated cells, {} with printed errors, max discrepancy {:.4} deg (tolerance {PRINTED_ERROR_TOLERANCE_DEG})",
            self.cells_checked, self.cells_with_printed_error, self.max_discrepancy_deg
        );
        for (d, e) in &self.boresight_errors {
            let _ = writeln!(s, "boresight |error| at {d}: {e:.2} deg (limit {BORESIGHT_ERROR_LIMIT_DEG})");
        }
        s
    }
}

/// Recomputes every error as `estimated - measured`, checks it against the
/// printed error column, and checks the boresight row at each distance.
pub fn verify_table_consistency(rows: &[AoATableRow]) -> Result<ConsistencyReport, AnalysisError> {
    if rows.is_empty() {
        return Err(AnalysisError::InsufficientData("empty AoA table"));
    }
    let mut problems = Vec::new();
    let mut cells_checked = 0;
    let mut cells_with_printed_error = 0;
    let mut max_discrepancy_deg: f64 = 0.0;
    let mut boresight_errors = BTreeMap::new();

    for (i, row) in rows.iter().enumerate() {
        for (d, est, printed) in row.cells() {
            match (est, printed) {
                (Some(est), printed) => {
                    cells_checked += 1;
                    let err = est - row.measured_deg;
                    if let Some(p) = printed {
                        cells_with_printed_error += 1;
                        let diff = (err - p).abs();
                        max_discrepancy_deg = max_discrepancy_deg.max(diff);
                        if diff > PRINTED_ERROR_TOLERANCE_DEG {
                            problems.push(format!(
                                "row {} (measured {} deg, {d} m): recomputed error {err:.2} vs printed {p:.2}",
                                i + 1,
                                row.measured_deg
                            ));
                        }
                    }
                    if row.measured_deg == 0.0 {
                        boresight_errors.insert(format!("{d} m"), err.abs());
                        if err.abs() >= BORESIGHT_ERROR_LIMIT_DEG {
                            problems.push(format!(
                                "row {} (boresight, {d} m): |error| {:.2} is not below {BORESIGHT_ERROR_LIMIT_DEG} deg",
                                i + 1,
                                err.abs()
                            ));
                        }
                    }
                }
                (None, Some(p)) => problems.push(format!(
                    "row {} (measured {} deg, {d} m): printed error {p} without an estimate",
                    i + 1,
                    row.measured_deg
                )),
                (None, None) => {}
            }
        }
    }
    if !problems.is_empty() {
        return Err(AnalysisError::TableIntegrity(problems));
    }
    Ok(ConsistencyReport {
        cells_checked,
        cells_with_printed_error,
        max_discrepancy_deg,
        boresight_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PlanarPoint;
    use crate::simulator::{Mode, PowerSample};
    use proptest::prelude::*;

    fn trace(mode: Mode, powers: &[f64]) -> PowerTrace {
        PowerTrace {
            mode,
            samples: powers
                .iter()
                .enumerate()
                .map(|(i, &p)| PowerSample {
                    position_index: i,
                    rx_position: PlanarPoint::ORIGIN,
                    power_db: p,
                })
                .collect(),
        }
    }

    #[test]
    fn ccdf_examples() {
        let s = [-80.0, -70.0, -60.0];
        let c = ccdf(&s, &[-75.0, -100.0, 0.0]).unwrap();
        assert_eq!(c.thresholds_db, vec![-100.0, -75.0, 0.0]);
        assert_eq!(c.ccdf, vec![1.0, 2.0 / 3.0, 0.0]);
        assert!(ccdf(&[], &[0.0]).is_err());
        // a sample sitting exactly on the threshold is an outage, not an exceedance
        assert_eq!(ccdf(&s, &[-70.0]).unwrap().ccdf, vec![1.0 / 3.0]);
    }

    #[test]
    fn outage_examples() {
        let s = [-80.0, -70.0, -60.0];
        assert_eq!(outage_probability(&s, -75.0).unwrap(), 1.0 / 3.0);
        assert_eq!(outage_probability(&s, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(outage_probability(&s, -90.0).unwrap(), 0.0);
        assert!(outage_probability(&[], 0.0).is_err());
        assert_eq!(availability_at(&s, -75.0).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn gain_examples() {
        let a = trace(Mode::VisionGuided, &[-50.0, -55.0, -60.0]);
        assert_eq!(average_gain(&a, &a).unwrap(), 0.0);
        let b = trace(Mode::NlosBare, &[-53.0, -58.0, -63.0]);
        assert!((average_gain(&a, &b).unwrap() - 3.0).abs() < 1e-12);
        assert!((max_gain(&a, &b).unwrap() - 3.0).abs() < 1e-12);
        let short = trace(Mode::NlosBare, &[-53.0]);
        assert!(matches!(average_gain(&a, &short), Err(AnalysisError::Misaligned(_))));
        let mut shifted = b.clone();
        shifted.samples[1].position_index = 7;
        assert!(matches!(average_gain(&a, &shifted), Err(AnalysisError::Misaligned(_))));
    }

    #[test]
    fn threshold_grid_covers_samples() {
        let g = threshold_grid(&[trace(Mode::Los, &[-50.5, -42.2])], 1.0);
        assert_eq!(g.first(), Some(&-52.0));
        assert_eq!(g.last(), Some(&-41.0));
        assert!(threshold_grid(&[], 1.0).is_empty());
    }

    fn row(measured: f64, e2: Option<f64>, e3: Option<f64>, e4: Option<f64>) -> AoATableRow {
        AoATableRow {
            measured_deg: measured,
            est_2m: e2,
            est_3m: e3,
            est_4m: e4,
            ..Default::default()
        }
    }

    #[test]
    fn error_stats_small_table() {
        let rows = [
            row(-10.0, Some(-11.0), None, Some(-9.5)),
            row(0.0, Some(0.5), Some(-0.2), None),
            row(10.0, Some(13.0), Some(10.4), None),
        ];
        let stats = aoa_error_stats(&rows).unwrap();
        assert_eq!(stats.len(), 3);
        let s2 = stats[0];
        assert_eq!((s2.distance_m, s2.n), (2.0, 3));
        assert!((s2.mean_abs_err_deg - (1.0 + 0.5 + 3.0) / 3.0).abs() < 1e-12);
        assert!((s2.max_abs_err_deg - 3.0).abs() < 1e-12);
        assert_eq!(s2.max_abs_err_at_deg, 10.0);
        assert_eq!(s2.boresight_err_deg, Some(0.5));
        assert_eq!(stats[2].boresight_err_deg, None);
        assert!(aoa_error_stats(&[]).is_err());
        assert!(aoa_error_stats(&[row(5.0, None, None, None)]).is_err());
    }

    #[test]
    fn consistency_flags_bad_rows() {
        let mut good = row(0.0, Some(0.5), None, None);
        good.printed_err_2m = Some(0.5);
        assert_eq!(verify_table_consistency(&[good]).unwrap().cells_with_printed_error, 1);

        let mut bad = row(10.0, Some(13.3), None, None);
        bad.printed_err_2m = Some(2.3);
        let Err(AnalysisError::TableIntegrity(p)) = verify_table_consistency(&[good, bad]) else {
            panic!("expected integrity error");
        };
        assert_eq!(p.len(), 1);
        assert!(p[0].starts_with("row 2"));

        let off_boresight = row(0.0, Some(1.5), None, None);
        assert!(verify_table_consistency(&[off_boresight]).is_err());
        assert!(verify_table_consistency(&[]).is_err());
    }

    proptest! {
        #[test]
        fn outage_and_ccdf_partition(samples in proptest::collection::vec(-120.0..0.0f64, 1..200), t in -130.0..10.0f64) {
            let c = ccdf(&samples, &[t]).unwrap().ccdf[0];
            let o = outage_probability(&samples, t).unwrap();
            prop_assert_eq!(o + c, 1.0);
        }

        #[test]
        fn ccdf_nonincreasing_and_permutation_invariant(
            mut samples in proptest::collection::vec(-120.0..0.0f64, 1..100),
            thresholds in proptest::collection::vec(-130.0..10.0f64, 1..40),
        ) {
            let c = ccdf(&samples, &thresholds).unwrap();
            prop_assert!(c.ccdf.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(c.ccdf.iter().all(|p| (0.0..=1.0).contains(p)));
            samples.reverse();
            prop_assert_eq!(ccdf(&samples, &thresholds).unwrap(), c);
        }

        #[test]
        fn gain_antisymmetric(pairs in proptest::collection::vec((-100.0..0.0f64, -100.0..0.0f64), 1..30)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ta = trace(Mode::VisionGuided, &a);
            let tb = trace(Mode::NlosBare, &b);
            prop_assert!((average_gain(&ta, &tb).unwrap() + average_gain(&tb, &ta).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn stats_row_order_invariant(seed in 0u64..1000) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rows = crate::io::read_aoa_table(BUNDLED_AOA_TABLE_CSV.as_bytes()).unwrap();
            let before = aoa_error_stats(&rows).unwrap();
            rows.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(aoa_error_stats(&rows).unwrap(), before);
        }
    }
}
