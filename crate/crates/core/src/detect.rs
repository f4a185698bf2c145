//! Occupancy decisions and false-alarm / detection statistics.
//!
//! The ordering events compare recovered bins against each other only, so
//! they are invariant to positive rescaling of the estimate. All
//! comparisons use `|p̂|` (the unconstrained solver may return small
//! negative values) and strict inequalities, so ties count as no alarm and
//! no detection.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};
use crate::model::{SubbandPlan, WidebandScene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Occupied iff the subband's mean `|p̂|` exceeds `τ` times the mean
    /// over the whole grid.
    Threshold(f64),
    /// The `n_active` subbands with the largest mean `|p̂|` are occupied;
    /// ties are broken towards the lower id.
    Ordering { n_active: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyDecision {
    pub occupied: Vec<bool>,
    /// Mean `|p̂|` over each subband's bins.
    pub statistic: Vec<f64>,
}

fn check_len(p_hat: &[f64], plan: &SubbandPlan) -> Result<()> {
    if p_hat.len() != plan.n_bins() {
        return Err(shape(
            format!("estimate over {} bins", plan.n_bins()),
            p_hat.len(),
        ));
    }
    Ok(())
}

pub fn decide_occupancy(
    p_hat: &[f64],
    plan: &SubbandPlan,
    rule: DecisionRule,
) -> Result<OccupancyDecision> {
    check_len(p_hat, plan)?;
    let statistic: Vec<f64> = plan
        .subbands()
        .iter()
        .map(|s| s.bins.clone().map(|b| p_hat[b].abs()).sum::<f64>() / s.bins.len() as f64)
        .collect();
    let occupied = match rule {
        DecisionRule::Threshold(tau) => {
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(invalid(format!("threshold {tau} must be finite and >= 0")));
            }
            let global = p_hat.iter().map(|x| x.abs()).sum::<f64>() / p_hat.len() as f64;
            statistic.iter().map(|&s| s > tau * global).collect()
        }
        DecisionRule::Ordering { n_active } => {
            if n_active > plan.len() {
                return Err(invalid(format!(
                    "n_active = {n_active} exceeds {} subbands",
                    plan.len()
                )));
            }
            let mut order: Vec<usize> = (0..plan.len()).collect();
            order.sort_by(|&a, &b| statistic[b].total_cmp(&statistic[a]).then(a.cmp(&b)));
            let mut occ = vec![false; plan.len()];
            for &id in &order[..n_active] {
                occ[id] = true;
            }
            occ
        }
    };
    Ok(OccupancyDecision {
        occupied,
        statistic,
    })
}

/// Extremes of `|p̂|` over the bins of active and of inactive subbands.
struct Extremes {
    min_active: f64,
    max_inactive: f64,
}

fn extremes(p_hat: &[f64], scene: &WidebandScene) -> Extremes {
    let mut e = Extremes {
        min_active: f64::INFINITY,
        max_inactive: f64::NEG_INFINITY,
    };
    for s in scene.plan.subbands() {
        let active = scene.is_active(s.id);
        for b in s.bins.clone() {
            let v = p_hat[b].abs();
            if active {
                e.min_active = e.min_active.min(v);
            } else {
                e.max_inactive = e.max_inactive.max(v);
            }
        }
    }
    e
}

fn band_max(p_hat: &[f64], scene: &WidebandScene, q: usize) -> Result<f64> {
    let s = scene.plan.subband(q)?;
    Ok(s.bins
        .clone()
        .map(|b| p_hat[b].abs())
        .fold(f64::NEG_INFINITY, f64::max))
}

fn band_min(p_hat: &[f64], scene: &WidebandScene, q: usize) -> Result<f64> {
    let s = scene.plan.subband(q)?;
    Ok(s.bins
        .clone()
        .map(|b| p_hat[b].abs())
        .fold(f64::INFINITY, f64::min))
}

/// Some bin of the inactive subband `q` exceeds some bin of an active subband.
pub fn false_alarm_event(p_hat: &[f64], scene: &WidebandScene, q: usize) -> Result<bool> {
    check_len(p_hat, &scene.plan)?;
    if scene.is_active(q) {
        return Err(invalid(format!(
            "subband {q} is active; false alarms need an inactive subband"
        )));
    }
    Ok(band_max(p_hat, scene, q)? > extremes(p_hat, scene).min_active)
}

/// Every bin of the active subband `q` exceeds every bin of the inactive subbands.
pub fn detection_event(p_hat: &[f64], scene: &WidebandScene, q: usize) -> Result<bool> {
    check_len(p_hat, &scene.plan)?;
    if !scene.is_active(q) {
        return Err(invalid(format!(
            "subband {q} is inactive; detection needs an active subband"
        )));
    }
    Ok(band_min(p_hat, scene, q)? > extremes(p_hat, scene).max_inactive)
}

/// Per-subband events of one trial. Exactly one of the two entries of a
/// subband is `Some`, depending on whether it was active.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub false_alarm: Vec<Option<bool>>,
    pub detection: Vec<Option<bool>>,
}

pub fn evaluate_trial(p_hat: &[f64], scene: &WidebandScene) -> Result<TrialOutcome> {
    check_len(p_hat, &scene.plan)?;
    let ext = extremes(p_hat, scene);
    let q_count = scene.plan.len();
    let mut out = TrialOutcome {
        false_alarm: vec![None; q_count],
        detection: vec![None; q_count],
    };
    for q in 0..q_count {
        if scene.is_active(q) {
            out.detection[q] = Some(band_min(p_hat, scene, q)? > ext.max_inactive);
        } else {
            out.false_alarm[q] = Some(band_max(p_hat, scene, q)? > ext.min_active);
        }
    }
    Ok(out)
}

/// Wilson score interval at 95% confidence; `None` for an empty sample.
pub fn wilson_interval(successes: usize, n: usize) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    const Z: f64 = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Some(((centre - half).max(0.0), (centre + half).min(1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Trials where the subband was inactive; events are false alarms.
    Inactive,
    /// Trials where the subband was active; events are detections.
    Active,
}

/// Event count for one subband under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRate {
    pub condition_count: usize,
    pub event_count: usize,
    /// `event_count / condition_count`, or `None` when the condition never occurred.
    pub ratio: Option<f64>,
    /// `event_count / L` over all trials.
    pub ratio_over_all_trials: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl EventRate {
    fn new(condition_count: usize, event_count: usize, trials: usize) -> Self {
        let ci = wilson_interval(event_count, condition_count);
        EventRate {
            condition_count,
            event_count,
            ratio: (condition_count > 0).then(|| event_count as f64 / condition_count as f64),
            ratio_over_all_trials: event_count as f64 / trials as f64,
            ci_low: ci.map(|c| c.0),
            ci_high: ci.map(|c| c.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub trials: usize,
    /// Indexed by subband id.
    pub false_alarm: Vec<EventRate>,
    pub detection: Vec<EventRate>,
}

impl DetectionReport {
    pub fn p_f(&self) -> Vec<Option<f64>> {
        self.false_alarm.iter().map(|r| r.ratio).collect()
    }

    pub fn p_d(&self) -> Vec<Option<f64>> {
        self.detection.iter().map(|r| r.ratio).collect()
    }

    /// Rows `subband_id,condition,condition_count,event_count,ratio`; an
    /// undefined ratio is written as `nan`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(
            out,
            "subband_id,condition,condition_count,event_count,ratio"
        )?;
        for (cond, rates) in [("inactive", &self.false_alarm), ("active", &self.detection)] {
            for (id, r) in rates.iter().enumerate() {
                let ratio = r.ratio.map_or("nan".to_string(), |x| x.to_string());
                writeln!(
                    out,
                    "{id},{cond},{},{},{ratio}",
                    r.condition_count, r.event_count
                )?;
            }
        }
        Ok(())
    }
}

/// Counts events per subband. Denominators are the number of trials in
/// which the subband was inactive (false alarms) or active (detections);
/// the all-trials variant is reported alongside.
pub fn aggregate_report(outcomes: &[TrialOutcome], l_trials: usize) -> Result<DetectionReport> {
    if l_trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    if outcomes.len() != l_trials {
        return Err(shape(format!("{l_trials} trial outcomes"), outcomes.len()));
    }
    let q_count = outcomes[0].false_alarm.len();
    let mut counts = vec![[0usize; 4]; q_count];
    for o in outcomes {
        if o.false_alarm.len() != q_count || o.detection.len() != q_count {
            return Err(shape(
                format!("{q_count} subbands per outcome"),
                o.false_alarm.len(),
            ));
        }
        for q in 0..q_count {
            if let Some(e) = o.false_alarm[q] {
                counts[q][0] += 1;
                counts[q][1] += e as usize;
            }
            if let Some(e) = o.detection[q] {
                counts[q][2] += 1;
                counts[q][3] += e as usize;
            }
        }
    }
    Ok(DetectionReport {
        trials: l_trials,
        false_alarm: counts
            .iter()
            .map(|c| EventRate::new(c[0], c[1], l_trials))
            .collect(),
        detection: counts
            .iter()
            .map(|c| EventRate::new(c[2], c[3], l_trials))
            .collect(),
    })
}
