//! Band layout, ground-truth scenes and Nyquist-rate frame synthesis.
//!
//! The monitored band `[0, bandwidth)` is sampled as complex baseband at
//! `fs = bandwidth`. A frame holds `N` consecutive Nyquist samples and the
//! PSD lives on a `2N`-bin grid, bin `l` sitting at `l * bandwidth / 2N` Hz.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed;

/// One licensed channel of the monitored band.
#[derive(Debug, Clone, PartialEq)]
pub struct Subband {
    pub id: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    /// Grid bins owned by this subband.
    pub bins: Range<usize>,
}

/// Channel layout of the monitored band on a `2N`-bin frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanDoc", into = "PlanDoc")]
pub struct SubbandPlan {
    total_bandwidth_hz: f64,
    nyquist_n: usize,
    subbands: Vec<Subband>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubbandSpec {
    pub id: usize,
    pub low_hz: f64,
    pub high_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlanDoc {
    bandwidth_hz: f64,
    n: usize,
    subbands: Vec<SubbandSpec>,
}

impl TryFrom<PlanDoc> for SubbandPlan {
    type Error = crate::Error;

    fn try_from(doc: PlanDoc) -> Result<Self> {
        for (k, s) in doc.subbands.iter().enumerate() {
            if s.id != k {
                return Err(invalid(format!(
                    "subband ids must be 0..Q in order, found {} at {k}",
                    s.id
                )));
            }
        }
        let edges = doc
            .subbands
            .iter()
            .map(|s| (s.low_hz, s.high_hz))
            .collect::<Vec<_>>();
        SubbandPlan::new(doc.bandwidth_hz, doc.n, &edges)
    }
}

impl From<SubbandPlan> for PlanDoc {
    fn from(p: SubbandPlan) -> Self {
        PlanDoc {
            bandwidth_hz: p.total_bandwidth_hz,
            n: p.nyquist_n,
            subbands: p
                .subbands
                .iter()
                .map(|s| SubbandSpec {
                    id: s.id,
                    low_hz: s.low_hz,
                    high_hz: s.high_hz,
                })
                .collect(),
        }
    }
}

/// Subband edges of the reference layout, in MHz.
pub const REFERENCE_SUBBANDS_MHZ: [(f64, f64); 8] = [
    (46.0, 50.0),
    (56.0, 60.0),
    (141.0, 150.0),
    (161.0, 170.0),
    (231.0, 260.0),
    (381.0, 400.0),
    (421.0, 425.0),
    (441.0, 445.0),
];

pub const REFERENCE_BANDWIDTH_HZ: f64 = 500e6;

impl SubbandPlan {
    /// Builds a plan from `(low_hz, high_hz)` edges; ids follow list order.
    ///
    /// A subband owns the bins whose centre frequency lies in
    /// `[low, high)`. A band narrower than one bin owns the bin nearest its
    /// centre instead.
    pub fn new(total_bandwidth_hz: f64, nyquist_n: usize, edges: &[(f64, f64)]) -> Result<Self> {
        if !(total_bandwidth_hz > 0.0) || !total_bandwidth_hz.is_finite() {
            return Err(invalid("bandwidth must be positive and finite"));
        }
        if nyquist_n == 0 {
            return Err(invalid("N must be positive"));
        }
        let n_bins = 2 * nyquist_n;
        let bin_hz = total_bandwidth_hz / n_bins as f64;
        let mut subbands = Vec::with_capacity(edges.len());
        for (id, &(lo, hi)) in edges.iter().enumerate() {
            if !(lo >= 0.0 && lo < hi && hi <= total_bandwidth_hz) {
                return Err(invalid(format!(
                    "subband {id} [{lo}, {hi}) must satisfy 0 <= low < high <= bandwidth"
                )));
            }
            let first = (lo / bin_hz).ceil() as usize;
            let end = ((hi / bin_hz).ceil() as usize).min(n_bins);
            let bins = if first < end {
                first..end
            } else {
                let c = (((lo + hi) / 2.0) / bin_hz).round() as usize;
                let c = c.min(n_bins - 1);
                c..c + 1
            };
            subbands.push(Subband {
                id,
                low_hz: lo,
                high_hz: hi,
                bins,
            });
        }
        let mut order: Vec<usize> = (0..subbands.len()).collect();
        order.sort_by(|&a, &b| subbands[a].low_hz.total_cmp(&subbands[b].low_hz));
        for w in order.windows(2) {
            let (a, b) = (&subbands[w[0]], &subbands[w[1]]);
            if a.high_hz > b.low_hz {
                return Err(invalid(format!("subbands {} and {} overlap", a.id, b.id)));
            }
            if a.bins.end > b.bins.start {
                return Err(invalid(format!(
                    "subbands {} and {} share grid bins at N = {nyquist_n}",
                    a.id, b.id
                )));
            }
        }
        Ok(Self {
            total_bandwidth_hz,
            nyquist_n,
            subbands,
        })
    }

    pub fn total_bandwidth_hz(&self) -> f64 {
        self.total_bandwidth_hz
    }

    pub fn nyquist_n(&self) -> usize {
        self.nyquist_n
    }

    pub fn n_bins(&self) -> usize {
        2 * self.nyquist_n
    }

    pub fn subbands(&self) -> &[Subband] {
        &self.subbands
    }

    pub fn len(&self) -> usize {
        self.subbands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subbands.is_empty()
    }

    pub fn subband(&self, id: usize) -> Result<&Subband> {
        self.subbands
            .get(id)
            .ok_or_else(|| invalid(format!("unknown subband id {id} (plan has {})", self.len())))
    }

    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.total_bandwidth_hz / self.n_bins() as f64
    }

    /// Fraction of grid bins covered by the given subbands.
    pub fn occupancy(&self, ids: &[usize]) -> f64 {
        let covered: usize = ids
            .iter()
            .filter_map(|&id| self.subbands.get(id))
            .map(|s| s.bins.len())
            .sum();
        covered as f64 / self.n_bins() as f64
    }
}

/// The eight-channel 0–500 MHz layout used in the reference experiments,
/// mapped onto a `2N`-bin grid.
pub fn reference_plan(n: usize) -> Result<SubbandPlan> {
    let edges: Vec<(f64, f64)> = REFERENCE_SUBBANDS_MHZ
        .iter()
        .map(|&(lo, hi)| (lo * 1e6, hi * 1e6))
        .collect();
    SubbandPlan::new(REFERENCE_BANDWIDTH_HZ, n, &edges)
}

/// Ground truth for one sensing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneDoc", into = "SceneDoc")]
pub struct WidebandScene {
    pub plan: SubbandPlan,
    /// Sorted ids of the occupied subbands.
    pub active_ids: Vec<usize>,
    /// Length `2N`; zero outside active bins, sums to 1 when any band is active.
    pub true_psd: Vec<f64>,
    /// Per-frame signal-to-noise ratio; `+inf` disables noise.
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneDoc {
    bandwidth_hz: f64,
    n: usize,
    subbands: Vec<SubbandSpec>,
    active_ids: Vec<usize>,
    /// `null` means noise disabled.
    snr_db: Option<f64>,
    seed: u64,
    true_psd: Vec<f64>,
}

impl TryFrom<SceneDoc> for WidebandScene {
    type Error = crate::Error;

    fn try_from(doc: SceneDoc) -> Result<Self> {
        let plan = SubbandPlan::try_from(PlanDoc {
            bandwidth_hz: doc.bandwidth_hz,
            n: doc.n,
            subbands: doc.subbands,
        })?;
        let scene = WidebandScene {
            plan,
            active_ids: doc.active_ids,
            true_psd: doc.true_psd,
            snr_db: doc.snr_db.unwrap_or(f64::INFINITY),
            seed: doc.seed,
        };
        scene.validate()?;
        Ok(scene)
    }
}

impl From<WidebandScene> for SceneDoc {
    fn from(s: WidebandScene) -> Self {
        let plan = PlanDoc::from(s.plan);
        SceneDoc {
            bandwidth_hz: plan.bandwidth_hz,
            n: plan.n,
            subbands: plan.subbands,
            active_ids: s.active_ids,
            snr_db: s.snr_db.is_finite().then_some(s.snr_db),
            seed: s.seed,
            true_psd: s.true_psd,
        }
    }
}

impl WidebandScene {
    pub fn is_active(&self, id: usize) -> bool {
        self.active_ids.binary_search(&id).is_ok()
    }

    pub fn inactive_ids(&self) -> Vec<usize> {
        (0..self.plan.len())
            .filter(|&q| !self.is_active(q))
            .collect()
    }

    /// Noise variance per complex sample (`E|w|²`), zero when noise is off.
    ///
    /// The reference signal power is the actual per-sample signal power, or
    /// the unit-energy level when the scene is silent.
    pub fn noise_variance(&self) -> f64 {
        if self.snr_db == f64::INFINITY {
            return 0.0;
        }
        let energy: f64 = self.true_psd.iter().sum();
        let reference = if energy > 0.0 { energy } else { 1.0 };
        reference / self.plan.n_bins() as f64 * 10f64.powf(-self.snr_db / 10.0)
    }

    fn validate(&self) -> Result<()> {
        let n_bins = self.plan.n_bins();
        if self.true_psd.len() != n_bins {
            return Err(invalid(format!(
                "true_psd has {} bins, plan has {n_bins}",
                self.true_psd.len()
            )));
        }
        if self.active_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("active_ids must be strictly increasing"));
        }
        if let Some(&id) = self.active_ids.iter().find(|&&id| id >= self.plan.len()) {
            return Err(invalid(format!("active id {id} out of range")));
        }
        let mut owned = vec![false; n_bins];
        for &id in &self.active_ids {
            for b in self.plan.subbands[id].bins.clone() {
                owned[b] = true;
            }
        }
        for (b, &v) in self.true_psd.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "true_psd[{b}] = {v} is not a finite nonnegative value"
                )));
            }
            if v > 0.0 && !owned[b] {
                return Err(invalid(format!(
                    "true_psd[{b}] is nonzero outside active subbands"
                )));
            }
        }
        if self.snr_db.is_nan() {
            return Err(invalid("snr_db is NaN"));
        }
        Ok(())
    }
}

/// Draws `n_active` distinct subbands uniformly at random and gives each a
/// flat PSD level from `U[0.5, 1)`, then rescales so the PSD sums to one.
pub fn generate_scene(
    plan: &SubbandPlan,
    n_active: usize,
    snr_db: f64,
    seed: u64,
) -> Result<WidebandScene> {
    if n_active > plan.len() {
        return Err(invalid(format!(
            "n_active = {n_active} exceeds the {} subbands of the plan",
            plan.len()
        )));
    }
    if snr_db.is_nan() {
        return Err(invalid("snr_db is NaN"));
    }
    let mut rng = seed::rng(seed);
    let mut active_ids = rand::seq::index::sample(&mut rng, plan.len(), n_active).into_vec();
    active_ids.sort_unstable();
    let mut true_psd = vec![0.0; plan.n_bins()];
    for &id in &active_ids {
        let level: f64 = rng.random_range(0.5..1.0);
        for b in plan.subbands[id].bins.clone() {
            true_psd[b] = level;
        }
    }
    let total: f64 = true_psd.iter().sum();
    if total > 0.0 {
        true_psd.iter_mut().for_each(|v| *v /= total);
    }
    Ok(WidebandScene {
        plan: plan.clone(),
        active_ids,
        true_psd,
        snr_db,
        seed,
    })
}

/// One block of `N` Nyquist-rate samples.
#[derive(Debug, Clone, PartialEq)]
pub struct NyquistFrame {
    pub index: usize,
    pub samples: Vec<Complex64>,
}

impl AsRef<[Complex64]> for NyquistFrame {
    fn as_ref(&self) -> &[Complex64] {
        &self.samples
    }
}

/// Synthesizes `n_frames` independent frames of the scene.
///
/// Each occupied bin `l` contributes `sqrt(p_l / 2N) e^{iθ} e^{2πi l n / 2N}`
/// with a fresh uniform phase per frame, so the process is zero-mean and
/// wide-sense stationary with autocorrelation
/// `r(j) = (1/2N) Σ_l p_l e^{2πi l j / 2N}`. Complex white Gaussian noise of
/// variance [`WidebandScene::noise_variance`] is added on top.
pub fn synthesize_frames(
    scene: &WidebandScene,
    n_frames: usize,
    seed: u64,
) -> Result<Vec<NyquistFrame>> {
    if n_frames == 0 {
        return Err(invalid("n_frames must be at least 1"));
    }
    let n = scene.plan.nyquist_n();
    let n_bins = scene.plan.n_bins();
    let tones: Vec<(usize, f64)> = scene
        .true_psd
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(l, &p)| (l, (p / n_bins as f64).sqrt()))
        .collect();
    // twiddle[k] = e^{2πi k / 2N}
    let twiddle: Vec<Complex64> = (0..n_bins)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n_bins as f64))
        .collect();
    let noise_std = (scene.noise_variance() / 2.0).sqrt();
    let mut rng = seed::rng(seed);
    let mut frames = Vec::with_capacity(n_frames);
    for index in 0..n_frames {
        let mut samples = vec![Complex64::new(0.0, 0.0); n];
        for &(l, amp) in &tones {
            let theta: f64 = rng.random_range(0.0..2.0 * PI);
            let a = Complex64::from_polar(amp, theta);
            for (t, s) in samples.iter_mut().enumerate() {
                *s += a * twiddle[(l * t) % n_bins];
            }
        }
        if noise_std > 0.0 {
            for s in samples.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *s += Complex64::new(re * noise_std, im * noise_std);
            }
        }
        frames.push(NyquistFrame { index, samples });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_plan_layout() {
        let plan = reference_plan(128).unwrap();
        assert_eq!(plan.len(), 8);
        let fifth = &plan.subbands()[4];
        assert_eq!((fifth.low_hz, fifth.high_hz), (231e6, 260e6));
        assert_eq!(plan.n_bins(), 256);
        for s in plan.subbands() {
            assert!(!s.bins.is_empty());
            assert!(s.bins.end <= plan.n_bins());
        }
    }

    #[test]
    fn widest_five_bands_cover_fourteen_percent() {
        // 29 + 19 + 9 + 9 + 4 MHz out of 500 MHz
        let plan = reference_plan(1024).unwrap();
        let occ = plan.occupancy(&[2, 3, 4, 5, 0]);
        assert!((occ - 0.14).abs() < 0.005, "occupancy {occ}");
    }

    #[test]
    fn small_grid_still_gives_every_band_a_bin() {
        for n in [16, 32, 64] {
            let plan = reference_plan(n).unwrap();
            assert!(
                plan.subbands().iter().all(|s| !s.bins.is_empty()),
                "N = {n}"
            );
        }
    }

    #[test]
    fn overlapping_subbands_rejected() {
        assert!(SubbandPlan::new(100.0, 16, &[(0.0, 50.0), (40.0, 60.0)]).is_err());
        assert!(SubbandPlan::new(100.0, 16, &[(0.0, 120.0)]).is_err());
    }

    #[test]
    fn scene_edge_cases() {
        let plan = reference_plan(64).unwrap();
        let empty = generate_scene(&plan, 0, 10.0, 1).unwrap();
        assert!(empty.true_psd.iter().all(|&v| v == 0.0));

        let full = generate_scene(&plan, 8, 10.0, 1).unwrap();
        assert_eq!(full.active_ids, (0..8).collect::<Vec<_>>());
        for s in plan.subbands() {
            assert!(s.bins.clone().all(|b| full.true_psd[b] > 0.0));
        }
        let covered: usize = plan.subbands().iter().map(|s| s.bins.len()).sum();
        assert_eq!(full.true_psd.iter().filter(|&&v| v > 0.0).count(), covered);
        assert!((full.true_psd.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        assert!(generate_scene(&plan, 9, 10.0, 1).is_err());
    }

    #[test]
    fn seeds_pick_different_subsets() {
        // Two independent uniform 5-subsets of 8 coincide with probability 1/56.
        let plan = reference_plan(64).unwrap();
        let sets: Vec<_> = (0..200)
            .map(|s| generate_scene(&plan, 5, 10.0, s).unwrap().active_ids)
            .collect();
        let same = sets.windows(2).filter(|w| w[0] == w[1]).count();
        assert!(same <= 12, "{same} consecutive repeats out of 199");
        let distinct: std::collections::BTreeSet<_> = sets.iter().collect();
        assert!(distinct.len() > 40);
    }

    #[test]
    fn zero_scene_frames_are_pure_noise() {
        let plan = reference_plan(32).unwrap();
        let scene = generate_scene(&plan, 0, 0.0, 3).unwrap();
        let var = scene.noise_variance();
        assert!((var - 1.0 / 64.0).abs() < 1e-15);
        let frames = synthesize_frames(&scene, 2000, 9).unwrap();
        let power: f64 = frames
            .iter()
            .flat_map(|f| f.samples.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            / (2000.0 * 32.0);
        assert!((power / var - 1.0).abs() < 0.03, "power {power} vs {var}");
    }

    #[test]
    fn frames_are_deterministic() {
        let plan = reference_plan(32).unwrap();
        let scene = generate_scene(&plan, 5, 10.0, 3).unwrap();
        let a = synthesize_frames(&scene, 4, 11).unwrap();
        let b = synthesize_frames(&scene, 4, 11).unwrap();
        assert_eq!(a, b);
        assert!(synthesize_frames(&scene, 0, 11).is_err());
    }

    #[test]
    fn scene_json_roundtrip_and_keys() {
        let plan = reference_plan(32).unwrap();
        let scene = generate_scene(&plan, 5, f64::INFINITY, 3).unwrap();
        let text = serde_json::to_string(&scene).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "bandwidth_hz",
            "n",
            "subbands",
            "active_ids",
            "snr_db",
            "seed",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v["snr_db"].is_null());
        let back: WidebandScene = serde_json::from_str(&text).unwrap();
        assert_eq!(back, scene);
    }

    #[test]
    fn scene_json_rejects_psd_outside_active_bands() {
        let plan = reference_plan(32).unwrap();
        let scene = generate_scene(&plan, 1, 10.0, 3).unwrap();
        let mut v = serde_json::to_value(&scene).unwrap();
        let free = (0..64).find(|&b| scene.true_psd[b] == 0.0).unwrap();
        v["true_psd"][free] = serde_json::json!(0.5);
        assert!(serde_json::from_value::<WidebandScene>(v).is_err());
    }
}
