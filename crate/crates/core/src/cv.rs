//! Meal-by-meal simulation of a CV-based canteen.
//!
//! The state is a ledger of training samples per dish type. Each meal:
//!
//! 1. new dish types arrive (`F` per meal, fractional parts carried in an
//!    accumulator) and are sampled by hand; on an empty menu the whole menu
//!    is new (cold start);
//! 2. up to `R` known types swap places between the menu and the off-menu
//!    pool, keeping their samples;
//! 3. every served dish may contribute a checkout photo (`p_auto`);
//! 4. accuracy is the dish-weighted mean of per-type recognition accuracy;
//! 5. erroneous records pay the billing correction.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::accuracy::{sna_accuracy_unchecked, EmhaParams, SnaParams};
use crate::cost::{
    billing_correction_cost, checkout_correction, nsorc_per_meal, CanteenProfile, CostBreakdown,
    CostItem, System,
};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rfid::{BILLING_ITEM, DATA_ITEM};

pub const SAMPLING_ITEM: &str = "sampling";

// absorbs rounding when fractional F accumulates to a whole type
const ACCUMULATOR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RngMode {
    /// Expected values everywhere; bit-identical replays.
    Deterministic,
    /// Random arrivals, rotations and photo yields from a seeded ChaCha8 stream.
    Seeded(u64),
}

/// Parameters the simulator needs beyond the canteen profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvModel {
    pub sna: SnaParams,
    pub p_auto: f64,
    pub correction: EmhaParams,
}

impl CvModel {
    pub fn from_params(model: &ModelParams, beta: f64) -> Self {
        Self {
            sna: model.sna(beta),
            p_auto: model.p_auto,
            correction: model.correction,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvState {
    /// Training samples per dish type id; ids are dense and never reused.
    pub sample_counts: Vec<f64>,
    /// Types on today's menu, oldest first.
    pub menu: VecDeque<usize>,
    /// Known types off the menu, next to return first.
    pub rotation_pool: VecDeque<usize>,
    pub new_type_accumulator: f64,
    pub rotation_accumulator: f64,
    pub meal_index: usize,
    mode: RngMode,
    rng: Option<ChaCha8Rng>,
}

impl CvState {
    pub fn new(mode: RngMode) -> Self {
        let rng = match mode {
            RngMode::Deterministic => None,
            RngMode::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Self {
            sample_counts: Vec::new(),
            menu: VecDeque::new(),
            rotation_pool: VecDeque::new(),
            new_type_accumulator: 0.0,
            rotation_accumulator: 0.0,
            meal_index: 0,
            mode,
            rng,
        }
    }

    pub fn mode(&self) -> RngMode {
        self.mode
    }

    fn spawn_type(&mut self, samples: f64) -> usize {
        self.sample_counts.push(samples);
        self.sample_counts.len() - 1
    }

    fn arrivals(&mut self, f_new: f64) -> usize {
        match self.rng.as_mut() {
            None => {
                self.new_type_accumulator += f_new;
                let whole = (self.new_type_accumulator + ACCUMULATOR_EPS).floor();
                self.new_type_accumulator = (self.new_type_accumulator - whole).max(0.0);
                whole as usize
            }
            Some(rng) => whole_plus_bernoulli(rng, f_new),
        }
    }

    fn rotations(&mut self, r_rotation: f64) -> usize {
        match self.rng.as_mut() {
            None => {
                self.rotation_accumulator += r_rotation;
                let whole = (self.rotation_accumulator + ACCUMULATOR_EPS).floor();
                self.rotation_accumulator = (self.rotation_accumulator - whole).max(0.0);
                whole as usize
            }
            Some(rng) => whole_plus_bernoulli(rng, r_rotation),
        }
    }

    /// Advance one meal in place.
    pub fn step(&mut self, profile: &CanteenProfile, model: &CvModel) -> MealRecord {
        self.meal_index += 1;
        let menu_size = profile.t_types as usize;
        let initial = f64::from(profile.samples_per_new_type);

        let mut new_types = 0usize;
        for _ in 0..self.arrivals(profile.f_new) {
            let id = self.spawn_type(initial);
            if self.menu.len() >= menu_size {
                if let Some(out) = self.menu.pop_front() {
                    self.rotation_pool.push_back(out);
                }
            }
            self.menu.push_back(id);
            new_types += 1;
        }
        while self.menu.len() < menu_size {
            let id = self.spawn_type(initial);
            self.menu.push_back(id);
            new_types += 1;
        }

        let wanted = self.rotations(profile.r_rotation);
        let swaps = wanted.min(self.rotation_pool.len()).min(self.menu.len());
        match self.rng.as_mut() {
            None => {
                for _ in 0..swaps {
                    let (Some(out), Some(back)) =
                        (self.menu.pop_front(), self.rotation_pool.pop_front())
                    else {
                        break;
                    };
                    self.menu.push_back(back);
                    self.rotation_pool.push_back(out);
                }
            }
            Some(rng) => {
                let outs = rand::seq::index::sample(rng, self.menu.len(), swaps);
                let ins = rand::seq::index::sample(rng, self.rotation_pool.len(), swaps);
                for (i, j) in outs.iter().zip(ins.iter()) {
                    std::mem::swap(&mut self.menu[i], &mut self.rotation_pool[j]);
                }
            }
        }

        let n = profile.n_per_type;
        for &id in &self.menu {
            let gained = match self.rng.as_mut() {
                None => f64::from(n) * model.p_auto,
                Some(rng) => Binomial::new(u64::from(n), model.p_auto)
                    .map(|d| d.sample(rng) as f64)
                    .unwrap_or(0.0),
            };
            self.sample_counts[id] += gained;
        }

        // every type serves n dishes, so the dish-weighted mean is the plain mean
        let accuracy = if self.menu.is_empty() {
            0.0
        } else {
            self.menu
                .iter()
                .map(|&id| sna_accuracy_unchecked(&model.sna, self.sample_counts[id]))
                .sum::<f64>()
                / self.menu.len() as f64
        };
        let sampling_emh =
            new_types as f64 * f64::from(profile.samples_per_new_type) * profile.sample_emh;
        let billing_emh =
            billing_correction_cost(accuracy, profile.dishes_per_meal(), &model.correction);
        MealRecord {
            meal_index: self.meal_index,
            menu: self.menu.iter().copied().collect(),
            accuracy,
            sampling_emh,
            billing_emh,
            total_emh: sampling_emh + billing_emh,
            new_types,
            rotated_types: swaps,
        }
    }
}

fn whole_plus_bernoulli(rng: &mut ChaCha8Rng, rate: f64) -> usize {
    let whole = rate.floor();
    let frac = rate - whole;
    whole as usize + usize::from(frac > 0.0 && rng.random::<f64>() < frac)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MealRecord {
    /// 1-based meal number.
    pub meal_index: usize,
    pub menu: Vec<usize>,
    pub accuracy: f64,
    pub sampling_emh: f64,
    pub billing_emh: f64,
    pub total_emh: f64,
    pub new_types: usize,
    pub rotated_types: usize,
}

pub const TRAJECTORY_HEADER: [&str; 7] = [
    "meal",
    "accuracy",
    "sampling_emh",
    "billing_emh",
    "total_emh",
    "new_types",
    "rotated_types",
];

/// Functional form of [`CvState::step`].
pub fn step_meal(
    state: &CvState,
    profile: &CanteenProfile,
    model: &CvModel,
) -> (CvState, MealRecord) {
    let mut next = state.clone();
    let record = next.step(profile, model);
    (next, record)
}

/// Simulate `n_meals` meals from a cold start.
pub fn run(
    profile: &CanteenProfile,
    model: &CvModel,
    n_meals: usize,
    mode: RngMode,
) -> Result<Vec<MealRecord>> {
    if n_meals < 1 {
        return Err(Error::Usage("simulation needs at least one meal".into()));
    }
    profile.validate()?;
    model.sna.validate()?;
    let mut state = CvState::new(mode);
    Ok((0..n_meals).map(|_| state.step(profile, model)).collect())
}

/// Ramping-up / stable period split of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodSummary {
    /// 1-based meal at which the stable period starts.
    pub rp_end_meal: usize,
    /// Total EMH of the meals before `rp_end_meal`.
    pub rp_total_emh: f64,
    pub sp_mean_accuracy: f64,
    pub sp_mean_emh: f64,
    pub sp_accuracy_stddev: f64,
    pub sp_mean_sampling_emh: f64,
    pub sp_mean_billing_emh: f64,
    /// False when the increment never dropped below the threshold.
    pub threshold_met: bool,
}

impl PeriodSummary {
    /// `key = value` block, one line per field.
    pub fn to_text(&self) -> String {
        format!(
            "rp_end_meal = {}\nrp_total_emh = {}\nsp_mean_accuracy = {}\nsp_mean_emh = {}\nsp_accuracy_stddev = {}\nthreshold_met = {}\n",
            self.rp_end_meal,
            self.rp_total_emh,
            self.sp_mean_accuracy,
            self.sp_mean_emh,
            self.sp_accuracy_stddev,
            self.threshold_met,
        )
    }
}

/// The ramping-up period ends at the first meal whose accuracy exceeds the
/// accuracy `window` meals earlier by less than `threshold`.
pub fn detect_periods(trajectory: &[MealRecord], window: usize, threshold: f64) -> Result<PeriodSummary> {
    if window < 1 {
        return Err(Error::Usage("window must be at least one meal".into()));
    }
    if trajectory.len() < window + 1 {
        return Err(Error::Usage(format!(
            "trajectory of {} meals is too short for a {window}-meal window",
            trajectory.len()
        )));
    }
    let found = (window..trajectory.len())
        .find(|&i| trajectory[i].accuracy - trajectory[i - window].accuracy < threshold);
    let start = found.unwrap_or(trajectory.len() - 1);
    let rp = &trajectory[..start];
    let sp = &trajectory[start..];
    let len = sp.len() as f64;
    let mean = |f: fn(&MealRecord) -> f64| sp.iter().map(f).sum::<f64>() / len;
    let sp_mean_accuracy = mean(|r| r.accuracy);
    let var = sp
        .iter()
        .map(|r| (r.accuracy - sp_mean_accuracy).powi(2))
        .sum::<f64>()
        / len;
    Ok(PeriodSummary {
        rp_end_meal: trajectory[start].meal_index,
        rp_total_emh: rp.iter().map(|r| r.total_emh).sum(),
        sp_mean_accuracy,
        sp_mean_emh: mean(|r| r.total_emh),
        sp_accuracy_stddev: var.sqrt(),
        sp_mean_sampling_emh: mean(|r| r.sampling_emh),
        sp_mean_billing_emh: mean(|r| r.billing_emh),
        threshold_met: found.is_some(),
    })
}

/// Stable-period behaviour of a deterministic run at a given learning coefficient.
pub fn steady_state(profile: &CanteenProfile, model: &ModelParams, beta: f64) -> Result<PeriodSummary> {
    let traj = run(
        profile,
        &CvModel::from_params(model, beta),
        model.sim_meals,
        RngMode::Deterministic,
    )?;
    detect_periods(&traj, model.rp_window, model.rp_threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub beta: f64,
    pub sp_accuracy: f64,
    pub residual: f64,
}

pub const BETA_RANGE: (f64, f64) = (1e-6, 10.0);

/// Learning coefficient whose deterministic stable-period accuracy equals
/// `target_sp_accuracy`, by bisection in log space.
pub fn calibrate_beta(
    profile: &CanteenProfile,
    model: &ModelParams,
    target_sp_accuracy: f64,
) -> Result<Calibration> {
    let u = model.sna_upper_bound;
    if !(target_sp_accuracy > 0.0 && target_sp_accuracy < u) {
        return Err(Error::Infeasible(format!(
            "stable-period accuracy {target_sp_accuracy} must lie strictly between 0 and U = {u}"
        )));
    }
    let sp_at = |beta: f64| steady_state(profile, model, beta).map(|s| s.sp_mean_accuracy);

    let (lo, hi) = (BETA_RANGE.0.ln(), BETA_RANGE.1.ln());
    let probes = 25;
    let mut prev = f64::NEG_INFINITY;
    for k in 0..=probes {
        let beta = (lo + (hi - lo) * k as f64 / probes as f64).exp();
        let acc = sp_at(beta)?;
        if acc + 1e-9 < prev {
            return Err(Error::Infeasible(format!(
                "stable-period accuracy is not monotone in beta near {beta}"
            )));
        }
        prev = acc;
    }
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (sp_at(a.exp())?, sp_at(b.exp())?);
    if !(fa <= target_sp_accuracy && target_sp_accuracy <= fb) {
        return Err(Error::Infeasible(format!(
            "target {target_sp_accuracy} outside reachable range [{fa}, {fb}]"
        )));
    }
    let mut best = (f64::INFINITY, a.exp(), fa);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let acc = sp_at(mid.exp())?;
        let residual = (acc - target_sp_accuracy).abs();
        if residual < best.0 {
            best = (residual, mid.exp(), acc);
        }
        if residual < 1e-9 || b - a < 1e-12 {
            break;
        }
        if acc < target_sp_accuracy {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Calibration {
        beta: best.1,
        sp_accuracy: best.2,
        residual: best.0,
    })
}

/// Learning coefficient from the model, calibrating against the
/// baseline-style stable-period target when none is fixed.
pub fn resolve_beta(profile: &CanteenProfile, model: &ModelParams) -> Result<f64> {
    match model.beta {
        Some(b) => Ok(b),
        None => calibrate_beta(profile, model, model.sp_target).map(|c| c.beta),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvMealCost {
    pub target: f64,
    pub sp_accuracy: f64,
    pub achieved_accuracy: f64,
    pub steady: PeriodSummary,
    pub breakdown: CostBreakdown,
}

/// Stable-period cost per meal of delivering `target` accuracy. Targets at or
/// below the stable accuracy are served at the stable accuracy; higher ones
/// are reached by data correction at checkout.
pub fn cv_meal_cost(
    profile: &CanteenProfile,
    model: &ModelParams,
    target: f64,
    beta: f64,
) -> Result<CvMealCost> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Usage(format!("target accuracy {target} outside [0, 1]")));
    }
    let steady = steady_state(profile, model, beta)?;
    cv_meal_cost_from(profile, model, target, steady)
}

pub fn cv_meal_cost_from(
    profile: &CanteenProfile,
    model: &ModelParams,
    target: f64,
    steady: PeriodSummary,
) -> Result<CvMealCost> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Usage(format!("target accuracy {target} outside [0, 1]")));
    }
    let sp = steady.sp_mean_accuracy;
    let achieved = target.max(sp);
    let corr = checkout_correction(sp, achieved, profile.dishes_per_meal(), &model.correction)?;
    let mut breakdown = CostBreakdown::default();
    breakdown.push(CostItem::staff(
        SAMPLING_ITEM,
        steady.sp_mean_sampling_emh,
        profile.wage,
    ));
    breakdown.push(CostItem::staff(BILLING_ITEM, corr.billing, profile.wage));
    breakdown.push(CostItem::staff(DATA_ITEM, corr.data, profile.wage));
    breakdown.extend(nsorc_per_meal(profile, System::Cv, &model.catalog)?);
    Ok(CvMealCost {
        target,
        sp_accuracy: sp,
        achieved_accuracy: achieved,
        steady,
        breakdown,
    })
}
