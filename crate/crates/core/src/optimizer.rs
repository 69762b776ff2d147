//! Projected random ascent of the packing density on the boundary of the
//! Ryshkov set `{X : lambda(X) >= 1}`.

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::certify::gradient;
use crate::error::{Error, Result};
use crate::form::{density, PeriodicForm, SdmVector};
use crate::minima::{arithmetical_minimum_with, EnumerationLimits, MinimumResult};

/// Triples with `p <= lambda (1 + ACTIVE_GAP)` constrain the next move.
pub const ACTIVE_GAP: f64 = 1e-6;
/// A density gain must exceed this to count as an improvement.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-9;
/// Random directions tried per iteration, besides determinant descent.
pub const RANDOM_DIRECTIONS: usize = 4;
const PROJECTION_SWEEPS: usize = 64;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub step: f64,
    pub shrink: f64,
    pub iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { step: 0.05, shrink: 0.5, iters: 500, restarts: 20, seed: 0 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!("step must be positive, got {}", self.step)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidConfig(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if self.iters == 0 || self.restarts == 0 {
            return Err(Error::InvalidConfig("iters and restarts must be at least 1".into()));
        }
        Ok(())
    }
}

fn limits() -> EnumerationLimits {
    EnumerationLimits { near_miss_gap: ACTIVE_GAP, ..EnumerationLimits::default() }
}

/// Rescales `Q` by `1 / lambda(X)` so that `lambda = 1`.
pub fn normalize_to_ryshkov(x: &PeriodicForm) -> Result<PeriodicForm> {
    let min = arithmetical_minimum_with(x, &EnumerationLimits::without_near_misses())?;
    x.with_q(x.q().scaled(1.0 / min.lambda)?)
}

/// Density trace of one restart: the density after every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartTrace {
    pub restart: usize,
    pub densities: Vec<f64>,
    pub best_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub start_density: f64,
    pub best: PeriodicForm,
    pub best_density: f64,
    pub best_restart: usize,
    /// `best_density > start_density + IMPROVEMENT_THRESHOLD`.
    pub improved: bool,
    pub traces: Vec<RestartTrace>,
}

impl SearchOutcome {
    pub fn gain(&self) -> f64 {
        self.best_density - self.start_density
    }
}

struct State {
    form: PeriodicForm,
    density: f64,
    active: Vec<SdmVector>,
}

impl State {
    fn new(form: PeriodicForm) -> Result<Self> {
        let min = arithmetical_minimum_with(&form, &limits())?;
        Self::with_minimum(form, &min)
    }

    fn with_minimum(form: PeriodicForm, min: &MinimumResult) -> Result<Self> {
        let cutoff = min.lambda * (1.0 + ACTIVE_GAP);
        let active = min
            .triples
            .iter()
            .chain(&min.near_misses)
            .filter(|t| t.value <= cutoff)
            .map(|t| gradient(&form, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { density: density(&form, min.lambda), form, active })
    }
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize, m: usize) -> SdmVector {
    let mut sym = DMatrix::zeros(d, d);
    for r in 0..d {
        for c in r..d {
            let g: f64 = rng.sample(StandardNormal);
            sym[(r, c)] = g;
            sym[(c, r)] = g;
        }
    }
    let trans = DMatrix::from_fn(d, m - 1, |_, _| rng.sample(StandardNormal));
    SdmVector::new(sym, trans).expect("symmetric by construction")
}

/// Cyclic projection onto the halfspaces `<D, g> >= 0`, so that no active
/// minimum decreases to first order.
fn project(mut dir: SdmVector, active: &[SdmVector]) -> SdmVector {
    let norms: Vec<f64> = active.iter().map(|g| g.inner(g).expect("same shape")).collect();
    for _ in 0..PROJECTION_SWEEPS {
        let mut moved = false;
        for (g, nn) in active.iter().zip(&norms) {
            let ip = dir.inner(g).expect("same shape");
            if ip < 0.0 {
                dir = &dir - &(g * (ip / nn));
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    dir
}

/// The move along `dir`, renormalized onto the Ryshkov boundary. Scaling
/// `Q` scales every value `p_{i,j,v}` alike, so the minimum is reused.
fn try_step(state: &State, dir: &SdmVector, step: f64) -> Option<State> {
    let candidate = state.form.perturbed(dir, step).ok()?;
    let mut min = arithmetical_minimum_with(&candidate, &limits()).ok()?;
    let scale = 1.0 / min.lambda;
    let scaled = candidate.with_q(candidate.q().scaled(scale).ok()?).ok()?;
    for t in min.triples.iter_mut().chain(min.near_misses.iter_mut()) {
        t.value *= scale;
    }
    min.lambda = 1.0;
    State::with_minimum(scaled, &min).ok()
}

fn run_restart(start: &PeriodicForm, cfg: &SearchConfig, restart: usize) -> Result<(RestartTrace, PeriodicForm)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let (d, m) = (start.dim(), start.m());
    let mut state = State::new(start.clone())?;
    let mut step = cfg.step;
    let mut densities = Vec::with_capacity(cfg.iters);
    for _ in 0..cfg.iters {
        if step < MIN_STEP {
            break;
        }
        let descent = SdmVector::new(-state.form.q().inverse(), DMatrix::zeros(d, m - 1))?;
        let mut directions = vec![descent];
        directions.extend((0..RANDOM_DIRECTIONS).map(|_| random_direction(&mut rng, d, m)));
        let mut best: Option<State> = None;
        for dir in directions {
            let dir = project(dir, &state.active);
            let norm = dir.norm();
            if !(norm > 1e-12) {
                continue;
            }
            let dir = &dir * (1.0 / norm);
            if let Some(next) = try_step(&state, &dir, step) {
                if next.density > state.density && best.as_ref().is_none_or(|b| next.density > b.density) {
                    best = Some(next);
                }
            }
        }
        match best {
            Some(next) => {
                state = next;
                step = (step / cfg.shrink).min(cfg.step);
            }
            None => step *= cfg.shrink,
        }
        densities.push(state.density);
    }
    Ok((RestartTrace { restart, best_density: state.density, densities }, state.form))
}

/// Searches for a denser form near `X`. `X` is normalized to `lambda = 1`
/// first; the result is deterministic for a fixed seed.
pub fn local_improve(x: &PeriodicForm, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let start = normalize_to_ryshkov(x)?;
    let start_density = State::new(start.clone())?.density;
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(&start, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let mut best_restart = 0;
    for (k, (trace, _)) in runs.iter().enumerate() {
        if trace.best_density > runs[best_restart].0.best_density {
            best_restart = k;
        }
    }
    let best_density = runs[best_restart].0.best_density.max(start_density);
    let best = if runs[best_restart].0.best_density > start_density {
        runs[best_restart].1.clone()
    } else {
        start
    };
    let traces = runs.into_iter().map(|(t, _)| t).collect();
    Ok(SearchOutcome {
        start_density,
        best,
        best_density,
        best_restart,
        improved: best_density > start_density + IMPROVEMENT_THRESHOLD,
        traces,
    })
}
