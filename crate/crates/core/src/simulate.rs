//! Exact path simulation by the immigration–birth construction and by Ogata
//! thinning of the aggregate intensity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Baseline, Extension, KernelSequence};

/// Hard cap on the number of offspring generations.
pub const MAX_GENERATIONS: usize = 10_000;

/// Default expected residual point count tolerated by generation truncation.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-6;

/// Lookahead window of the thinning envelope.
const ENVELOPE_WINDOW: f64 = 0.5;

/// Remaining offspring mass below which a point stops exciting in thinning.
const EXHAUSTED_MASS: f64 = 1e-16;

/// A reproducible random stream: `(seed, index)` fully determines the draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        RngStream { seed, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub generation: u32,
}

/// Generation-labelled realization on `(0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub horizon: f64,
    pub events: Vec<Event>,
    /// Deepest generation the simulator was allowed to produce.
    pub truncation_generation: usize,
    /// Upper bound on the expected number of points in deeper generations.
    pub truncation_bound: f64,
}

/// Compact per-path statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogSummary {
    pub count: usize,
    pub generation_counts: Vec<usize>,
    pub truncation_generation: usize,
    pub truncation_bound: f64,
}

impl EventLog {
    pub fn count(&self) -> usize {
        self.events.len()
    }

    pub fn count_until(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }

    pub fn generation_counts(&self) -> Vec<usize> {
        let depth = self
            .events
            .iter()
            .map(|e| e.generation as usize + 1)
            .max()
            .unwrap_or(0);
        let mut counts = vec![0; depth];
        for e in &self.events {
            counts[e.generation as usize] += 1;
        }
        counts
    }

    pub fn summary(&self) -> LogSummary {
        LogSummary {
            count: self.count(),
            generation_counts: self.generation_counts(),
            truncation_generation: self.truncation_generation,
            truncation_bound: self.truncation_bound,
        }
    }

    /// Checks sortedness, support, ancestry and the reported truncation bound.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::Numerical(format!("event log invariant: {msg}")));
        for w in self.events.windows(2) {
            if w[0].time >= w[1].time {
                return bad(format!("times not strictly increasing at {}", w[1].time));
            }
        }
        if let Some(e) = self
            .events
            .iter()
            .find(|e| !(e.time > 0.0 && e.time <= self.horizon))
        {
            return bad(format!("time {} outside (0, {}]", e.time, self.horizon));
        }
        let mut first_seen: Vec<f64> = Vec::new();
        for e in &self.events {
            let g = e.generation as usize;
            if first_seen.len() <= g {
                first_seen.resize(g + 1, f64::INFINITY);
            }
            first_seen[g] = first_seen[g].min(e.time);
        }
        for g in 1..first_seen.len() {
            if first_seen[g].is_finite() && !(first_seen[g - 1] < first_seen[g]) {
                return bad(format!("generation {g} point without an earlier parent"));
            }
        }
        if self.events.iter().any(|e| e.generation as usize > self.truncation_generation) {
            return bad("generation beyond the truncation depth".into());
        }
        if !(self.truncation_bound < tol) {
            return bad(format!(
                "truncation bound {} not below {tol}",
                self.truncation_bound
            ));
        }
        Ok(())
    }

    /// CSV with header `time,generation` and 9-decimal times.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(24 * self.events.len() + 16);
        out.push_str("time,generation\n");
        for e in &self.events {
            out.push_str(&format!("{:.9},{}\n", e.time, e.generation));
        }
        out
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// Poisson points of the baseline on `(lo, hi]`.
///
/// Inhomogeneous baselines are thinned against their maximum level.
pub fn sample_immigrants<R: Rng + ?Sized>(
    baseline: &Baseline,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Vec<f64> {
    if hi <= lo {
        return Vec::new();
    }
    let top = baseline.max_level();
    let n = poisson_count(top * (hi - lo), rng);
    let mut times = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let t = hi - (hi - lo) * rng.random::<f64>();
        if baseline.is_constant() || rng.random::<f64>() * top < baseline.eval(t) {
            times.push(t);
        }
    }
    times.sort_by(f64::total_cmp);
    times
}

/// Grows offspring generations `1..=max_gen` from the given immigrants.
///
/// Children of a point at `τ` are confined to `(τ, end]`. Returns the times of
/// each generation, generation 0 first.
pub fn grow_generations<R: Rng + ?Sized>(
    seq: &KernelSequence,
    immigrants: Vec<f64>,
    end: f64,
    max_gen: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut generations = vec![immigrants];
    for n in 1..=max_gen {
        let Some(kernel) = seq.kernel_at(n) else { break };
        let parents = generations.last().unwrap();
        let mut children = Vec::new();
        for &tau in parents {
            let mass = kernel.integral_to(end - tau);
            for _ in 0..poisson_count(mass, rng) {
                let u: f64 = rng.random();
                let dt = kernel.inverse_integral(u * mass);
                children.push((tau + dt).min(end));
            }
        }
        if children.is_empty() {
            break;
        }
        generations.push(children);
    }
    generations
}

/// Smallest depth `M` with `Λ ρ^{M+1}/(1−ρ) < tol`, and the bound itself.
///
/// `Λ` is the expected number of immigrants. For null extensions generations
/// past the explicit list are empty, so the depth never exceeds it and the
/// bound is then exactly zero.
pub fn truncation_depth(seq: &KernelSequence, immigrants: f64, tol: f64) -> Result<(usize, f64)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "truncation tolerance must be positive, got {tol}"
        )));
    }
    let rho = seq.rho();
    let bound = |m: usize| immigrants * rho.powi(m as i32 + 1) / (1.0 - rho);
    let null_depth =
        (seq.extension() == Extension::Null).then_some(seq.explicit().len());
    let needed = if immigrants <= 0.0 || rho == 0.0 {
        0
    } else {
        let m = ((tol * (1.0 - rho) / immigrants).ln() / rho.ln()).floor() - 1.0;
        let mut m = m.max(0.0).min(1e9) as usize;
        while m > 0 && bound(m - 1) < tol {
            m -= 1;
        }
        while !(bound(m) < tol) {
            m += 1;
            if m > MAX_GENERATIONS && null_depth.is_none_or(|k| k > MAX_GENERATIONS) {
                break;
            }
        }
        m
    };
    match null_depth {
        Some(k) if k <= needed => Ok((k, 0.0)),
        _ if needed > MAX_GENERATIONS => Err(Error::TruncationCap {
            needed,
            cap: MAX_GENERATIONS,
            achievable_bound: bound(MAX_GENERATIONS),
        }),
        _ => Ok((needed, bound(needed))),
    }
}

fn flatten(generations: Vec<Vec<f64>>, lo: f64) -> Vec<Event> {
    let mut events: Vec<Event> = generations
        .into_iter()
        .enumerate()
        .flat_map(|(g, times)| {
            times.into_iter().map(move |time| Event {
                time,
                generation: g as u32,
            })
        })
        .filter(|e| e.time > lo)
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    events
}

/// Immigration–birth simulation on `(0, T]` with geometric generation
/// truncation at expected residual `tol`.
pub fn simulate_branching(
    seq: &KernelSequence,
    horizon: f64,
    stream: RngStream,
    tol: f64,
) -> Result<EventLog> {
    simulate_branching_with(seq, horizon, &mut stream.rng(), tol)
}

/// [`simulate_branching`] drawing from a caller-owned generator.
pub fn simulate_branching_with<R: Rng + ?Sized>(
    seq: &KernelSequence,
    horizon: f64,
    rng: &mut R,
    tol: f64,
) -> Result<EventLog> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let (depth, bound) = truncation_depth(seq, seq.baseline().integral_to(horizon), tol)?;
    let mut rng = rng;
    let immigrants = sample_immigrants(seq.baseline(), 0.0, horizon, &mut rng);
    let generations = grow_generations(seq, immigrants, horizon, depth, &mut rng);
    Ok(EventLog {
        horizon,
        events: flatten(generations, 0.0),
        truncation_generation: depth,
        truncation_bound: bound,
    })
}

/// Stationary-regime path on `(0, T]`.
///
/// Immigrants arrive at the constant rate `γ̄₀` on `(−warmup, T]` and their
/// descendants before time 0 are discarded from the returned log.
pub fn simulate_stationary(
    seq: &KernelSequence,
    horizon: f64,
    warmup: f64,
    stream: RngStream,
    tol: f64,
) -> Result<EventLog> {
    if !seq.baseline().is_constant() {
        return Err(Error::ConstantBaselineRequired);
    }
    let span = horizon + warmup;
    let (depth, bound) = truncation_depth(seq, seq.mean_rate() * span, tol)?;
    let mut rng = stream.rng();
    let immigrants = sample_immigrants(seq.baseline(), -warmup, horizon, &mut rng);
    let generations = grow_generations(seq, immigrants, horizon, depth, &mut rng);
    Ok(EventLog {
        horizon,
        events: flatten(generations, 0.0),
        truncation_generation: depth,
        truncation_bound: bound,
    })
}

struct Active {
    time: f64,
    generation: u32,
}

/// Ogata thinning of `γ₀(t) + Σ_{(τ,g), g<max_gen} γ_{g+1}(t−τ)`.
///
/// Each accepted point's generation is drawn from the per-generation
/// intensity proportions at its time. Points whose remaining offspring mass
/// drops below 1e-16 are retired from the intensity.
pub fn simulate_thinning(
    seq: &KernelSequence,
    horizon: f64,
    stream: RngStream,
    max_gen: usize,
) -> Result<EventLog> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    for (i, k) in seq.explicit().iter().enumerate() {
        if !k.has_envelope() && i < max_gen {
            return Err(Error::NoEnvelope { generation: i + 1 });
        }
    }
    let baseline = seq.baseline();
    let breakpoints: &[f64] = match baseline {
        Baseline::Constant { .. } => &[],
        Baseline::PiecewiseConstant { breakpoints, .. } => breakpoints,
    };
    let mut rng = stream.rng();
    let mut events = Vec::new();
    let mut active: Vec<Active> = Vec::new();
    let mut t = 0.0;
    while t < horizon {
        active.retain(|a| {
            seq.kernel_at(a.generation as usize + 1)
                .is_some_and(|k| k.tail_integral(t - a.time) >= EXHAUSTED_MASS)
        });
        let next_break = breakpoints
            .iter()
            .copied()
            .find(|b| *b > t)
            .unwrap_or(f64::INFINITY);
        let window_end = (t + ENVELOPE_WINDOW).min(next_break).min(horizon);
        let bound = baseline.eval(t)
            + active
                .iter()
                .map(|a| {
                    seq.kernel_at(a.generation as usize + 1)
                        .and_then(|k| k.envelope(t - a.time))
                        .unwrap_or(0.0)
                })
                .sum::<f64>();
        if bound <= 0.0 {
            t = window_end;
            continue;
        }
        let candidate = t + Exp::new(bound).unwrap().sample(&mut rng);
        if candidate > window_end {
            t = window_end;
            continue;
        }
        t = candidate;
        let base = baseline.eval(t);
        let parts: Vec<f64> = active
            .iter()
            .map(|a| {
                seq.kernel_at(a.generation as usize + 1)
                    .map_or(0.0, |k| k.eval(t - a.time))
            })
            .collect();
        let intensity = base + parts.iter().sum::<f64>();
        let u = rng.random::<f64>() * bound;
        if u >= intensity {
            continue;
        }
        let mut generation = 0;
        let mut acc = base;
        if u >= acc {
            for (a, p) in active.iter().zip(&parts) {
                acc += p;
                generation = a.generation + 1;
                if u < acc {
                    break;
                }
            }
        }
        events.push(Event { time: t, generation });
        if (generation as usize) < max_gen && seq.kernel_at(generation as usize + 1).is_some() {
            active.push(Active { time: t, generation });
        }
    }
    let immigrants = baseline.integral_to(horizon);
    let rho = seq.rho();
    let truncation_bound = match seq.extension() {
        Extension::Null if max_gen >= seq.explicit().len() => 0.0,
        _ if rho == 0.0 => 0.0,
        _ => immigrants * rho.powi(max_gen.min(i32::MAX as usize) as i32 + 1) / (1.0 - rho),
    };
    Ok(EventLog {
        horizon,
        events,
        truncation_generation: max_gen,
        truncation_bound,
    })
}

/// Runs `f` on streams `0..n_reps` of `seed` in parallel; output order follows
/// the stream index.
pub fn replicate_with<R, F>(seed: u64, n_reps: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(RngStream) -> R + Sync + Send,
{
    (0..n_reps as u64)
        .into_par_iter()
        .map(|i| f(RngStream::new(seed, i)))
        .collect()
}

/// Independent branching replications summarized per path.
pub fn replicate(
    seq: &KernelSequence,
    horizon: f64,
    seed: u64,
    n_reps: usize,
    tol: f64,
) -> Result<Vec<LogSummary>> {
    if n_reps == 0 {
        return Err(Error::InvalidParameter("at least one replication is required".into()));
    }
    replicate_with(seed, n_reps, |s| {
        simulate_branching(seq, horizon, s, tol).map(|log| log.summary())
    })
    .into_iter()
    .collect()
}
