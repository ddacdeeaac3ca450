//! Artificial Bee Colony minimizer over a box.
//!
//! Each iteration runs three phases over `num_bees` food sources:
//!
//! * employed: every source proposes one neighbour and keeps it if better;
//! * onlooker: `num_bees` roulette draws (probability proportional to
//!   fitness) each propose a neighbour of the drawn source;
//! * scout: sources whose stagnation counter reached the threshold are
//!   replaced by a uniform random point.
//!
//! Proposals within a phase are generated from the population as it stood
//! at the start of that phase and evaluated in parallel; acceptance is then
//! applied in index order. Every random draw comes from a ChaCha stream keyed
//! by (seed, phase, iteration, index), so results do not depend on the
//! number of worker threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct AbcParams {
    pub num_bees: usize,
    pub max_iterations: usize,
    #[serde(default = "default_threshold")]
    pub abandonment_threshold: usize,
    #[serde(default)]
    pub seed: u64,
    /// Perturb every coordinate instead of a single random one.
    #[serde(default)]
    pub mutate_all_dimensions: bool,
}

fn default_threshold() -> usize {
    100
}

impl Default for AbcParams {
    fn default() -> Self {
        AbcParams {
            num_bees: 200,
            max_iterations: 800,
            abandonment_threshold: default_threshold(),
            seed: 0,
            mutate_all_dimensions: false,
        }
    }
}

impl AbcParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_bees < 2 {
            return Err(Error::InvalidParams("num_bees must be at least 2".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParams("max_iterations must be at least 1".into()));
        }
        if self.abandonment_threshold < 1 {
            return Err(Error::InvalidParams(
                "abandonment_threshold must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Axis-aligned search box.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidBounds(
                "lower and upper bounds must have the same non-zero length".into(),
            ));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidBounds(format!(
                    "dimension {i}: [{lo}, {hi}] is not a valid interval"
                )));
            }
        }
        Ok(SearchBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|j| self.lower[j] <= x[j] && x[j] <= self.upper[j])
    }

    #[inline]
    pub fn clamp(&self, j: usize, v: f64) -> f64 {
        v.max(self.lower[j]).min(self.upper[j])
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| if lo < hi { rng.random_range(lo..=hi) } else { lo })
            .collect()
    }
}

/// One candidate solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoodSource {
    pub solution: Vec<f64>,
    pub cost: f64,
    pub fitness: f64,
    pub stagnation: usize,
}

impl FoodSource {
    fn new(solution: Vec<f64>, cost: f64) -> Result<Self> {
        Ok(FoodSource {
            solution,
            fitness: fitness(cost)?,
            cost,
            stagnation: 0,
        })
    }
}

/// Best-so-far and population mean after one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationStats {
    pub best_cost: f64,
    pub mean_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    pub best_solution: Vec<f64>,
    pub best_cost: f64,
    pub history: Vec<IterationStats>,
    /// How many times each source was abandoned by a scout.
    pub abandonments: Vec<usize>,
    pub evaluations: usize,
    pub final_population: Vec<FoodSource>,
}

/// Maps a non-negative cost to a fitness in (0, 1]; lower cost, higher fitness.
pub fn fitness(cost: f64) -> Result<f64> {
    if !cost.is_finite() || cost < 0.0 {
        return Err(Error::InvalidCost(cost));
    }
    Ok(1.0 / (1.0 + cost))
}

/// Draws index `i` with probability `fitnesses[i] / sum`.
pub fn roulette_select<R: Rng>(fitnesses: &[f64], rng: &mut R) -> usize {
    let total: f64 = fitnesses.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, &f) in fitnesses.iter().enumerate() {
        if target < f {
            return i;
        }
        target -= f;
    }
    // Rounding can leave a sliver past the last bucket.
    fitnesses.iter().rposition(|&f| f > 0.0).unwrap_or(fitnesses.len() - 1)
}

/// `x_i` with coordinate `j` moved to `x_ij + phi (x_ij - x_kj)`, clamped to
/// the box.
pub fn neighbor(x_i: &[f64], x_k: &[f64], j: usize, phi: f64, bounds: &SearchBox) -> Vec<f64> {
    let mut v = x_i.to_vec();
    v[j] = bounds.clamp(j, x_i[j] + phi * (x_i[j] - x_k[j]));
    v
}

/// Random neighbour of `sources[i]`: a partner `k != i` and a coordinate are
/// drawn uniformly, with `phi` uniform on `[-1, 1]`.
pub fn random_neighbor<R: Rng>(
    sources: &[Vec<f64>],
    i: usize,
    bounds: &SearchBox,
    all_dimensions: bool,
    rng: &mut R,
) -> Vec<f64> {
    let mut k = rng.random_range(0..sources.len() - 1);
    if k >= i {
        k += 1;
    }
    let (x_i, x_k) = (&sources[i], &sources[k]);
    if all_dimensions {
        (0..x_i.len())
            .map(|j| {
                let phi: f64 = rng.random_range(-1.0..=1.0);
                bounds.clamp(j, x_i[j] + phi * (x_i[j] - x_k[j]))
            })
            .collect()
    } else {
        let j = rng.random_range(0..x_i.len());
        let phi: f64 = rng.random_range(-1.0..=1.0);
        neighbor(x_i, x_k, j, phi, bounds)
    }
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Phase {
    Init = 1,
    Employed = 2,
    Onlooker = 3,
    Scout = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent ChaCha stream for one (domain, major, minor) slot of a run.
pub(crate) fn substream(seed: u64, domain: u64, major: u64, minor: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(splitmix64(splitmix64(splitmix64(domain) ^ major) ^ minor));
    rng
}

/// Minimizes `objective` over `bounds`.
///
/// The objective must be deterministic and return finite, non-negative
/// values; anything else aborts the run with [`Error::InvalidCost`].
pub fn optimize<F>(objective: F, bounds: &SearchBox, params: &AbcParams) -> Result<SolveResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    params.validate()?;
    let n = params.num_bees;
    let rng_for = |phase: Phase, iteration: usize, index: usize| {
        substream(params.seed, phase as u64, iteration as u64, index as u64)
    };
    let evaluate_all = |candidates: Vec<Vec<f64>>| -> Result<Vec<(Vec<f64>, f64)>> {
        candidates
            .into_par_iter()
            .map(|x| {
                let c = objective(&x);
                fitness(c)?;
                Ok((x, c))
            })
            .collect()
    };

    let initial: Vec<Vec<f64>> = (0..n)
        .map(|i| bounds.sample(&mut rng_for(Phase::Init, 0, i)))
        .collect();
    let mut evaluations = n;
    let mut sources: Vec<FoodSource> = evaluate_all(initial)?
        .into_iter()
        .map(|(x, c)| FoodSource::new(x, c))
        .collect::<Result<_>>()?;

    let mut best = sources[0].clone();
    let track_best = |sources: &[FoodSource], best: &mut FoodSource| {
        for s in sources {
            if s.cost < best.cost {
                *best = s.clone();
            }
        }
    };
    track_best(&sources, &mut best);

    let mut history = Vec::with_capacity(params.max_iterations);
    let mut abandonments = vec![0usize; n];

    // Greedy replacement shared by the employed and onlooker phases.
    let try_replace = |source: &mut FoodSource, (x, c): (Vec<f64>, f64)| -> Result<()> {
        if fitness(c)? > source.fitness {
            *source = FoodSource::new(x, c)?;
        } else {
            source.stagnation += 1;
        }
        Ok(())
    };

    for iteration in 0..params.max_iterations {
        // Employed bees.
        let snapshot: Vec<Vec<f64>> = sources.iter().map(|s| s.solution.clone()).collect();
        let proposals = (0..n)
            .map(|i| {
                let mut rng = rng_for(Phase::Employed, iteration, i);
                random_neighbor(&snapshot, i, bounds, params.mutate_all_dimensions, &mut rng)
            })
            .collect();
        evaluations += n;
        for (i, result) in evaluate_all(proposals)?.into_iter().enumerate() {
            try_replace(&mut sources[i], result)?;
        }
        track_best(&sources, &mut best);

        // Onlookers.
        let snapshot: Vec<Vec<f64>> = sources.iter().map(|s| s.solution.clone()).collect();
        let fits: Vec<f64> = sources.iter().map(|s| s.fitness).collect();
        let (picks, proposals): (Vec<usize>, Vec<Vec<f64>>) = (0..n)
            .map(|o| {
                let mut rng = rng_for(Phase::Onlooker, iteration, o);
                let i = roulette_select(&fits, &mut rng);
                (
                    i,
                    random_neighbor(&snapshot, i, bounds, params.mutate_all_dimensions, &mut rng),
                )
            })
            .unzip();
        evaluations += n;
        for (i, result) in picks.into_iter().zip(evaluate_all(proposals)?) {
            try_replace(&mut sources[i], result)?;
        }
        track_best(&sources, &mut best);

        // Scouts. Onlooker failures can push a counter past the threshold
        // within one iteration, hence `>=`.
        let exhausted: Vec<usize> = (0..n)
            .filter(|&i| sources[i].stagnation >= params.abandonment_threshold)
            .collect();
        let fresh = exhausted
            .iter()
            .map(|&i| bounds.sample(&mut rng_for(Phase::Scout, iteration, i)))
            .collect();
        evaluations += exhausted.len();
        for (&i, (x, c)) in exhausted.iter().zip(evaluate_all(fresh)?) {
            sources[i] = FoodSource::new(x, c)?;
            abandonments[i] += 1;
        }
        track_best(&sources, &mut best);

        let mean_cost = sources.iter().map(|s| s.cost).sum::<f64>() / n as f64;
        history.push(IterationStats {
            best_cost: best.cost,
            mean_cost,
        });
    }

    Ok(SolveResult {
        best_solution: best.solution,
        best_cost: best.cost,
        history,
        abandonments,
        evaluations,
        final_population: sources,
    })
}
