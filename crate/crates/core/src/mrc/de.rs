//! Differential evolution (rand/1/bin) over a Euclidean ball, maximizing an
//! integer-valued score.
//!
//! Candidates are compared by score, then by smaller Euclidean norm, then
//! lexicographically, which makes the search deterministic on the plateaus of
//! a piecewise-constant objective. Mutants leaving the ball are projected
//! radially onto its surface.

use std::cmp::Ordering;

use rand::Rng;

use crate::{l2_norm, SimRng};

#[derive(Debug, Clone, Copy)]
pub struct DeParams {
    pub population: usize,
    pub generations: usize,
    pub mutation: f64,
    pub crossover: f64,
    /// Stop a run once the best candidate has not changed for this many
    /// generations.
    pub stall_generations: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DeOutcome {
    pub best: Vec<f64>,
    pub score: u64,
    /// `(generation, best score)` after each generation.
    pub trace: Vec<(usize, u64)>,
}

/// Total order on `(point, score)` candidates; `Greater` means preferred.
pub fn preference(a: (&[f64], u64), b: (&[f64], u64)) -> Ordering {
    a.1.cmp(&b.1)
        .then_with(|| l2_norm(b.0).total_cmp(&l2_norm(a.0)))
        .then_with(|| {
            for (x, y) in a.0.iter().zip(b.0) {
                match y.total_cmp(x) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        })
}

fn project(u: &mut [f64], radius: f64) {
    let norm = l2_norm(u);
    if norm > radius {
        if radius == 0.0 {
            u.iter_mut().for_each(|v| *v = 0.0);
        } else {
            let s = radius / norm;
            u.iter_mut().for_each(|v| *v *= s);
        }
    }
}

fn uniform_in_ball(dim: usize, radius: f64, rng: &mut SimRng) -> Vec<f64> {
    // rejection from the enclosing cube; dim is small here
    loop {
        let u: Vec<f64> = (0..dim)
            .map(|_| radius * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        if l2_norm(&u) <= radius {
            return u;
        }
    }
}

/// One DE run. `evaluate` scores a whole generation at once so callers can
/// parallelize it.
pub fn run<E>(dim: usize, radius: f64, params: &DeParams, rng: &mut SimRng, mut evaluate: E) -> DeOutcome
where
    E: FnMut(&[Vec<f64>]) -> Vec<u64>,
{
    let np = params.population;
    assert!(np >= 4, "differential evolution needs at least 4 members");

    let mut pop: Vec<Vec<f64>> = (0..np).map(|_| uniform_in_ball(dim, radius, rng)).collect();
    let mut scores = evaluate(&pop);
    let mut best = best_index(&pop, &scores);
    let mut trace = Vec::with_capacity(params.generations);
    let mut stalled = 0;

    for generation in 0..params.generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let (r1, r2, r3) = distinct_three(np, i, rng);
                let forced = rng.random_range(0..dim.max(1));
                let mut trial = pop[i].clone();
                for j in 0..dim {
                    if j == forced || rng.random::<f64>() < params.crossover {
                        trial[j] = pop[r1][j] + params.mutation * (pop[r2][j] - pop[r3][j]);
                    }
                }
                project(&mut trial, radius);
                trial
            })
            .collect();
        let trial_scores = evaluate(&trials);
        for (i, (trial, score)) in trials.into_iter().zip(trial_scores).enumerate() {
            if preference((&trial, score), (&pop[i], scores[i])) != Ordering::Less {
                pop[i] = trial;
                scores[i] = score;
            }
        }
        let new_best = best_index(&pop, &scores);
        if pop[new_best] == pop[best] && scores[new_best] == scores[best] {
            stalled += 1;
        } else {
            stalled = 0;
        }
        best = new_best;
        trace.push((generation, scores[best]));
        if params.stall_generations.is_some_and(|s| stalled >= s) {
            break;
        }
    }

    DeOutcome {
        best: pop[best].clone(),
        score: scores[best],
        trace,
    }
}

fn best_index(pop: &[Vec<f64>], scores: &[u64]) -> usize {
    (1..pop.len()).fold(0, |b, i| {
        if preference((&pop[i], scores[i]), (&pop[b], scores[b])) == Ordering::Greater {
            i
        } else {
            b
        }
    })
}

fn distinct_three(np: usize, exclude: usize, rng: &mut SimRng) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let c = rng.random_range(0..np);
        if c != exclude && !taken.contains(&c) {
            return c;
        }
    };
    let a = pick(&[]);
    let b = pick(&[a]);
    let c = pick(&[a, b]);
    (a, b, c)
}
