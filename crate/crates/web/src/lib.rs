//! WebAssembly bindings for the browser demo. Every export returns a JSON
//! string; errors come back as `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sibandit::bandit::{run_single_index, BanditConfig};
use sibandit::baseline::{run_smooth_bandit, SmoothBanditConfig};
use sibandit::env::{generate_environment, EnvironmentSpec, LabeledSample, LinkPreset};
use sibandit::mrc::MrcSearchConfig;
use sibandit::sireg::{fit_sireg, SiregConfig};
use sibandit::smooth::{estimate_smoothness, SmoothnessConfig};
use sibandit::trace::RegretTrace;
use sibandit::rng_from_seed;

/// Lighter search than the library default so the page stays responsive.
fn demo_mrc(seed: u64) -> MrcSearchConfig {
    MrcSearchConfig {
        max_generations: 60,
        restarts: 1,
        seed,
        ..MrcSearchConfig::default()
    }
}

fn to_json<T: Serialize>(r: sibandit::Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn environment(seed: u64, beta: f64) -> sibandit::Result<EnvironmentSpec> {
    generate_environment(seed, 4, 3, beta, LinkPreset::Simulation)
}

#[derive(Serialize)]
pub struct LinkFit {
    pub true_index: Vec<f64>,
    pub index: Vec<f64>,
    pub index_error: f64,
    /// `(z, y)` of up to 400 training points projected on the estimate.
    pub points: Vec<(f64, f64)>,
    /// `(z, fitted link, true link along the true index)` on a grid.
    pub curve: Vec<(f64, f64, f64)>,
}

fn link_fit(seed: u64, n: usize, beta: f64) -> sibandit::Result<LinkFit> {
    let env = environment(seed, beta)?;
    let mut rng = rng_from_seed(seed.wrapping_add(1));
    let samples: Vec<LabeledSample> = (0..n)
        .map(|_| {
            let x = env.sample_covariate(&mut rng)?;
            let y = env.draw_reward(0, &x, &mut rng);
            Ok(LabeledSample::new(x, y))
        })
        .collect::<sibandit::Result<_>>()?;
    let config = SiregConfig {
        seed,
        mrc: demo_mrc(seed),
        ..SiregConfig::new(beta)
    };
    let est = fit_sireg(&samples, &config)?;
    let v = est.index().v.clone();
    let project = |x: &[f64]| x.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
    let (lo, hi) = est.evaluable_region();
    let curve = (0..=120)
        .map(|i| {
            let z = lo + (hi - lo) * i as f64 / 120.0;
            (z, est.primary.link.value(z), env.links[0].eval(z))
        })
        .collect();
    Ok(LinkFit {
        true_index: env.indices[0].clone(),
        index_error: env.index_error(0, &v),
        points: samples.iter().take(400).map(|s| (project(&s.x), s.y)).collect(),
        curve,
        index: v,
    })
}

/// Fits the single-index model to `n` draws of arm 1 of a generated
/// environment (d = 4) and returns the fitted and true link.
#[wasm_bindgen]
pub fn fit_link(seed: u32, n: u32, beta: f64) -> String {
    to_json(link_fit(seed as u64, n as usize, beta))
}

#[derive(Serialize)]
pub struct Curve {
    pub name: &'static str,
    /// `(t, cumulative regret)`, thinned to about 200 points.
    pub points: Vec<(usize, f64)>,
    pub epoch_ends: Vec<usize>,
}

fn thin(name: &'static str, trace: &RegretTrace) -> Curve {
    let stride = (trace.len() / 200).max(1);
    let mut points: Vec<(usize, f64)> = vec![(0, 0.0)];
    points.extend(
        trace
            .rows
            .iter()
            .filter(|r| r.t % stride == 0 || r.t == trace.len())
            .map(|r| (r.t, r.cum_regret)),
    );
    Curve {
        name,
        points,
        epoch_ends: trace.epoch_ends.clone(),
    }
}

fn regret_curves(seed: u64, n: usize, beta: f64) -> sibandit::Result<Vec<Curve>> {
    let env = environment(seed, beta)?;
    let bandit = BanditConfig {
        mrc: demo_mrc(seed),
        ..BanditConfig::with_beta(beta)
    };
    let single = run_single_index(&env, n, &bandit, &mut rng_from_seed(seed))?;
    let smooth = run_smooth_bandit(&env, n, &SmoothBanditConfig::with_beta(beta), &mut rng_from_seed(seed))?;
    Ok(vec![thin("single_index", &single), thin("smooth_bandit", &smooth)])
}

/// Cumulative regret of the single-index policy and the binned comparator on
/// the same generated environment (d = 4, K = 3).
#[wasm_bindgen]
pub fn simulate_regret(seed: u32, n: u32, beta: f64) -> String {
    to_json(regret_curves(seed as u64, n as usize, beta))
}

/// Smoothness estimate for a generated environment with true exponent `beta`.
#[wasm_bindgen]
pub fn smoothness(seed: u32, n: u32, beta: f64, beta_lo: f64, beta_hi: f64) -> String {
    let run = || {
        let env = environment(seed as u64, beta)?;
        let config = SmoothnessConfig {
            mrc: demo_mrc(seed as u64),
            ..SmoothnessConfig::new(beta_lo, beta_hi)
        };
        estimate_smoothness(&env, n as usize, &config, &mut rng_from_seed(seed as u64), None)
    };
    to_json(run())
}
