//! Differential verification and instrumented benchmarking of the engines.

use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::clusters;
use crate::error::{Result, TreeError};
use crate::gen::{generate_with, Shape};
use crate::newick::serialize_newick;
use crate::refine::{
    expected_clusters, fast_leaf_update_bound, refine, refine_basic, refine_fast, refine_oracle,
    EngineKind, RefinementReport,
};
use crate::tree::Tree;

/// Signature shared by all refinement engines.
pub type EngineFn = fn(&Tree, &Tree) -> Result<(Tree, RefinementReport)>;

/// The three shipped engines, by name.
pub fn standard_engines() -> Vec<(&'static str, EngineFn)> {
    vec![
        ("fast", refine_fast as EngineFn),
        ("basic", refine_basic as EngineFn),
        ("oracle", refine_oracle as EngineFn),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyConfig {
    pub trials: usize,
    pub max_n: usize,
    pub seed: u64,
}

/// A disagreement, replayable through `refine`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub trial: usize,
    pub t: String,
    pub source: String,
    pub detail: String,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trial {}: {}", self.trial, self.detail)?;
        writeln!(f, "{}", self.t)?;
        write!(f, "{}", self.source)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifySummary {
    pub trials: usize,
    pub failure: Option<Counterexample>,
}

impl VerifySummary {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Random `(t, source)` pair over a shared label set; `t` is contracted
/// more heavily so that there is something to refine.
pub fn random_instance<R: Rng>(rng: &mut R, max_n: usize) -> Result<(Tree, Tree)> {
    let n = if max_n <= 2 { max_n.max(1) } else { rng.gen_range(2..=max_n) };
    let t_shape = *Shape::ALL.choose(rng).expect("shapes");
    let s_shape = *Shape::ALL.choose(rng).expect("shapes");
    let t_contract = *[0.3, 0.6, 0.9, 1.0].choose(rng).expect("probs");
    let s_contract = *[0.0, 0.0, 0.2, 0.5].choose(rng).expect("probs");
    let t = generate_with(n, t_shape, t_contract, true, rng)?;
    let source = generate_with(n, s_shape, s_contract, true, rng)?;
    Ok((t, source))
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Checks every engine against the closed-form cluster set and the
/// instrumentation bounds on one instance. Returns a description of the
/// first problem found.
pub fn check_instance(t: &Tree, source: &Tree, engines: &[(&str, EngineFn)]) -> Result<Option<String>> {
    let expected = expected_clusters(t, source)?;
    let n = t.leaf_count();
    for (name, engine) in engines {
        let (out, report) = engine(t, source)?;
        if let Err(e) = out.validate() {
            return Ok(Some(format!("{name}: invalid output tree: {e}")));
        }
        let got = clusters(&out);
        if got != expected {
            return Ok(Some(format!(
                "{name}: {} clusters, expected {} ({} missing, {} unexpected)",
                got.len(),
                expected.len(),
                expected.difference_count(&got),
                got.difference_count(&expected)
            )));
        }
        if !report.amortized_bound_holds() {
            return Ok(Some(format!(
                "{name}: {} loop iterations exceed twice {} leaf updates",
                report.loop_iterations, report.leaf_updates
            )));
        }
        if report.engine == EngineKind::Fast && report.leaf_updates > fast_leaf_update_bound(n) {
            return Ok(Some(format!(
                "{name}: {} leaf updates exceed n*ceil(log2 n)+n = {}",
                report.leaf_updates,
                fast_leaf_update_bound(n)
            )));
        }
    }
    Ok(None)
}

pub fn verify(config: VerifyConfig) -> Result<VerifySummary> {
    verify_with(config, &standard_engines())
}

/// Runs `config.trials` random instances through `engines`, stopping at
/// the first disagreement.
pub fn verify_with(config: VerifyConfig, engines: &[(&str, EngineFn)]) -> Result<VerifySummary> {
    if config.trials == 0 || config.max_n == 0 {
        return Err(TreeError::InvalidSpec("trials and max-n must be positive".into()));
    }
    for trial in 0..config.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, trial));
        let (t, source) = random_instance(&mut rng, config.max_n)?;
        if let Some(detail) = check_instance(&t, &source, engines)? {
            return Ok(VerifySummary {
                trials: trial + 1,
                failure: Some(Counterexample {
                    trial,
                    t: serialize_newick(&t),
                    source: serialize_newick(&source),
                    detail,
                }),
            });
        }
    }
    Ok(VerifySummary {
        trials: config.trials,
        failure: None,
    })
}

pub const CSV_HEADER: &str = "n,engine,wall_time_s,leaf_updates,loop_iterations,bounds_ok";

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub engine: EngineKind,
    pub wall_time_s: f64,
    pub leaf_updates: u64,
    pub loop_iterations: u64,
    pub bounds_ok: bool,
}

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.6},{},{},{}",
            self.n, self.engine, self.wall_time_s, self.leaf_updates, self.loop_iterations, self.bounds_ok
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub engines: Vec<EngineKind>,
    pub seed: u64,
    /// Shape of the source tree.
    pub shape: Shape,
}

/// Workload for one benchmark size: a heavily contracted Yule tree as `t`
/// and a binary source tree of the requested shape.
pub fn bench_instance(n: usize, seed: u64, shape: Shape) -> Result<(Tree, Tree)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
    let t = generate_with(n, Shape::Yule, 0.8, true, &mut rng)?;
    let source = generate_with(n, shape, 0.0, shape == Shape::Yule || shape == Shape::Uniform, &mut rng)?;
    Ok((t, source))
}

/// Loop bound for every engine, leaf-update bound for the fast engine.
pub fn bounds_ok(n: usize, report: &RefinementReport) -> bool {
    report.amortized_bound_holds()
        && (report.engine != EngineKind::Fast || report.leaf_updates <= fast_leaf_update_bound(n))
}

pub fn bench(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(TreeError::InvalidSpec("sizes must be ascending".into()));
    }
    let mut rows = Vec::new();
    for &n in &config.sizes {
        let (t, source) = bench_instance(n, config.seed, config.shape)?;
        for &engine in &config.engines {
            let start = Instant::now();
            let (_, report) = refine(&t, &source, engine)?;
            let wall_time_s = start.elapsed().as_secs_f64();
            rows.push(BenchRow {
                n,
                engine,
                wall_time_s,
                leaf_updates: report.leaf_updates,
                loop_iterations: report.loop_iterations,
                bounds_ok: bounds_ok(n, &report),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_small_runs_pass() {
        let summary = verify(VerifyConfig {
            trials: 60,
            max_n: 24,
            seed: 5,
        })
        .unwrap();
        assert!(summary.passed(), "{:?}", summary.failure);
        assert_eq!(summary.trials, 60);
    }

    #[test]
    fn verify_tiny_instances() {
        for max_n in [1, 2] {
            let summary = verify(VerifyConfig {
                trials: 10,
                max_n,
                seed: 0,
            })
            .unwrap();
            assert!(summary.passed());
        }
    }

    fn drop_last_cluster(t: &Tree, source: &Tree) -> Result<(Tree, RefinementReport)> {
        let (out, report) = refine_fast(t, source)?;
        // Undo the refinement entirely whenever something was inserted.
        if report.inserted > 0 {
            return Ok((t.clone(), report));
        }
        Ok((out, report))
    }

    #[test]
    fn broken_engine_is_caught_with_a_replayable_counterexample() {
        let engines: Vec<(&str, EngineFn)> = vec![("broken", drop_last_cluster as EngineFn)];
        let summary = verify_with(
            VerifyConfig {
                trials: 200,
                max_n: 16,
                seed: 9,
            },
            &engines,
        )
        .unwrap();
        let failure = summary.failure.expect("broken engine must be caught");
        assert!(failure.detail.starts_with("broken:"));
        let t = crate::newick::parse_newick(&failure.t).unwrap();
        let source = crate::newick::parse_newick(&failure.source).unwrap();
        assert!(check_instance(&t, &source, &engines).unwrap().is_some());
        assert!(check_instance(&t, &source, &standard_engines()).unwrap().is_none());
    }

    #[test]
    fn verify_rejects_empty_runs() {
        assert!(verify(VerifyConfig { trials: 0, max_n: 4, seed: 0 }).is_err());
    }

    #[test]
    fn bench_rows_are_deterministic_apart_from_time() {
        let config = BenchConfig {
            sizes: vec![16, 64],
            engines: vec![EngineKind::Fast, EngineKind::Basic],
            seed: 3,
            shape: Shape::Yule,
        };
        let a = bench(&config).unwrap();
        let b = bench(&config).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.n, x.engine, x.leaf_updates, x.loop_iterations), (y.n, y.engine, y.leaf_updates, y.loop_iterations));
            assert!(x.bounds_ok);
        }
        assert_eq!(CSV_HEADER.split(',').count(), a[0].to_csv().split(',').count());
    }

    #[test]
    fn bench_requires_ascending_sizes() {
        let config = BenchConfig {
            sizes: vec![64, 16],
            engines: vec![EngineKind::Fast],
            seed: 3,
            shape: Shape::Yule,
        };
        assert!(bench(&config).is_err());
    }
}
