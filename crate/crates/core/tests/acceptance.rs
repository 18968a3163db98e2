//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so that criteria execute sequentially and the wall-clock
//! limits are measured on an otherwise idle process.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, InverseGamma};

use lrnet::approximator::{
    build_hierarchical_approximator, build_holder_approximator, make_partitions, weight_w, HierarchicalComposition,
    TargetFunction,
};
use lrnet::bnn::{
    check_prior_lower_bound, run_adaptive_mcmc, run_mcmc, AdaptiveConfig, Dataset, DatasetMeta, Density, Init, McmcConfig,
    ModelKind, ModelSpec, PriorFamily, PriorSpec, SigmaPrior, WidthPrior,
};
use lrnet::experiments::{run_approx_sweep, run_concentration_sweep, ApproxSweepConfig, ConcentrationConfig};
use lrnet::gadgets::{build_hat, build_identity, build_mult, build_relu, build_square};
use lrnet::grid::GridSpec;
use lrnet::net::{param_stats, perturbation_bound, rescale, Architecture, DenseNetwork};

// Pinned tolerances.
const EXACT_TOL: f64 = 1e-12;
const GADGET_SLACK: f64 = 1e-12;
const PARAM_DRIFT_TOL: f64 = 1e-6;
const RESCALE_REL_TOL: f64 = 1e-9;
const UNITY_TOL: f64 = 1e-12;
const RATE_SLOPE_MAX: f64 = -3.5;
const REDUCTION_TOL: f64 = 1e-12;
const SPREAD_TOL: f64 = 1e-9;
const KS_MAX: f64 = 0.05;
const TV_MAX: f64 = 0.05;
const CONC_SLOPE_BAND: (f64, f64) = (-0.8, -0.1);

const NUS: [f64; 3] = [0.0, 0.01, 0.5];

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Verdict {
    Pass,
    Warn,
    Fail,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn pass_if(ok: bool, detail: String) -> Outcome {
    Outcome {
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn sup_on(net: &DenseNetwork, pts: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> f64 {
    let c = net.compile();
    pts.iter().map(|x| (c.eval_scalar(x) - f(x)).abs()).fold(0.0, f64::max)
}

fn drift(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi - lo) / hi
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn line_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn c1_gadget_exactness() -> Outcome {
    let line = GridSpec::cube(1, -10.0, 10.0, 10_000).points().unwrap();
    let hat_pts = GridSpec::cube(1, -1.0, 2.0, 10_000).points().unwrap();
    let hat = |x: &[f64]| {
        let t = x[0];
        if (0.0..0.5).contains(&t) {
            2.0 * t
        } else if (0.5..1.0).contains(&t) {
            2.0 * (1.0 - t)
        } else {
            0.0
        }
    };
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for nu in NUS {
        let t = Instant::now();
        worst = worst.max(sup_on(&build_identity(1, nu).unwrap(), &line, |x| x[0]));
        slowest = slowest.max(t.elapsed());
        let t = Instant::now();
        worst = worst.max(sup_on(&build_relu(1, nu).unwrap(), &line, |x| x[0].max(0.0)));
        slowest = slowest.max(t.elapsed());
        let t = Instant::now();
        worst = worst.max(sup_on(&build_hat(nu).unwrap(), &hat_pts, hat));
        slowest = slowest.max(t.elapsed());
    }
    pass_if(
        worst <= EXACT_TOL && slowest < Duration::from_secs(1),
        format!("max error {worst:.2e}, slowest check {slowest:.2?}"),
    )
}

fn c2_gadget_bounds() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    for a in [1.0, 2.0] {
        let line = GridSpec::cube(1, -2.0 * a, 2.0 * a, 10_001).points().unwrap();
        let square = GridSpec::cube(2, -a, a, 10_000).points().unwrap();
        for r in 3..=8 {
            let q = 0.25f64.powi(r);
            let e_sq = sup_on(&build_square(a, r as usize, 0.0).unwrap(), &line, |x| x[0] * x[0]);
            let e_mu = sup_on(&build_mult(a, r as usize, 0.0).unwrap(), &square, |x| x[0] * x[1]);
            let (b_sq, b_mu) = (4.0 * a * a * q, 2.0 * a * a * q);
            ok &= e_sq <= b_sq + GADGET_SLACK && e_mu <= b_mu + GADGET_SLACK;
            worst_ratio = worst_ratio.max(e_sq / b_sq).max(e_mu / b_mu);
        }
    }
    let el = t.elapsed();
    pass_if(
        ok && el < Duration::from_secs(30),
        format!("worst error/bound {worst_ratio:.6}, {} grids, {el:.2?}", 24),
    )
}

fn c3_bounded_parameters() -> Outcome {
    let sq: Vec<f64> = (3..=10).map(|r| param_stats(&build_square(1.0, r, 0.0).unwrap()).max_abs_param).collect();
    let mu: Vec<f64> = (3..=10).map(|r| param_stats(&build_mult(1.0, r, 0.0).unwrap()).max_abs_param).collect();
    let f = TargetFunction::builtin("sin", 1, 1.0, 2.0).unwrap();
    let ho: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&m| param_stats(&build_holder_approximator(&f, m, 0.0).unwrap()).max_abs_param)
        .collect();
    let (ds, dm, dh) = (drift(&sq), drift(&mu), drift(&ho));
    pass_if(
        ds <= PARAM_DRIFT_TOL && dm <= PARAM_DRIFT_TOL && dh <= PARAM_DRIFT_TOL,
        format!("drift square {ds:.1e} (B={}), mult {dm:.1e} (B={}), holder {dh:.1e} (B={})", sq[0], mu[0], ho[0]),
    )
}

fn random_net(rng: &mut ChaCha8Rng, d: usize, l: usize, r: usize, b: f64, nu: f64) -> DenseNetwork {
    let arch = Architecture::uniform(d, l, r, 1).unwrap();
    let theta: Vec<f64> = (0..arch.param_count()).map(|_| rng.random_range(-b..=b)).collect();
    DenseNetwork::from_flat(&arch, nu, &theta).unwrap()
}

fn c4_rescaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (d, l, r) = (rng.random_range(1..=3), rng.random_range(1..=4), rng.random_range(1..=8));
        let nu = [0.0, 0.1, 0.5][rng.random_range(0..3)];
        let net = random_net(&mut rng, d, l, r, 2.0, nu);
        let mut logs: Vec<f64> = (0..=l).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        logs.iter_mut().for_each(|v| *v -= mean);
        let mut zeta: Vec<f64> = logs.iter().map(|v| v.exp()).collect();
        let head: f64 = zeta[..l].iter().product();
        zeta[l] = 1.0 / head;
        let scaled = rescale(&net, &zeta).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (u, v) = (net.eval(&x).unwrap()[0], scaled.eval(&x).unwrap()[0]);
            worst = worst.max((u - v).abs() / u.abs().max(1.0));
        }
    }
    pass_if(worst <= RESCALE_REL_TOL, format!("max relative discrepancy {worst:.2e} over 100 networks"))
}

fn c5_perturbation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (a, b) = (1.0, 1.0);
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..100 {
        let delta = if i % 2 == 0 { 1e-3 } else { 1e-2 };
        let (d, l, r) = (rng.random_range(1..=3), rng.random_range(1..=4), rng.random_range(1..=8));
        let arch = Architecture::uniform(d, l, r, 1).unwrap();
        let t1: Vec<f64> = (0..arch.param_count()).map(|_| rng.random_range(-(b - delta)..=(b - delta))).collect();
        let t2: Vec<f64> = t1.iter().map(|v| v + if rng.random::<bool>() { delta } else { -delta }).collect();
        let (n1, n2) = (DenseNetwork::from_flat(&arch, 0.0, &t1).unwrap(), DenseNetwork::from_flat(&arch, 0.0, &t2).unwrap());
        let pts = GridSpec::cube(d, -a, a, 1000).points().unwrap();
        let diff = pts
            .iter()
            .map(|x| (n1.eval(x).unwrap()[0] - n2.eval(x).unwrap()[0]).abs())
            .fold(0.0, f64::max);
        let bound = perturbation_bound(l, r, b, d, a, delta).unwrap();
        ok &= diff <= bound;
        worst_ratio = worst_ratio.max(diff / bound);
    }
    pass_if(ok, format!("largest difference/bound {worst_ratio:.3e} over 100 pairs"))
}

fn c6_partition_of_unity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        for m in [2, 4, 8] {
            let p = make_partitions(1.0, d, m).unwrap();
            let parts: Vec<_> = (0..1usize << d).map(|k| p.shifted(k).unwrap()).collect();
            for _ in 0..1000 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let s: f64 = parts.iter().map(|q| weight_w(q, &x)).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
    }
    pass_if(worst <= UNITY_TOL, format!("max |sum - 1| = {worst:.2e}"))
}

fn c7_rate() -> Outcome {
    let t = Instant::now();
    let s = run_approx_sweep(&ApproxSweepConfig::default()).unwrap();
    let el = t.elapsed();
    let xs: Vec<f64> = s.rows.iter().map(|r| r.m as f64).collect();
    let ys: Vec<f64> = s.rows.iter().map(|r| r.sup_error).collect();
    let slope = line_slope(&xs, &ys);
    let dec = ys.windows(2).all(|w| w[1] < w[0]);
    pass_if(
        dec && slope <= RATE_SLOPE_MAX && el < Duration::from_secs(300),
        format!("errors {}, slope {slope:.3}, {el:.2?}", sci(&ys)),
    )
}

fn c8_hierarchical() -> Outcome {
    let g = TargetFunction::builtin("sin", 1, 1.0, 2.0).unwrap();
    let h1 = HierarchicalComposition::new(1, 1.0, 0.5, 4.0, vec![vec![g.clone()]]).unwrap();
    let n = 4u64.pow(10);
    let net = build_hierarchical_approximator(&h1, n, 0.0).unwrap();
    let flat = build_holder_approximator(&g.clone().with_domain(h1.node_domain()), HierarchicalComposition::node_m(n, &g), 0.0).unwrap();
    let pts = GridSpec::cube(1, -1.0, 1.0, 2000).points().unwrap();
    let (cn, cf) = (net.compile(), flat.compile());
    let gap = pts.iter().map(|x| (cn.eval_scalar(x) - cf.eval_scalar(x)).abs()).fold(0.0, f64::max);

    let sum = TargetFunction::builtin("linear", 2, 1.0, 3.0).unwrap();
    let sq = TargetFunction::builtin("square", 1, 1.0, 3.0).unwrap();
    let h2 = HierarchicalComposition::new(2, 1.0, 4.0, 4.0, vec![vec![sum], vec![sq]]).unwrap();
    let pts2 = GridSpec::cube(2, -1.0, 1.0 - 1e-9, 10_000).points().unwrap();
    let errs: Vec<f64> = [1_000_000_000u64, 100_000_000_000, 1_000_000_000_000]
        .iter()
        .map(|&n| sup_on(&build_hierarchical_approximator(&h2, n, 0.0).unwrap(), &pts2, |x| h2.eval(x)))
        .collect();
    let mono = errs.windows(2).all(|w| w[1] < w[0]);
    pass_if(gap <= REDUCTION_TOL && mono, format!("q=1 gap {gap:.1e}; two-node errors {}", sci(&errs)))
}

fn c9_priors() -> Outcome {
    let normal = check_prior_lower_bound(&PriorSpec::standard_normal(), 1.0, 100, 9).unwrap();
    let lap = check_prior_lower_bound(&PriorSpec::new(PriorFamily::Independent(Density::Laplace { loc: 0.0, scale: 1.0 })), 2.0, 100, 9).unwrap();
    let uni = check_prior_lower_bound(&PriorSpec::new(PriorFamily::Independent(Density::Uniform { lo: -1.0, hi: 1.0 })), 2.0, 100, 9).unwrap();
    let want_n = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let want_l = (-2.0f64).exp() / 2.0;
    let close = |got: f64, want: f64| (got - want).abs() <= 1e-12 * want;
    let ok = normal.passes
        && normal.relative_spread <= SPREAD_TOL
        && normal.deltas.iter().all(|d| close(d.1, want_n))
        && lap.passes
        && lap.relative_spread <= SPREAD_TOL
        && lap.deltas.iter().all(|d| close(d.1, want_l))
        && !uni.passes;
    pass_if(
        ok,
        format!(
            "normal delta {:.5} spread {:.1e}; laplace delta {:.5} spread {:.1e}; uniform kappa=2 {}",
            normal.deltas[0].1,
            normal.relative_spread,
            lap.deltas[0].1,
            lap.relative_spread,
            if uni.passes { "passes" } else { "fails" }
        ),
    )
}

fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn c10_samplers() -> Outcome {
    // (a) frozen zero network, inverse-gamma noise prior
    let t = Instant::now();
    let arch = Architecture::new(vec![1, 1, 1]).unwrap();
    let model = ModelSpec::new(ModelKind::Gaussian, 1.0, arch.clone(), 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 40;
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    let y: Vec<f64> = (0..n).map(|_| 0.7 * (rng.random::<f64>() - 0.5) * 3.0).collect();
    let data = Dataset::new(1.0, x, y.clone(), DatasetMeta { f0: "zero".into(), sigma0_sq: 0.0, seed: 10 }).unwrap();
    let (alpha, beta) = (2.0, 1.0);
    let prior = PriorSpec::standard_normal().with_sigma2(SigmaPrior::InverseGamma { shape: alpha, scale: beta });
    let burn = 2000;
    let cfg = McmcConfig {
        steps: 100_000 + burn,
        seed: 11,
        init: Init::Given { theta: vec![0.0; arch.param_count()], sigma2: Some(1.0) },
        burn_in: burn,
        freeze_theta: true,
        sigma2_step: 0.5,
        ..Default::default()
    };
    let chain = run_mcmc(&model, &prior, &data, &cfg).unwrap();
    let draws: Vec<f64> = chain.states.iter().filter(|s| s.step > burn).map(|s| s.sigma2.unwrap()).collect();
    let post = InverseGamma::new(alpha + n as f64 / 2.0, beta + y.iter().map(|v| v * v).sum::<f64>() / 2.0).unwrap();
    let ks = ks_distance(draws, |v| post.cdf(v));
    let ta = t.elapsed();

    // (b) flat likelihood, width moves only against the width prior
    let t = Instant::now();
    let r_max = 6;
    let wp = WidthPrior::new(2, r_max).unwrap();
    let prior = PriorSpec::standard_normal().with_width(wp);
    let model = ModelSpec::new(ModelKind::Gaussian, 1.0, Architecture::new(vec![1, 1, 1]).unwrap(), 0.0).unwrap();
    let steps = 100_000;
    let cfg = AdaptiveConfig {
        base: McmcConfig { steps, seed: 12, ..Default::default() },
        r_init: 1,
        r_max,
        width_move_prob: 1.0,
    };
    let chain = run_adaptive_mcmc(&model, &prior, &Dataset::empty(1.0), &cfg).unwrap();
    let mut hist = vec![0.0; r_max + 1];
    for s in &chain.states[1..] {
        hist[s.r] += 1.0 / steps as f64;
    }
    let c = 2f64.ln().powi(5);
    let z: f64 = (1..=r_max).map(|r| (-c * (r * r) as f64).exp()).sum();
    let tv = 0.5 * (1..=r_max).map(|r| (hist[r] - (-c * (r * r) as f64).exp() / z).abs()).sum::<f64>();
    let tb = t.elapsed();
    let limit = Duration::from_secs(120);
    pass_if(
        ks < KS_MAX && tv < TV_MAX && ta < limit && tb < limit,
        format!("(a) KS {ks:.4} in {ta:.2?}; (b) TV {tv:.4} in {tb:.2?}"),
    )
}

fn c11_concentration() -> Outcome {
    let t = Instant::now();
    let s = run_concentration_sweep(&ConcentrationConfig::default()).unwrap();
    let el = t.elapsed();
    let meds: Vec<f64> = s.medians.iter().map(|m| m.l2_median).collect();
    let ns: Vec<f64> = s.medians.iter().map(|m| m.n as f64).collect();
    let s2: Vec<f64> = s.medians.iter().filter_map(|m| m.sigma2_error).collect();
    let slope = line_slope(&ns, &meds);
    let mono = meds.windows(2).all(|w| w[1] < w[0]);
    let in_band = (CONC_SLOPE_BAND.0..=CONC_SLOPE_BAND.1).contains(&slope);
    let in_time = el < Duration::from_secs(20 * 60);
    let verdict = match (mono && in_time, in_band) {
        (true, true) => Verdict::Pass,
        (true, false) => Verdict::Warn,
        _ => Verdict::Fail,
    };
    Outcome {
        verdict,
        detail: format!("median L2 {meds:.4?}, slope {slope:.3}, median |s2 - s0^2| {s2:.4?}, {el:.2?}"),
    }
}

fn run_cli(bin: &Path, args: &[&str], out: &Path) -> Option<Vec<u8>> {
    let status = Command::new(bin).args(args).arg("--out").arg(out).status().ok()?;
    if !status.success() {
        return None;
    }
    std::fs::read(out).ok()
}

fn c12_determinism() -> Outcome {
    let bin = Path::new(env!("CARGO_BIN_EXE_lrnet"));
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["gadget-verify", "--gadget", "identity,hat,square,mult", "--r", "3,4,5", "--grid", "4000"],
        &["approx-sweep", "--m", "4,5,6", "--grid", "4000"],
        &["bnn-run", "--seed", "5", "--n", "100", "--steps", "3000", "--every", "100", "--adaptive"],
        &["concentration-sweep", "--seed", "21", "--n", "50,100,200", "--steps", "2000"],
    ];
    let mut failed = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let a = run_cli(bin, args, &dir.path().join(format!("{i}a.csv")));
        let b = run_cli(bin, args, &dir.path().join(format!("{i}b.csv")));
        match (a, b) {
            (Some(a), Some(b)) if a == b && !a.is_empty() => {}
            _ => failed.push(args[0]),
        }
    }
    pass_if(failed.is_empty(), format!("{} subcommands checked, mismatched: {failed:?}", runs.len()))
}

fn main() {
    // libtest-style listing requests from tooling get an empty answer
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("gadget exactness", c1_gadget_exactness),
        ("gadget error bounds", c2_gadget_bounds),
        ("bounded parameters", c3_bounded_parameters),
        ("re-scaling invariance", c4_rescaling),
        ("perturbation bound", c5_perturbation),
        ("partition of unity", c6_partition_of_unity),
        ("approximation rate", c7_rate),
        ("hierarchical reduction", c8_hierarchical),
        ("prior lower bounds", c9_priors),
        ("sampler oracles", c10_samplers),
        ("concentration signature", c11_concentration),
        ("CLI determinism", c12_determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        let tag = match o.verdict {
            Verdict::Pass => "PASS",
            Verdict::Warn => "WARN",
            Verdict::Fail => {
                failures += 1;
                "FAIL"
            }
        };
        println!("criterion {:>2} {name:<24} {tag}  {}", i + 1, o.detail);
    }
    println!("acceptance: {} of {} criteria without FAIL", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
