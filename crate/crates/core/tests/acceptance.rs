//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use greenlab::geometry::{Domain, SampleStrategy};
use greenlab::green_bounds::{disk_green_exact, subordinate_killed_green, MartinCase};
use greenlab::levy_model::{
    brownian_green, ladder_exponent, ladder_potential, potential_density, whole_space_green, ProcessSpec, Variant,
};
use greenlab::mc_engine::{default_bandwidth, SimScheme};
use greenlab::sampler::RngStream;
use greenlab::special_fn::{mittag_leffler_alt, mittag_leffler_inversion, mittag_leffler_series, ml_series_limit};
use greenlab::verify_harness::*;
use greenlab::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn config(spec: ProcessSpec, domain: Domain, xs: Vec<Vec<f64>>, ys: Vec<Vec<f64>>, n_paths: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        spec,
        domain,
        grid: Grid { xs, ys },
        n_paths,
        seed,
        scheme: SimScheme::default(),
        tolerances: Tolerances::default(),
        workers: 0,
    }
}

/// Fix the smoothing bandwidth at its value for the full-size run, so reduced-path
/// reruns use the same estimator.
fn pin_bandwidth(cfg: &mut ExperimentConfig, full_paths: u64) {
    cfg.tolerances.bandwidth = Some(default_bandwidth(cfg.spec.d, full_paths, cfg.domain.diameter()));
}

fn pts1(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|x| vec![*x]).collect()
}

fn pts2(v: &[[f64; 2]]) -> Vec<Vec<f64>> {
    v.iter().map(|p| p.to_vec()).collect()
}

// ---------------------------------------------------------------------------

fn c1() -> Result<Outcome> {
    let mut ml_err: f64 = 0.0;
    for k in 0..=300 {
        let t = k as f64 * 0.1;
        ml_err = ml_err.max((mittag_leffler_alt(1.0, t)?.value - (-t).exp()).abs());
    }
    let a_grid: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
    let t_grid = logspace(1e-3, 50.0, 20);
    let mut bounded = true;
    let mut monotone = true;
    for alpha in [0.5, 1.0, 1.5] {
        let mut prev_row: Option<Vec<f64>> = None;
        for &a in &a_grid {
            let spec = ProcessSpec::plain(1, alpha, a)?;
            let row = t_grid.iter().map(|&t| potential_density(&spec, t)).collect::<Result<Vec<_>>>()?;
            bounded &= row.iter().all(|u| *u <= 1.0 + 1e-12);
            monotone &= row.windows(2).all(|w| w[1] <= w[0] + 1e-12);
            if let Some(p) = &prev_row {
                monotone &= row.iter().zip(p).all(|(u, v)| *u <= v + 1e-12);
            }
            prev_row = Some(row);
        }
    }
    let mut overlap: f64 = 0.0;
    for beta in [0.25, 0.5, 0.75, 1.0] {
        let ts = ml_series_limit(beta);
        for k in 0..=10 {
            let t = ts * (0.6 + 0.035 * k as f64);
            let s = mittag_leffler_series(beta, t)?.value;
            let i = mittag_leffler_inversion(beta, t)?.value;
            overlap = overlap.max(rel(s, i));
        }
    }
    outcome(
        ml_err <= 1e-12 && bounded && monotone && overlap <= 1e-6,
        format!("max|M1-exp|={ml_err:.1e}, u<=1 {bounded}, monotone {monotone}, series/inversion {overlap:.1e}"),
    )
}

fn c2() -> Result<Outcome> {
    let mut chi_err: f64 = 0.0;
    for lam in logspace(1e-2, 1e3, 41) {
        chi_err = chi_err.max(rel(ladder_exponent(0.0, 1.0, lam)?, lam));
    }
    let xs = logspace(1e-3, 2.0, 15);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for a in [0.0, 0.5, 1.0] {
        for &x in &xs {
            let r = ladder_potential(a, 1.0, x)? / x;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    let c = lo.min(1.0 / hi);
    let mut small: f64 = 0.0;
    for a in [0.0, 0.5, 1.0] {
        small = small.max((ladder_potential(a, 1.0, 1e-4)? / 1e-4 - 1.0).abs());
    }
    outcome(
        chi_err <= 1e-8 && c > 0.0 && c.is_finite() && small <= 0.01,
        format!("chi0 rel err {chi_err:.1e}, V/x in [{lo:.4}, {hi:.4}] (c={c:.4}), |V(1e-4)/1e-4-1|={small:.1e}"),
    )
}

fn c3() -> Result<Outcome> {
    let bm = ProcessSpec::plain(3, 1.0, 0.0)?;
    let mut newton: f64 = 0.0;
    for r in [0.1, 1.0, 10.0] {
        newton = newton.max(rel(whole_space_green(&bm, r)?, 1.0 / (4.0 * PI * r)));
    }
    let top = ProcessSpec::plain(3, 1.0, 1.0)?;
    let mut ok = true;
    for r in logspace(0.05, 20.0, 10) {
        let gm = whole_space_green(&top, r)?;
        let upper = brownian_green(3, r)?;
        for a in [0.0, 0.5, 1.0] {
            let ga = whole_space_green(&ProcessSpec::plain(3, 1.0, a)?, r)?;
            let slack = 1e-8 * ga;
            ok &= gm <= ga + slack && ga <= upper + slack && ga <= 1.0 / r;
        }
    }
    outcome(newton <= 1e-6 && ok, format!("Newtonian rel err {newton:.1e}, sandwich holds {ok}"))
}

const DELTA_FLOOR: f64 = 1e-3;

fn c4() -> Result<Outcome> {
    let disk = Domain::unit_disk();
    let bm = ProcessSpec::plain(2, 1.0, 0.0)?;
    let pairs = [
        ([0.0, 0.0], [0.5, 0.0]),
        ([0.1, 0.2], [-0.3, 0.4]),
        ([0.6, 0.0], [0.0, -0.6]),
        ([0.8, 0.1], [0.7, -0.2]),
        ([-0.5, -0.5], [0.2, 0.3]),
        ([0.3, 0.3], [0.35, 0.25]),
        ([0.9, 0.0], [-0.9, 0.0]),
        ([0.0, 0.7], [0.1, 0.75]),
        ([-0.2, 0.1], [0.45, -0.6]),
        ([0.05, -0.85], [0.4, 0.1]),
    ];
    let mut green_err: f64 = 0.0;
    for (x, y) in &pairs {
        green_err = green_err.max(rel(subordinate_killed_green(&bm, &disk, x, y)?, disk_green_exact(x, y)?));
    }
    let mut rng = RngStream::new(4, 0);
    let mut scale_err: f64 = 0.0;
    for d in 1..=3usize {
        let dom = if d == 1 {
            Domain::interval(-1.0, 1.0)?
        } else {
            Domain::ball(vec![0.0; d], 1.0)?
        };
        for k in 0..1000 {
            let alpha = 0.3 + 1.6 * rng.open_uniform();
            let a = 2.0 * rng.open_uniform();
            let spec = ProcessSpec::plain(d, alpha, a)?;
            let lam = (4.0f64).powf(2.0 * rng.open_uniform() - 1.0);
            // rounding in R - |x| costs about eps R / delta in relative terms, so points
            // hugging the boundary are redrawn
            let mut draw = |strategy| -> Result<Vec<f64>> {
                loop {
                    let p = dom.sample_interior(&mut rng, strategy)?.coords;
                    if dom.dist_to_boundary(&p)? >= DELTA_FLOOR {
                        return Ok(p);
                    }
                }
            };
            let x = draw(SampleStrategy::Uniform)?;
            let y = draw(if k % 4 == 0 {
                SampleStrategy::BoundaryLayer(0.05)
            } else {
                SampleStrategy::Uniform
            })?;
            scale_err = scale_err.max(bound_scaling_defect(&spec, &dom, &x, &y, lam)?.0);
        }
    }
    outcome(
        green_err <= 1e-6 && scale_err <= 1e-12,
        format!("R(a=0) vs exact disk Green {green_err:.1e}, g scaling identity {scale_err:.1e} over 3000 draws with delta >= {DELTA_FLOOR:.0e}"),
    )
}

fn c5(n: u64, workers: usize) -> Result<(Outcome, String)> {
    let mut cfg = config(ProcessSpec::plain(1, 1.0, 0.0)?, Domain::interval(-1.0, 1.0)?, pts1(&[0.0]), vec![], n, 5);
    cfg.workers = workers;
    let rep = run_exit_time_check(&cfg)?;
    let r = &rep.rows[0];
    let json = serde_json::to_string(&rep).unwrap();
    Ok((
        Outcome {
            pass: rep.pass,
            detail: format!(
                "E tau(0) = {:.5} +- {:.5} (exact 0.5), half step {:.5}, change {:.2}%",
                r.estimate.mean,
                r.estimate.std_error,
                r.halved_step.mean,
                100.0 * r.step_change
            ),
        },
        json,
    ))
}

fn c6_configs(n: u64, workers: usize) -> Result<Vec<ExperimentConfig>> {
    let mut out = Vec::new();
    for a in [0.5, 1.0] {
        let mut cfg = config(
            ProcessSpec::plain(1, 1.0, a)?,
            Domain::interval(-1.0, 1.0)?,
            pts1(&[-0.8, -0.4, 0.0, 0.4, 0.8]),
            pts1(&[-0.695, -0.295, 0.105, 0.505, 0.905]),
            n,
            61,
        );
        cfg.workers = workers;
        out.push(cfg);
    }
    let mut disk = config(
        ProcessSpec::plain(2, 1.0, 1e-3)?,
        Domain::unit_disk(),
        pts2(&[[0.0, 0.0]]),
        pts2(&[[0.5, 0.0], [0.0, 0.4], [-0.6, 0.0], [0.3, -0.5], [-0.45, 0.45]]),
        n,
        62,
    );
    pin_bandwidth(&mut disk, 200_000);
    disk.workers = workers;
    out.push(disk);
    Ok(out)
}

fn c6(n: u64, workers: usize) -> Result<(Outcome, String)> {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut json = String::new();
    for cfg in c6_configs(n, workers)? {
        let rep = run_comparability(&cfg)?;
        pass &= rep.pass;
        if cfg.spec.d == 1 {
            parts.push(format!(
                "d=1 a={}: band [{:.3}, {:.3}] width change {:.1}%",
                cfg.spec.a,
                rep.ratio_min,
                rep.ratio_max,
                100.0 * rep.band_change
            ));
        } else {
            let dev = rep
                .pair_grid
                .iter()
                .map(|p| p.estimate.mean / p.reference.unwrap_or(f64::NAN))
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
            parts.push(format!(
                "disk a=1e-3: estimate/exact in [{:.4}, {:.4}], reference ok {:?}",
                dev.0, dev.1, rep.reference_ok
            ));
        }
        json.push_str(&serde_json::to_string(&rep).unwrap());
    }
    Ok((
        Outcome {
            pass,
            detail: parts.join("; "),
        },
        json,
    ))
}

fn c7(n: u64, workers: usize) -> Result<(Outcome, String)> {
    let mut cfg = config(
        ProcessSpec::plain(1, 1.0, 1.0)?,
        Domain::interval_union(vec![[-1.0, 0.0], [1.0, 2.0]])?,
        pts1(&[-0.75, -0.5, -0.25]),
        pts1(&[1.255, 1.505, 1.755]),
        n,
        71,
    );
    cfg.workers = workers;
    let rep = run_weight_scaling_check(&cfg, 0.5, 1.0)?;
    let json = serde_json::to_string(&rep).unwrap();
    Ok((
        Outcome {
            pass: rep.pass,
            detail: format!(
                "cross-component factor {:.3}, 99% CI [{:.3}, {:.3}], predicted {}",
                rep.factor, rep.factor_ci[0], rep.factor_ci[1], rep.predicted
            ),
        },
        json,
    ))
}

fn c8(n: u64, workers: usize) -> Result<(Outcome, String)> {
    let mut cfg = config(
        ProcessSpec::plain(2, 1.0, 1.0)?,
        Domain::unit_disk(),
        pts2(&[[-0.5, 0.0], [-0.3, 0.4], [-0.3, -0.4], [-0.7, 0.3], [-0.1, 0.0]]),
        pts2(&[[0.4, 0.0], [0.3, 0.4], [0.3, -0.4], [0.7, -0.2], [0.6, 0.5]]),
        n,
        81,
    );
    pin_bandwidth(&mut cfg, 100_000);
    cfg.workers = workers;
    let rep = run_subordinate_lower_check(&cfg)?;
    let margin = rep
        .rows
        .iter()
        .map(|r| (r.estimate.mean + 3.0 * r.estimate.std_error) / r.r_value)
        .fold(f64::INFINITY, f64::min);
    let json = serde_json::to_string(&rep).unwrap();
    Ok((
        Outcome {
            pass: rep.pass,
            detail: format!(
                "min (est+3se)/R = {:.3} over {} pairs, log constant R {:.4}, MC {:.4} (half {:.4})",
                margin,
                rep.rows.len(),
                rep.r_log_constant,
                rep.mc_log_constant,
                rep.mc_log_constant_half
            ),
        },
        json,
    ))
}

fn c9() -> Result<Outcome> {
    let two = config(
        ProcessSpec::plain(3, 1.0, 0.5)?,
        Domain::ball_union(vec![vec![-2.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]], vec![1.0, 1.0])?,
        vec![],
        vec![],
        1000,
        91,
    );
    let four = config(
        ProcessSpec::plain(3, 1.0, 0.5)?,
        Domain::ball_union(
            vec![
                vec![2.0, 0.0, 0.0],
                vec![-2.0, 0.0, 0.0],
                vec![0.0, 2.0, 0.0],
                vec![0.0, -2.0, 0.0],
            ],
            vec![1.0; 4],
        )?,
        vec![],
        vec![],
        1000,
        92,
    );
    let disk = config(ProcessSpec::plain(2, 1.0, 0.5)?, Domain::unit_disk(), vec![], vec![], 1000, 93);
    let r2 = run_3g_check(&two, 100_000)?;
    let r4 = run_3g_check(&four, 100_000)?;
    let rd = run_3g_check(&disk, 100_000)?;
    let min_hits = |r: &ThreeGReport| {
        r.case_counts
            .iter()
            .filter(|c| MultiplierCaseExt::listed(c.0))
            .map(|c| c.1)
            .min()
            .unwrap_or(0)
    };
    outcome(
        r2.pass && r4.pass && rd.pass,
        format!(
            "two balls sup {:.4} (half {:.4}); four balls sup {:.4} (half {:.4}), min case hits {}; disk sup {:.4} (half {:.4}); collapse err {:.1e}",
            r2.constant,
            r2.constant_half,
            r4.constant,
            r4.constant_half,
            min_hits(&r4),
            rd.constant,
            rd.constant_half,
            r2.collapse_max_err.unwrap_or(0.0).max(r4.collapse_max_err.unwrap_or(0.0))
        ),
    )
}

trait MultiplierCaseExt {
    fn listed(self) -> bool;
}

impl MultiplierCaseExt for greenlab::green_bounds::MultiplierCase {
    fn listed(self) -> bool {
        greenlab::green_bounds::MultiplierCase::LISTED.contains(&self)
    }
}

fn c10() -> Result<Outcome> {
    let deltas: Vec<f64> = (1..=12).map(|k| 0.5f64.powi(k)).collect();
    let union = Domain::ball_union(vec![vec![-2.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]], vec![1.0, 1.0])?;
    let xs = vec![
        vec![-2.0, 0.0, 0.0],
        vec![-2.3, 0.2, 0.1],
        vec![2.0, 0.0, 0.0],
        vec![2.4, 0.3, -0.2],
    ];
    let cfg = config(ProcessSpec::plain(3, 1.0, 0.5)?, union, xs, vec![], 1000, 10);
    let home = run_martin_limit_check(&cfg, &[-3.0, 0.0, 0.0], &deltas)?;
    let away = run_martin_limit_check(&cfg, &[2.0, 1.0, 0.0], &deltas)?;
    let ball = config(
        ProcessSpec::plain(3, 1.0, 1.0)?,
        Domain::ball(vec![0.0; 3], 1.0)?,
        vec![vec![0.0, 0.0, 0.0], vec![0.3, 0.1, 0.0], vec![-0.5, 0.2, 0.3]],
        vec![],
        1000,
        11,
    );
    let antipodal = run_martin_limit_check(&ball, &[-1.0, 0.0, 0.0], &deltas)?;
    let identity = home.rows[0].ratios.iter().all(|r| *r == 1.0);
    let away_home = home
        .rows
        .iter()
        .any(|r| r.case == MartinCase::AwayHome && r.units == -1);
    let home_away = away.rows.iter().any(|r| r.case == MartinCase::HomeAway);
    outcome(
        home.pass && away.pass && antipodal.pass && identity && away_home && home_away,
        format!(
            "bands [{:.3}, {:.3}], [{:.3e}, {:.3e}], ball [{:.3}, {:.3}]; a^-alpha branch selected {away_home}; x=x0 ratio 1 {identity}",
            home.band.min, home.band.max, away.band.min, away.band.max, antipodal.band.min, antipodal.band.max
        ),
    )
}

fn c11(n: u64, workers: usize) -> Result<(Outcome, String)> {
    let mut cfg = config(ProcessSpec::plain(2, 1.0, 1.0)?, Domain::unit_disk(), pts2(&[[0.0, 0.0]]), vec![], n, 111);
    cfg.workers = workers;
    let rep = run_poisson_check(&cfg, &[2.0, 4.0, 8.0])?;
    let json = serde_json::to_string(&rep).unwrap();
    Ok((
        Outcome {
            pass: rep.pass,
            detail: format!(
                "slope {:.3} (target {}), jump-exit fraction {:.3}, upper-form ratios [{:.4}, {:.4}]",
                rep.slope, rep.target_slope, rep.jump_exit_fraction, rep.band.min, rep.band.max
            ),
        },
        json,
    ))
}

fn c12(n: u64, workers: usize) -> Result<(Outcome, String)> {
    let mut cfg = config(
        ProcessSpec::plain(2, 1.0, 1.0)?,
        Domain::unit_disk(),
        pts2(&[[0.8, 0.0], [0.95, 0.0]]),
        vec![],
        n,
        121,
    );
    cfg.workers = workers;
    let rep = run_survival_check(&cfg, &[0.25, 1.0, 4.0])?;
    let json = serde_json::to_string(&rep).unwrap();
    Ok((
        Outcome {
            pass: rep.pass,
            detail: format!(
                "sup P(tau>t)(t+sqrt t)/delta = {:.4} (half sample {:.4}), monotone {}",
                rep.constant, rep.constant_half, rep.monotone
            ),
        },
        json,
    ))
}

fn c13() -> Result<Outcome> {
    let rep = run_capacity_check(&[0.5, 0.25, 0.1, 0.05])?;
    let tol = rep.rows.iter().map(|r| r.tolerance_change).fold(0.0, f64::max);
    outcome(
        rep.pass,
        format!("Cap*log(1/r) in [{:.6}, {:.6}], tolerance change {tol:.1e}", rep.band.min, rep.band.max),
    )
}

fn c14(n_ks: u64, n_green: u64, workers: usize) -> Result<(Outcome, String)> {
    let base = ProcessSpec::plain(2, 1.0, 1.0)?;
    let mut ks_cfg = config(base, Domain::unit_disk(), pts2(&[[0.3, 0.0]]), vec![], n_ks, 141);
    ks_cfg.workers = workers;
    let rel0 = run_variant_identity_check(&ks_cfg, Variant::Relativistic { m: 0.0 })?;
    let trunc_inf = run_variant_identity_check(&ks_cfg, Variant::Truncated { lambda: f64::INFINITY })?;
    let mut g_cfg = config(
        base,
        Domain::unit_disk(),
        pts2(&[[-0.4, 0.0]]),
        pts2(&[[0.3, 0.0], [0.1, 0.5], [0.1, -0.5], [0.5, 0.4], [0.6, -0.2]]),
        n_green,
        142,
    );
    pin_bandwidth(&mut g_cfg, 100_000);
    g_cfg.workers = workers;
    let rel1 = run_perturbation_check(&g_cfg, Variant::Relativistic { m: 1.0 })?;
    let trunc = run_perturbation_check(&g_cfg, Variant::Truncated { lambda: 0.5 })?;
    let gap_cfg = config(
        base.with_weight(1.0)?,
        Domain::interval_union(vec![[-1.0, 0.0], [1.5, 2.5]])?,
        pts1(&[-0.5]),
        pts1(&[2.0]),
        1000,
        143,
    );
    let gap_cfg = ExperimentConfig {
        spec: ProcessSpec::plain(1, 1.0, 1.0)?,
        ..gap_cfg
    };
    let rejected = matches!(
        run_perturbation_check(&gap_cfg, Variant::Truncated { lambda: 0.5 }),
        Err(greenlab::Error::Config(_))
    );
    let mut json = String::new();
    for s in [
        serde_json::to_string(&rel0).unwrap(),
        serde_json::to_string(&trunc_inf).unwrap(),
        serde_json::to_string(&rel1).unwrap(),
        serde_json::to_string(&trunc).unwrap(),
    ] {
        json.push_str(&s);
    }
    Ok((
        Outcome {
            pass: rel0.pass && trunc_inf.pass && rel1.pass && trunc.pass && rejected,
            detail: format!(
                "KS p: m=0 {:.3}, lambda=inf {:.3}; bands m=1 [{:.3}, {:.3}] shift {:.1}%, lambda=0.5 [{:.3}, {:.3}] shift {:.1}%; gap > lambda rejected {rejected}",
                rel0.ks.p_value,
                trunc_inf.ks.p_value,
                rel1.band.min,
                rel1.band.max,
                100.0 * rel1.band_change,
                trunc.band.min,
                trunc.band.max,
                100.0 * trunc.band_change
            ),
        },
        json,
    ))
}

/// Reports of the statistical criteria at reduced path counts under a given worker count.
fn statistical_reports(workers: usize) -> Result<Vec<String>> {
    Ok(vec![
        c5(4000, workers)?.1,
        c6(4000, workers)?.1,
        c7(4000, workers)?.1,
        c8(2000, workers)?.1,
        c11(20_000, workers)?.1,
        c12(4000, workers)?.1,
        c14(2000, 2000, workers)?.1,
    ])
}

fn c15() -> Result<Outcome> {
    let one = statistical_reports(1)?;
    let three = statistical_reports(3)?;
    let same = one.iter().zip(&three).filter(|(a, b)| a == b).count();
    outcome(
        same == one.len(),
        format!("{same}/{} report sets byte-identical between 1 and 3 workers", one.len()),
    )
}

fn main() {
    type Check = (u32, &'static str, f64, Box<dyn Fn() -> Result<Outcome>>);
    let checks: Vec<Check> = vec![
        (1, "special-function identities", 10.0, Box::new(c1)),
        (2, "ladder identities", 30.0, Box::new(c2)),
        (3, "whole-space Green function", 10.0, Box::new(c3)),
        (4, "exact references and g scaling", 60.0, Box::new(c4)),
        (5, "exit-time calibration", 300.0, Box::new(|| c5(200_000, 0).map(|r| r.0))),
        (6, "two-sided comparability", 1800.0, Box::new(|| c6(200_000, 0).map(|r| r.0))),
        (7, "cross-component weight scaling", 900.0, Box::new(|| c7(200_000, 0).map(|r| r.0))),
        (8, "subordinate killed dominance", 1200.0, Box::new(|| c8(100_000, 0).map(|r| r.0))),
        (9, "deterministic 3G", 120.0, Box::new(c9)),
        (10, "Martin limit", 1.0, Box::new(c10)),
        (11, "Poisson kernel tail", 600.0, Box::new(|| c11(500_000, 0).map(|r| r.0))),
        (12, "survival bound", 600.0, Box::new(|| c12(100_000, 0).map(|r| r.0))),
        (13, "capacity", 5.0, Box::new(c13)),
        (14, "perturbations", 1800.0, Box::new(|| c14(20_000, 100_000, 0).map(|r| r.0))),
        (15, "determinism across worker counts", f64::INFINITY, Box::new(c15)),
    ];
    let only: Option<Vec<u32>> = std::env::var("GREENLAB_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, budget, check) in &checks {
        if only.as_ref().is_some_and(|o| !o.contains(id)) {
            continue;
        }
        let start = Instant::now();
        let res = check();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match res {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = secs <= *budget;
        let ok = pass && in_time;
        if !ok {
            failed += 1;
        }
        let timing = if budget.is_finite() {
            format!("{secs:.1}s of {budget}s")
        } else {
            format!("{secs:.1}s")
        };
        println!(
            "criterion {id:>2} {}: {name}: {detail} [{timing}]",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
