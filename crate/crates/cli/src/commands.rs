use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use greenlab::geometry::distance;
use greenlab::green_bounds::g_bound;
use greenlab::levy_model::{
    ladder_exponent, ladder_exponent_with, ladder_potential, ladder_potential_nodes, potential_density,
    potential_density_by_inversion, whole_space_green, whole_space_green_with, ProcessSpec, Variant,
};
use greenlab::mc_engine::{default_bandwidth, Simulator};
use greenlab::special_fn::{mittag_leffler_alt, QuadSpec, TALBOT_NODES};
use greenlab::verify_harness::*;
use serde::Serialize;

use crate::config::FileConfig;
use crate::svg::{render, Plot};
use crate::{
    fmt_f64, now, BandRecord, CliError, RunManifest, VerifySummary, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_PASS,
};

/// Flags shared by the file-driven subcommands.
#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub paths: Option<u64>,
    /// 0 = all cores.
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Theorem {
    #[value(name = "theorem1")]
    Theorem1,
    #[value(name = "scaling")]
    Scaling,
    #[value(name = "weight_scaling")]
    WeightScaling,
    #[value(name = "threeg")]
    ThreeG,
    #[value(name = "martin")]
    Martin,
    #[value(name = "subordinate")]
    Subordinate,
    #[value(name = "perturbation")]
    Perturbation,
    #[value(name = "variant_identity")]
    VariantIdentity,
    #[value(name = "capacity")]
    Capacity,
    #[value(name = "exit_time")]
    ExitTime,
    #[value(name = "survival")]
    Survival,
    #[value(name = "poisson")]
    Poisson,
}

impl Theorem {
    pub fn id(self) -> &'static str {
        match self {
            Theorem::Theorem1 => "theorem1",
            Theorem::Scaling => "scaling",
            Theorem::WeightScaling => "weight_scaling",
            Theorem::ThreeG => "threeg",
            Theorem::Martin => "martin",
            Theorem::Subordinate => "subordinate",
            Theorem::Perturbation => "perturbation",
            Theorem::VariantIdentity => "variant_identity",
            Theorem::Capacity => "capacity",
            Theorem::ExitTime => "exit_time",
            Theorem::Survival => "survival",
            Theorem::Poisson => "poisson",
        }
    }
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn coord_header(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |k| format!("{prefix}{k}"))
}

fn manifest(fc: &FileConfig, started: String, outputs: Vec<String>, skipped: usize) -> Result<RunManifest, CliError> {
    Ok(RunManifest {
        config_hash: fc.hash()?,
        seed: fc.run.seed,
        started,
        finished: now(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        outputs,
        skipped_pairs: skipped,
    })
}

// ---------------------------------------------------------------------------
// bounds

pub fn cmd_bounds(args: &RunArgs) -> Result<u8, CliError> {
    let started = now();
    let fc = FileConfig::load(&args.config)?.with_overrides(args.seed, args.paths);
    let spec = fc.spec()?;
    if fc.domain.dim() != spec.d {
        return Err(CliError::Config(format!(
            "domain dimension {} does not match process dimension {}",
            fc.domain.dim(),
            spec.d
        )));
    }
    if fc.grid.xs.is_empty() || fc.grid.ys.is_empty() {
        return Err(CliError::Config("grid has no pairs".into()));
    }
    prepare_out(&args.out)?;
    let csv_path = args.out.join("bounds.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    let header: Vec<String> = coord_header("x", spec.d)
        .chain(coord_header("y", spec.d))
        .chain(["g", "branch", "same_component"].map(String::from))
        .collect();
    w.write_record(&header)?;
    let mut skipped = 0;
    for x in &fc.grid.xs {
        for y in &fc.grid.ys {
            let b = match g_bound(&spec, &fc.domain, x, y) {
                Ok(b) => b,
                Err(greenlab::Error::Singularity) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let mut row: Vec<String> = x.iter().chain(y).map(|v| fmt_f64(*v)).collect();
            row.push(fmt_f64(b.value));
            row.push(b.branch.as_str().to_string());
            row.push(b.same_component.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} coincident pair(s)");
    }
    let m = manifest(&fc, started, vec![path_string(&csv_path)], skipped)?;
    write_json(&args.out.join("bounds_manifest.json"), &m)?;
    Ok(EXIT_PASS)
}

// ---------------------------------------------------------------------------
// verify

fn default_deltas() -> Vec<f64> {
    (1..=12).map(|k| 0.5f64.powi(k)).collect()
}

fn require_variant(fc: &FileConfig) -> Result<Variant, CliError> {
    match fc.check.variant {
        Some(Variant::Plain) | None => Err(CliError::Config(
            "[check] variant must name a truncated or relativistic process".into(),
        )),
        Some(v) => Ok(v),
    }
}

pub fn cmd_verify(theorem: Theorem, args: &RunArgs) -> Result<u8, CliError> {
    let started = now();
    let fc = FileConfig::load(&args.config)?.with_overrides(args.seed, args.paths);
    let cfg = fc.experiment(args.workers)?;
    let chk = &fc.check;
    let out = |r: &dyn Emit| emit(r, theorem, args, &fc, started.clone());
    match theorem {
        Theorem::Theorem1 => out(&run_comparability(&cfg)?),
        Theorem::Scaling => out(&run_scaling_check(&cfg, chk.scales.as_deref().unwrap_or(&[0.5, 2.0]))?),
        Theorem::WeightScaling => {
            let lo = chk.a_low.unwrap_or(0.5);
            let hi = chk.a_high.unwrap_or(2.0 * lo);
            out(&run_weight_scaling_check(&cfg, lo, hi)?)
        }
        Theorem::ThreeG => out(&run_3g_check(&cfg, chk.quadruples.unwrap_or(100_000))?),
        Theorem::Martin => {
            let z = chk
                .target
                .clone()
                .ok_or_else(|| CliError::Config("[check] target (boundary point) is required".into()))?;
            let deltas = chk.deltas.clone().unwrap_or_else(default_deltas);
            out(&run_martin_limit_check(&cfg, &z, &deltas)?)
        }
        Theorem::Subordinate => out(&run_subordinate_lower_check(&cfg)?),
        Theorem::Perturbation => out(&run_perturbation_check(&cfg, require_variant(&fc)?)?),
        Theorem::VariantIdentity => out(&run_variant_identity_check(&cfg, require_variant(&fc)?)?),
        Theorem::Capacity => out(&run_capacity_check(chk.radii.as_deref().unwrap_or(&[0.5, 0.25, 0.1, 0.05]))?),
        Theorem::ExitTime => out(&run_exit_time_check(&cfg)?),
        Theorem::Survival => out(&run_survival_check(&cfg, chk.times.as_deref().unwrap_or(&[0.25, 1.0, 4.0]))?),
        Theorem::Poisson => out(&run_poisson_check(&cfg, chk.multiples.as_deref().unwrap_or(&[2.0, 4.0, 8.0]))?),
    }
}

/// Object-safe view of a check report.
trait Emit {
    fn report(&self) -> Result<serde_json::Value, CliError>;
    fn passed(&self) -> bool;
    fn inconclusive(&self) -> bool;
    fn band(&self) -> Band;
    fn table(&self) -> Table;
    fn plot_points(&self) -> Vec<(f64, f64)>;
}

impl<R: CheckReport> Emit for R {
    fn report(&self) -> Result<serde_json::Value, CliError> {
        serde_json::to_value(self).map_err(|e| CliError::Config(e.to_string()))
    }
    fn passed(&self) -> bool {
        CheckReport::passed(self)
    }
    fn inconclusive(&self) -> bool {
        CheckReport::inconclusive(self)
    }
    fn band(&self) -> Band {
        CheckReport::band(self)
    }
    fn table(&self) -> Table {
        CheckReport::table(self)
    }
    fn plot_points(&self) -> Vec<(f64, f64)> {
        CheckReport::plot_points(self)
    }
}

fn emit(rep: &dyn Emit, theorem: Theorem, args: &RunArgs, fc: &FileConfig, started: String) -> Result<u8, CliError> {
    prepare_out(&args.out)?;
    let id = theorem.id();
    let details = args.out.join(format!("{id}_details.csv"));
    let full = args.out.join(format!("{id}_report.json"));
    let plot = args.out.join(format!("{id}.svg"));
    let summary_path = args.out.join(format!("{id}.json"));

    let table = rep.table();
    let mut w = csv::Writer::from_path(&details)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    write_json(&full, &rep.report()?)?;
    let band = rep.band();
    let points = rep.plot_points();
    let svg = render(&Plot {
        title: id,
        x_label: "grid point",
        y_label: "ratio",
        points: &points,
        band: Some((band.min, band.max)),
    });
    fs::write(&plot, svg)?;

    let outputs = [&details, &full, &plot, &summary_path].map(|p| path_string(p)).to_vec();
    let summary = VerifySummary {
        theorem: id.to_string(),
        pass: rep.passed(),
        band: BandRecord {
            min: band.min,
            max: band.max,
        },
        details_path: path_string(&details),
        manifest: manifest(fc, started, outputs, 0)?,
    };
    write_json(&summary_path, &summary)?;
    println!(
        "{id}: {} band [{}, {}] -> {}",
        if summary.pass { "PASS" } else { "FAIL" },
        fmt_f64(band.min),
        fmt_f64(band.max),
        path_string(&summary_path)
    );
    Ok(if summary.pass {
        EXIT_PASS
    } else if rep.inconclusive() {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_FAIL
    })
}

// ---------------------------------------------------------------------------
// simulate

pub fn cmd_simulate(args: &RunArgs) -> Result<u8, CliError> {
    let started = now();
    let fc = FileConfig::load(&args.config)?.with_overrides(args.seed, args.paths);
    let cfg = fc.experiment(args.workers)?;
    if cfg.grid.xs.is_empty() {
        return Err(CliError::Config("grid has no starting points".into()));
    }
    let d = cfg.spec.d;
    let sim = Simulator::new(&cfg.spec, &cfg.domain, &cfg.scheme)?.with_workers(args.workers);
    prepare_out(&args.out)?;

    let exit_path = args.out.join("exit_times.csv");
    let mut w = csv::Writer::from_path(&exit_path)?;
    let header: Vec<String> = coord_header("x", d)
        .chain(["mean_exit_time", "std_error", "ci_lo", "ci_hi", "n"].map(String::from))
        .collect();
    w.write_record(&header)?;
    for (i, x) in cfg.grid.xs.iter().enumerate() {
        let e = sim.mean_exit_time(x, cfg.n_paths, cfg.seed.wrapping_add(i as u64))?;
        let mut row: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
        row.extend([e.mean, e.std_error, e.ci99[0], e.ci99[1]].map(fmt_f64));
        row.push(e.n.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    let mut outputs = vec![path_string(&exit_path)];

    let mut skipped = 0;
    if !cfg.grid.ys.is_empty() {
        let bw = cfg
            .tolerances
            .bandwidth
            .unwrap_or_else(|| default_bandwidth(d, cfg.n_paths, cfg.domain.diameter()));
        let green_path = args.out.join("green.csv");
        let mut w = csv::Writer::from_path(&green_path)?;
        let header: Vec<String> = coord_header("x", d)
            .chain(coord_header("y", d))
            .chain(["g_bound", "estimate", "std_error", "ci_lo", "ci_hi", "bandwidth"].map(String::from))
            .collect();
        w.write_record(&header)?;
        for (i, x) in cfg.grid.xs.iter().enumerate() {
            let ys: Vec<Vec<f64>> = cfg.grid.ys.iter().filter(|y| distance(x, y) > 3.0 * bw).cloned().collect();
            skipped += cfg.grid.ys.len() - ys.len();
            if ys.is_empty() {
                continue;
            }
            let seed = cfg.seed.wrapping_add(1 << 32).wrapping_add(i as u64);
            let est = sim.green_pointwise_many(x, &ys, bw, cfg.n_paths, seed)?;
            for (y, e) in ys.iter().zip(est) {
                let g = g_bound(&cfg.spec, &cfg.domain, x, y)?;
                let mut row: Vec<String> = x.iter().chain(y).map(|v| fmt_f64(*v)).collect();
                row.extend([g.value, e.mean, e.std_error, e.ci99[0], e.ci99[1], bw].map(fmt_f64));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        if skipped > 0 {
            eprintln!("warning: skipped {skipped} pair(s) closer than three bandwidths");
        }
        outputs.push(path_string(&green_path));
    }
    let m = manifest(&fc, started, outputs, skipped)?;
    write_json(&args.out.join("simulate_manifest.json"), &m)?;
    Ok(EXIT_PASS)
}

// ---------------------------------------------------------------------------
// special

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpecialFn {
    /// Mittag-Leffler function M_beta(t) = E_beta(-t)
    Ml,
    /// Potential density u^a(t)
    U,
    /// Ladder exponent chi^a(lam)
    Chi,
    /// Ladder potential V^a(x)
    V,
    /// Whole-space Green function G^a(r)
    G,
}

#[derive(Debug, Clone, Default)]
pub struct SpecialArgs {
    pub beta: Option<f64>,
    pub t: Option<f64>,
    pub a: Option<f64>,
    pub alpha: Option<f64>,
    pub lam: Option<f64>,
    pub x: Option<f64>,
    pub r: Option<f64>,
    pub d: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SpecialValue {
    pub function: String,
    pub value: f64,
    pub error_bound: f64,
}

fn need(v: Option<f64>, name: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("--{name} is required")))
}

/// Evaluates one special function; the error bound compares against a more accurate evaluation.
pub fn special_value(f: SpecialFn, p: &SpecialArgs) -> Result<SpecialValue, CliError> {
    let alpha = p.alpha.unwrap_or(1.0);
    let (name, value, error_bound) = match f {
        SpecialFn::Ml => {
            let r = mittag_leffler_alt(need(p.beta, "beta")?, need(p.t, "t")?)?;
            ("ml", r.value, r.truncation_bound)
        }
        SpecialFn::U => {
            let a = need(p.a, "a")?;
            let spec = ProcessSpec::plain(p.d.unwrap_or(1), alpha, a)?;
            let t = need(p.t, "t")?;
            let v = potential_density(&spec, t)?;
            // the a = 0 density is identically one
            let err = if a == 0.0 {
                0.0
            } else {
                (v - potential_density_by_inversion(&spec, t)?).abs()
            };
            ("u", v, err)
        }
        SpecialFn::Chi => {
            let a = need(p.a, "a")?;
            let lam = need(p.lam, "lam")?;
            let v = ladder_exponent(a, alpha, lam)?;
            ("chi", v, (v - ladder_exponent_with(a, alpha, lam, &QuadSpec::tight())?).abs())
        }
        SpecialFn::V => {
            let a = need(p.a, "a")?;
            let x = need(p.x, "x")?;
            let v = ladder_potential(a, alpha, x)?;
            let fine = ladder_potential_nodes(a, alpha, x, TALBOT_NODES + 12)?;
            ("v", v, (v - fine).abs())
        }
        SpecialFn::G => {
            let spec = ProcessSpec::plain(p.d.unwrap_or(3), alpha, need(p.a, "a")?)?;
            let r = need(p.r, "r")?;
            let v = whole_space_green(&spec, r)?;
            ("g", v, (v - whole_space_green_with(&spec, r, &QuadSpec::tight())?).abs())
        }
    };
    Ok(SpecialValue {
        function: name.to_string(),
        value,
        error_bound,
    })
}

pub fn cmd_special(f: SpecialFn, p: &SpecialArgs) -> Result<u8, CliError> {
    let v = special_value(f, p)?;
    println!("{}", serde_json::to_string(&v).map_err(|e| CliError::Config(e.to_string()))?);
    Ok(EXIT_PASS)
}
