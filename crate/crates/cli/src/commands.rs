//! Subcommand bodies. Each reads what it needs from the run config and
//! writes one primary CSV plus any optional side outputs.

use crate::config::RunConfig;
use crate::error::CliError;
use smfj::calibration::{calibrate_de, rmse_surface, write_surface, Bounds, DeConfig, QuoteSet, Weighting, DIM, PARAM_NAMES};
use smfj::greeks::{greeks, scenario_table, vanna_smile, write_report, write_scenarios, write_vanna_smile, GreekMethod};
use smfj::io::{fmt_f64, write_table, Provenance};
use smfj::measure::RiskNeutralMode;
use smfj::montecarlo::{price_mc, ControlVariate, McConfig};
use smfj::pide::{
    convergence_study, default_grid, solve_layers, solve_pide_with, sqrt_ladder, GridSpec, HistoryMode, PideConfig,
};
use smfj::process::{write_paths, PathSimulator, SimMeasure};
use smfj::transform::{price_european_transform, TransformConfig};
use smfj::{Diagnostics, Method, ModelParams, OptionContract, OptionKind, Pricer, PricingResult};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// What every subcommand gets: the resolved config and where to write.
pub struct Ctx {
    pub cfg: RunConfig,
    pub seed: u64,
    pub prov: Provenance,
    pub out: Option<PathBuf>,
    pub timing: bool,
}

impl Ctx {
    fn primary(&self) -> Result<Box<dyn Write>, CliError> {
        match &self.out {
            Some(p) => open(p),
            None => Ok(Box::new(std::io::stdout().lock())),
        }
    }

    fn side(&self, key: &str) -> Result<Option<Box<dyn Write>>, CliError> {
        self.cfg.path(key).map(|p| open(&p)).transpose()
    }

    fn method(&self) -> Result<Method, CliError> {
        self.cfg.or("run.method", Method::Transform)
    }

    /// Wall time since `start`, blank unless `--timing` so that outputs stay
    /// reproducible.
    fn runtime(&self, start: Instant, millis: bool) -> String {
        match (self.timing, millis) {
            (false, _) => String::new(),
            (true, true) => format!("{:.0}", start.elapsed().as_secs_f64() * 1e3),
            (true, false) => format!("{:.3}", start.elapsed().as_secs_f64()),
        }
    }
}

fn open(p: &Path) -> Result<Box<dyn Write>, CliError> {
    let f = File::create(p).map_err(|e| CliError::Config(format!("cannot create {}: {e}", p.display())))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn params(cfg: &RunConfig) -> Result<ModelParams, CliError> {
    let rate = cfg.require("model.rate")?;
    let p = ModelParams {
        sigma0: cfg.require("model.sigma0")?,
        sigma_h: cfg.or("model.sigma_h", 0.0)?,
        hurst: cfg.or("model.hurst", 0.0)?,
        lambda: cfg.or("model.lambda", 0.0)?,
        mu_y: cfg.or("model.mu_y", 0.0)?,
        sigma_y: cfg.or("model.sigma_y", 0.0)?,
        rate,
        mu: cfg.or("model.mu", rate)?,
    };
    p.validate()?;
    Ok(p)
}

fn contract(cfg: &RunConfig) -> Result<OptionContract, CliError> {
    let kind: OptionKind = cfg.require("contract.kind")?;
    let c = OptionContract {
        kind,
        spot: cfg.require("contract.spot")?,
        strike: cfg.require("contract.strike")?,
        maturity: cfg.require("contract.maturity")?,
        barrier: match kind {
            OptionKind::DownAndOutCall => Some(cfg.require("contract.barrier")?),
            _ => cfg.get("contract.barrier")?,
        },
    };
    c.validate()?;
    Ok(c)
}

fn transform_config(cfg: &RunConfig) -> Result<TransformConfig, CliError> {
    let d = TransformConfig::default();
    Ok(TransformConfig {
        talbot_nodes: cfg.or("transform.talbot_nodes", d.talbot_nodes)?,
        mellin_nodes: cfg.or("transform.mellin_nodes", d.mellin_nodes)?,
        mellin_line: cfg.or("transform.mellin_line", d.mellin_line)?,
        tolerance: cfg.or("transform.tolerance", d.tolerance)?,
        verify: cfg.or("transform.verify", d.verify)?,
        mellin_truncation: None,
    })
}

fn pide_size(cfg: &RunConfig) -> Result<(usize, usize), CliError> {
    Ok((cfg.or("pide.n_space", 400)?, cfg.or("pide.n_time", 400)?))
}

fn pide_config(cfg: &RunConfig) -> Result<PideConfig, CliError> {
    let history = match cfg.or("pide.history", "direct".to_string())?.as_str() {
        "direct" => HistoryMode::Direct,
        "fft" => HistoryMode::Fft {
            block: cfg.or("pide.fft_block", 64)?,
        },
        other => return Err(CliError::Config(format!("bad value `{other}` for `pide.history`: expected direct or fft"))),
    };
    Ok(PideConfig {
        history,
        hermite_nodes: cfg.or("pide.hermite_nodes", PideConfig::default().hermite_nodes)?,
        ..Default::default()
    })
}

fn mc_config(cfg: &RunConfig, seed: u64) -> Result<McConfig, CliError> {
    let d = McConfig::default();
    let control_variate = match cfg.or("mc.control_variate", "none".to_string())?.as_str() {
        "none" => ControlVariate::None,
        "barrier" => ControlVariate::BsBarrierAnalytic,
        "barrier_forward" => ControlVariate::BsBarrierAndForward,
        other => {
            return Err(CliError::Config(format!(
                "bad value `{other}` for `mc.control_variate`: expected none, barrier or barrier_forward"
            )))
        }
    };
    Ok(McConfig {
        n_paths: cfg.or("mc.n_paths", d.n_paths)?,
        steps_per_year: cfg.or("mc.steps_per_year", d.steps_per_year)?,
        seed,
        control_variate,
        antithetic: cfg.or("mc.antithetic", d.antithetic)?,
        measure: risk_neutral_mode(&cfg.or("mc.measure", "naive".to_string())?, "mc.measure")?,
        bridge_correction: cfg.or("mc.bridge_correction", d.bridge_correction)?,
    })
}

fn risk_neutral_mode(s: &str, key: &str) -> Result<RiskNeutralMode, CliError> {
    match s {
        "naive" => Ok(RiskNeutralMode::Naive),
        "tilted" => Ok(RiskNeutralMode::Tilted),
        other => Err(CliError::Config(format!("bad value `{other}` for `{key}`: expected naive or tilted"))),
    }
}

fn pricer(cfg: &RunConfig, method: Method) -> Result<Pricer, CliError> {
    match method {
        Method::Transform => Ok(Pricer::Transform(transform_config(cfg)?)),
        Method::Pide => {
            let (n_space, n_time) = pide_size(cfg)?;
            Ok(Pricer::Pide { n_space, n_time })
        }
        Method::MonteCarlo => Err(CliError::Config("this command needs the transform or pide method".into())),
    }
}

fn price_one(ctx: &Ctx, method: Method, c: &OptionContract, p: &ModelParams) -> Result<PricingResult, CliError> {
    let cfg = &ctx.cfg;
    Ok(match method {
        Method::Transform => price_european_transform(c, p, &transform_config(cfg)?)?,
        Method::Pide => {
            let (ns, nt) = pide_size(cfg)?;
            let grid = default_grid(c, p, ns, nt)?;
            let pc = pide_config(cfg)?;
            if let Some(mut w) = ctx.side("output.layers")? {
                let sol = solve_layers(c, p, &grid, &PideConfig { keep_layers: true, ..pc.clone() })?;
                sol.write_layers(&mut w, Some(&ctx.prov))?;
                w.flush()?;
            }
            solve_pide_with(c, p, &grid, &pc)?
        }
        Method::MonteCarlo => {
            let r = price_mc(c, p, &mc_config(cfg, ctx.seed)?)?;
            if let (Some(mut w), Diagnostics::MonteCarlo(d)) = (ctx.side("output.batches")?, &r.diagnostics) {
                d.write_batches(&mut w, Some(&ctx.prov))?;
                w.flush()?;
            }
            r
        }
    })
}

fn stability_warning(r: &PricingResult, c: &OptionContract, rate: f64) {
    if let Diagnostics::Pide(d) = &r.diagnostics {
        let bound = (rate * c.maturity).exp() + 1.0;
        if d.stability_constant() > bound {
            log::warn!("weighted-norm growth {} exceeds e^(rT)+1 = {bound}", d.stability_constant());
        }
    }
}

pub fn price(ctx: &Ctx) -> Result<(), CliError> {
    let (c, p, method) = (contract(&ctx.cfg)?, params(&ctx.cfg)?, ctx.method()?);
    let start = Instant::now();
    let r = price_one(ctx, method, &c, &p)?;
    stability_warning(&r, &c, p.rate);
    let row = vec![
        r.method.to_string(),
        fmt_f64(r.price),
        r.std_err.map(fmt_f64).unwrap_or_default(),
        ctx.runtime(start, true),
        r.diagnostics.to_string(),
    ];
    let mut out = ctx.primary()?;
    write_table(&mut out, Some(&ctx.prov), &["method", "price", "std_err", "runtime_ms", "diagnostics"], &[row])?;
    out.flush()?;
    Ok(())
}

pub fn crossval(ctx: &Ctx) -> Result<(), CliError> {
    let methods: Vec<Method> = ctx
        .cfg
        .list("crossval.methods")?
        .ok_or_else(|| CliError::Config("missing required key `crossval.methods`".into()))?;
    if methods.len() < 2 || (1..methods.len()).any(|i| methods[..i].contains(&methods[i])) {
        return Err(CliError::Config("`crossval.methods` must list at least two distinct methods".into()));
    }
    let (c, p) = (contract(&ctx.cfg)?, params(&ctx.cfg)?);
    let mut results = Vec::new();
    for m in &methods {
        let start = Instant::now();
        let r = price_one(ctx, *m, &c, &p)?;
        stability_warning(&r, &c, p.rate);
        log::info!("{m}: {} ({})", r.price, r.diagnostics);
        results.push((r, ctx.runtime(start, false)));
    }
    let mc = results.iter().find(|(r, _)| r.method == Method::MonteCarlo).map(|(r, _)| r.price);
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|(r, t)| {
            vec![
                r.method.to_string(),
                fmt_f64(r.price),
                mc.map(|m| fmt_f64(100.0 * (r.price - m) / m)).unwrap_or_default(),
                t.clone(),
            ]
        })
        .collect();
    let mut out = ctx.primary()?;
    write_table(&mut out, Some(&ctx.prov), &["method", "price", "rel_diff_vs_mc_pct", "runtime_s"], &rows)?;
    out.flush()?;
    Ok(())
}

pub fn simulate(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let p = params(cfg)?;
    let spot: f64 = cfg.require("contract.spot")?;
    let horizon: f64 = cfg.require("contract.maturity")?;
    let measure = match cfg.or("simulate.measure", "physical".to_string())?.as_str() {
        "physical" => SimMeasure::Physical,
        other => SimMeasure::RiskNeutral(risk_neutral_mode(other, "simulate.measure")?),
    };
    let sim = PathSimulator::new(&p, spot, horizon, cfg.or("simulate.steps", 100)?, ctx.seed, measure)?;
    let mut out = ctx.primary()?;
    write_paths(&mut out, Some(&ctx.prov), sim.paths(cfg.or("simulate.n_paths", 1000)?))?;
    out.flush()?;
    Ok(())
}

fn quotes(ctx: &Ctx) -> Result<QuoteSet, CliError> {
    let cfg = &ctx.cfg;
    let qs = match cfg.path("quotes.path") {
        Some(path) => QuoteSet::from_path(&path)?,
        None => {
            let missing = |k: &str| CliError::Config(format!("missing required key `{k}` (or set `quotes.path`)"));
            let strikes = cfg.list("quotes.strikes")?.ok_or_else(|| missing("quotes.strikes"))?;
            let maturities = cfg.list("quotes.maturities")?.ok_or_else(|| missing("quotes.maturities"))?;
            let spot = cfg.get("quotes.spot")?.ok_or_else(|| missing("quotes.spot"))?;
            let qs = QuoteSet::synthetic(&params(cfg)?, spot, &strikes, &maturities)?;
            match cfg.or("quotes.noise", 0.0)? {
                n if n > 0.0 => qs.with_noise(n, ctx.seed),
                _ => qs,
            }
        }
    };
    let qs = if cfg.or("quotes.filter", false)? { qs.standard_filter() } else { qs };
    if qs.is_empty() {
        return Err(CliError::Config("no quotes left after filtering".into()));
    }
    log::info!("{} quotes", qs.len());
    Ok(qs)
}

fn bounds(cfg: &RunConfig) -> Result<Bounds, CliError> {
    let d = Bounds::default();
    let vec6 = |key: &str, default: [f64; DIM]| -> Result<[f64; DIM], CliError> {
        match cfg.list::<f64>(key)? {
            None => Ok(default),
            Some(v) => v
                .try_into()
                .map_err(|_| CliError::Config(format!("`{key}` needs {DIM} values ({})", PARAM_NAMES.join(", ")))),
        }
    };
    let b = Bounds {
        lo: vec6("bounds.lower", d.lo)?,
        hi: vec6("bounds.upper", d.hi)?,
    };
    b.validate()?;
    Ok(b)
}

pub fn calibrate(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let qs = quotes(ctx)?;
    let d = DeConfig::default();
    let de = DeConfig {
        population: cfg.get("de.population")?,
        mutation: cfg.or("de.mutation", d.mutation)?,
        crossover: cfg.or("de.crossover", d.crossover)?,
        generations: cfg.or("de.generations", d.generations)?,
        seed: ctx.seed,
        patience: cfg.or("de.patience", d.patience)?,
        target: cfg.or("de.target", d.target)?,
        weighting: match cfg.or("de.weighting", "price".to_string())?.as_str() {
            "price" => Weighting::Price,
            "vega" => Weighting::Vega,
            other => return Err(CliError::Config(format!("bad value `{other}` for `de.weighting`: expected price or vega"))),
        },
        polish: cfg.or("de.polish", d.polish)?,
    };
    let pr = match cfg.or("calibrate.pricer", Method::Transform)? {
        Method::Transform if !cfg.contains("transform.tolerance") => Pricer::default(),
        m => pricer(cfg, m)?,
    };
    let r = calibrate_de(&qs, &bounds(cfg)?, &de, &pr)?;
    log::info!("objective {} rmse {}% after {} generations", r.objective, r.rmse_pct, r.generations);
    let theta = smfj::calibration::to_vector(&r.theta_hat);
    let mut rows: Vec<Vec<String>> = PARAM_NAMES
        .iter()
        .zip(theta)
        .map(|(n, v)| vec![n.to_string(), fmt_f64(v)])
        .collect();
    rows.push(vec!["objective".into(), fmt_f64(r.objective)]);
    rows.push(vec!["rmse_pct".into(), fmt_f64(r.rmse_pct)]);
    rows.push(vec!["evaluations".into(), r.evaluations.to_string()]);
    rows.push(vec!["generations".into(), r.generations.to_string()]);
    let mut out = ctx.primary()?;
    write_table(&mut out, Some(&ctx.prov), &["key", "value"], &rows)?;
    out.flush()?;
    if let Some(mut w) = ctx.side("output.history")? {
        let rows: Vec<Vec<String>> = r
            .history
            .iter()
            .enumerate()
            .map(|(g, v)| vec![g.to_string(), fmt_f64(*v)])
            .collect();
        write_table(&mut w, Some(&ctx.prov), &["generation", "best_objective"], &rows)?;
        w.flush()?;
    }
    Ok(())
}

pub fn surface(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let qs = quotes(ctx)?;
    let need = |k: &str| -> Result<Vec<f64>, CliError> {
        let v = cfg.list(k)?.ok_or_else(|| CliError::Config(format!("missing required key `{k}`")))?;
        if v.is_empty() {
            return Err(CliError::Config(format!("`{k}` is empty")));
        }
        Ok(v)
    };
    let (hs, ls) = (need("surface.hurst")?, need("surface.lambda")?);
    let pr = match cfg.or("calibrate.pricer", Method::Transform)? {
        Method::Transform if !cfg.contains("transform.tolerance") => Pricer::default(),
        m => pricer(cfg, m)?,
    };
    let s = rmse_surface(&qs, &hs, &ls, &params(cfg)?, &pr)?;
    let mut out = ctx.primary()?;
    write_surface(&mut out, Some(&ctx.prov), &s)?;
    out.flush()?;
    Ok(())
}

pub fn converge(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let (c, p) = (contract(cfg)?, params(cfg)?);
    let levels: usize = cfg.or("converge.levels", 5)?;
    let ladder = sqrt_ladder(cfg.or("converge.dt0", 0.05)?, levels);
    let default_ref = if c.is_european() { "transform" } else { "finest" };
    let report = match cfg.or("converge.reference", default_ref.to_string())?.as_str() {
        "transform" => {
            let tc = transform_config(cfg)?;
            convergence_study(&c, &p, &ladder, |s| Ok(price_european_transform(&c.with_spot(s), &p, &tc)?.price))?
        }
        "finest" => {
            // two further halvings below the finest level
            let fine = sqrt_ladder(ladder[levels - 1].dt / 4.0, 1)[0];
            let base = default_grid(&c, &p, 5, 1)?;
            let grid = GridSpec::uniform(
                base.x_min,
                base.x_max,
                ((base.x_max - base.x_min) / fine.dx).round() as usize + 1,
                (c.maturity / fine.dt).round() as usize,
                c.maturity,
            )?;
            let sol = solve_layers(&c, &p, &grid, &PideConfig::default())?;
            convergence_study(&c, &p, &ladder, |s| Ok(sol.value_at(s)))?
        }
        other => {
            return Err(CliError::Config(format!(
                "bad value `{other}` for `converge.reference`: expected transform or finest"
            )))
        }
    };
    log::info!("log-log slope {}", report.slope);
    let mut out = ctx.primary()?;
    report.write_csv(&mut out, Some(&ctx.prov))?;
    out.flush()?;
    Ok(())
}

pub fn greeks_cmd(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let (c, p) = (contract(cfg)?, params(cfg)?);
    let mode: GreekMethod = cfg.or("greeks.mode", GreekMethod::Dual)?;
    let pr = pricer(cfg, ctx.method()?)?;
    let r = greeks(&c, &p, &pr, mode)?;
    if !r.failures().is_empty() {
        log::warn!("failed greeks: {}", r.failures().join(", "));
    }
    let mut out = ctx.primary()?;
    write_report(&mut out, Some(&ctx.prov), &r)?;
    out.flush()?;
    if let Some(mut w) = ctx.side("output.scenarios")? {
        write_scenarios(&mut w, Some(&ctx.prov), &scenario_table(&c, &p, &pr, mode)?)?;
        w.flush()?;
    }
    if let Some(mut w) = ctx.side("output.vanna")? {
        let m = cfg
            .list("greeks.moneyness")?
            .unwrap_or_else(|| (0..9).map(|i| (80 + 5 * i) as f64 / 100.0).collect());
        write_vanna_smile(&mut w, Some(&ctx.prov), &vanna_smile(c.spot, c.maturity, &p, &m, &transform_config(cfg)?)?)?;
        w.flush()?;
    }
    Ok(())
}
