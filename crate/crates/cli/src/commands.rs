use std::io::Write;
use std::path::Path;

use pepscan_core::calibration::{calibrate_spectrum, CalibrationResult};
use pepscan_core::config::{AnalysisConfig, ConfigError};
use pepscan_core::efficiency::{run_efficiency, EfficiencyResult};
use pepscan_core::event_io::{HistogramMode, Spectrum};
use pepscan_core::limit::{audit_report, project_sensitivity, reproduce_paper, LimitResult, Projection, SensitivityModel};
use pepscan_core::model::{EnergyScale, RunMeta};
use pepscan_core::pipeline::{compare_roi, selected_spectrum, RoiComparison};
use pepscan_core::sim::{simulate_campaign, InjectionConfig, RunSimulation};
use pepscan_core::Config;
use serde::{Deserialize, Serialize};

use crate::args::{AnalyzeArgs, CalibrateArgs, Cli, Command, EfficiencyArgs, GlobalArgs, LimitArgs, ProjectArgs, SimulateArgs};
use crate::output::{read_toml, with_events, OutputDir};
use crate::Failure;

const BUNDLED_CONFIG: &str = include_str!("../../../configs/published.toml");

/// Contents of `calibration.toml`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub scale: EnergyScale<f64>,
    pub result: CalibrationResult<f64>,
}

/// Contents of `limit.toml`.
#[derive(Debug, Serialize, Deserialize)]
pub struct LimitFile {
    pub on_run: RunMeta<f64>,
    pub limit: LimitResult<f64>,
}

/// Contents of `projection.toml`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ProjectionFile {
    pub model: SensitivityModel<f64>,
    pub projection: Projection<f64>,
}

struct Context {
    config: Config,
    seed: Option<u64>,
    out: OutputDir,
}

impl Context {
    fn seed(&self, command: &str) -> Result<u64, Failure> {
        self.seed.ok_or_else(|| Failure::usage(format!("`{command}` is stochastic and needs --seed")))
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let Cli { global, command } = cli;
    if let Some(n) = global.workers {
        if n == 0 {
            return Err(Failure::usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::domain)?;
    }
    let config = load_config(&global)?;
    let out = OutputDir::create(&global.output_dir)?;
    let mut ctx = Context {
        config,
        seed: global.seed,
        out,
    };
    match command {
        Command::Simulate(a) => simulate(&mut ctx, a),
        Command::Efficiency(a) => efficiency(&mut ctx, a),
        Command::Calibrate(a) => calibrate(&mut ctx, a),
        Command::Analyze(a) => analyze(&mut ctx, a),
        Command::Limit(a) => limit(&mut ctx, a),
        Command::Project(a) => project(&mut ctx, a),
        Command::ReproducePaper => reproduce(&mut ctx),
    }?;
    for path in ctx.out.written() {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn load_config(global: &GlobalArgs) -> Result<Config, Failure> {
    let mut config = match &global.config {
        Some(path) => Config::load(path).map_err(|e| match e {
            ConfigError::Io { .. } => Failure::usage(e),
            _ => Failure::domain(e),
        })?,
        None => Config::from_toml_str(BUNDLED_CONFIG).map_err(Failure::domain)?,
    };
    let analysis = &mut config.analysis;
    if let Some(mode) = global.error_mode {
        analysis.error_mode = mode.into();
    }
    if let Some(convention) = global.bound_convention {
        analysis.bound_convention = convention.into();
    }
    if let Some(n) = global.nsigma {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Failure::usage(format!("--nsigma must be positive, got {n}")));
        }
        analysis.n_sigma = n;
    }
    Ok(config)
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("input `{}` does not exist", path.display())))
    }
}

fn simulate(ctx: &mut Context, a: SimulateArgs) -> Result<(), Failure> {
    let seed = ctx.seed("simulate")?;
    let mut setup = ctx.config.sim_setup().map_err(Failure::domain)?;
    if let Some(b) = a.inject {
        let injection = InjectionConfig {
            normalization: setup.injection.normalization,
            ..InjectionConfig::at(b)
        };
        injection.validate().map_err(Failure::domain)?;
        setup.injection = injection;
    }
    let campaign = &ctx.config.campaign;
    let on_days = a.on_days.unwrap_or(campaign.on_days);
    let off_days = a.off_days.unwrap_or(campaign.off_days);
    let sims = simulate_campaign(&setup, on_days, off_days, campaign.current_a, seed).map_err(Failure::domain)?;
    for (tag, sim) in [("on", &sims.on), ("off", &sims.off)] {
        write_run(&mut ctx.out, tag, sim)?;
    }
    Ok(())
}

fn write_run(out: &mut OutputDir, tag: &str, sim: &RunSimulation<f64>) -> Result<(), Failure> {
    let mut report = None;
    out.write_with(&format!("{tag}.vip2"), |w| {
        report = Some(sim.write(w).map_err(Failure::domain)?);
        Ok(())
    })?;
    let report = report.expect("report set on success");
    out.write_text(&format!("{tag}_generation.txt"), &report.to_text())?;
    Ok(())
}

fn efficiency(ctx: &mut Context, a: EfficiencyArgs) -> Result<(), Failure> {
    let seed = ctx.seed("efficiency")?;
    let samples = a.samples.unwrap_or(ctx.config.efficiency.samples);
    let result = run_efficiency(&ctx.config.geometry, &ctx.config.constants, samples, seed).map_err(Failure::domain)?;
    ctx.out.write_toml("efficiency.toml", &result)?;
    ctx.out.write_text("efficiency.txt", &result.to_text())?;
    println!(
        "efficiency = {:.6e} +/- {:.2e} ({} samples)",
        result.efficiency, result.mc_uncertainty, result.samples
    );
    Ok(())
}

fn raw_spectrum(path: &Path, analysis: &AnalysisConfig<f64>) -> Result<(RunMeta<f64>, Spectrum<f64>), Failure> {
    spectrum_of(path, &HistogramMode::raw(), analysis)
}

fn spectrum_of(path: &Path, mode: &HistogramMode<f64>, analysis: &AnalysisConfig<f64>) -> Result<(RunMeta<f64>, Spectrum<f64>), Failure> {
    let (meta, spectrum) = with_events(path, |header, events| {
        let meta: RunMeta<f64> = header.meta();
        let spectrum = selected_spectrum(events, mode, meta.live_time_s, analysis);
        (meta, spectrum)
    })?;
    let spectrum = spectrum.map_err(Failure::domain)?.with_run_id(meta.run_id.clone());
    Ok((meta, spectrum))
}

type Calibrated = (RunMeta<f64>, Spectrum<f64>, CalibrationResult<f64>);

fn calibrate_run(ctx: &Context, path: &Path) -> Result<Calibrated, Failure> {
    let (meta, raw) = raw_spectrum(path, &ctx.config.analysis)?;
    let table = ctx.config.line_table().map_err(Failure::domain)?;
    let result = calibrate_spectrum(&raw, &table, &ctx.config.calibration_options())
        .map_err(|e| Failure::domain(format!("`{}`: {e}", path.display())))?;
    Ok((meta, raw, result))
}

fn calibrate(ctx: &mut Context, a: CalibrateArgs) -> Result<(), Failure> {
    require_file(&a.input)?;
    let (_, raw, result) = calibrate_run(ctx, &a.input)?;
    let file = CalibrationFile {
        scale: result.scale(),
        result,
    };
    ctx.out.write_toml("calibration.toml", &file)?;
    ctx.out.write_text("calibration.txt", &file.result.to_text())?;
    ctx.out.write_text("raw_spectrum.txt", &raw.to_text())?;
    print!("{}", file.result.to_text());
    if !file.result.within_threshold {
        return Err(Failure::domain(format!(
            "calibration residual {:.2} eV exceeds {:.2} eV",
            file.result.max_abs_residual_ev, file.result.residual_threshold_ev
        )));
    }
    Ok(())
}

fn analyze(ctx: &mut Context, a: AnalyzeArgs) -> Result<(), Failure> {
    require_file(&a.on)?;
    require_file(&a.off)?;
    if let Some(path) = &a.calibration {
        require_file(path)?;
    }
    let fixed = match (&a.calibration, a.nominal_scale) {
        (Some(path), _) => Some(read_toml::<CalibrationFile>(path)?.scale),
        (None, true) => Some(ctx.config.response.scale),
        (None, false) => None,
    };
    let mut spectra = Vec::new();
    for (tag, path) in [("on", &a.on), ("off", &a.off)] {
        let scale = match fixed {
            Some(scale) => scale,
            None => {
                let (_, _, result) = calibrate_run(ctx, path)?;
                ctx.out.write_text(&format!("{tag}_calibration.txt"), &result.to_text())?;
                result.scale()
            }
        };
        let mode = HistogramMode::energy(scale);
        let (meta, spectrum) = spectrum_of(path, &mode, &ctx.config.analysis)?;
        ctx.out.write_text(&format!("{tag}_spectrum.txt"), &spectrum.to_text())?;
        spectra.push((meta, spectrum));
    }
    let (off_meta, off) = spectra.pop().expect("two runs");
    let (on_meta, on) = spectra.pop().expect("two runs");
    if !on_meta.current_on || off_meta.current_on {
        return Err(Failure::domain(format!(
            "--on run `{}` must carry current and --off run `{}` must not",
            on_meta.run_id, off_meta.run_id
        )));
    }
    let comparison = compare_roi(&on, &on_meta, &off, &off_meta, &ctx.config.analysis).map_err(Failure::domain)?;
    ctx.out.write_toml("analysis.toml", &comparison)?;
    ctx.out.write_text("analysis.txt", &comparison.to_text())?;
    print!("{}", comparison.to_text());
    Ok(())
}

fn configured_efficiency(ctx: &Context, file: Option<&Path>) -> Result<f64, Failure> {
    match file {
        Some(path) => {
            require_file(path)?;
            Ok(read_toml::<EfficiencyResult<f64>>(path)?.efficiency)
        }
        None => Ok(ctx.config.efficiency.value),
    }
}

fn analysis_limit(ctx: &Context, path: &Path, efficiency_file: Option<&Path>) -> Result<(RoiComparison<f64>, LimitResult<f64>), Failure> {
    require_file(path)?;
    let comparison: RoiComparison<f64> = read_toml(path)?;
    let efficiency = configured_efficiency(ctx, efficiency_file)?;
    let limit = comparison
        .limit(&ctx.config.constants, efficiency, &ctx.config.analysis)
        .map_err(Failure::domain)?;
    Ok((comparison, limit))
}

fn limit(ctx: &mut Context, a: LimitArgs) -> Result<(), Failure> {
    let (comparison, limit) = analysis_limit(ctx, &a.analysis, a.efficiency.as_deref())?;
    let report = audit_report(&limit, &comparison.on_run, &ctx.config.constants);
    ctx.out.write_text("limit.txt", &report)?;
    ctx.out.write_toml(
        "limit.toml",
        &LimitFile {
            on_run: comparison.on_run,
            limit,
        },
    )?;
    print!("{report}");
    Ok(())
}

fn project(ctx: &mut Context, a: ProjectArgs) -> Result<(), Failure> {
    let consts = &ctx.config.constants;
    let model = match &a.analysis {
        Some(path) => {
            let (comparison, limit) = analysis_limit(ctx, path, None)?;
            SensitivityModel::from_limit(&limit, comparison.on_run.live_time_s, comparison.on_run.current_a)
        }
        None => {
            let analysis = &ctx.config.analysis;
            let r = reproduce_paper(&ctx.config.published, consts, analysis.error_mode, analysis.bound_convention)
                .map_err(Failure::domain)?;
            SensitivityModel::from_limit(&r.limit, r.on_run.live_time_s, r.on_run.current_a)
        }
    };
    let target = a.target.unwrap_or(ctx.config.projection.target);
    let projection = project_sensitivity(target, &model, consts).map_err(Failure::domain)?;
    let day = pepscan_core::model::SECONDS_PER_DAY;
    let text = format!(
        "reference limit               {:.4e}\n\
         target                        {:.4e}\n\
         improvement (fixed sigma)     x{:.1}\n\
         improvement (sigma ~ sqrt t)  x{:.1}\n\
         live time (fixed sigma)       {:.1} d\n\
         live time (sigma ~ sqrt t)    {:.1} d\n",
        projection.reference_limit,
        projection.target,
        projection.improvement_factor_fixed_sigma,
        projection.improvement_factor_scaling_sigma,
        projection.live_time_fixed_sigma_s / day,
        projection.live_time_scaling_sigma_s / day,
    );
    ctx.out.write_toml("projection.toml", &ProjectionFile { model, projection })?;
    ctx.out.write_text("projection.txt", &text)?;
    print!("{text}");
    Ok(())
}

fn reproduce(ctx: &mut Context) -> Result<(), Failure> {
    let analysis = &ctx.config.analysis;
    let r = reproduce_paper(&ctx.config.published, &ctx.config.constants, analysis.error_mode, analysis.bound_convention)
        .map_err(Failure::domain)?;
    ctx.out.write_text("reproduce.txt", &r.report)?;
    print!("{}", r.report);
    std::io::stdout().flush().map_err(Failure::domain)?;
    if r.pass {
        Ok(())
    } else {
        Err(Failure::domain(format!(
            "recomputed limit {:.4e} deviates {:+.2}% from {:.1e}",
            r.limit.beta2_over_2_limit,
            r.deviation * 100.0,
            ctx.config.published.expected_limit
        )))
    }
}
