use std::path::Path;
use std::time::Instant;

use qkr_core::analytics::perturbative_density;
use qkr_core::observables::{momentum_density, position_density, Density};
use qkr_core::scanner::{self, ComparisonRow, EpsilonScan, PowerLawFit, ScanMode, ScanParams, WidthScaling};
use qkr_core::wavepacket::{to_position, MomentumWavefunction, SimConfig, SpatialGrid, EDGE_LEAKAGE_BOUND};
use serde::{Deserialize, Serialize};

use crate::output::{Health, RunManifest, Sink};
use crate::{CliError, EpsMax, EvolveArgs, ScalingArgs, ScalingMode, ScanArgs};

/// Allowed `|Σ|ψ|² - 1|` at the end of a run.
const NORM_DRIFT_LIMIT: f64 = 1e-10;

#[derive(Serialize)]
struct PositionRow {
    #[serde(rename = "X")]
    x: f64,
    density: f64,
}

#[derive(Serialize)]
struct MomentumRow {
    m: i64,
    prob: f64,
}

#[derive(Serialize)]
struct PerturbativeRow {
    #[serde(rename = "X")]
    x: f64,
    numerical: f64,
    perturbative: f64,
    difference: f64,
}

#[derive(Serialize)]
struct ScanRow {
    epsilon: f64,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct WidthRow {
    #[serde(rename = "N")]
    n: usize,
    width: f64,
}

#[derive(Serialize)]
struct CompareRow {
    #[serde(rename = "N")]
    n: usize,
    position: f64,
    fidelity: f64,
    ratio: f64,
    fidelity_equal_budget: f64,
}

impl From<&ComparisonRow> for CompareRow {
    fn from(r: &ComparisonRow) -> Self {
        Self {
            n: r.kicks,
            position: r.position_width,
            fidelity: r.fidelity_width,
            ratio: r.ratio,
            fidelity_equal_budget: r.fidelity_width_equal_budget,
        }
    }
}

/// The configuration a run actually used, including auto-grown sizes.
#[derive(Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    requested: &'a SimConfig,
    used_half_width: usize,
    used_n_points: usize,
}

#[derive(Serialize)]
struct ScanConfig<'a> {
    kicks: usize,
    mode: ScanMode,
    #[serde(flatten)]
    params: &'a ScanParams,
    epsilon_max: f64,
    auto_range: bool,
}

#[derive(Serialize)]
struct ScalingConfig<'a> {
    kicks: &'a [usize],
    mode: &'static str,
    #[serde(flatten)]
    params: &'a ScanParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    fixture: Option<String>,
}

fn sim_config(a: &EvolveArgs) -> Result<SimConfig, CliError> {
    let mut cfg = SimConfig::new(a.kicks, a.phi_d, a.epsilon)?
        .with_l(a.l)?
        .with_sequence(a.sequence.into());
    if let Some(m) = a.basis {
        cfg = cfg.with_half_width(m)?;
    }
    if let Some(n) = a.grid {
        cfg = cfg.with_n_points(n)?;
    }
    Ok(cfg)
}

fn scan_params(phi_d: f64, l: u32, sequence: crate::SequenceArg, points: usize) -> ScanParams {
    ScanParams {
        phi_d,
        l,
        sequence: sequence.into(),
        points,
    }
}

/// The configured grid, or the default one for a ladder that auto-grew past it.
fn grid_for(cfg: &SimConfig, wf: &MomentumWavefunction) -> SpatialGrid {
    if cfg.grid().supports(wf.half_width()) {
        cfg.grid()
    } else {
        SpatialGrid::for_half_width(wf.half_width())
    }
}

fn health(wf: &MomentumWavefunction) -> Result<Health, CliError> {
    let edge_occupancy = wf.edge_occupancy();
    let norm_drift = (wf.norm_sqr() - 1.0).abs();
    if norm_drift > NORM_DRIFT_LIMIT {
        return Err(CliError::Health(format!(
            "norm drift {norm_drift:e} exceeds {NORM_DRIFT_LIMIT:e}"
        )));
    }
    if edge_occupancy >= EDGE_LEAKAGE_BOUND {
        return Err(CliError::Health(format!(
            "edge leakage {edge_occupancy:e} exceeds {EDGE_LEAKAGE_BOUND:e}"
        )));
    }
    Ok(Health {
        edge_occupancy,
        leakage: false,
        norm_drift,
    })
}

fn finish(sink: &mut Sink, manifest: &RunManifest, start: Instant) -> Result<(), CliError> {
    sink.manifest(manifest, start.elapsed())?;
    for p in sink.written() {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn resolved_manifest(
    command: &'static str,
    cfg: &SimConfig,
    wf: &MomentumWavefunction,
    grid: SpatialGrid,
) -> Result<RunManifest, CliError> {
    let resolved = Resolved {
        requested: cfg,
        used_half_width: wf.half_width(),
        used_n_points: grid.n_points(),
    };
    Ok(RunManifest::new(command, resolved)?.with_health(health(wf)?))
}

fn position_rows(d: &Density, grid: SpatialGrid) -> Vec<PositionRow> {
    grid.nodes()
        .zip(d.values())
        .map(|(x, &density)| PositionRow { x, density })
        .collect()
}

pub(crate) fn evolve(a: &EvolveArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = sim_config(a)?;
    let wf = qkr_core::evolve(&cfg)?;
    let grid = grid_for(&cfg, &wf);
    let manifest = resolved_manifest("evolve", &cfg, &wf, grid)?;

    let pos = position_rows(&position_density(&to_position(&wf, grid)?), grid);
    let mom: Vec<MomentumRow> = wf
        .orders()
        .zip(momentum_density(&wf).values())
        .map(|(m, &prob)| MomentumRow { m, prob })
        .collect();

    let mut sink = Sink::new(&a.output.out, a.output.format)?;
    sink.table("position", &manifest, &pos, &pos, None::<()>)?;
    sink.table("momentum", &manifest, &mom, &mom, None::<()>)?;
    finish(&mut sink, &manifest, start)
}

pub(crate) fn perturbative(a: &EvolveArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = sim_config(a)?;
    let wf = qkr_core::evolve(&cfg)?;
    let grid = grid_for(&cfg, &wf);
    let manifest = resolved_manifest("perturbative", &cfg, &wf, grid)?;

    let full = position_density(&to_position(&wf, grid)?);
    let pert = perturbative_density(cfg.free_segments(), cfg.phi_d(), cfg.epsilon(), grid, wf.half_width())?;
    let rows: Vec<PerturbativeRow> = grid
        .nodes()
        .zip(full.values())
        .zip(&pert.values)
        .map(|((x, &numerical), &perturbative)| PerturbativeRow {
            x,
            numerical,
            perturbative,
            difference: numerical - perturbative,
        })
        .collect();

    let mut sink = Sink::new(&a.output.out, a.output.format)?;
    sink.table("perturbative", &manifest, &rows, &rows, None::<()>)?;
    let worst = rows.iter().map(|r| r.difference.abs()).fold(0.0, f64::max);
    println!("max |numerical - perturbative| = {worst:e}");
    finish(&mut sink, &manifest, start)
}

#[derive(Serialize)]
struct ScanData<'a> {
    kicks: usize,
    mode: ScanMode,
    fwhm: f64,
    rows: &'a [ScanRow],
}

pub(crate) fn scan(a: &ScanArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let params = scan_params(a.phi_d, a.l, a.sequence, a.points);
    let mode: ScanMode = a.mode.into();
    qkr_core::scanner::epsilon_grid(1.0, a.points)?;
    let (epsilon_max, auto) = match a.eps_max {
        EpsMax::Auto => (scanner::auto_range(a.kicks, &params, mode)?, true),
        EpsMax::Fixed(v) => (v, false),
    };
    let scan: EpsilonScan = scanner::scan_epsilon(a.kicks, &params, mode, epsilon_max)?;
    let fwhm = scan.width()?;
    let manifest = RunManifest::new(
        "scan",
        ScanConfig {
            kicks: a.kicks,
            mode,
            params: &params,
            epsilon_max,
            auto_range: auto,
        },
    )?;
    let rows: Vec<ScanRow> = scan
        .epsilons
        .iter()
        .zip(&scan.values)
        .map(|(&epsilon, &value)| ScanRow { epsilon, value })
        .collect();
    let data = ScanData {
        kicks: a.kicks,
        mode,
        fwhm,
        rows: &rows,
    };

    let mut sink = Sink::new(&a.output.out, a.output.format)?;
    sink.table("scan", &manifest, &rows, data, None::<()>)?;
    println!("fwhm = {fwhm}");
    finish(&mut sink, &manifest, start)
}

#[derive(Serialize)]
struct BothFit {
    position: PowerLawFit,
    fidelity: PowerLawFit,
}

#[derive(Serialize)]
struct CompareData<'a> {
    rows: &'a [CompareRow],
    crossover: Option<usize>,
    crossover_fit: Option<f64>,
}

fn read_fixture(path: &Path) -> Result<(Vec<usize>, Vec<f64>), CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut kicks = Vec::new();
    let mut widths = Vec::new();
    for row in r.deserialize::<WidthRow>() {
        let row = row?;
        kicks.push(row.n);
        widths.push(row.width);
    }
    Ok((kicks, widths))
}

fn print_fit(label: &str, fit: &PowerLawFit) {
    println!(
        "{label}: gamma = {}, intercept = {}, r_squared = {}",
        fit.gamma, fit.intercept, fit.r_squared
    );
}

pub(crate) fn scaling(a: &ScalingArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let params = scan_params(a.phi_d, a.l, a.sequence, a.points);
    let mode_name = match a.mode {
        ScalingMode::Position => "position",
        ScalingMode::Fidelity => "fidelity",
        ScalingMode::Both => "both",
    };

    let (kicks, fixture_widths) = match &a.fixture {
        Some(path) => {
            if a.mode == ScalingMode::Both {
                return Err(CliError::Usage(
                    "--fixture needs --mode position or --mode fidelity".into(),
                ));
            }
            let (k, w) = read_fixture(path)?;
            (k, Some(w))
        }
        None => {
            if a.n_to < a.n_from {
                return Err(CliError::Usage(format!(
                    "--n-to {} is below --n-from {}",
                    a.n_to, a.n_from
                )));
            }
            ((a.n_from..=a.n_to).collect(), None)
        }
    };
    let manifest = RunManifest::new(
        "scaling",
        ScalingConfig {
            kicks: &kicks,
            mode: mode_name,
            params: &params,
            fixture: a.fixture.as_ref().map(|p| p.display().to_string()),
        },
    )?;
    let mut sink = Sink::new(&a.output.out, a.output.format)?;

    let single = |mode: ScanMode| -> Result<WidthScaling, CliError> {
        Ok(match &fixture_widths {
            Some(w) => WidthScaling::from_widths(mode, kicks.clone(), w.clone())?,
            None => scanner::width_scaling(&kicks, &params, mode)?,
        })
    };
    match a.mode {
        ScalingMode::Position | ScalingMode::Fidelity => {
            let mode = if a.mode == ScalingMode::Position {
                ScanMode::Position
            } else {
                ScanMode::Fidelity
            };
            let ws = single(mode)?;
            let rows: Vec<WidthRow> = ws
                .kicks
                .iter()
                .zip(&ws.widths)
                .map(|(&n, &width)| WidthRow { n, width })
                .collect();
            sink.table("scaling", &manifest, &rows, &rows, Some(ws.fit))?;
            print_fit(mode_name, &ws.fit);
        }
        ScalingMode::Both => {
            let cmp = scanner::compare_modes(&kicks, &params)?;
            let rows: Vec<CompareRow> = cmp.rows.iter().map(CompareRow::from).collect();
            let data = CompareData {
                rows: &rows,
                crossover: cmp.crossover,
                crossover_fit: cmp.crossover_fit,
            };
            let fit = BothFit {
                position: cmp.position.fit,
                fidelity: cmp.fidelity.fit,
            };
            sink.table("scaling", &manifest, &rows, data, Some(fit))?;
            print_fit("position", &cmp.position.fit);
            print_fit("fidelity", &cmp.fidelity.fit);
            match cmp.crossover {
                Some(n) => println!("crossover: position width first exceeds fidelity width at N = {n}"),
                None => println!("crossover: none in the scanned range"),
            }
            if let Some(n) = cmp.crossover_fit {
                println!("crossover of fitted power laws: N = {n}");
            }
        }
    }
    finish(&mut sink, &manifest, start)
}
