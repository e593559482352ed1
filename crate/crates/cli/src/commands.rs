//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hrtf_graph::eval::{
    cell_seed, run_alignment_orders, run_noise_cell, run_phase_delay_experiment, PhaseExperiment, PhaseVariant, ReportRow, SpectralSettings,
    LSD_REFERENCE,
};
use hrtf_graph::hrir::{load_container, save_container, EarSelector, HrirSet};
use hrtf_graph::hull::convex_hull_graph;
use hrtf_graph::synth::{add_white_noise, fibonacci_grid, icosahedral_design, measurement_snr_db, rigid_sphere_set, RigidSphere};
use hrtf_graph::toa::{assemble, estimate_from_features, estimate_toa, measure_features, Algorithm, ToaConfig, ToaSolution, Weighting};
use hrtf_graph::unwrap::{phase_delay, prealign_shifts, unwrap_frequency, unwrap_joint, unwrap_spherical_sim, PhaseField, UnwrapMethod};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::output::{hash_json, hash_set, with_config, write_csv, write_csv_with_header, write_json};
use crate::{Cli, CliError, Command, EarArg, ExperimentCommand, GridArg, GridSpec, MethodArg, SpectralArgs, SynthArgs, ToaArgs};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.oversample == 0 {
        return Err(CliError::Usage("--oversample must be at least 1".into()));
    }
    match &cli.command {
        Command::Inspect { container } => inspect(cli, container),
        Command::Toa { container, toa, dump_graph } => toa_cmd(cli, container, toa, *dump_graph),
        Command::Align { container, toa } => align_cmd(cli, container, toa),
        Command::Unwrap { container, method, prealign, ear, fft_size, bins, toa } => unwrap_cmd(cli, container, *method, *prealign, *ear, *fft_size, *bins, toa),
        Command::Experiment(e) => experiment(cli, e),
        Command::Synth(args) => synth(cli, args),
    }
}

fn load(path: &Path) -> Result<HrirSet, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("input container {} does not exist", path.display())));
    }
    Ok(load_container(path)?)
}

fn out_dir(cli: &Cli) -> Result<&Path, CliError> {
    fs::create_dir_all(&cli.out)?;
    Ok(&cli.out)
}

fn toa_config(cli: &Cli, args: &ToaArgs) -> Result<ToaConfig, CliError> {
    let config = args.config(cli.oversample);
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn base_config(cli: &Cli, command: &str, input: Option<&Path>) -> Value {
    json!({
        "command": command,
        "input": input.map(|p| p.display().to_string()),
        "seed": cli.seed,
        "oversample": cli.oversample,
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

fn inspect(cli: &Cli, container: &Path) -> Result<(), CliError> {
    let set = load(container)?;
    let hull = convex_hull_graph(&set.directions)?;
    let front = set.nearest_direction(&hrtf_graph::hrir::Direction::from_az_colat_deg(0.0, 90.0));
    let (az, colat) = set.directions[front].az_colat_deg();
    let summary = with_config(
        &base_config(cli, "inspect", Some(container)),
        json!({
            "name": set.name,
            "sample_rate_hz": set.sample_rate_hz,
            "num_directions": set.num_directions(),
            "num_samples": set.num_samples(),
            "front_index": front,
            "front_az_deg": az,
            "front_colat_deg": colat,
            "measured_snr_db": measurement_snr_db(&set),
            "hull_edges": hull.edges.len(),
            "hull_triangles": hull.triangles.len(),
        }),
    );
    println!("{}", serde_json::to_string_pretty(&summary)?);
    write_json(&out_dir(cli)?.join("inspect.json"), &summary)
}

/// Diagnostics without the timing field, which lives in `timing.json`.
fn diagnostics_value(sol: &ToaSolution) -> Result<Value, CliError> {
    let mut d = serde_json::to_value(&sol.diagnostics)?;
    if let Value::Object(m) = &mut d {
        m.remove("solve_time_s");
    }
    Ok(d)
}

fn save_aligned(dir: &Path, sol: &ToaSolution, config: &Value) -> Result<PathBuf, CliError> {
    let path = dir.join("aligned");
    save_container(&sol.aligned, &path)?;
    write_json(&path.join("config.json"), &with_config(config, json!({ "clamped_shifts": sol.diagnostics.clamped_shifts })))?;
    Ok(path)
}

fn toa_cmd(cli: &Cli, container: &Path, args: &ToaArgs, dump_graph: bool) -> Result<(), CliError> {
    let config = toa_config(cli, args)?;
    let set = load(container)?;
    let dir = out_dir(cli)?;
    let resolved = merge(base_config(cli, "toa", Some(container)), json!({ "toa": config, "dump_graph": dump_graph }));
    let start = Instant::now();
    let features = measure_features(&set, &config)?;
    let sol = estimate_from_features(&set, &features, &config)?;
    let wall = start.elapsed().as_secs_f64();
    write_csv(&dir.join("toa.csv"), &resolved, &sol.rows(&set.directions))?;
    save_aligned(dir, &sol, &resolved)?;
    write_json(&dir.join("diagnostics.json"), &with_config(&resolved, json!({ "diagnostics": diagnostics_value(&sol)? })))?;
    write_json(&dir.join("timing.json"), &json!({ "solve_time_s": sol.diagnostics.solve_time_s, "wall_s": wall }))?;
    if dump_graph {
        let assembly = assemble(&set.directions, &features, &config)?;
        let names: Vec<&str> = if assembly.graphs.len() == 1 { vec!["graph.json"] } else { vec!["graph_left.json", "graph_right.json"] };
        for (g, name) in assembly.graphs.iter().zip(names) {
            write_json(&dir.join(name), &with_config(&resolved, g.to_json()))?;
        }
    }
    log::info!("{}: objective {}", config.label(), sol.diagnostics.objective);
    Ok(())
}

fn align_cmd(cli: &Cli, container: &Path, args: &ToaArgs) -> Result<(), CliError> {
    let config = toa_config(cli, args)?;
    let set = load(container)?;
    let dir = out_dir(cli)?;
    let resolved = merge(base_config(cli, "align", Some(container)), json!({ "toa": config }));
    let sol = estimate_toa(&set, &config)?;
    save_aligned(dir, &sol, &resolved)?;
    Ok(())
}

const LONG_HEADER: &[&str] = &["direction_index", "freq_hz", "value"];

#[derive(Serialize)]
struct LongRow {
    direction_index: usize,
    freq_hz: f64,
    value: f64,
}

fn long_rows(values: &[Vec<f64>], freqs: &[f64]) -> Vec<LongRow> {
    values
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().zip(freqs).map(move |(&value, &freq_hz)| LongRow { direction_index: i, freq_hz, value }))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn unwrap_cmd(cli: &Cli, container: &Path, method: MethodArg, prealign: bool, ear: EarArg, fft_size: usize, bins: Option<usize>, args: &ToaArgs) -> Result<(), CliError> {
    if bins == Some(0) {
        return Err(CliError::Usage("--bins must be at least 1".into()));
    }
    if prealign && method != MethodArg::Joint {
        return Err(CliError::Usage("--prealign applies to the joint method only".into()));
    }
    let config = toa_config(cli, args)?;
    let set = load(container)?;
    let dir = out_dir(cli)?;
    let fft = if fft_size == 0 { set.num_samples() } else { fft_size };
    let selector = match ear {
        EarArg::Left => EarSelector::Left,
        EarArg::Right => EarSelector::Right,
    };
    let mut field = PhaseField::from_set(&set, selector, fft)?;
    if let Some(n) = bins {
        if n > field.num_bins() {
            return Err(CliError::Usage(format!("--bins {n} exceeds the {} bins of a {fft}-point FFT", field.num_bins())));
        }
        field = PhaseField::new(field.wrapped.iter().map(|r| r[..n].to_vec()).collect(), field.bin_freqs_hz[..n].to_vec(), fft)?;
    }
    let u = match method {
        MethodArg::Freq => unwrap_frequency(&field)?,
        MethodArg::Spherical => unwrap_spherical_sim(&field, &convex_hull_graph(&set.directions)?)?,
        MethodArg::Joint => {
            let hull = convex_hull_graph(&set.directions)?;
            let shifts = if prealign {
                let sol = estimate_toa(&set, &config)?;
                let tau = if ear == EarArg::Left { &sol.tau_left } else { &sol.tau_right };
                Some(prealign_shifts(tau, config.oversample_factor))
            } else {
                None
            };
            unwrap_joint(&field, &hull, shifts.as_deref())?
        }
    };
    let resolved = merge(
        base_config(cli, "unwrap", Some(container)),
        json!({
            "method": u.method.as_str(),
            "prealign": prealign,
            "ear": format!("{ear:?}").to_lowercase(),
            "fft_size": fft,
            "bins": field.num_bins(),
            "toa": if prealign { Some(config) } else { None },
            "phase_unit": "rad",
            "phase_delay_unit": "us",
        }),
    );
    write_csv_with_header(&dir.join("unwrapped_phase.csv"), &resolved, Some(LONG_HEADER), &long_rows(&u.phase, &field.bin_freqs_hz))?;
    let pd: Vec<Vec<f64>> = phase_delay(&u, &field.bin_freqs_hz)?.into_iter().map(|r| r.into_iter().map(|d| d * 1e6).collect()).collect();
    let above_dc = field.bin_freqs_hz.get(1..).unwrap_or(&[]);
    write_csv_with_header(&dir.join("phase_delay.csv"), &resolved, Some(LONG_HEADER), &long_rows(&pd, above_dc))?;
    write_json(
        &dir.join("unwrap.json"),
        &with_config(
            &resolved,
            json!({
                "sum_abs_k": u.sum_abs_k,
                "prealigned": u.prealigned,
                "num_directions": field.num_directions(),
                "num_bins": field.num_bins(),
            }),
        ),
    )
}

fn config_grid(grid: GridArg, base: ToaConfig) -> Vec<ToaConfig> {
    match grid {
        GridArg::All => ToaConfig::grid(&base),
        GridArg::Single => vec![base],
        GridArg::Noise => {
            let mut out = Vec::new();
            for algorithm in [Algorithm::Edgy, Algorithm::Ls] {
                for (use_minphase, use_cross) in [(false, false), (true, false), (false, true), (true, true)] {
                    out.push(ToaConfig { algorithm, weighting: Weighting::Exp, use_minphase, use_cross, ..base });
                }
            }
            out
        }
    }
}

fn spectral(args: &SpectralArgs) -> SpectralSettings {
    SpectralSettings { reg: args.reg, fft_size: args.fft_size, f_lo_hz: args.f_lo, f_hi_hz: args.f_hi }
}

/// Stored result of one experiment cell.
#[derive(Serialize, Deserialize)]
struct CellFile {
    cell: Value,
    rows: Vec<ReportRow>,
    details: Value,
}

struct CellOutcome {
    rows: Vec<ReportRow>,
    details: Value,
    solve_time_s: f64,
}

#[derive(Serialize)]
struct TimingRow {
    cell: String,
    label: String,
    solve_time_s: f64,
    wall_s: f64,
}

/// Runs the cells that have no stored result, in parallel, then assembles
/// the report in grid order.
fn run_cells<F>(dir: &Path, resolved: &Value, cells: &[(String, Value)], work: F) -> Result<(), CliError>
where
    F: Fn(usize) -> Result<CellOutcome, CliError> + Sync,
{
    let cell_dir = dir.join("cells");
    fs::create_dir_all(&cell_dir)?;
    let keyed: Vec<(String, PathBuf)> = cells
        .iter()
        .map(|(_, spec)| {
            let key = hash_json(spec);
            let path = cell_dir.join(format!("{key}.json"));
            (key, path)
        })
        .collect();
    let results: Vec<Result<(), CliError>> = (0..cells.len())
        .into_par_iter()
        .map(|i| {
            let (key, path) = &keyed[i];
            if let Ok(text) = fs::read_to_string(path) {
                if serde_json::from_str::<CellFile>(&text).is_ok() {
                    log::info!("cell {key} ({}) already complete", cells[i].0);
                    return Ok(());
                }
            }
            let start = Instant::now();
            let outcome = work(i)?;
            let wall = start.elapsed().as_secs_f64();
            let file = CellFile { cell: cells[i].1.clone(), rows: outcome.rows, details: outcome.details };
            // write to a temporary name first so an interrupted run leaves no half cell
            let tmp = path.with_extension("json.tmp");
            write_json(&tmp, &serde_json::to_value(&file)?)?;
            write_json(&cell_dir.join(format!("{key}.timing.json")), &json!({ "solve_time_s": outcome.solve_time_s, "wall_s": wall }))?;
            fs::rename(&tmp, path)?;
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (i, (key, path)) in keyed.iter().enumerate() {
        let file: CellFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        rows.extend(file.rows);
        let t: Value = fs::read_to_string(cell_dir.join(format!("{key}.timing.json")))
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or(Value::Null);
        timings.push(TimingRow {
            cell: key.clone(),
            label: cells[i].0.clone(),
            solve_time_s: t["solve_time_s"].as_f64().unwrap_or(f64::NAN),
            wall_s: t["wall_s"].as_f64().unwrap_or(f64::NAN),
        });
    }
    write_csv(&dir.join("report.csv"), resolved, &rows)?;
    write_json(&dir.join("report.json"), &with_config(resolved, json!({ "rows": rows })))?;
    write_csv(&dir.join("timing.csv"), resolved, &timings)?;
    Ok(())
}

fn metric_rows(reports: &[hrtf_graph::eval::MetricReport], experiment: &str) -> Vec<ReportRow> {
    reports.iter().flat_map(|r| r.rows(experiment)).filter(|r| r.metric != "solve_time_s").collect()
}

fn per_direction(reports: &[hrtf_graph::eval::MetricReport]) -> Value {
    json!(reports
        .iter()
        .map(|r| json!({ "sh_order": r.sh_order, "itd_us": r.per_direction_itd_us, "lsd_db": r.per_direction_lsd_db }))
        .collect::<Vec<_>>())
}

fn check_orders(orders: &[usize]) -> Result<(), CliError> {
    if orders.is_empty() {
        return Err(CliError::Usage("at least one SH order is required".into()));
    }
    Ok(())
}

fn experiment(cli: &Cli, cmd: &ExperimentCommand) -> Result<(), CliError> {
    match cmd {
        ExperimentCommand::Recon { container, orders, grid, toa, spectral: sp } => {
            check_orders(orders)?;
            let base = toa_config(cli, toa)?;
            let set = load(container)?;
            let dir = out_dir(cli)?;
            let configs = config_grid(*grid, base);
            let settings = spectral(sp);
            let data = hash_set(&set);
            let resolved = merge(
                base_config(cli, "experiment recon", Some(container)),
                json!({ "configs": configs, "orders": orders, "spectral": settings, "lsd_reference": LSD_REFERENCE, "data": data }),
            );
            let cells: Vec<(String, Value)> = configs
                .iter()
                .map(|c| (c.label(), json!({ "experiment": "recon", "data": data, "config": c, "orders": orders, "spectral": settings })))
                .collect();
            run_cells(dir, &resolved, &cells, |i| {
                let reports = run_alignment_orders(&set, &configs[i], orders, &settings)?;
                Ok(CellOutcome { rows: metric_rows(&reports, "recon"), details: per_direction(&reports), solve_time_s: reports[0].solve_time_s })
            })
        }
        ExperimentCommand::Noise { container, snr, orders, grid, toa, spectral: sp } => {
            check_orders(orders)?;
            if snr.is_empty() {
                return Err(CliError::Usage("at least one SNR is required".into()));
            }
            let base = toa_config(cli, toa)?;
            let set = load(container)?;
            let dir = out_dir(cli)?;
            let configs = config_grid(*grid, base);
            let settings = spectral(sp);
            let data = hash_set(&set);
            let snrs: Vec<Option<f64>> = snr.iter().map(|&s| s.is_finite().then_some(s)).collect();
            let resolved = merge(
                base_config(cli, "experiment noise", Some(container)),
                json!({ "configs": configs, "snr_db": snrs, "orders": orders, "spectral": settings, "lsd_reference": LSD_REFERENCE, "data": data }),
            );
            let mut cells = Vec::new();
            let mut index = Vec::new();
            for (k, s) in snrs.iter().enumerate() {
                for (j, c) in configs.iter().enumerate() {
                    let seed = cell_seed(cli.seed, k);
                    let label = format!("{} @ {}", c.label(), s.map_or("clean".to_string(), |v| format!("{v} dB")));
                    cells.push((label, json!({ "experiment": "noise", "data": data, "config": c, "snr_db": s, "seed": seed, "orders": orders, "spectral": settings })));
                    index.push((k, j, seed));
                }
            }
            run_cells(dir, &resolved, &cells, |i| {
                let (k, j, seed) = index[i];
                let reports = run_noise_cell(&set, snrs[k], seed, &configs[j], orders, &settings)?;
                Ok(CellOutcome { rows: metric_rows(&reports, "noise"), details: per_direction(&reports), solve_time_s: reports[0].solve_time_s })
            })
        }
        ExperimentCommand::Phase { container, methods, orders, fft_size, reg, toa } => {
            check_orders(orders)?;
            let variants = methods.iter().map(|m| parse_variant(m)).collect::<Result<Vec<_>, _>>()?;
            let base = toa_config(cli, toa)?;
            let set = load(container)?;
            let dir = out_dir(cli)?;
            let data = hash_set(&set);
            let resolved = merge(
                base_config(cli, "experiment phase", Some(container)),
                json!({ "methods": methods, "orders": orders, "fft_size": fft_size, "reg": reg, "toa": base, "data": data, "unit": "us" }),
            );
            let cells: Vec<(String, Value)> = variants
                .iter()
                .map(|v| (v.label(), json!({ "experiment": "phase", "data": data, "variant": v, "orders": orders, "fft_size": fft_size, "reg": reg, "toa": base })))
                .collect();
            run_cells(dir, &resolved, &cells, |i| {
                let exp = PhaseExperiment { variants: vec![variants[i]], sh_orders: orders.clone(), fft_size: *fft_size, reg: *reg, toa_config: base };
                let start = Instant::now();
                let curves = run_phase_delay_experiment(&set, &exp)?;
                let rows = curves.iter().flat_map(|c| c.rows()).collect();
                let details = json!(curves.iter().map(|c| json!({ "sh_order": c.sh_order, "sum_abs_k": c.sum_abs_k })).collect::<Vec<_>>());
                Ok(CellOutcome { rows, details, solve_time_s: start.elapsed().as_secs_f64() })
            })
        }
    }
}

fn parse_variant(s: &str) -> Result<PhaseVariant, CliError> {
    let (method, prealign) = match s {
        "freq" => (UnwrapMethod::FreqOnly, false),
        "spherical" => (UnwrapMethod::SphericalOnly, false),
        "joint" => (UnwrapMethod::Joint, false),
        "joint+prealign" => (UnwrapMethod::Joint, true),
        other => return Err(CliError::Usage(format!("unknown unwrapping method {other}; expected freq, spherical, joint or joint+prealign"))),
    };
    Ok(PhaseVariant { method, prealign })
}

#[derive(Serialize)]
struct TruthRow {
    index: usize,
    az_deg: f64,
    colat_deg: f64,
    tau_left_samples: f64,
    tau_right_samples: f64,
    itd_us: f64,
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<(), CliError> {
    let directions = match args.grid {
        GridSpec::Fib(n) => fibonacci_grid(n),
        GridSpec::Design(k) => icosahedral_design(k),
    };
    let params = RigidSphere {
        radius_m: args.radius,
        speed_of_sound: args.speed_of_sound,
        sample_rate_hz: args.fs,
        num_samples: args.samples,
        offset_samples: args.offset,
    };
    let syn = rigid_sphere_set(&directions, &params).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut set = syn.set.clone();
    set.name = args.name.clone();
    let mut sigma = None;
    if let Some(snr) = args.snr {
        let (noisy, s) = add_white_noise(&set, snr, cli.seed)?;
        set = noisy;
        sigma = Some(s);
    }
    let dir = out_dir(cli)?;
    let resolved = merge(base_config(cli, "synth", None), json!({ "grid": args.grid, "rigid_sphere": params, "snr_db": args.snr, "name": args.name }));
    let container = dir.join("container");
    save_container(&set, &container)?;
    let itd = syn.itd_us();
    let rows: Vec<TruthRow> = set
        .directions
        .iter()
        .enumerate()
        .map(|(index, d)| {
            let (az_deg, colat_deg) = d.az_colat_deg();
            TruthRow { index, az_deg, colat_deg, tau_left_samples: syn.tau_left[index], tau_right_samples: syn.tau_right[index], itd_us: itd[index] }
        })
        .collect();
    write_csv(&dir.join("truth.csv"), &resolved, &rows)?;
    write_json(
        &dir.join("synth.json"),
        &with_config(&resolved, json!({ "noise_sigma": sigma, "measured_snr_db": measurement_snr_db(&set), "num_directions": set.num_directions() })),
    )
}
