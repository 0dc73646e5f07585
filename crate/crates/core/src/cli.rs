//! The `msimg` command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::forward::{add_noise_indexed, read_csv, sample_band, write_csv_file};
use crate::imaging::{
    contrast_metric, dilate_cells, evaluate_field, mask_strip, mask_theta, read_field_csv, FieldMeta, ScalarField,
    SearchGrid,
};
use crate::indicator::{direction_filter, reciprocal, DirectionProbe, FilterOutcome, FilterStatus};
use crate::spectral::{build_operator, f_sharp_spectrum, SpectrumMode};
use crate::trajectory::{observable_set_arc, observable_set_line, AngleSet, Direction, Orbit, ThetaDomain, Trajectory};

/// Environment variable that replaces the configured noise seed.
pub const SEED_ENV: &str = "MSIMG_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "msimg",
    version,
    about = "Moving point source imaging from multi-frequency far-field data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize far-field data, one CSV per direction
    Synth(CommonArgs),
    /// Report observability of every configured direction
    Classify(CommonArgs),
    /// Evaluate indicator fields from previously synthesized data
    Image(CommonArgs),
    /// Compare indicator fields with the analytic strips
    Compare(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment configuration (JSON)
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the configuration
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Eigensystem construction; overrides the configuration
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<SpectrumMode>,
    /// Worker threads for grid evaluation
    #[arg(long)]
    pub threads: Option<usize>,
}

fn parse_mode(s: &str) -> std::result::Result<SpectrumMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    let common = match command {
        Command::Synth(c) | Command::Classify(c) | Command::Image(c) | Command::Compare(c) => c,
    };
    let ctx = Context::new(common)?;
    let work = || match command {
        Command::Synth(_) => cmd_synth(&ctx),
        Command::Classify(_) => cmd_classify(&ctx),
        Command::Image(_) => cmd_image(&ctx),
        Command::Compare(_) => cmd_compare(&ctx),
    };
    match common.threads {
        None => work(),
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?
            .install(work),
    }
}

/// A validated experiment plus where its files go.
pub struct Context {
    pub exp: Experiment,
    pub out: PathBuf,
}

impl Context {
    pub fn new(args: &CommonArgs) -> Result<Self> {
        let mut exp = ExperimentConfig::load(&args.config)?.build()?;
        if let Some(mode) = args.mode {
            exp.mode = mode;
        }
        if let Ok(raw) = std::env::var(SEED_ENV) {
            let seed: u64 = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}=`{raw}` is not an unsigned integer")))?;
            match exp.noise.as_mut() {
                Some(noise) => noise.seed = seed,
                None => log::debug!("{SEED_ENV} set but the configuration has no noise"),
            }
        }
        let out = args
            .out
            .clone()
            .or_else(|| exp.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out).map_err(|e| Error::io(format!("cannot create {}", out.display()), e))?;
        Ok(Self { exp, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Lattices the fields live on: the grid itself or its slices.
    fn field_grids(&self) -> Result<Vec<(String, SearchGrid)>> {
        if self.exp.slices.is_empty() {
            return Ok(vec![(String::new(), self.exp.grid.clone())]);
        }
        self.exp
            .slices
            .iter()
            .enumerate()
            .map(|(s, spec)| Ok((format!("_slice{}", s + 1), self.exp.grid.slice(*spec)?)))
            .collect()
    }
}

pub fn farfield_name(j: usize) -> String {
    format!("farfield_{}.csv", j + 1)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("cannot write {}", path.display()), e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(format!("cannot create {}", path.display()), e))?;
    let mut buf = BufWriter::new(file);
    f(&mut buf)
        .and_then(|_| buf.flush())
        .map_err(|e| Error::io(format!("cannot write {}", path.display()), e))
}

/// Writes to stdout, ignoring a closed pipe.
fn say(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn angles(dir: &Direction) -> String {
    match dir.phi() {
        Some(phi) => format!("θ={:.6} φ={:.6}", dir.theta(), phi),
        None => format!("θ={:.6}", dir.theta()),
    }
}

pub fn cmd_synth(ctx: &Context) -> Result<()> {
    let exp = &ctx.exp;
    for (j, dir) in exp.directions.iter().enumerate() {
        let clean = sample_band(&exp.trajectory, dir, &exp.band)?;
        match exp.noise {
            Some(noise) if noise.delta > 0.0 => {
                let noisy = add_noise_indexed(&clean, &noise, j as u64);
                write_csv_file(&noisy, &ctx.path(&farfield_name(j)))?;
                write_csv_file(&clean, &ctx.path(&format!("farfield_{}_clean.csv", j + 1)))?;
            }
            _ => write_csv_file(&clean, &ctx.path(&farfield_name(j)))?,
        }
        log::info!("direction {} ({}) synthesized", j + 1, angles(dir));
    }
    say(&format!(
        "wrote {} far-field file(s) to {}\n",
        exp.directions.len(),
        ctx.out.display()
    ));
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyRow {
    pub index: usize,
    pub theta: f64,
    pub phi: Option<f64>,
    pub xi_min: f64,
    pub xi_max: f64,
    pub width: f64,
    pub duration: f64,
    pub class: String,
    /// Verdict of the closed-form rule for lines and unit arcs, when one applies.
    pub closed_form: Option<String>,
}

/// Closed-form observability for lines and counter-clockwise unit arcs.
pub fn closed_form_verdict(traj: &Trajectory, dir: &Direction) -> Option<bool> {
    match traj.orbit() {
        Orbit::Line { speed, axis, .. } if *speed > 0.0 => {
            if traj.dim() == 2 {
                let alpha = axis[1].atan2(axis[0]);
                observable_set_line(*speed, alpha)
                    .ok()
                    .map(|set| in_closed_set(&set, dir.theta()))
            } else {
                let c = dir.vector().dot(axis);
                Some(c >= 0.0 || speed * c <= -2.0)
            }
        }
        Orbit::Arc {
            radius, rate, phase, ..
        } if *radius == 1.0 && *rate == 1.0 && *phase == 0.0 => observable_set_arc(traj.interval())
            .ok()
            .map(|set| in_closed_set(&set, dir.theta())),
        _ => None,
    }
}

/// Membership that also accepts angles a rounding error away from an endpoint.
fn in_closed_set(set: &AngleSet, theta: f64) -> bool {
    set.contains(theta) || set.distance_to_boundary(theta) < 1e-9
}

fn verdict_name(observable: bool) -> String {
    if observable { "observable" } else { "non-observable" }.to_string()
}

pub fn classify_rows(exp: &Experiment) -> Vec<ClassifyRow> {
    exp.directions
        .iter()
        .enumerate()
        .map(|(j, dir)| {
            let r = exp.trajectory.xi_extrema(dir);
            ClassifyRow {
                index: j + 1,
                theta: dir.theta(),
                phi: dir.phi(),
                xi_min: r.xi_min,
                xi_max: r.xi_max,
                width: r.width,
                duration: r.duration,
                class: r.class.to_string(),
                closed_form: closed_form_verdict(&exp.trajectory, dir).map(verdict_name),
            }
        })
        .collect()
}

pub fn cmd_classify(ctx: &Context) -> Result<()> {
    let rows = classify_rows(&ctx.exp);
    let mut csv = String::from("j,theta,phi,xi_min,xi_max,width,T,class,closed_form\n");
    let mut table = format!(
        "{:>3} {:>10} {:>10} {:>12} {:>12} {:>10} {:>8}  {:<15} {}\n",
        "j", "theta", "phi", "xi_min", "xi_max", "width", "T", "class", "closed_form"
    );
    for r in &rows {
        let phi = r.phi.map(|p| format!("{p:.16e}")).unwrap_or_default();
        let closed_form = r.closed_form.clone().unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{:.16e},{phi},{:.16e},{:.16e},{:.16e},{:.16e},{},{closed_form}",
            r.index, r.theta, r.xi_min, r.xi_max, r.width, r.duration, r.class
        );
        let _ = writeln!(
            table,
            "{:>3} {:>10.6} {:>10} {:>12.6} {:>12.6} {:>10.6} {:>8.4}  {:<15} {}",
            r.index,
            r.theta,
            r.phi.map(|p| format!("{p:.6}")).unwrap_or_else(|| "-".into()),
            r.xi_min,
            r.xi_max,
            r.width,
            r.duration,
            r.class,
            r.closed_form.as_deref().unwrap_or("-")
        );
    }
    write_text(&ctx.path("classify.csv"), &csv)?;
    say(&table);
    for r in &rows {
        if let Some(closed_form) = &r.closed_form {
            if *closed_form != r.class {
                log::warn!(
                    "direction {}: sampled class {} but closed form says {closed_form}",
                    r.index,
                    r.class
                );
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionSummary {
    pub index: usize,
    pub theta: f64,
    pub phi: Option<f64>,
    pub min_picard_sum: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageSummary {
    pub name: String,
    pub mode: &'static str,
    pub threshold: f64,
    pub directions: Vec<DirectionSummary>,
    pub dropped_count: usize,
    pub status: FilterStatus,
    pub fields: Vec<String>,
}

/// Builds one probe per direction from the far-field files in the output directory.
pub fn load_probes(ctx: &Context) -> Result<Vec<DirectionProbe>> {
    let exp = &ctx.exp;
    exp.directions
        .iter()
        .enumerate()
        .map(|(j, dir)| {
            let path = ctx.path(&farfield_name(j));
            let file = File::open(&path).map_err(|e| Error::io(format!("cannot open {}", path.display()), e))?;
            let samples = read_csv(BufReader::new(file), dir, &exp.band).map_err(|e| annotate(e, &path))?;
            let spectrum = f_sharp_spectrum(&build_operator(&samples), exp.mode)?;
            spectrum.dump(&ctx.out, &format!("spectrum_{}", j + 1))?;
            let probe = DirectionProbe::new(spectrum, *dir, *exp.trajectory.interval(), &exp.band);
            Ok(match exp.cutoff {
                Some(c) => probe.with_cutoff(c),
                None => probe,
            })
        })
        .collect()
}

fn annotate(e: Error, path: &Path) -> Error {
    match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    }
}

fn write_field(ctx: &Context, field: &ScalarField, stem: &str, written: &mut Vec<String>) -> Result<()> {
    let csv = format!("{stem}.csv");
    write_with(&ctx.path(&csv), |b| field.write_csv(b))?;
    written.push(csv);
    if field.grid.dim() == 2 {
        let pgm = format!("{stem}.pgm");
        write_with(&ctx.path(&pgm), |b| field.write_pgm(b))?;
        written.push(pgm);
    }
    Ok(())
}

pub fn cmd_image(ctx: &Context) -> Result<()> {
    let exp = &ctx.exp;
    let probes = load_probes(ctx)?;
    let grids = ctx.field_grids()?;
    let mut written = Vec::new();

    // sums[j][g] holds the Picard sums of direction j on grid g
    let mut sums: Vec<Vec<ScalarField>> = Vec::with_capacity(probes.len());
    for (j, probe) in probes.iter().enumerate() {
        let mut per_grid = Vec::with_capacity(grids.len());
        for (suffix, grid) in &grids {
            let mut meta = FieldMeta::with_directions(format!("W direction {}{suffix}", j + 1), &[*probe.direction()]);
            meta.mode = Some(exp.mode.name().to_string());
            meta.band = Some((exp.band.k_max(), exp.band.count()));
            let sum = evaluate_field(|y| probe.sum(y), grid, meta);
            let mut w = sum.clone();
            w.values.iter_mut().for_each(|v| *v = reciprocal(*v));
            write_field(ctx, &w, &format!("field_{}{suffix}", j + 1), &mut written)?;
            per_grid.push(sum);
        }
        sums.push(per_grid);
    }

    let flat: Vec<Vec<f64>> = sums
        .iter()
        .map(|per_grid| per_grid.iter().flat_map(|f| f.values.iter().copied()).collect())
        .collect();
    let outcome: FilterOutcome = direction_filter(&flat, exp.threshold);

    if probes.len() > 1 && outcome.status == FilterStatus::Ok {
        let kept_dirs: Vec<Direction> = outcome.kept.iter().map(|&j| exp.directions[j]).collect();
        for (g, (suffix, grid)) in grids.iter().enumerate() {
            let values = (0..grid.len())
                .map(|i| reciprocal(outcome.kept.iter().map(|&j| sums[j][g].values[i]).sum()))
                .collect();
            let mut meta = FieldMeta::with_directions(format!("W multi{suffix}"), &kept_dirs);
            meta.mode = Some(exp.mode.name().to_string());
            meta.band = Some((exp.band.k_max(), exp.band.count()));
            let field = ScalarField::new(grid.clone(), values, meta)?;
            write_field(ctx, &field, &format!("field_multi{suffix}"), &mut written)?;
        }
    }

    let summary = ImageSummary {
        name: exp.name.clone(),
        mode: exp.mode.name(),
        threshold: exp.threshold,
        directions: exp
            .directions
            .iter()
            .enumerate()
            .map(|(j, d)| DirectionSummary {
                index: j + 1,
                theta: d.theta(),
                phi: d.phi(),
                min_picard_sum: outcome.minima[j],
                kept: outcome.kept.contains(&j),
            })
            .collect(),
        dropped_count: outcome.dropped.len(),
        status: outcome.status,
        fields: written,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_text(&ctx.path("image_summary.json"), &json)?;
    say(&format!(
        "imaged {} direction(s); filter dropped {} of {} (threshold {:.3e})\n",
        probes.len(),
        outcome.dropped.len(),
        probes.len(),
        exp.threshold
    ));
    if outcome.status == FilterStatus::AllDropped {
        eprintln!("warning: every direction was dropped; no combined field written");
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldComparison {
    pub field: String,
    pub direction: Option<usize>,
    pub theta_domain: bool,
    pub observable: bool,
    pub strip_lo: Option<f64>,
    pub strip_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inside_median: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outside_median: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax_in_mask: Option<bool>,
    /// Argmax within one lattice cell of the mask.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax_near_mask: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn compare_against(field: &ScalarField, mask: &[bool], margin: f64, base: FieldComparison) -> FieldComparison {
    let mut out = base;
    if !mask.iter().any(|m| *m) {
        out.note = Some("oracle mask is empty on this grid".into());
        return out;
    }
    let arg = field.argmax();
    out.argmax_in_mask = Some(mask[arg]);
    out.argmax_near_mask = Some(dilate_cells(&field.grid, mask, 1)[arg]);
    match contrast_metric(field, mask, margin) {
        Ok(c) => {
            out.inside_median = Some(c.inside_median);
            out.outside_median = Some(c.outside_median);
            out.ratio = Some(c.ratio);
        }
        Err(e) => out.note = Some(e.to_string()),
    }
    out
}

fn load_field(ctx: &Context, name: &str, grid: &SearchGrid) -> Result<ScalarField> {
    let path = ctx.path(name);
    let file = File::open(&path).map_err(|e| Error::io(format!("cannot open {}", path.display()), e))?;
    read_field_csv(BufReader::new(file), grid, FieldMeta::default()).map_err(|e| annotate(e, &path))
}

pub fn compare_fields(ctx: &Context) -> Result<Vec<FieldComparison>> {
    let exp = &ctx.exp;
    let traj = &exp.trajectory;
    let mut results = Vec::new();
    for (suffix, grid) in ctx.field_grids()? {
        for (j, dir) in exp.directions.iter().enumerate() {
            let name = format!("field_{}{suffix}.csv", j + 1);
            let field = load_field(ctx, &name, &grid)?;
            let strip = traj.strip(dir);
            let base = FieldComparison {
                field: name,
                direction: Some(j + 1),
                theta_domain: false,
                observable: !strip.empty,
                strip_lo: (!strip.empty).then_some(strip.lo),
                strip_hi: (!strip.empty).then_some(strip.hi),
                inside_median: None,
                outside_median: None,
                ratio: None,
                argmax_in_mask: None,
                argmax_near_mask: None,
                note: None,
            };
            if strip.empty {
                results.push(FieldComparison {
                    note: Some("non-observable direction: empty strip".into()),
                    ..base
                });
                continue;
            }
            results.push(compare_against(&field, &mask_strip(&grid, &strip), exp.margin, base));
        }
        let name = format!("field_multi{suffix}.csv");
        if exp.directions.len() > 1 && ctx.path(&name).exists() {
            let field = load_field(ctx, &name, &grid)?;
            let domain = ThetaDomain::new(traj, &exp.directions)?;
            let base = FieldComparison {
                field: name,
                direction: None,
                theta_domain: true,
                observable: !domain.is_empty(),
                strip_lo: None,
                strip_hi: None,
                inside_median: None,
                outside_median: None,
                ratio: None,
                argmax_in_mask: None,
                argmax_near_mask: None,
                note: None,
            };
            results.push(compare_against(&field, &mask_theta(&grid, &domain), exp.margin, base));
        }
    }
    Ok(results)
}

pub fn cmd_compare(ctx: &Context) -> Result<()> {
    let results = compare_fields(ctx)?;
    let json = serde_json::to_string_pretty(&results).expect("comparison serializes");
    write_text(&ctx.path("compare.json"), &json)?;
    say(&format!("{json}\n"));
    Ok(())
}
