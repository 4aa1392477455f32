use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use cvgate_core::gates::{nsg_process_fidelity, AncillaSource, NsgParams};
use cvgate_core::optimize::{optimize_multistart, Objective, OptimizerConfig};
use cvgate_core::protocols::{
    prep_single_photon_general, two_photon_pipeline_averaged, GeneralParams, PipelineParams, ResourceState,
    StageParams, X3Grid,
};
use cvgate_core::sweep::{linear_grid, validate_grid};
use cvgate_core::{Acceptance, BeamSplitter, ModeState};

use crate::output::{format_sig12, render_csv, write_with_manifest, Row, RunInfo};
use crate::UsageError;

/// Resource state fed to every copy of the preparation chain.
#[derive(Clone, Debug, PartialEq)]
pub enum ResourceSpec {
    Fock(usize),
    Coeffs(Vec<f64>),
}

impl FromStr for ResourceSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(n) = s.strip_prefix("fock:") {
            return n
                .parse()
                .map(ResourceSpec::Fock)
                .map_err(|e| format!("bad photon number {n:?}: {e}"));
        }
        let list = s
            .strip_prefix("coeffs:")
            .or_else(|| s.strip_prefix("coeffs "))
            .unwrap_or(s);
        let coeffs = list
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("bad coefficient {c:?}: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if coeffs.len() < 2 {
            return Err("expected fock:N or at least two comma-separated coefficients".into());
        }
        Ok(ResourceSpec::Coeffs(coeffs))
    }
}

impl ResourceSpec {
    fn label(&self) -> String {
        match self {
            ResourceSpec::Fock(n) => format!("fock:{n}"),
            ResourceSpec::Coeffs(c) => format!(
                "coeffs:{}",
                c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            ),
        }
    }

    fn build(&self) -> Result<ResourceState> {
        Ok(match self {
            ResourceSpec::Fock(n) => ResourceState::fock(*n)?,
            ResourceSpec::Coeffs(c) => ResourceState::new(ModeState::from_real(c)?)?,
        })
    }
}

/// `lo:hi:steps`, inclusive at both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts[..] else {
            return Err(format!("expected Xmin:Xmax:steps, got {s:?}"));
        };
        let float = |v: &str| v.parse::<f64>().map_err(|e| format!("bad bound {v:?}: {e}"));
        Ok(SweepSpec {
            lo: float(lo)?,
            hi: float(hi)?,
            steps: steps.parse().map_err(|e| format!("bad step count {steps:?}: {e}"))?,
        })
    }
}

/// Either a single half-width or a sweep, exactly one of them.
#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct WindowArgs {
    /// Acceptance half-width of every homodyne herald.
    #[arg(long, value_name = "X")]
    pub window: Option<f64>,
    /// Evenly spaced half-widths, e.g. 0.05:0.5:10.
    #[arg(long, value_name = "XMIN:XMAX:STEPS")]
    pub sweep: Option<SweepSpec>,
}

impl WindowArgs {
    fn grid(&self) -> Result<Vec<f64>> {
        let grid = match (self.window, self.sweep) {
            (Some(x), None) => vec![x],
            (None, Some(s)) => {
                if s.steps == 0 {
                    bail!(UsageError("a sweep needs at least one step".into()));
                }
                linear_grid(s.lo, s.hi, s.steps)
            }
            _ => bail!(UsageError("give exactly one of --window and --sweep".into())),
        };
        if let Err(e) = validate_grid(&grid) {
            bail!(UsageError(e.to_string()));
        }
        Ok(grid)
    }
}

#[derive(Args, Debug, Clone)]
pub struct X3Args {
    /// Quadrature nodes over the x₃ outcome.
    #[arg(long, default_value_t = 81)]
    pub x3_nodes: usize,
    /// Integration range ±L for x₃.
    #[arg(long, default_value_t = 6.0, value_name = "L")]
    pub x3_range: f64,
}

impl X3Args {
    fn grid(&self) -> X3Grid {
        X3Grid {
            half_range: self.x3_range,
            nodes: self.x3_nodes,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct PrepArgs {
    /// fock:N, or coeffs followed by real coefficients c0,c1,...
    #[arg(long, num_args = 1..=2, default_value = "fock:2", value_name = "SPEC")]
    pub resource: Vec<String>,
    #[arg(long, default_value_t = 0.62)]
    pub ta: f64,
    #[arg(long, default_value_t = 0.79)]
    pub tb: f64,
    #[arg(long, default_value_t = 0.90)]
    pub tc: f64,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub x3: X3Args,
    /// Photon-number cutoff of the two-photon pipeline.
    #[arg(long, default_value_t = 4)]
    pub cutoff: usize,
    /// CSV output; the manifest goes to <PATH>.manifest.json.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AncillaKind {
    Ideal,
    Extracted,
}

#[derive(Args, Debug, Clone)]
pub struct NsgArgs {
    #[arg(long, value_enum, default_value_t = AncillaKind::Ideal)]
    pub ancilla: AncillaKind,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub x3: X3Args,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Success density at the Hermite root of the ancilla outcome.
    Root,
    /// Success density integrated over the ancilla outcome.
    Integrated,
}

#[derive(Args, Debug, Clone)]
pub struct OptimizeArgs {
    #[arg(long, default_value_t = 5)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ObjectiveKind::Root)]
    pub objective: ObjectiveKind,
    /// Simplex diameter at which a run stops.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// JSON output; the manifest goes to <PATH>.manifest.json.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Runs `eval` on every half-width in parallel and keeps grid order.
fn sweep(grid: &[f64], eval: impl Fn(Acceptance) -> Result<(f64, f64)> + Sync) -> Result<Vec<Row>> {
    grid.par_iter()
        .map(|&x| {
            let (fidelity, success_probability) = eval(Acceptance::window(x)?)?;
            Ok(Row {
                x,
                fidelity,
                success_probability,
            })
        })
        .collect()
}

fn report(rows: &[Row]) {
    for r in rows {
        println!(
            "X={} F={} P_S={}",
            format_sig12(r.x),
            format_sig12(r.fidelity),
            format_sig12(r.success_probability)
        );
    }
}

fn splitter(name: &str, t: f64) -> Result<BeamSplitter> {
    if !(t > 0.0 && t < 1.0) {
        bail!(UsageError(format!(
            "--{name} must lie strictly between 0 and 1, got {t}"
        )));
    }
    Ok(BeamSplitter::new(t)?)
}

pub fn prep_single_photon(args: &PrepArgs) -> Result<()> {
    let start = Instant::now();
    let grid = args.window.grid()?;
    let spec: ResourceSpec = match args.resource.join(" ").parse() {
        Ok(spec) => spec,
        Err(e) => bail!(UsageError(e)),
    };
    let resource = spec.build()?;
    let (ta, tb, tc) = (
        splitter("ta", args.ta)?,
        splitter("tb", args.tb)?,
        splitter("tc", args.tc)?,
    );
    let x3_grid = args.x3.grid();

    let (rows, path, cutoffs) = if spec == ResourceSpec::Fock(2) {
        let mut params = PipelineParams::new(args.ta, args.tb, args.tc, Acceptance::Sharp)?;
        params.x3_grid = x3_grid;
        params.cutoff = args.cutoff;
        params.validate()?;
        let rows = sweep(&grid, |acceptance| {
            let out = two_photon_pipeline_averaged(&PipelineParams { acceptance, ..params })?;
            Ok((out.fidelity(), out.success_probability))
        })?;
        (rows, "two_photon_pipeline", json!({ "photon_number": args.cutoff }))
    } else {
        let stages = resource.top_level().saturating_sub(1);
        let stage = StageParams {
            subtraction: ta,
            vacuum_removal: tb,
        };
        let mut params = GeneralParams::uniform(stages, stage, tc, Acceptance::Sharp);
        params.x3_grid = x3_grid;
        let rows = sweep(&grid, |acceptance| {
            let out = prep_single_photon_general(
                &resource,
                &GeneralParams {
                    acceptance,
                    ..params.clone()
                },
            )?;
            Ok((out.fidelity(), out.success_probability))
        })?;
        (
            rows,
            "general_chain",
            json!({ "photon_number": resource.top_level(), "stages": stages }),
        )
    };

    report(&rows);
    if let Some(out) = &args.out {
        let info = RunInfo {
            command: "prep-single-photon",
            params: json!({
                "resource": spec.label(),
                "path": path,
                "t_a": args.ta,
                "t_b": args.tb,
                "t_c": args.tc,
            }),
            cutoffs,
            grids: json!({ "half_widths": grid, "x3": x3_grid }),
        };
        write_with_manifest(out, render_csv(&rows).as_bytes(), info, start.elapsed().as_millis())?;
    }
    Ok(())
}

pub fn nsg(args: &NsgArgs) -> Result<()> {
    let start = Instant::now();
    let grid = args.window.grid()?;
    let x3_grid = args.x3.grid();
    let ancilla = match args.ancilla {
        AncillaKind::Ideal => AncillaSource::Ideal,
        AncillaKind::Extracted => {
            let mut p = PipelineParams::optimal(Acceptance::Sharp);
            p.x3_grid = x3_grid;
            p.validate()?;
            AncillaSource::Extracted(p)
        }
    };
    let base = NsgParams::new(ancilla, Acceptance::Sharp);
    let rows = sweep(&grid, |acceptance| {
        let mut params = base;
        params.projection = acceptance;
        if let AncillaSource::Extracted(p) = &mut params.ancilla {
            p.acceptance = acceptance;
        }
        let out = nsg_process_fidelity(&params)?;
        Ok((out.fidelity, out.success_probability))
    })?;

    report(&rows);
    if let Some(out) = &args.out {
        let info = RunInfo {
            command: "nsg",
            params: json!({
                "ancilla": format!("{:?}", args.ancilla).to_lowercase(),
                "t_a": base.t_a.t(),
                "t_b": base.t_b.t(),
                "extraction": match base.ancilla {
                    AncillaSource::Extracted(p) => json!({ "t_a": p.t_a.t(), "t_b": p.t_b.t(), "t_c": p.t_c.t() }),
                    AncillaSource::Ideal => serde_json::Value::Null,
                },
            }),
            cutoffs: json!({ "signal": 2, "ancilla": 1 }),
            grids: json!({
                "half_widths": grid,
                "x3": matches!(args.ancilla, AncillaKind::Extracted).then_some(x3_grid),
            }),
        };
        write_with_manifest(out, render_csv(&rows).as_bytes(), info, start.elapsed().as_millis())?;
    }
    Ok(())
}

pub fn optimize(args: &OptimizeArgs) -> Result<()> {
    let start = Instant::now();
    if args.starts == 0 {
        bail!(UsageError("--starts must be at least 1".into()));
    }
    if args.tolerance.is_nan() || args.tolerance <= 0.0 {
        bail!(UsageError("--tolerance must be positive".into()));
    }
    let config = OptimizerConfig {
        objective: match args.objective {
            ObjectiveKind::Root => Objective::AtHermiteRoot,
            ObjectiveKind::Integrated => Objective::IntegratedOverX3,
        },
        starts: args.starts,
        seed: args.seed,
        tolerance: args.tolerance,
        ..OptimizerConfig::default()
    };
    let result = optimize_multistart(&config)?;
    let best = &result.best;
    println!(
        "t_a={:.6} t_b={:.6} t_c={:.6} objective={:.9} iterations={} converged={}",
        best.t_a, best.t_b, best.t_c, best.objective, best.iterations, best.converged
    );
    if let Some(out) = &args.out {
        let manifest_name = crate::output::manifest_path(out)
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let body = json!({
            "schema_version": crate::output::SCHEMA_VERSION,
            "manifest": manifest_name,
            "config": config,
            "result": result,
        });
        let mut text = serde_json::to_string_pretty(&body)?;
        text.push('\n');
        let info = RunInfo {
            command: "optimize",
            params: serde_json::to_value(config)?,
            cutoffs: json!({ "photon_number": PipelineParams::optimal(Acceptance::Sharp).cutoff }),
            grids: json!({ "x3": (config.objective == Objective::IntegratedOverX3).then(X3Grid::default) }),
        };
        write_with_manifest(out, text.as_bytes(), info, start.elapsed().as_millis())?;
    }
    Ok(())
}
