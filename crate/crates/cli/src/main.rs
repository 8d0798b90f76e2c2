//! Command-line front end: simulation, reduction evaluation, fold analysis,
//! classification, periodic orbits, slow manifolds, canards, continuation
//! and parameter sweeps, with deterministic CSV/JSON outputs.

mod config;
mod io;


use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use burster_core::bvp::{
    continue_branch, detect_canards, sweep_manifold, BranchOptions, Side, SweepOptions,
};
use burster_core::folded;
use burster_core::geometry::geometry;
use burster_core::hypotheses::check_hypotheses;
use burster_core::integrate::{integrate, IntegrateOptions, Section};
use burster_core::mmo::{self, OrbitOptions, Thresholds};
use burster_core::params::ParameterSet;
use burster_core::reductions::{build_field, FieldExtras, FieldTag, VectorField};
use burster_core::sections;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "burster", version, about = "Phantom-burster MMO toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Parameter overrides, e.g. --param a2=0.82 (repeatable).
    #[arg(long = "param", global = true)]
    params: Vec<String>,
    /// Shortcut for --param eps=...
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Shortcut for --param delta=...
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Output directory (also via BURSTER_OUTPUT_DIR).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Absolute integration tolerance override.
    #[arg(long, global = true)]
    tol_abs: Option<f64>,
    /// Relative integration tolerance override.
    #[arg(long, global = true)]
    tol_rel: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a reduced field and emit CSV plus a JSON event log.
    Simulate(SimulateArgs),
    /// Print the coefficients of a reduction and optionally evaluate it.
    Reduce(ReduceArgs),
    /// Derived fold geometry plus the folded-singularity classification.
    Geometry,
    /// Check the structural hypotheses on the parameters.
    Check,
    /// Folded-singularity analyses.
    Folded(FoldedArgs),
    /// Way-in/way-out exit for an entry value (alias of `folded wiwo`).
    Wiwo(WiwoArgs),
    /// Rotation-sector prediction (alias of `folded sectors`).
    Sectors(WiwoArgs),
    /// Surge contraction constant (alias of `folded c3`).
    C3,
    /// Expansion constant (alias of `folded c4`).
    C4,
    /// Return-map contraction condition (alias of `folded h5`).
    H5,
    /// Classify a trajectory CSV into pulses / surge / pause phases.
    Classify(ClassifyArgs),
    /// Locate the attracting periodic orbit via the return map.
    Periodic(PeriodicArgs),
    /// Sweep the attracting/repelling slow manifolds of the local form.
    Manifolds(ManifoldArgs),
    /// Detect secondary canards from the manifold traces.
    Canards(ManifoldArgs),
    /// Pseudo-arclength continuation of the periodic orbit in a2.
    Continue(ContinueArgs),
    /// Grid sweep: classify the attractor over a parameter grid.
    Sweep,
}

#[derive(Args)]
struct SimulateArgs {
    /// Field tag: full4d, threescale3d, surgeplanar, boundarylayer3d,
    /// desingularizedreduced, normalformlocal, chartk1,
    /// chartk1centermanifold, chartk2, rectifiedk2.
    #[arg(long, default_value = "full4d")]
    field: String,
    #[arg(long, default_value_t = 20.0)]
    t_end: f64,
    /// Initial state, comma separated; defaults per field.
    #[arg(long)]
    y0: Option<String>,
    /// Frozen Y for the boundary-layer field.
    #[arg(long)]
    frozen_y: Option<f64>,
    /// Record crossings of the named flow sections (full system only).
    #[arg(long, default_value_t = false)]
    with_sections: bool,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    tag: String,
    /// Evaluate the field at this state (comma separated).
    #[arg(long)]
    at: Option<String>,
    #[arg(long)]
    frozen_y: Option<f64>,
}

#[derive(Args)]
struct FoldedArgs {
    #[command(subcommand)]
    what: FoldedSub,
}

#[derive(Subcommand)]
enum FoldedSub {
    Classify,
    Wiwo(WiwoArgs),
    Sectors(WiwoArgs),
    C3,
    C4,
    H5,
}

#[derive(Args, Clone)]
struct WiwoArgs {
    /// Entry value X0 < 0 in the fold-region window.
    #[arg(long, allow_hyphen_values = true)]
    x0: f64,
}

#[derive(Args)]
struct ClassifyArgs {
    /// CSV with header t,x,y,X (an extra Y column is ignored).
    #[arg(long)]
    input: String,
}

#[derive(Args)]
struct PeriodicArgs {
    /// Seed state, comma separated (default: a generic basin point).
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Args)]
struct ManifoldArgs {
    /// attracting | repelling | both
    #[arg(long, default_value = "both")]
    side: String,
    #[arg(long)]
    s_max: Option<f64>,
    #[arg(long)]
    n_mesh: Option<usize>,
}

#[derive(Args)]
struct ContinueArgs {
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long)]
    n_mesh: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn load_config(common: &Common) -> Result<(RunConfig, String)> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    cfg.apply_overrides(&common.params)?;
    let mut p = cfg.params();
    if let Some(e) = common.eps {
        p.eps = e;
    }
    if let Some(d) = common.delta {
        p.delta = d;
    }
    p.validate()?;
    cfg.params = Some(p);
    if common.tol_abs.is_some() || common.tol_rel.is_some() {
        let base = cfg.tol();
        cfg.tolerances = Some(config::TolConfig {
            abs: common.tol_abs.unwrap_or(base.abs),
            rel: common.tol_rel.unwrap_or(base.rel),
        });
        cfg.validate()?;
    }
    let canonical = serde_json::to_string(&cfg)?;
    Ok((cfg, canonical))
}

fn parse_state(s: &str, dim: usize) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
    let vals = vals.context("parsing state vector")?;
    if vals.len() != dim {
        bail!("state has {} components, field needs {dim}", vals.len());
    }
    Ok(vals)
}

fn default_state(tag: FieldTag, p: &ParameterSet) -> Vec<f64> {
    let g2 = burster_core::cubics::g(p, -2.0);
    match tag {
        FieldTag::Full4D => vec![0.5, 0.5, -2.0, g2],
        FieldTag::ThreeScale3D => vec![0.5, 0.5, -2.0],
        FieldTag::SurgePlanar => vec![-2.5, 2.2],
        FieldTag::BoundaryLayer3D => vec![0.5, 0.5, -2.0],
        FieldTag::DesingularizedReduced => vec![0.5, -2.0],
        FieldTag::NormalFormLocal => vec![1.0, -1.1, -0.05],
        FieldTag::ChartK1 => vec![1.0, 0.3, -0.3, 0.5],
        FieldTag::ChartK1CenterManifold => vec![0.3, -0.3, 0.5],
        FieldTag::ChartK2 => vec![0.5, -0.3, -0.4],
        FieldTag::RectifiedK2 => vec![0.1, 0.0, -0.4],
    }
}

fn state_names(tag: FieldTag) -> Vec<&'static str> {
    match tag {
        FieldTag::Full4D => vec!["x", "y", "X", "Y"],
        FieldTag::ThreeScale3D | FieldTag::BoundaryLayer3D | FieldTag::NormalFormLocal => {
            vec!["x", "y", "X"]
        }
        FieldTag::SurgePlanar | FieldTag::DesingularizedReduced => vec!["x", "X"],
        FieldTag::ChartK1 => vec!["x1", "r1", "X1", "eps1"],
        FieldTag::ChartK1CenterManifold => vec!["r1", "X1", "eps1"],
        FieldTag::ChartK2 => vec!["x2", "y2", "X2"],
        FieldTag::RectifiedK2 => vec!["x", "y", "X"],
    }
}

fn run(cli: Cli) -> Result<()> {
    let (cfg, canonical) = load_config(&cli.common)?;
    let p = cfg.params();
    // Bare --param entries name the continuation parameter for `continue`;
    // anywhere else they are a usage mistake.
    let bare: Vec<&String> = cli.common.params.iter().filter(|s| !s.contains('=')).collect();
    if !bare.is_empty() && !matches!(cli.command, Command::Continue(_)) {
        bail!("--param takes key=value overrides here; got `{}`", bare[0]);
    }
    match cli.command {
        Command::Simulate(args) => simulate(&cli.common, &cfg, &canonical, &p, args),
        Command::Reduce(args) => reduce(&p, args),
        Command::Geometry => cmd_geometry(&p),
        Command::Check => {
            let rep = check_hypotheses(&p)?;
            io::print_json(&rep)
        }
        Command::Folded(f) => match f.what {
            FoldedSub::Classify => cmd_folded_classify(&p),
            FoldedSub::Wiwo(w) => cmd_wiwo(&p, w.x0),
            FoldedSub::Sectors(w) => cmd_sectors(&p, w.x0),
            FoldedSub::C3 => cmd_c3(&p),
            FoldedSub::C4 => cmd_c4(&p),
            FoldedSub::H5 => cmd_h5(&p),
        },
        Command::Wiwo(w) => cmd_wiwo(&p, w.x0),
        Command::Sectors(w) => cmd_sectors(&p, w.x0),
        Command::C3 => cmd_c3(&p),
        Command::C4 => cmd_c4(&p),
        Command::H5 => cmd_h5(&p),
        Command::Classify(args) => cmd_classify(&p, args),
        Command::Periodic(args) => cmd_periodic(&cli.common, &cfg, &p, args),
        Command::Manifolds(args) => cmd_manifolds(&cli.common, &cfg, &canonical, &p, args, false),
        Command::Canards(args) => cmd_manifolds(&cli.common, &cfg, &canonical, &p, args, true),
        Command::Continue(args) => cmd_continue(&cli.common, &cfg, &canonical, &p, args),
        Command::Sweep => cmd_sweep(&cli.common, &cfg, &p),
    }
}

fn simulate(
    common: &Common,
    cfg: &RunConfig,
    canonical: &str,
    p: &ParameterSet,
    args: SimulateArgs,
) -> Result<()> {
    let tag = FieldTag::parse(&args.field)?;
    let extras = FieldExtras { frozen_y_reg: args.frozen_y };
    let field = build_field(tag, p, extras)?;
    let y0 = match args.y0 {
        Some(s) => parse_state(&s, field.dim())?,
        None => default_state(tag, p),
    };
    let mut secs: Vec<Section> = vec![];
    if args.with_sections {
        if tag != FieldTag::Full4D {
            bail!("--with-sections requires the full system");
        }
        let geom = geometry(p)?;
        let eta = cfg.eta();
        secs.push(sections::sigma_in(&geom, eta, 0));
        secs.push(sections::sigma_fold(&geom, 0));
        secs.push(sections::sigma_surge(p, &geom, eta, 0)?);
        secs.push(sections::sigma_endsurge(p, &geom, eta, 0)?);
    }
    let opts = IntegrateOptions { tol: cfg.tol(), ..Default::default() };
    let traj = integrate(&field, &y0, 0.0, args.t_end, &secs, &opts)?;
    let dir = io::out_dir(common.out.as_deref(), cfg.output_dir.as_deref());
    let mut header = vec!["t"];
    header.extend(state_names(tag));
    let rows: Vec<Vec<f64>> = traj
        .ts
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| {
            let mut row = vec![*t];
            row.extend_from_slice(s);
            row
        })
        .collect();
    let csv = dir.join("trajectory.csv");
    io::write_csv(&csv, &header, &rows)?;
    io::write_json(&dir.join("events.json"), &traj.events)?;
    io::write_manifest(&dir, "simulate", canonical)?;
    println!(
        "wrote {} samples to {} ({} events)",
        traj.len(),
        csv.display(),
        traj.events.len()
    );
    Ok(())
}

fn reduce(p: &ParameterSet, args: ReduceArgs) -> Result<()> {
    let tag = FieldTag::parse(&args.tag)?;
    let extras = FieldExtras { frozen_y_reg: args.frozen_y };
    let field = build_field(tag, p, extras)?;
    #[derive(Serialize)]
    struct Out {
        tag: String,
        dim: usize,
        coefficients: burster_core::reductions::LocalCoefficients,
        eval: Option<EvalOut>,
    }
    #[derive(Serialize)]
    struct EvalOut {
        state: Vec<f64>,
        derivative: Vec<f64>,
        singular_loci: Vec<(String, f64)>,
    }
    let eval = match args.at {
        Some(s) => {
            let state = parse_state(&s, field.dim())?;
            let mut out = vec![0.0; field.dim()];
            field.eval(&state, &mut out)?;
            let loci = field
                .singular_locus_values(&state)
                .into_iter()
                .map(|(n, v)| (n.to_string(), v))
                .collect();
            Some(EvalOut { state, derivative: out, singular_loci: loci })
        }
        None => None,
    };
    io::print_json(&Out {
        tag: format!("{tag}"),
        dim: field.dim(),
        coefficients: field.coefficients(),
        eval,
    })
}

fn cmd_geometry(p: &ParameterSet) -> Result<()> {
    let geom = geometry(p)?;
    let fs = folded::classify(p, p.delta)?;
    #[derive(Serialize)]
    struct Out {
        geometry: burster_core::FoldGeometry,
        folded_singularity: folded::FoldedSingularity,
    }
    io::print_json(&Out { geometry: geom, folded_singularity: fs })
}

fn cmd_folded_classify(p: &ParameterSet) -> Result<()> {
    io::print_json(&folded::classify(p, p.delta)?)
}

fn cmd_wiwo(p: &ParameterSet, x0: f64) -> Result<()> {
    #[derive(Serialize)]
    struct Out {
        x0: f64,
        x_star: f64,
    }
    let x_star = folded::wiwo(x0, p)?;
    io::print_json(&Out { x0, x_star })
}

fn cmd_sectors(p: &ParameterSet, x0: f64) -> Result<()> {
    io::print_json(&folded::rotation_sector(x0, p, p.delta)?)
}

fn cmd_c3(p: &ParameterSet) -> Result<()> {
    #[derive(Serialize)]
    struct Out {
        c3: f64,
    }
    io::print_json(&Out { c3: folded::contraction_c3(p)? })
}

fn cmd_c4(p: &ParameterSet) -> Result<()> {
    #[derive(Serialize)]
    struct Out {
        c4: f64,
    }
    io::print_json(&Out { c4: folded::expansion_c4(p)? })
}

fn cmd_h5(p: &ParameterSet) -> Result<()> {
    io::print_json(&folded::check_h5(p)?)
}

fn cmd_classify(p: &ParameterSet, args: ClassifyArgs) -> Result<()> {
    let (header, cols) = io::read_csv_columns(&args.input)?;
    let col = |name: &str| -> Result<&Vec<f64>> {
        header
            .iter()
            .position(|h| h == name)
            .map(|i| &cols[i])
            .ok_or_else(|| anyhow!("column `{name}` missing in {}", args.input))
    };
    let ts = col("t")?;
    let xs = col("x")?;
    let ys = col("y")?;
    let xr = col("X")?;
    let geom = geometry(p)?;
    let thr = Thresholds::from_geometry(&geom);
    let sig = mmo::classify_series(ts, xs, ys, xr, &geom, &thr)?;
    io::print_json(&sig)
}

fn cmd_periodic(common: &Common, cfg: &RunConfig, p: &ParameterSet, args: PeriodicArgs) -> Result<()> {
    let seed = match args.seed {
        Some(s) => parse_state(&s, 4)?,
        None => default_state(FieldTag::Full4D, p),
    };
    let opts = OrbitOptions { tol: cfg.tol().tighter(1.0), eta: cfg.eta(), ..Default::default() };
    let orbit = mmo::find_periodic(p, &seed, &opts)?;
    let (_, traj) = mmo::return_map(p, &orbit.anchor, &opts)?;
    let dir = io::out_dir(common.out.as_deref(), cfg.output_dir.as_deref());
    let rows: Vec<Vec<f64>> = traj
        .ts
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| {
            let mut row = vec![*t - traj.t_start()];
            row.extend_from_slice(s);
            row
        })
        .collect();
    io::write_csv(&dir.join("period.csv"), &["t", "x", "y", "X", "Y"], &rows)?;
    io::print_json(&orbit)?;
    println!("wrote one period to {}", dir.join("period.csv").display());
    Ok(())
}

fn cmd_manifolds(
    common: &Common,
    cfg: &RunConfig,
    canonical: &str,
    p: &ParameterSet,
    args: ManifoldArgs,
    canards: bool,
) -> Result<()> {
    let geom = geometry(p)?;
    let mut opts = SweepOptions::default();
    if let Some(s) = args.s_max {
        opts.s_abs_max = Some(s);
    }
    if let Some(n) = args.n_mesh {
        opts.n_mesh = n;
    }
    let dir = io::out_dir(common.out.as_deref(), cfg.output_dir.as_deref());
    let sides: Vec<Side> = match args.side.as_str() {
        "attracting" | "a" => vec![Side::Attracting],
        "repelling" | "r" => vec![Side::Repelling],
        "both" => vec![Side::Attracting, Side::Repelling],
        other => bail!("unknown side `{other}`"),
    };
    let mut fams = vec![];
    for side in sides {
        let fam = sweep_manifold(p, &geom, side, &opts)?;
        let name = match side {
            Side::Attracting => "attracting",
            Side::Repelling => "repelling",
        };
        // Trace polyline in the end section.
        let trace_rows: Vec<Vec<f64>> = fam
            .members
            .iter()
            .zip(&fam.trace)
            .map(|(m, t)| vec![m.s, t[0], t[1]])
            .collect();
        io::write_csv(&dir.join(format!("{name}_trace.csv")), &["s", "x", "y"], &trace_rows)?;
        // All segments, one block per member.
        let basis = burster_core::bvp::GaussBasis::new();
        let mut seg_rows: Vec<Vec<f64>> = vec![];
        for (idx, m) in fam.members.iter().enumerate() {
            let (ts, states) = m.solution.sample_series(&basis, 2);
            for (t, s) in ts.iter().zip(&states) {
                seg_rows.push(vec![idx as f64, m.s, *t, s[0], s[1], s[2]]);
            }
        }
        io::write_csv(
            &dir.join(format!("{name}_segments.csv")),
            &["segment", "s", "t", "x", "y", "X"],
            &seg_rows,
        )?;
        #[derive(Serialize)]
        struct FamilyIndex {
            side: String,
            members: usize,
            s_range: (f64, f64),
        }
        io::write_json(
            &dir.join(format!("{name}_index.json")),
            &FamilyIndex {
                side: name.to_string(),
                members: fam.members.len(),
                s_range: (fam.members[0].s, fam.members.last().unwrap().s),
            },
        )?;
        fams.push(fam);
    }
    if canards {
        if fams.len() != 2 {
            bail!("canard detection needs both sides (--side both)");
        }
        let list = detect_canards(p, &geom, &fams[0], &fams[1])?;
        io::write_json(&dir.join("canards.json"), &list)?;
        let rows: Vec<Vec<f64>> = list
            .iter()
            .map(|c| {
                vec![
                    c.x,
                    c.y,
                    c.s_attracting,
                    c.s_repelling,
                    c.rotation as f64,
                    if c.rotation_resolved { 1.0 } else { 0.0 },
                ]
            })
            .collect();
        io::write_csv(
            &dir.join("canards.csv"),
            &["x", "y", "s_attracting", "s_repelling", "rotation", "resolved"],
            &rows,
        )?;
        println!("{} canard intersections -> {}", list.len(), dir.join("canards.json").display());
    }
    io::write_manifest(&dir, if canards { "canards" } else { "manifolds" }, canonical)?;
    Ok(())
}

fn cmd_continue(
    common: &Common,
    cfg: &RunConfig,
    canonical: &str,
    p: &ParameterSet,
    args: ContinueArgs,
) -> Result<()> {
    let along = common
        .params
        .iter()
        .filter(|s| !s.contains('='))
        .next_back()
        .map(String::as_str)
        .unwrap_or("a2");
    if along != "a2" {
        bail!("only continuation in a2 is supported");
    }
    let mut opts = BranchOptions::default();
    if let Some(n) = args.n_mesh {
        opts.n_mesh = n;
    }
    opts.orbit.tol = cfg.tol().tighter(1.0);
    let seed = default_state(FieldTag::Full4D, p);
    let branch = continue_branch(p, &seed, args.from, args.to, &opts)?;
    let dir = io::out_dir(common.out.as_deref(), cfg.output_dir.as_deref());
    let rows: Vec<Vec<f64>> = branch
        .points
        .iter()
        .map(|q| {
            vec![
                q.a2,
                q.max_y,
                q.l2_norm,
                q.period,
                q.p as f64,
                q.s as f64,
                q.ambiguous as f64,
                q.step_a2,
                if q.explosion { 1.0 } else { 0.0 },
                q.residual,
            ]
        })
        .collect();
    io::write_csv(
        &dir.join("branch.csv"),
        &["a2", "max_y", "l2", "period", "p", "s", "ambiguous", "step_a2", "explosion", "residual"],
        &rows,
    )?;
    io::write_json(&dir.join("branch.json"), &branch)?;
    io::write_manifest(&dir, "continue", canonical)?;
    println!(
        "{} points, {} transitions, {} markers -> {}",
        branch.points.len(),
        branch.transitions.len(),
        branch.points.iter().filter(|q| q.explosion).count(),
        dir.join("branch.csv").display()
    );
    Ok(())
}

fn cmd_sweep(common: &Common, cfg: &RunConfig, p: &ParameterSet) -> Result<()> {
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| anyhow!("sweep requires a `sweep` section in the config"))?;
    let horizon = sweep.horizon.unwrap_or(20.0);
    let workers = sweep.workers.unwrap_or(4).max(1);
    let mut cells: Vec<(usize, f64, f64)> = vec![];
    for (i, &v1) in sweep.values1.iter().enumerate() {
        for (j, &v2) in sweep.values2.iter().enumerate() {
            cells.push((i * sweep.values2.len() + j, v1, v2));
        }
    }
    let tol = cfg.tol();
    let results: Vec<(usize, Vec<f64>)> = std::thread::scope(|scope| {
        let mut handles = vec![];
        for chunk in cells.chunks(cells.len().div_ceil(workers)) {
            let chunk = chunk.to_vec();
            let p1 = sweep.param1.clone();
            let p2 = sweep.param2.clone();
            handles.push(scope.spawn(move || {
                let mut out = vec![];
                for (idx, v1, v2) in chunk {
                    let mut q = *p;
                    let _ = q.set_by_name(&p1, v1);
                    let _ = q.set_by_name(&p2, v2);
                    let mut row = sweep_cell(&q, horizon, tol);
                    row[0] = v1;
                    row[1] = v2;
                    out.push((idx, row));
                }
                out
            }));
        }
        let mut all = vec![];
        for h in handles {
            all.extend(h.join().expect("sweep worker panicked"));
        }
        all
    });
    let mut ordered = results;
    ordered.sort_by_key(|(idx, _)| *idx);
    let dir = io::out_dir(common.out.as_deref(), cfg.output_dir.as_deref());
    let rows: Vec<Vec<f64>> = ordered.into_iter().map(|(_, r)| r).collect();
    io::write_csv(
        &dir.join("sweep.csv"),
        &[
            &sweep.param1,
            &sweep.param2,
            "p",
            "s",
            "ambiguous",
            "h1",
            "h2",
            "h3",
            "h4",
            "classified",
        ],
        &rows,
    )?;
    println!("wrote sweep.csv to {}", dir.display());
    Ok(())
}

fn sweep_cell(q: &ParameterSet, horizon: f64, tol: burster_core::integrate::Tol) -> Vec<f64> {
    let mut row = vec![0.0; 10];
    let rep = match check_hypotheses(q) {
        Ok(r) => r,
        Err(_) => return row,
    };
    row[5] = rep.h1.holds as u8 as f64;
    row[6] = rep.h2.holds as u8 as f64;
    row[7] = rep.h3.holds as u8 as f64;
    row[8] = rep.h4.holds as u8 as f64;
    let geom = match geometry(q) {
        Ok(g) => g,
        Err(_) => return row,
    };
    let field = match build_field(FieldTag::Full4D, q, FieldExtras::default()) {
        Ok(f) => f,
        Err(_) => return row,
    };
    let y0 = default_state(FieldTag::Full4D, q);
    let opts = IntegrateOptions { tol, ..Default::default() };
    let traj = match integrate(&field, &y0, 0.0, horizon, &[], &opts) {
        Ok(t) => t,
        Err(_) => return row,
    };
    let thr = Thresholds::from_geometry(&geom);
    if let Ok(sig) = mmo::classify_trajectory(&traj, &geom, &thr) {
        row[2] = sig.p as f64;
        row[3] = sig.s as f64;
        row[4] = sig.ambiguous as f64;
        row[9] = 1.0;
    }
    row
}
