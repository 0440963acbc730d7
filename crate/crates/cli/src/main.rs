mod scenario;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use scenario::{parse_theta, MapSource, Resolved, Scenario, Tolerances};
use touchpoint::angle::{periodic_angles, Angle};
use touchpoint::basins::{boundary_intersection, classify, BasinAtlas, BoundarySampleSet};
use touchpoint::boettcher::build_chart;
use touchpoint::chords::{catalog_csv, hausdorff_distance, ChordSpace};
use touchpoint::circle_family::{report_json, solve_rho, verify_no_circle_periodics};
use touchpoint::dynamics::coords;
use touchpoint::expansion::{closing_csv, closing_refine, closing_sweep, mane_check};
use touchpoint::rays::{trace_rays, RayOptions};
use touchpoint::{Error, Result, SpherePoint, C64};

#[derive(Parser)]
#[command(name = "touchpoint", version, about = "Basins, internal rays, chords and boundary periodic points of rational maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Map file: JSON {"numerator": [[re, im], ...], "denominator": [...]}, ascending.
    #[arg(long, conflicts_with = "builtin")]
    map: Option<PathBuf>,
    /// z2, basilica2, newton-cubic or ftheta:<theta> (theta a number or "golden").
    #[arg(long)]
    builtin: Option<String>,
    /// Affine window x0,x1,y0,y1.
    #[arg(long, default_value = "-2,2,-2,2", allow_hyphen_values = true)]
    window: String,
    /// Grid points per side.
    #[arg(long, default_value_t = 513)]
    res: usize,
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    /// The two basin centres, as indices into the map's centre list.
    #[arg(long, default_value = "0,1")]
    basins: String,
    #[arg(long, default_value_t = 1e-10)]
    tol_step: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_junction: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_boundary: f64,
    #[arg(long, default_value_t = 1e-2)]
    tol_closing: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Machine-readable summary on stdout.
    #[arg(long)]
    json: bool,
    /// Validate the scenario and print it without computing.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Basin atlas: one PPM per chart and a summary CSV.
    Basins {
        #[command(flatten)]
        common: Common,
    },
    /// Trace internal rays of one basin.
    Rays {
        #[command(flatten)]
        common: Common,
        /// Comma-separated angles p/q.
        #[arg(long)]
        angles: Option<String>,
        /// Trace k/Q for every k < Q.
        #[arg(long, default_value_t = 7)]
        denominator: u64,
        /// Index of the basin; defaults to the first of --basins.
        #[arg(long)]
        basin: Option<usize>,
    },
    /// Chords between the two basins at the given angles.
    Chords {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        angles: Option<String>,
        #[arg(long, default_value_t = 7)]
        denominator: u64,
    },
    /// Sample the common boundary of the two immediate basins.
    Boundary {
        #[command(flatten)]
        common: Common,
    },
    /// Derivative growth along the boundary samples.
    Mane {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        /// Pool the samples of every pair of centres.
        #[arg(long)]
        all_pairs: bool,
    },
    /// Newton-refine near-returns into periodic points.
    Closing {
        #[command(flatten)]
        common: Common,
        /// Seeds as re,im (or "inf"); repeatable. Without seeds the boundary
        /// samples are swept.
        #[arg(long = "seed", allow_hyphen_values = true)]
        seeds: Vec<String>,
        /// Period used with explicit seeds.
        #[arg(long, default_value_t = 1)]
        l: usize,
        /// Near-return horizon for the sweep.
        #[arg(long, default_value_t = 16)]
        horizon: usize,
    },
    /// Pull a chord back towards a periodic chord.
    Pullback {
        #[command(flatten)]
        common: Common,
        /// Angle pair t1,t2.
        #[arg(long, default_value = "1/2,1/2")]
        angles: String,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long, default_value_t = 20)]
        stages: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol_conv: f64,
    },
    /// Solve for rho with a given rotation number and look for circle periodic points.
    Ftheta {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "golden")]
        theta: String,
        #[arg(long, default_value_t = 8)]
        period_max: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Chords between periodic angles of period at most the bound, with certified junctions.
    Catalog {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        bound: u32,
    },
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| Error::Invalid(format!("bad {what} {x:?}"))))
        .collect()
}

fn parse_angles(s: &str) -> Result<Vec<Angle>> {
    s.split(',').map(|x| x.parse()).collect()
}

fn parse_point(s: &str) -> Result<SpherePoint> {
    if s.trim() == "inf" {
        return Ok(SpherePoint::Infinity);
    }
    match parse_list::<f64>(s, "point")?.as_slice() {
        &[re, im] => Ok(SpherePoint::new(C64::new(re, im))),
        _ => Err(Error::Invalid(format!("bad point {s:?}, expected re,im"))),
    }
}

fn scenario(command: &str, c: &Common, params: Value) -> Result<Scenario> {
    let window: Vec<f64> = parse_list(&c.window, "window")?;
    let window: [f64; 4] = window
        .try_into()
        .map_err(|_| Error::Invalid(format!("window {:?} needs four numbers", c.window)))?;
    // parse through Window for its ordering checks
    c.window.parse::<touchpoint::basins::Window>()?;
    let basins: Vec<usize> = parse_list(&c.basins, "basin")?;
    let basins: [usize; 2] =
        basins.try_into().map_err(|_| Error::Invalid(format!("--basins {:?} needs two indices", c.basins)))?;
    let map = match (&c.map, &c.builtin) {
        (Some(p), _) => Some(MapSource::File(p.clone())),
        (None, Some(b)) => Some(MapSource::Builtin(b.clone())),
        (None, None) => None,
    };
    let s = Scenario {
        command: command.into(),
        map,
        window,
        resolution: c.res,
        max_iter: c.max_iter,
        basins,
        tolerances: Tolerances {
            step_tol: c.tol_step,
            junction_tol: c.tol_junction,
            boundary_tol: c.tol_boundary,
            closing_alpha: c.tol_closing,
        },
        out: c.out.clone(),
        threads: c.threads,
        params,
    };
    s.validate()?;
    Ok(s)
}

struct Outcome {
    files: Vec<PathBuf>,
    summary: Value,
    lines: Vec<String>,
}

impl Outcome {
    fn new(summary: Value) -> Self {
        Outcome { files: Vec::new(), summary, lines: Vec::new() }
    }
}

fn write(out: &mut Outcome, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, bytes)?;
    out.files.push(path);
    Ok(())
}

fn chord_space(s: &Scenario, r: &Resolved) -> Result<ChordSpace> {
    let chart = |k: usize| {
        let c = r.centres[s.basins[k]];
        build_chart(&r.map, c.point, c.local_degree)
    };
    let mut space = ChordSpace::new(r.map.clone(), [chart(0)?, chart(1)?], s.basins);
    space.rays.step_tol = s.tolerances.step_tol;
    space.junction_tol = s.tolerances.junction_tol;
    Ok(space)
}

fn atlas(s: &Scenario, r: &Resolved) -> Result<BasinAtlas> {
    classify(&r.map, &r.attractors, s.window(), s.resolution, s.max_iter)
}

fn samples(s: &Scenario, r: &Resolved, atlas: &BasinAtlas, pair: [usize; 2]) -> Result<BoundarySampleSet> {
    boundary_intersection(&r.map, atlas, pair[0], pair[1], s.tolerances.boundary_tol)
}

fn angle_set(angles: &Option<String>, denominator: u64) -> Result<Vec<Angle>> {
    match angles {
        Some(a) => parse_angles(a),
        None => (0..denominator.max(1)).map(|k| Angle::from_u64(k, denominator)).collect(),
    }
}

fn run(cmd: &Command, s: &Scenario) -> Result<Outcome> {
    let dir = &s.out;
    match cmd {
        Command::Basins { .. } => {
            let r = s.resolve()?;
            let atlas = atlas(s, &r)?;
            let mut out = Outcome::new(json!({"resolved_fraction": atlas.resolved_fraction(), "attractors": atlas.attractors.len()}));
            write(&mut out, dir, "basins_affine.ppm", &atlas.to_ppm(0))?;
            write(&mut out, dir, "basins_inverse.ppm", &atlas.to_ppm(1))?;
            write(&mut out, dir, "basins.csv", atlas.summary_csv().as_bytes())?;
            out.lines.push(format!("{} attractors, {:.4} of cells resolved", atlas.attractors.len(), atlas.resolved_fraction()));
            Ok(out)
        }
        Command::Rays { angles, denominator, basin, .. } => {
            let r = s.resolve()?;
            let b = basin.unwrap_or(s.basins[0]);
            let centre = r.centres.get(b).ok_or_else(|| Error::Invalid(format!("basin {b} out of range")))?;
            let chart = build_chart(&r.map, centre.point, centre.local_degree)?;
            let opts = RayOptions { step_tol: s.tolerances.step_tol, ..RayOptions::default() };
            let angles = angle_set(angles, *denominator)?;
            let traced = trace_rays(&r.map, &chart, b, &angles, &opts)?;
            let mut rays = Vec::new();
            let mut failures = Vec::new();
            for (t, ray) in angles.iter().zip(traced) {
                match ray {
                    Ok(ray) => rays.push(ray),
                    Err(e) => failures.push(json!({"angle": t, "error": e.to_string()})),
                }
            }
            let landed = rays.iter().filter(|r| r.landed).count();
            let mut out = Outcome::new(json!({"rays": rays.len(), "landed": landed, "failures": failures}));
            let doc = json!({"basin": b, "rays": rays, "failures": failures});
            write(&mut out, dir, "rays.json", serde_json::to_string_pretty(&doc)?.as_bytes())?;
            out.lines.push(format!("{landed} of {} rays landed", angles.len()));
            Ok(out)
        }
        Command::Chords { angles, denominator, .. } => {
            let r = s.resolve()?;
            let space = chord_space(s, &r)?;
            let angles = angle_set(angles, *denominator)?;
            let chords = space.detect_chords(&angles, &angles)?;
            let mut csv = String::from("angle1,angle2,junction_re,junction_im\n");
            for c in &chords {
                let (re, im) = coords(c.junction);
                let _ = writeln!(csv, "{},{},{re},{im}", c.ray1.angle, c.ray2.angle);
            }
            let mut out = Outcome::new(json!({"chords": chords.len()}));
            write(&mut out, dir, "chords.csv", csv.as_bytes())?;
            out.lines.push(format!("{} chords", chords.len()));
            Ok(out)
        }
        Command::Boundary { .. } => {
            let r = s.resolve()?;
            let atlas = atlas(s, &r)?;
            let set = samples(s, &r, &atlas, s.basins)?;
            let mut out = Outcome::new(json!({"samples": set.points.len()}));
            write(&mut out, dir, "boundary.csv", set.to_csv().as_bytes())?;
            out.lines.push(format!("{} boundary samples", set.points.len()));
            Ok(out)
        }
        Command::Mane { n_max, all_pairs, .. } => {
            let r = s.resolve()?;
            let atlas = atlas(s, &r)?;
            let pairs: Vec<[usize; 2]> = if *all_pairs {
                let n = r.centres.len();
                (0..n).flat_map(|i| (i + 1..n).map(move |j| [i, j])).collect()
            } else {
                vec![s.basins]
            };
            let mut pooled = BoundarySampleSet {
                pair: (pairs[0][0], pairs[0][1]),
                points: Vec::new(),
                witnesses: Vec::new(),
                tol: s.tolerances.boundary_tol,
            };
            for p in pairs {
                let set = samples(s, &r, &atlas, p)?;
                pooled.points.extend(set.points);
                pooled.witnesses.extend(set.witnesses);
            }
            let report = mane_check(&r.map, &pooled, *n_max)?;
            let mut out = Outcome::new(json!({"certified_N": report.certified_n, "samples": pooled.points.len()}));
            write(&mut out, dir, "mane.json", report.to_json()?.as_bytes())?;
            out.lines.push(match report.certified_n {
                Some(n) => format!("expansion certified from N = {n}"),
                None => format!("no expansion certificate up to n = {n_max}"),
            });
            Ok(out)
        }
        Command::Closing { seeds, l, horizon, .. } => {
            let r = s.resolve()?;
            let mut results = Vec::new();
            let mut failures = Vec::new();
            if seeds.is_empty() {
                let atlas = atlas(s, &r)?;
                let set = samples(s, &r, &atlas, s.basins)?;
                for (k, nr, c) in closing_sweep(&r.map, &set.points, *horizon, s.tolerances.closing_alpha)? {
                    match c {
                        Ok(c) => results.push(c),
                        Err(e) => failures.push(json!({"sample": k, "q": nr.q, "p": nr.p, "error": e.to_string()})),
                    }
                }
            } else {
                for seed in seeds {
                    let z = parse_point(seed)?;
                    match closing_refine(&r.map, z, *l) {
                        Ok(c) => results.push(c),
                        Err(e) => failures.push(json!({"seed": z, "error": e.to_string()})),
                    }
                }
            }
            let mut out = Outcome::new(json!({"closed": results.len(), "failures": failures}));
            write(&mut out, dir, "closing.csv", closing_csv(&results).as_bytes())?;
            out.lines.push(format!("{} periodic points certified, {} failures", results.len(), failures.len()));
            Ok(out)
        }
        Command::Pullback { angles, q, stages, tol_conv, .. } => {
            let r = s.resolve()?;
            let space = chord_space(s, &r)?;
            let a = parse_angles(angles)?;
            let [t1, t2] = a.as_slice() else {
                return Err(Error::Invalid("--angles needs exactly two angles".into()));
            };
            let start = space.chord(t1, t2)?;
            let (limit, report) = space.pullback_periodic(&start, *q, *stages, *tol_conv)?;
            let doc = json!({"start": start, "limit": limit, "report": report, "start_to_limit": hausdorff_distance(&start, &limit)});
            let mut log = String::new();
            for (k, g) in report.gaps.iter().enumerate() {
                let _ = writeln!(log, "stage {} d_H {:e}", k + 1, g);
            }
            let mut out = Outcome::new(json!({
                "limit": [limit.ray1.angle, limit.ray2.angle],
                "junction": limit.junction,
                "stages": report.gaps.len(),
                "last_gap": report.gaps.last(),
            }));
            write(&mut out, dir, "pullback.json", serde_json::to_string_pretty(&doc)?.as_bytes())?;
            write(&mut out, dir, "pullback_dh.log", log.as_bytes())?;
            out.lines.push(format!(
                "converged to ({}, {}) in {} stages",
                limit.ray1.angle,
                limit.ray2.angle,
                report.gaps.len()
            ));
            Ok(out)
        }
        Command::Ftheta { theta, period_max, tol, .. } => {
            let sol = solve_rho(parse_theta(theta)?, *tol)?;
            let report = verify_no_circle_periodics(sol.rho, *period_max, *tol)?;
            let text = report_json(&sol, &report)?;
            let mut out = Outcome::new(serde_json::from_str(&text)?);
            write(&mut out, dir, "ftheta.json", text.as_bytes())?;
            out.lines.push(format!(
                "rho = {} {:+}i, rotation number {:.9}, {} circle periodic points of period <= {period_max}",
                sol.rho.re,
                sol.rho.im,
                sol.estimate.theta_hat,
                report.findings.len()
            ));
            Ok(out)
        }
        Command::Catalog { bound, .. } => {
            let r = s.resolve()?;
            let space = chord_space(s, &r)?;
            let cat = space.boundary_periodic_catalog(*bound)?;
            let d = r.centres[s.basins[0]].local_degree as u64;
            let per_n: Vec<usize> = (1..=*bound as usize)
                .map(|n| cat.iter().filter(|e| n % e.periodic.period == 0).count())
                .collect();
            let mut out = Outcome::new(json!({
                "junctions": cat.len(),
                "per_period_bound": per_n,
                "periodic_angles": periodic_angles(d, *bound).len(),
            }));
            write(&mut out, dir, "catalog.csv", catalog_csv(&cat).as_bytes())?;
            out.lines.push(format!("{} junctions; per n = 1..{bound}: {per_n:?}", cat.len()));
            Ok(out)
        }
    }
}

fn parts(cmd: &Command) -> (&'static str, &Common, Value) {
    match cmd {
        Command::Basins { common } => ("basins", common, json!({})),
        Command::Rays { common, angles, denominator, basin } => {
            ("rays", common, json!({"angles": angles, "denominator": denominator, "basin": basin}))
        }
        Command::Chords { common, angles, denominator } => {
            ("chords", common, json!({"angles": angles, "denominator": denominator}))
        }
        Command::Boundary { common } => ("boundary", common, json!({})),
        Command::Mane { common, n_max, all_pairs } => ("mane", common, json!({"n_max": n_max, "all_pairs": all_pairs})),
        Command::Closing { common, seeds, l, horizon } => {
            ("closing", common, json!({"seeds": seeds, "L": l, "horizon": horizon}))
        }
        Command::Pullback { common, angles, q, stages, tol_conv } => (
            "pullback",
            common,
            json!({"angles": angles, "Q": q, "stages": stages, "tol_conv": tol_conv}),
        ),
        Command::Ftheta { common, theta, period_max, tol } => (
            "ftheta",
            common,
            json!({"theta": theta, "period_max": period_max, "tol": tol}),
        ),
        Command::Catalog { common, bound } => ("catalog", common, json!({"bound": bound})),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let (name, common, params) = parts(&cli.command);
    let s = scenario(name, common, params)?;
    if let Command::Ftheta { theta, .. } = &cli.command {
        parse_theta(theta)?;
    }
    if common.dry_run {
        println!("{}", serde_json::to_string_pretty(&s)?);
        return Ok(());
    }
    if let Some(n) = s.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    }
    let out = run(&cli.command, &s)?;
    if common.json {
        let doc = json!({"command": name, "outputs": out.files, "summary": out.summary});
        println!("{}", serde_json::to_string(&doc)?);
    } else {
        for l in &out.lines {
            println!("{l}");
        }
        for f in &out.files {
            println!("wrote {}", f.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Hypothesis(_)) => {
            eprintln!("touchpoint: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("touchpoint: {e}");
            ExitCode::from(1)
        }
    }
}
