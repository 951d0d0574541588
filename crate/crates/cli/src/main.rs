use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use parajet::classify::{classify, realize_graph, sample_grid, torsion, DevelopableKind, SurfaceFamily};
use parajet::invariants::{invariant_report, pick_invariant, point_type, PointType};
use parajet::jets::jets_of_series;
use parajet::normalize::{
    normalize_curve_gl2, normalize_curve_sl2, normalize_parabolic_surface, NormalFormResult, NormalizeOptions, Transform,
    DEFAULT_ORDER, DEFAULT_TOL,
};
use parajet::scalar::{format_f64, format_rational, parse_rational};
use parajet::sampling::SurfaceBranch;
use parajet::series::{AnySeries, SeriesJson};
use parajet::verify::{run_suite, RecurrenceBranch, Suite};
use parajet::{Scalar, Series, Q};
use serde_json::{json, Map, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "parajet", version, about = "Differential invariants of parabolic surfaces and plane curves")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Cone,
    Cylinder,
    Tangential,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveGroupArg {
    Sl2,
    Gl2,
}

#[derive(Subcommand)]
enum Command {
    /// Point type and the invariants of a graphed surface at a point.
    Invariants {
        /// Series JSON file (two variables).
        #[arg(long)]
        surface: PathBuf,
        /// Base point `x,y` (default: the origin).
        #[arg(long)]
        point: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Realize a developable family (or read a surface) and classify it.
    #[command(group(ArgGroup::new("input").required(true).args(["family", "family_json", "surface"])))]
    Classify {
        #[arg(long, value_enum)]
        family: Option<Family>,
        /// Cone directrix `c(t)` as monomial coefficients, e.g. `'[0,0,"1/2","-1/3"]'`.
        #[arg(long)]
        directrix: Option<String>,
        /// Cylinder profile `f(x)` as monomial coefficients.
        #[arg(long)]
        profile: Option<String>,
        /// Tangential family `a(t)` as monomial coefficients.
        #[arg(long)]
        a: Option<String>,
        /// Tangential family `c(t)` as monomial coefficients.
        #[arg(long)]
        c: Option<String>,
        /// Family JSON file `{"kind": ..., family-specific fields}`.
        #[arg(long)]
        family_json: Option<PathBuf>,
        /// Series JSON file of a graphed surface.
        #[arg(long)]
        surface: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        order: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Normal form of a curve or a parabolic surface.
    #[command(group(ArgGroup::new("input").required(true).args(["curve", "surface"])))]
    Normalize {
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        surface: Option<PathBuf>,
        /// Group acting on curves.
        #[arg(long, value_enum, default_value_t = CurveGroupArg::Sl2)]
        group: CurveGroupArg,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Run one verification suite.
    Verify {
        /// oracle | recurrence | prolongation | transfer | classification | curves | homogeneous
        #[arg(long)]
        suite: String,
        /// generic | cone (oracle); generic | cone | curve-sa2 | curve-gl2 (recurrence)
        #[arg(long)]
        branch: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Replace every default floating threshold.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run every suite and summarize.
    Report {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        tol: Option<f64>,
    },
}

/// Input or usage problem: exit code 2.
#[derive(Debug)]
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

/// JSON value and whether every verification it carries passed.
type Outcome = Result<(Value, bool), InputError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Invariants { surface, point, tol } => invariants(&surface, point.as_deref(), tol),
        Command::Classify { family, directrix, profile, a, c, family_json, surface, order, tol } => {
            let lists = Lists { directrix, profile, a, c };
            classify_cmd(family, &lists, family_json.as_deref(), surface.as_deref(), order, tol)
        }
        Command::Normalize { curve, surface, group, order, tol } => normalize(curve.as_deref(), surface.as_deref(), group, order, tol),
        Command::Verify { suite, branch, samples, seed, tol } => verify(&suite, branch.as_deref(), samples, seed, tol),
        Command::Report { samples, seed, tol } => report(samples, seed, tol),
    };
    match outcome {
        Ok((value, ok)) => {
            let value = stringify_floats(value);
            let text = match cli.format {
                Format::Json => serde_json::to_string_pretty(&value).expect("JSON values serialize"),
                Format::Text => {
                    let mut lines = Vec::new();
                    flatten("", &value, &mut lines);
                    lines.join("\n")
                }
            };
            // a closed pipe downstream is not an error of ours
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(InputError(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Floating numbers become 17-significant-digit strings; integers stay.
fn stringify_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => Value::String(format_f64(n.as_f64().expect("f64 number"))),
        Value::Array(a) => Value::Array(a.into_iter().map(stringify_floats).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, stringify_floats(v))).collect()),
        v => v,
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                flatten(&if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") }, v, out);
            }
        }
        Value::Array(a) => {
            for (i, v) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        Value::String(s) => out.push(format!("{prefix}: {s}")),
        v => out.push(format!("{prefix}: {v}")),
    }
}

fn read_series(path: &Path) -> Result<AnySeries, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    SeriesJson::parse(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn read_surface(path: &Path) -> Result<AnySeries, InputError> {
    let s = read_series(path)?;
    if s.nvars() != 2 {
        return Err(InputError(format!("{}: a surface needs a two-variable series", path.display())));
    }
    Ok(s)
}

fn parse_point(s: &str) -> Result<[f64; 2], InputError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || InputError(format!("--point expects 'x,y', got {s:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let x = parts[0].parse().map_err(|_| bad())?;
    let y = parts[1].parse().map_err(|_| bad())?;
    Ok([x, y])
}

/// `-F(y, x)`, so that `u20` dominates `u02`.
fn swap_xy<S: Scalar>(f: &Series<S>) -> Series<S> {
    Series::from_derivatives2(f.order(), |j, k| -f.d2(k, j))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn invariants(path: &Path, point: Option<&str>, tol: f64) -> Outcome {
    let f = read_surface(path)?.to_f64();
    let pt = point.map(parse_point).transpose()?.unwrap_or([0.0, 0.0]);
    let mut local = f.shift(&pt);
    let kind = point_type(&jets_of_series(&local), tol)?;
    let mut out = Map::new();
    out.insert("point".into(), json!(pt));
    out.insert("point_type".into(), to_value(&kind));
    match kind {
        PointType::Parabolic | PointType::Flat => {
            let swapped = local.d2(2, 0).abs() < local.d2(0, 2).abs();
            if swapped {
                local = swap_xy(&local);
            }
            let rep = invariant_report(&jets_of_series(&local), tol)?;
            out.insert("swapped_xy".into(), json!(swapped));
            out.insert("invariants".into(), to_value(&rep));
        }
        PointType::Elliptic | PointType::Hyperbolic => {
            let p = jets_of_series(&local);
            let h = p.u(2, 0) * p.u(0, 2) - p.u(1, 1) * p.u(1, 1);
            out.insert("h".into(), json!(h));
            if p.order() >= 3 {
                out.insert("pick".into(), json!(pick_invariant(&p, kind)?));
            }
        }
    }
    Ok((Value::Object(out), true))
}

struct Lists {
    directrix: Option<String>,
    profile: Option<String>,
    a: Option<String>,
    c: Option<String>,
}

fn parse_coefficient(v: &Value) -> Result<Q, InputError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => return Err(InputError(format!("coefficient {other} is neither a number nor a string"))),
    };
    if let Some(q) = parse_rational(&text) {
        return Ok(q);
    }
    let x: f64 = text.trim().parse().map_err(|_| InputError(format!("bad coefficient {text:?}")))?;
    Q::from_float(x).ok_or_else(|| InputError(format!("coefficient {text:?} is not finite")))
}

/// Monomial coefficient list `[c0, c1, ...]` as a series with at least `order` terms.
fn coefficient_series(v: &Value, what: &str, order: usize) -> Result<Series<Q>, InputError> {
    let list = v.as_array().ok_or_else(|| InputError(format!("{what}: expected a JSON list")))?;
    let coeffs = list.iter().map(parse_coefficient).collect::<Result<Vec<_>, _>>()?;
    let n = order.max(coeffs.len().saturating_sub(1));
    Ok(Series::from_monomials(1, n, |e| coeffs.get(e[0]).cloned().unwrap_or_else(Q::zero)))
}

fn parse_list(text: &str, what: &str) -> Result<Value, InputError> {
    serde_json::from_str(text).map_err(|e| InputError(format!("{what}: line {} column {}: {e}", e.line(), e.column())))
}

fn required<'a>(v: &'a Option<String>, flag: &str, family: &str) -> Result<&'a str, InputError> {
    v.as_deref().ok_or_else(|| InputError(format!("--family {family} needs {flag}")))
}

fn family_from_flags(family: Family, l: &Lists, order: usize) -> Result<SurfaceFamily<Q>, InputError> {
    // tangential realizations read one more derivative of a and c
    let n = order + 1;
    Ok(match family {
        Family::Cone => SurfaceFamily::Cone {
            directrix_c: coefficient_series(&parse_list(required(&l.directrix, "--directrix", "cone")?, "--directrix")?, "--directrix", n)?,
        },
        Family::Cylinder => SurfaceFamily::Cylinder {
            profile: coefficient_series(&parse_list(required(&l.profile, "--profile", "cylinder")?, "--profile")?, "--profile", n)?,
        },
        Family::Tangential => SurfaceFamily::Tangential {
            a: coefficient_series(&parse_list(required(&l.a, "--a", "tangential")?, "--a")?, "--a", n)?,
            c: coefficient_series(&parse_list(required(&l.c, "--c", "tangential")?, "--c")?, "--c", n)?,
        },
    })
}

enum Parsed {
    Family(SurfaceFamily<Q>),
    Graph(AnySeries),
}

fn family_from_json(path: &Path, order: usize) -> Result<Parsed, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| InputError(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column())))?;
    let field = |name: &str| v.get(name).ok_or_else(|| InputError(format!("{}: missing field {name:?}", path.display())));
    let n = order + 1;
    Ok(match v.get("kind").and_then(Value::as_str) {
        Some("cone") => Parsed::Family(SurfaceFamily::Cone { directrix_c: coefficient_series(field("directrix")?, "directrix", n)? }),
        Some("cylinder") => Parsed::Family(SurfaceFamily::Cylinder { profile: coefficient_series(field("profile")?, "profile", n)? }),
        Some("tangential") => Parsed::Family(SurfaceFamily::Tangential {
            a: coefficient_series(field("a")?, "a", n)?,
            c: coefficient_series(field("c")?, "c", n)?,
        }),
        Some("graph") => {
            let js: SeriesJson = serde_json::from_value(field("series")?.clone())?;
            let s = js.into_series()?;
            if s.nvars() != 2 {
                return Err(InputError("graph series needs two variables".into()));
            }
            Parsed::Graph(s)
        }
        other => return Err(InputError(format!("{}: unknown family kind {other:?}", path.display()))),
    })
}

fn classify_cmd(family: Option<Family>, lists: &Lists, family_json: Option<&Path>, surface: Option<&Path>, order: usize, tol: f64) -> Outcome {
    let parsed = match (family, family_json, surface) {
        (Some(f), None, None) => Parsed::Family(family_from_flags(f, lists, order)?),
        (None, Some(p), None) => family_from_json(p, order)?,
        (None, None, Some(p)) => Parsed::Graph(read_surface(p)?),
        _ => return Err(InputError("give exactly one of --family, --family-json, --surface".into())),
    };
    let mut out = Map::new();
    let mut ok = true;
    let graph = match &parsed {
        Parsed::Graph(s) => s.to_f64(),
        Parsed::Family(fam) => {
            let expected = match fam {
                SurfaceFamily::Cylinder { .. } => DevelopableKind::Cylinder,
                SurfaceFamily::Cone { .. } => DevelopableKind::Cone,
                SurfaceFamily::Tangential { .. } => DevelopableKind::Tangential,
                SurfaceFamily::Graph { .. } => unreachable!("graphs are parsed separately"),
            };
            out.insert("family".into(), json!(expected.label()));
            if let SurfaceFamily::Tangential { a, c } = fam {
                let tau = torsion(a, c, &Q::zero())?;
                out.insert("torsion_at_0".into(), json!(format_rational(&tau)));
                if tau.is_zero() {
                    out.insert("warnings".into(), json!(["zero torsion at t = 0: the tangent surface has a cuspidal edge there"]));
                }
            }
            let g = realize_graph(fam, order)?;
            out.insert("realized_graph".into(), to_value(&SeriesJson::from_exact(&g)));
            g.to_f64()
        }
    };
    let c = classify(&graph, &sample_grid(&graph, tol), tol)?;
    if let Some(expected) = out.get("family").and_then(Value::as_str) {
        let agrees = c.kind.map(|k| k.label()) == Some(expected);
        out.insert("agrees".into(), json!(agrees));
        ok = agrees;
    }
    out.insert("order".into(), json!(order));
    out.insert("classification".into(), to_value(&c));
    Ok((Value::Object(out), ok))
}

fn transform_value<S: Scalar>(t: &Transform<S>, fmt: impl Fn(&S) -> String) -> Value {
    match t {
        Transform::Surface(t) => {
            let m = t.matrix();
            json!({
                "kind": "surface",
                "linear": m.iter().map(|row| row.iter().map(&fmt).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "translation": t.translation().iter().map(&fmt).collect::<Vec<_>>(),
            })
        }
        Transform::Curve(t) => json!({
            "kind": "curve",
            "linear": [[fmt(&t.a), fmt(&t.b)], [fmt(&t.c), fmt(&t.d)]],
            "translation": [fmt(&t.e), fmt(&t.f)],
        }),
    }
}

fn normal_form_value<S: Scalar>(res: &NormalFormResult<S>, mode: &str, fmt: impl Fn(&S) -> String, coeffs: SeriesJson) -> Value {
    let readings: Map<String, Value> = res.readings.iter().map(|(k, v)| (k.clone(), json!(fmt(v)))).collect();
    json!({
        "branch": res.branch.label(),
        "mode": mode,
        "transform": transform_value(&res.transform, &fmt),
        "normal_coeffs": to_value(&coeffs),
        "readings": readings,
    })
}

fn normalize(curve: Option<&Path>, surface: Option<&Path>, group: CurveGroupArg, order: usize, tol: f64) -> Outcome {
    let opts = NormalizeOptions { tol };
    let (series, is_curve) = match (curve, surface) {
        (Some(p), None) => (read_series(p)?, true),
        (None, Some(p)) => (read_surface(p)?, false),
        _ => return Err(InputError("give exactly one of --curve, --surface".into())),
    };
    if is_curve && series.nvars() != 1 {
        return Err(InputError("a curve needs a one-variable series".into()));
    }
    fn run<S: Scalar>(f: &Series<S>, is_curve: bool, group: CurveGroupArg, order: usize, opts: &NormalizeOptions) -> Result<NormalFormResult<S>, InputError> {
        let f = if f.order() > order { f.with_order(order) } else { f.clone() };
        Ok(match (is_curve, group) {
            (true, CurveGroupArg::Sl2) => normalize_curve_sl2(&f, opts)?,
            (true, CurveGroupArg::Gl2) => normalize_curve_gl2(&f, opts)?,
            (false, _) => normalize_parabolic_surface(&f, opts)?,
        })
    }
    // exact data stays exact unless a cube or square root leaves the rationals
    if let AnySeries::Exact(f) = &series {
        if let Ok(res) = run(f, is_curve, group, order, &opts) {
            let coeffs = SeriesJson::from_exact(&res.series);
            return Ok((normal_form_value(&res, "exact", format_rational, coeffs), true));
        }
    }
    let res = run(&series.to_f64(), is_curve, group, order, &opts)?;
    let coeffs = SeriesJson::from_float(&res.series);
    Ok((normal_form_value(&res, "float", |v: &f64| format_f64(*v), coeffs), true))
}

fn verify(suite: &str, branch: Option<&str>, samples: Option<usize>, seed: u64, tol: Option<f64>) -> Outcome {
    let suite = Suite::parse(suite, branch).map_err(InputError)?;
    let rep = run_suite(suite, samples.unwrap_or_else(|| suite.default_samples()), seed, tol);
    for line in rep.failure_summary() {
        eprintln!("FAIL {line}");
    }
    Ok((to_value(&rep), rep.pass))
}

fn report(samples: Option<usize>, seed: u64, tol: Option<f64>) -> Outcome {
    let suites = [
        Suite::Oracle(SurfaceBranch::Generic),
        Suite::Oracle(SurfaceBranch::Cone),
        Suite::Recurrence(RecurrenceBranch::Generic),
        Suite::Recurrence(RecurrenceBranch::Cone),
        Suite::Recurrence(RecurrenceBranch::CurveSa2),
        Suite::Recurrence(RecurrenceBranch::CurveGl2),
        Suite::Prolongation,
        Suite::Transfer,
        Suite::Classification,
        Suite::Curves,
        Suite::Homogeneous,
    ];
    let mut all = true;
    let mut rows = Vec::new();
    for s in suites {
        let rep = run_suite(s, samples.unwrap_or_else(|| s.default_samples()), seed, tol);
        all &= rep.pass;
        let worst: Map<String, Value> = rep.checks.iter().map(|c| (c.name.clone(), json!(c.worst_residual))).collect();
        rows.push(json!({
            "suite": rep.suite,
            "branch": rep.branch,
            "samples": rep.samples,
            "pass": rep.pass,
            "worst_residuals": worst,
            "failures": rep.failure_summary(),
        }));
    }
    Ok((json!({ "seed": seed, "pass": all, "suites": rows }), all))
}
