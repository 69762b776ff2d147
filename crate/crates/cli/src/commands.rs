use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use periodic_forms::certify::certify_with_minimum;
use periodic_forms::exact::{certify_exact, RationalForm};
use periodic_forms::fixtures;
use periodic_forms::floating::{
    enumerate_sublattices, strict_periodic_extreme_verdict_with, SlideOptions, SublatticeRefinement,
    DEFAULT_SLIDE_EPS, DEFAULT_SLIDE_SAMPLES,
};
use periodic_forms::optimizer::{local_improve, SearchConfig};
use periodic_forms::{arithmetical_minimum, density, MinTriple, SdmVector};
use serde_json::{json, Value};

use crate::document::{parse_document, scalar_json, FormDocument};
use crate::error::CliError;

/// Triples listed by `analyze` without `--full`.
const TRIPLE_PREVIEW: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "periodic-forms", version, about = "Minima, density and local optimality certificates of periodic forms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Form document path, `-` for stdin, or a fixture name (Z:<d>, A2, A3, D3, D4, E8).
    pub input: String,
    /// Emit a JSON report instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum, number of minimal vectors, density and the minimal triples.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// List every minimal triple.
        #[arg(long)]
        full: bool,
    },
    /// m-perfection, m-eutaxy and the isolated m-extremeness certificate.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Print the interior LP optimum, coefficients and singular values.
        #[arg(long)]
        verbose: bool,
        /// Also decide rank and eutaxy over the rationals.
        #[arg(long)]
        exact: bool,
    },
    /// Bounded search for floating representations of a lattice.
    Float {
        #[command(flatten)]
        common: Common,
        /// Largest sublattice index to search.
        #[arg(long = "m-max", default_value_t = 4)]
        m_max: usize,
        /// Length of the sampled slides.
        #[arg(long, default_value_t = DEFAULT_SLIDE_EPS)]
        eps: f64,
        /// Samples per slide.
        #[arg(long, default_value_t = DEFAULT_SLIDE_SAMPLES)]
        samples: usize,
    },
    /// Rewrite a form over index-M sublattices.
    Refine {
        #[command(flatten)]
        common: Common,
        /// Sublattice index; every Hermite normal form of this determinant is used.
        #[arg(long)]
        index: Option<usize>,
        /// A single Hermite normal form, rows separated by `;`, e.g. "1,0;0,2".
        #[arg(long)]
        hnf: Option<String>,
    },
    /// Projected random ascent of the density on the Ryshkov boundary.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 0.5)]
        shrink: f64,
        /// Print the density trace of every restart.
        #[arg(long)]
        trace: bool,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Self::Analyze { common, .. }
            | Self::Certify { common, .. }
            | Self::Float { common, .. }
            | Self::Refine { common, .. }
            | Self::Optimize { common, .. } => common,
        }
    }
}

/// A finished command: the JSON report and its text rendering.
#[derive(Debug, Clone)]
pub struct Output {
    pub json: Value,
    pub text: String,
    pub exit_code: i32,
}

impl Output {
    pub fn render(&self, as_json: bool) -> String {
        if as_json {
            serde_json::to_string_pretty(&self.json).expect("reports serialize") + "\n"
        } else {
            self.text.clone()
        }
    }
}

fn integer(n: f64) -> BigRational {
    BigRational::from_integer(BigInt::from(n as i64))
}

/// Reads a document from a file or stdin, or builds a fixture.
pub fn load_input(source: &str) -> Result<FormDocument, CliError> {
    if source == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text).map_err(|e| CliError::Usage(format!("reading stdin: {e}")))?;
        return parse_document(&text);
    }
    if Path::new(source).exists() {
        let text = std::fs::read_to_string(source).map_err(|e| CliError::Usage(format!("reading {source}: {e}")))?;
        return parse_document(&text);
    }
    match fixtures::gram(source) {
        Ok(g) => {
            let d = g.len();
            let q = (0..d).flat_map(|r| (r..d).map(move |c| (r, c))).map(|(r, c)| integer(g[r][c])).collect();
            Ok(FormDocument { d, m: 1, q, translates: Vec::new(), name: Some(source.to_string()) })
        }
        Err(_) => Err(CliError::Usage(format!("{source}: no such file or fixture"))),
    }
}

fn input_json(doc: &FormDocument) -> Value {
    json!({ "name": doc.name, "d": doc.d, "m": doc.m })
}

fn triple_json(t: &MinTriple) -> Value {
    json!({ "i": t.i + 1, "j": t.j + 1, "v": t.v, "w": t.w, "value": t.value })
}

fn hnf_json(h: &DMatrix<i64>) -> Value {
    Value::from((0..h.nrows()).map(|r| (0..h.ncols()).map(|c| h[(r, c)]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn direction_json(n: &SdmVector) -> Value {
    let t = n.trans();
    Value::from((0..t.ncols()).map(|c| t.column(c).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Parses `"a,b;0,c"` into a Hermite normal form.
pub fn parse_hnf(text: &str) -> Result<SublatticeRefinement, CliError> {
    let rows: Vec<Vec<i64>> = text
        .split(';')
        .map(|row| row.split(',').map(|e| e.trim().parse::<i64>()).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("--hnf {text:?}: {e}")))?;
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Usage(format!("--hnf {text:?} is not square")));
    }
    let h = DMatrix::from_row_iterator(d, d, rows.into_iter().flatten());
    SublatticeRefinement::new(h).map_err(|e| CliError::Usage(format!("--hnf {text:?}: {e}")))
}

pub fn run(command: &Command) -> Result<Output, CliError> {
    let doc = load_input(&command.common().input)?;
    let exact = doc.to_rational()?;
    let form = doc.to_form()?;
    let mut out = match command {
        Command::Analyze { full, .. } => analyze(&doc, &form, *full)?,
        Command::Certify { verbose, exact: want_exact, .. } => certify(&doc, &form, &exact, *verbose, *want_exact)?,
        Command::Float { m_max, eps, samples, .. } => float(&doc, &form, *m_max, *eps, *samples)?,
        Command::Refine { index, hnf, .. } => refine(&doc, &exact, *index, hnf.as_deref())?,
        Command::Optimize { iters, restarts, seed, step, shrink, trace, .. } => {
            let cfg = SearchConfig { step: *step, shrink: *shrink, iters: *iters, restarts: *restarts, seed: *seed };
            optimize(&doc, &form, &cfg, *trace)?
        }
    };
    out.json["input"] = input_json(&doc);
    Ok(out)
}

fn analyze(doc: &FormDocument, form: &periodic_forms::PeriodicForm, full: bool) -> Result<Output, CliError> {
    let min = arithmetical_minimum(form)?;
    let delta = density(form, min.lambda);
    let count = min.min_count();
    let shown = if full { min.triples.len() } else { min.triples.len().min(TRIPLE_PREVIEW) };
    let mut text = String::new();
    if let Some(name) = &doc.name {
        writeln!(text, "{name} (d={}, m={})", doc.d, doc.m).unwrap();
    }
    writeln!(text, "λ={}, |Min|={count}, δ≈{delta:.6}", min.lambda).unwrap();
    writeln!(text, "minimal triples (i <= j): {}", min.triples.len()).unwrap();
    for t in &min.triples[..shown] {
        writeln!(text, "  {t}").unwrap();
    }
    if shown < min.triples.len() {
        writeln!(text, "  ... {} more (use --full)", min.triples.len() - shown).unwrap();
    }
    if !min.near_misses.is_empty() {
        writeln!(text, "near misses within 1%: {}", min.near_misses.len()).unwrap();
    }
    let json = json!({
        "command": "analyze",
        "lambda": min.lambda,
        "min_count": count,
        "density": delta,
        "triple_count": min.triples.len(),
        "triples": min.triples[..shown].iter().map(triple_json).collect::<Vec<_>>(),
        "truncated": shown < min.triples.len(),
        "near_misses": min.near_misses.len(),
    });
    Ok(Output { json, text, exit_code: 0 })
}

fn certify(
    doc: &FormDocument,
    form: &periodic_forms::PeriodicForm,
    rational: &RationalForm,
    verbose: bool,
    exact: bool,
) -> Result<Output, CliError> {
    let min = arithmetical_minimum(form)?;
    let v = certify_with_minimum(form, &min)?;
    let p = &v.m_perfect;
    let eutaxy = match (&v.m_eutactic, v.s_star) {
        (Some(_), _) => "yes (s*>0)".to_string(),
        (None, Some(s)) => format!("no (s*={s:.3e})"),
        (None, None) => "no (target outside the span)".to_string(),
    };
    let extreme = if v.isolated_m_extreme { "yes" } else { "not certified" };
    let mut text = String::new();
    if let Some(name) = &doc.name {
        writeln!(text, "{name} (d={}, m={})", doc.d, doc.m).unwrap();
    }
    writeln!(
        text,
        "m-perfect: {} (rank {}/{}), m-eutactic: {eutaxy}, isolated {}-extreme: {extreme}",
        yes_no(p.perfect),
        p.rank,
        p.required,
        v.m
    )
    .unwrap();
    if verbose {
        if let Some(s) = v.s_star {
            writeln!(text, "s* = {s:.6e}").unwrap();
        }
        if let Some(c) = &v.m_eutactic {
            writeln!(text, "residual = {:.3e}, min coefficient = {:.6e}", c.residual, c.min_coefficient).unwrap();
            let coeffs: Vec<String> = c.coefficients.iter().map(|a| format!("{a:.6}")).collect();
            writeln!(text, "coefficients: {}", coeffs.join(" ")).unwrap();
        }
        let sv: Vec<String> = p.singular_values.iter().map(|s| format!("{s:.3e}")).collect();
        writeln!(text, "singular values: {}", sv.join(" ")).unwrap();
    }
    for note in &v.notes {
        writeln!(text, "note: {note}").unwrap();
    }
    let mut json = json!({
        "command": "certify",
        "m": v.m,
        "lambda": min.lambda,
        "m_perfect": {
            "perfect": p.perfect,
            "rank": p.rank,
            "required": p.required,
            "singular_values": p.singular_values,
        },
        "m_eutactic": v.m_eutactic.is_some(),
        "s_star": v.s_star,
        "coefficients": v.m_eutactic.as_ref().map(|c| c.coefficients.clone()),
        "residual": v.m_eutactic.as_ref().map(|c| c.residual),
        "isolated_m_extreme": v.isolated_m_extreme,
        "notes": v.notes,
        "exact": Value::Null,
    });
    if exact {
        let e = certify_exact(rational)?;
        writeln!(
            text,
            "exact: λ={}, rank {}/{}, m-eutactic: {}{}, isolated {}-extreme: {}, translational nullity {}",
            e.lambda,
            e.rank,
            e.required,
            yes_no(e.eutactic),
            e.s_star.as_ref().map(|s| format!(" (s*={s})")).unwrap_or_default(),
            v.m,
            if e.isolated_m_extreme { "yes" } else { "not certified" },
            e.translational_nullity
        )
        .unwrap();
        if e.isolated_m_extreme != v.isolated_m_extreme {
            writeln!(text, "note: the exact and floating-point verdicts differ; trust the exact one").unwrap();
        }
        json["exact"] = json!({
            "lambda": scalar_json(&e.lambda),
            "rank": e.rank,
            "required": e.required,
            "perfect": e.perfect,
            "in_span": e.in_span,
            "s_star": e.s_star.as_ref().map(scalar_json),
            "coefficients": e.coefficients.as_ref().map(|c| c.iter().map(scalar_json).collect::<Vec<_>>()),
            "eutactic": e.eutactic,
            "isolated_m_extreme": e.isolated_m_extreme,
            "translational_nullity": e.translational_nullity,
        });
    }
    Ok(Output { json, text, exit_code: 0 })
}

fn float(
    doc: &FormDocument,
    form: &periodic_forms::PeriodicForm,
    m_max: usize,
    eps: f64,
    samples: usize,
) -> Result<Output, CliError> {
    if form.m() != 1 {
        return Err(CliError::Usage(format!("float expects a lattice (m = 1), the input has m = {}", form.m())));
    }
    if !(eps > 0.0 && eps.is_finite()) || samples == 0 || m_max == 0 {
        return Err(CliError::Usage("float needs --m-max >= 1, --eps > 0 and --samples >= 1".into()));
    }
    let v = strict_periodic_extreme_verdict_with(form.q(), m_max, SlideOptions { eps_max: eps, samples })?;
    let c = &v.classification;
    let mut text = String::new();
    if let Some(name) = &doc.name {
        writeln!(text, "{name} (d={})", doc.d).unwrap();
    }
    writeln!(
        text,
        "perfect: {} (rank {}/{}), eutactic: {}, extreme: {}, periodic extreme: {}",
        yes_no(c.perfect),
        c.rank,
        c.required,
        yes_no(c.eutactic),
        yes_no(c.extreme),
        yes_no(v.periodic_extreme)
    )
    .unwrap();
    writeln!(text, "refinements searched up to index {m_max}: {}", v.refinements.len()).unwrap();
    writeln!(text, "strict periodic extreme up to index {m_max}: {}", yes_no(v.strict_up_to_m_max)).unwrap();
    let witness_json = match v.witness() {
        Some(w) => {
            let exact = doc.to_rational()?.refine(&w.refinement)?;
            let wdoc = FormDocument::from_rational(&exact, None);
            let profile = w.floating.slides.iter().find(|s| s.keeps_minimum).expect("witness has a kept slide");
            writeln!(
                text,
                "floating witness at index {} (H = {}): translational nullspace dimension {}, λ stays ≥ {} on ε ∈ [0, {eps}]",
                w.m(),
                w.refinement,
                w.floating.nullspace.basis.len(),
                profile.min_lambda()
            )
            .unwrap();
            writeln!(text, "witness form: {wdoc}").unwrap();
            for n in &w.floating.nullspace.basis {
                writeln!(text, "direction: {}", direction_json(n)).unwrap();
            }
            json!({
                "m": w.m(),
                "hnf": hnf_json(w.refinement.h()),
                "form": wdoc.to_json(),
                "directions": w.floating.nullspace.basis.iter().map(direction_json).collect::<Vec<_>>(),
                "slide": {
                    "eps_max": eps,
                    "samples": samples,
                    "min_lambda": profile.min_lambda(),
                    "keeps_minimum": profile.keeps_minimum,
                },
            })
        }
        None => {
            writeln!(text, "no floating witness up to index {m_max}").unwrap();
            Value::Null
        }
    };
    for note in &v.notes {
        writeln!(text, "note: {note}").unwrap();
    }
    let refinements: Vec<Value> = v
        .refinements
        .iter()
        .map(|r| {
            json!({
                "m": r.m(),
                "hnf": hnf_json(r.refinement.h()),
                "lambda": r.lambda,
                "perfect": r.perfection.perfect,
                "rank": r.perfection.rank,
                "required": r.perfection.required,
                "eutactic": r.eutaxy.is_some(),
                "nullspace_dim": r.floating.nullspace.basis.len(),
                "sym_block_trivial": r.sym_block_trivial(),
                "verdict": r.floating.verdict.to_string(),
            })
        })
        .collect();
    let json = json!({
        "command": "float",
        "m_max": m_max,
        "perfect": c.perfect,
        "eutactic": c.eutactic,
        "extreme": c.extreme,
        "periodic_extreme": v.periodic_extreme,
        "strict_up_to_m_max": v.strict_up_to_m_max,
        "refinements": refinements,
        "witness": witness_json,
        "notes": v.notes,
    });
    Ok(Output { json, text, exit_code: 0 })
}

fn refine(doc: &FormDocument, exact: &RationalForm, index: Option<usize>, hnf: Option<&str>) -> Result<Output, CliError> {
    let subs = match (index, hnf) {
        (_, Some(text)) => {
            let s = parse_hnf(text)?;
            if s.dim() != doc.d {
                return Err(CliError::Usage(format!("--hnf has size {}, the form has d = {}", s.dim(), doc.d)));
            }
            if index.is_some_and(|m| m != s.index()) {
                return Err(CliError::Usage(format!("--hnf has determinant {}, not --index", s.index())));
            }
            vec![s]
        }
        (Some(m), None) => enumerate_sublattices(doc.d, m).map_err(|e| CliError::Usage(e.to_string()))?,
        (None, None) => return Err(CliError::Usage("refine needs --index or --hnf".into())),
    };
    let mut text = String::new();
    let mut items = Vec::with_capacity(subs.len());
    for s in &subs {
        let refined = exact.refine(s)?;
        let name = doc.name.as_ref().map(|n| format!("{n} [{s}]"));
        let rdoc = FormDocument::from_rational(&refined, name);
        writeln!(text, "{rdoc}").unwrap();
        items.push(json!({ "hnf": hnf_json(s.h()), "form": rdoc.to_json() }));
    }
    let json = json!({
        "command": "refine",
        "index": subs.first().map_or(0, |s| s.index()),
        "refinements": items,
    });
    Ok(Output { json, text, exit_code: 0 })
}

fn optimize(
    doc: &FormDocument,
    form: &periodic_forms::PeriodicForm,
    cfg: &SearchConfig,
    trace: bool,
) -> Result<Output, CliError> {
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let out = local_improve(form, cfg)?;
    let mut text = String::new();
    if let Some(name) = &doc.name {
        writeln!(text, "{name} (d={}, m={})", doc.d, doc.m).unwrap();
    }
    writeln!(
        text,
        "start δ≈{:.9}, best δ≈{:.9} (restart {}), improved: {} (gain {:.3e})",
        out.start_density,
        out.best_density,
        out.best_restart,
        yes_no(out.improved),
        out.gain()
    )
    .unwrap();
    let best = FormDocument::from_float(&out.best, None);
    writeln!(text, "best form: {best}").unwrap();
    if trace {
        for t in &out.traces {
            let ds: Vec<String> = t.densities.iter().map(|d| format!("{d:.9}")).collect();
            writeln!(text, "trace {}: {}", t.restart, ds.join(" ")).unwrap();
        }
    }
    let json = json!({
        "command": "optimize",
        "config": {
            "step": cfg.step,
            "shrink": cfg.shrink,
            "iters": cfg.iters,
            "restarts": cfg.restarts,
            "seed": cfg.seed,
        },
        "start_density": out.start_density,
        "best_density": out.best_density,
        "gain": out.gain(),
        "improved": out.improved,
        "best_restart": out.best_restart,
        "best_form": best.to_json(),
        "traces": if trace {
            Value::from(out.traces.iter().map(|t| t.densities.clone()).collect::<Vec<_>>())
        } else {
            Value::Null
        },
    });
    Ok(Output { json, text, exit_code: 0 })
}
