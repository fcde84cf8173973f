//! Command-line front end. Each subcommand binds one library operation
//! family and emits one report document.
//!
//! CSV columns per report kind:
//!
//! | kind | columns |
//! |---|---|
//! | `best-seq` | `n,q,p,err,ln_err` |
//! | `dirichlet` | `q,p,err,ln_err` |
//! | `exponents` (`--w`) | `n,q,q_next,ln_err,uniform,ordinary,censored` |
//! | `exponents` (`--W`) | `q,eps,weight_index` |
//! | `singular-cert`, `construct-hyperplane` | `record,weight_index,q_from,q_to,q,p,err` |
//! | `flow` (trace) | `t,w_index,delta,rate,q` |
//! | `flow` (`--t`) | `w_index,t,delta_sup,delta_quasi` |
//! | `structure-pairs` | `n,q,q_next,r,x,y,c1,c2,l1,l2,k1,k2,selected,bound_ok,A,B,label` |
//! | `probe` | `set,index,value` |
//! | `construct-cf` | `n,a,p,q` |
//! | all others | `key,value` |
//!
//! `p` vectors are space separated inside one field.

pub mod config;
pub mod grammar;
pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};

use crate::approx::{
    best_sequence, dirichlet_certificate, dirichlet_solve, epsilon_singular_certificate, ordinary_exponent_estimate,
    sigma_hat_w_estimate, singular_certificate, uniform_exponent_estimate, Approximant, CertificateReport,
};
use crate::dynamics::{
    covolume_decomposition_check, dani_cross_check, delta_w_with_budget, delta_with_budget, gram_cross_check,
    ln_submodule_covolume, single_weight_equality_check_with, tau_hat_estimate, tau_hat_quasi_estimate,
    verify_sandwich_with, FlowPoint, SubmoduleBasis,
};
use crate::error::{Error, Result};
use crate::norm::quasi_norm;
use crate::real::CfRule;
use crate::structure::{
    consecutive_pair_analysis, continued_fraction_vector, default_tail, primes, exponent_relation_check,
    exponent_relation_formula, hyperplane_point, inheritance_probe, solve_linear_diophantine, AffineMap, PolyCurve,
};
use crate::target::{Coord, TargetVector};
use crate::weight::{Weight, WeightSet};
use config::{OutputFormat, RunConfig, WeightSource};
use grammar::{
    parse_coord, parse_integer_rows, parse_rational, parse_rational_list, parse_rational_rows, parse_vector,
    parse_weight, parse_weight_file, parse_weight_set,
};
use report::{num, to_csv, to_json, validate_document, Report, Table};

#[derive(Parser, Debug)]
#[command(name = "wdioph", version, about = "Weighted Diophantine approximation workbench")]
pub struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// working precision in bits (default from WDIOPH_PRECISION, else 256)
    #[arg(long, global = true)]
    pub precision: Option<u32>,
    #[arg(long = "Qmax", global = true)]
    pub q_max: Option<u64>,
    #[arg(long = "tmax", global = true)]
    pub t_max: Option<f64>,
    #[arg(long = "tstep", global = true)]
    pub t_step: Option<f64>,
    #[arg(long = "tail-fraction", global = true)]
    pub tail_fraction: Option<f64>,
    /// weight set: `w1; w2; ...` or `grid(1/N)`
    #[arg(long = "W", global = true)]
    pub weights: Option<String>,
    /// weight-set file, one weight per line
    #[arg(long = "W-file", global = true)]
    pub weights_file: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<OutputFormat>,
    /// write the report here instead of standard output
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Weighted quasi-norm of a vector
    Norm {
        #[arg(long)]
        x: String,
        #[arg(long)]
        w: String,
    },
    /// Smallest q <= Q with ||q x - p||_w < 1/Q
    Dirichlet {
        #[arg(long)]
        x: String,
        #[arg(long)]
        w: String,
        #[arg(long = "Q")]
        q: u64,
    },
    /// Best-approximation sequence up to Q_max
    BestSeq {
        #[arg(long)]
        x: String,
        #[arg(long)]
        w: String,
    },
    /// Uniform and ordinary exponent estimates (`--w`) or the weight-set estimate (`--W`)
    Exponents {
        #[arg(long)]
        x: String,
        #[arg(long)]
        w: Option<String>,
    },
    /// Finite-scale singularity certificate
    SingularCert {
        #[arg(long)]
        x: String,
        #[arg(long, group = "level")]
        delta: Option<String>,
        #[arg(long, group = "level")]
        epsilon: Option<String>,
        #[arg(long, group = "level")]
        dirichlet: bool,
    },
    /// Shortest vectors along the diagonal flow
    Flow {
        #[arg(long)]
        x: String,
        #[arg(long)]
        w: Option<String>,
        /// single time instead of a rate trace
        #[arg(long)]
        t: Option<f64>,
        /// quasi-norm trace for a single weight
        #[arg(long)]
        quasi: bool,
    },
    /// Exponent/rate sandwich, single-weight equality and certificate-flow cross-check
    Correspondence {
        #[arg(long)]
        x: String,
        #[arg(long, default_value_t = 0.1)]
        slack: f64,
        #[arg(long = "dani-delta")]
        dani_delta: Option<String>,
    },
    /// Covolume of a primitive submodule along the flow
    Covolume {
        /// integer basis rows `v1; v2; ...`
        #[arg(long)]
        basis: String,
        #[arg(long)]
        x: String,
        #[arg(long)]
        w: String,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// comparison constant for the decomposition check
        #[arg(long = "C")]
        c: Option<f64>,
    },
    /// Integer-structure analytics
    Structure {
        #[command(subcommand)]
        command: StructureCommand,
    },
    /// Constructive point families
    Construct {
        #[command(subcommand)]
        command: ConstructCommand,
    },
    /// Uniform exponents on a subspace against a curve inside it
    Probe {
        /// direction matrix rows, one per coordinate
        #[arg(long = "A")]
        a: String,
        /// base point
        #[arg(long)]
        b: String,
        /// per-coordinate polynomial coefficients, ascending powers
        #[arg(long)]
        curve: String,
        #[arg(long, default_value_t = 8)]
        samples: usize,
    },
    /// Re-validate the witnesses embedded in a JSON report
    Validate { file: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum StructureCommand {
    /// Solution family of a X - b Y = c
    Diophantine {
        #[arg(long, allow_negative_numbers = true)]
        a: i128,
        #[arg(long, allow_negative_numbers = true)]
        b: i128,
        #[arg(long, allow_negative_numbers = true)]
        c: i128,
    },
    /// Decomposition of consecutive best approximations of a planar target
    Pairs {
        #[arg(long)]
        x: String,
        #[arg(long)]
        delta: String,
    },
    /// Improved exponent from the consecutive-pair relation
    Relation {
        #[arg(long)]
        sigma2: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum ConstructCommand {
    /// Rational head with an irrational tail
    Hyperplane {
        #[arg(long)]
        w: String,
        #[arg(long)]
        head: String,
        #[arg(long)]
        tail: Option<String>,
        #[arg(long, default_value = "1/4")]
        tolerance: String,
    },
    /// Prescribed continued fraction: ones, n, q, random:SEED:MAX or a0;a1,...[;period]
    Cf {
        #[arg(long)]
        rule: String,
    },
}

fn io(e: std::io::Error, path: &Path) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_env()?;
    if let Some(path) = &cli.config {
        cfg.apply_file(&std::fs::read_to_string(path).map_err(|e| io(e, path))?)?;
    }
    if let Some(v) = cli.precision {
        cfg.precision_bits = v;
    }
    if let Some(v) = cli.q_max {
        cfg.q_max = v;
    }
    if let Some(v) = cli.t_max {
        cfg.t_max = v;
    }
    if let Some(v) = cli.t_step {
        cfg.t_step = v;
    }
    if let Some(v) = cli.tail_fraction {
        cfg.tail_fraction = Some(v);
    }
    if let Some(v) = &cli.weights {
        cfg.weights = Some(WeightSource::Inline(v.clone()));
    } else if let Some(p) = &cli.weights_file {
        cfg.weights = Some(WeightSource::File(p.clone()));
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.format {
        cfg.format = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Rewrites a dimension mismatch between two arguments as a diagnostic.
fn same_dim(what: &str, d: usize, x_dim: usize) -> Result<()> {
    if d != x_dim {
        return Err(Error::parse(
            1,
            1,
            format!("{what} has dimension {d} but --x has dimension {x_dim}"),
        ));
    }
    Ok(())
}

fn weight_set_text(ws: &WeightSet) -> String {
    ws.weights().iter().map(|w| w.to_string()).collect::<Vec<_>>().join("; ")
}

struct Runner {
    cfg: RunConfig,
    inputs: BTreeMap<&'static str, String>,
}

impl Runner {
    fn x(&mut self, text: &str) -> Result<TargetVector> {
        self.inputs.insert("x", text.to_string());
        parse_vector(text, self.cfg.precision_bits)
    }

    fn w(&mut self, text: &str, x: &TargetVector) -> Result<Weight> {
        self.inputs.insert("w", text.to_string());
        let w = parse_weight(text)?;
        same_dim("--w", w.dim(), x.dim())?;
        Ok(w)
    }

    /// The configured weight set, or `{w}` when a single weight is given.
    fn ws(&mut self, single: Option<&str>, x: &TargetVector) -> Result<WeightSet> {
        if let Some(w) = single {
            return Ok(WeightSet::singleton(self.w(w, x)?));
        }
        let ws = match &self.cfg.weights {
            Some(WeightSource::Inline(t)) => parse_weight_set(t, x.dim())?,
            Some(WeightSource::File(p)) => parse_weight_file(&std::fs::read_to_string(p).map_err(|e| io(e, p))?)?,
            None => return Err(Error::parse(1, 1, "a weight set is required (--W, --W-file or --w)")),
        };
        same_dim("--W", ws.dim(), x.dim())?;
        self.inputs.insert("W", weight_set_text(&ws));
        Ok(ws)
    }

    fn report(&mut self, kind: &'static str, payload: impl Serialize, table: Table) -> Result<Report> {
        Ok(Report {
            kind,
            inputs: std::mem::take(&mut self.inputs),
            payload: serde_json::to_value(payload).map_err(|e| Error::Io(e.to_string()))?,
            table,
        })
    }
}

fn p_text(a: &Approximant) -> String {
    a.p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn certificate_table(c: &CertificateReport) -> Table {
    let mut t = Table::new(&["record", "weight_index", "q_from", "q_to", "q", "p", "err"]);
    for w in &c.witnesses {
        t.push(vec![
            "witness".into(),
            w.weight_index.to_string(),
            w.q_from.to_string(),
            w.q_to.to_string(),
            w.approximant.q.to_string(),
            p_text(&w.approximant),
            num(w.approximant.err.approx()),
        ]);
    }
    for f in &c.failures {
        t.push(vec![
            "failure".into(),
            f.weight_index.to_string(),
            f.q_from.to_string(),
            f.q_to.to_string(),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    t
}

fn error_value(e: &Error) -> Value {
    json!({ "error": e.to_string() })
}

fn cf_rule(text: &str) -> Result<CfRule> {
    match parse_coord(&format!("cf({text})")) {
        Ok(Coord::Real(rc)) => match rc.base.expr() {
            crate::real::RealExpr::ContinuedFraction(r) => Ok(r.clone()),
            _ => Err(Error::parse(1, 1, "not a continued-fraction rule")),
        },
        Ok(Coord::Rational(_)) => Err(Error::Domain("the rule describes a finite expansion".into())),
        Err(Error::Parse { line, column, message }) => Err(Error::Parse {
            line,
            column: column.saturating_sub(3).max(1),
            message,
        }),
        Err(e) => Err(e),
    }
}

fn run_command(cli: &Cli, cfg: RunConfig) -> Result<Report> {
    let mut r = Runner {
        cfg: cfg.clone(),
        inputs: BTreeMap::new(),
    };
    let est = cfg.estimator();
    let flow = cfg.flow();
    match &cli.command {
        Command::Norm { x, w } => {
            let x = r.x(x)?;
            let w = r.w(w, &x)?;
            let v = quasi_norm(&x, &w)?;
            let exact = v.exact().map(|e| e.to_string());
            let payload = json!({
                "value": v.approx().is_finite().then(|| v.approx()),
                "ln_value": v.ln_approx().is_finite().then(|| v.ln_approx()),
                "exact": exact,
                "precision": v.precision(),
            });
            let t = Table::key_value(vec![
                ("value", num(v.approx())),
                ("ln_value", num(v.ln_approx())),
                ("exact", exact.clone().unwrap_or_default()),
            ]);
            r.report("norm", payload, t)
        }
        Command::Dirichlet { x, w, q } => {
            let x = r.x(x)?;
            let w = r.w(w, &x)?;
            r.inputs.insert("Q", q.to_string());
            let a = dirichlet_solve(&x, &w, *q)?;
            let mut t = Table::new(&["q", "p", "err", "ln_err"]);
            t.push(vec![a.q.to_string(), p_text(&a), num(a.err.approx()), num(a.err.ln_approx())]);
            r.report("dirichlet", json!({ "Q": q, "approximant": a }), t)
        }
        Command::BestSeq { x, w } => {
            let x = r.x(x)?;
            let w = r.w(w, &x)?;
            let s = best_sequence(&x, &w, cfg.q_max)?;
            let mut t = Table::new(&["n", "q", "p", "err", "ln_err"]);
            for (n, a) in s.entries.iter().enumerate() {
                t.push(vec![
                    n.to_string(),
                    a.q.to_string(),
                    p_text(a),
                    num(a.err.approx()),
                    num(a.err.ln_approx()),
                ]);
            }
            r.report("best-seq", s, t)
        }
        Command::Exponents { x, w } => {
            let x = r.x(x)?;
            if let Some(w) = w {
                let w = r.w(w, &x)?;
                let u = uniform_exponent_estimate(&x, &w, cfg.q_max, &est)?;
                let o = ordinary_exponent_estimate(&x, &w, cfg.q_max, &est);
                let mut t = Table::new(&["n", "q", "q_next", "ln_err", "uniform", "ordinary", "censored"]);
                for g in &u.per_gap_exponents {
                    t.push(vec![
                        g.n.to_string(),
                        g.q.to_string(),
                        g.q_next.to_string(),
                        num(g.ln_err),
                        num(g.uniform),
                        g.ordinary.map(num).unwrap_or_default(),
                        g.censored.to_string(),
                    ]);
                }
                let ordinary = match &o {
                    Ok(e) => serde_json::to_value(e).map_err(|e| Error::Io(e.to_string()))?,
                    Err(e) => error_value(e),
                };
                r.report("exponents", json!({ "uniform": u, "ordinary": ordinary }), t)
            } else {
                let ws = r.ws(None, &x)?;
                let s = sigma_hat_w_estimate(&x, &ws, cfg.q_max, &est)?;
                let mut t = Table::new(&["q", "eps", "weight_index"]);
                for g in &s.grid {
                    t.push(vec![g.q.to_string(), num(g.eps), g.weight_index.to_string()]);
                }
                r.report("exponents", json!({ "sigma_hat": s }), t)
            }
        }
        Command::SingularCert {
            x,
            delta,
            epsilon,
            dirichlet,
        } => {
            let x = r.x(x)?;
            let ws = r.ws(None, &x)?;
            let c = match (delta, epsilon, dirichlet) {
                (Some(d), _, _) => {
                    r.inputs.insert("delta", d.clone());
                    singular_certificate(&x, &ws, &parse_rational(d)?, cfg.q_max)?
                }
                (_, Some(e), _) => {
                    r.inputs.insert("epsilon", e.clone());
                    epsilon_singular_certificate(&x, &ws, &parse_rational(e)?, cfg.q_max)?
                }
                (_, _, true) => dirichlet_certificate(&x, &ws, cfg.q_max)?,
                _ => return Err(Error::parse(1, 1, "one of --delta, --epsilon or --dirichlet is required")),
            };
            let t = certificate_table(&c);
            r.report("singular-cert", c, t)
        }
        Command::Flow { x, w, t, quasi } => {
            let x = r.x(x)?;
            let ws = r.ws(w.as_deref(), &x)?;
            if let Some(t) = t {
                r.inputs.insert("t", t.to_string());
                let mut tab = Table::new(&["w_index", "t", "delta_sup", "delta_quasi"]);
                let mut rows = Vec::new();
                for (i, w) in ws.weights().iter().enumerate() {
                    let fp = FlowPoint::new(x.clone(), w.clone(), *t)?;
                    let sup = delta_with_budget(&fp, flow.budget)?;
                    let quasi = delta_w_with_budget(&x, &WeightSet::singleton(w.clone()), *t, flow.budget)?;
                    tab.push(vec![i.to_string(), num(*t), num(sup), num(quasi)]);
                    rows.push(json!({ "w_index": i, "delta_sup": sup, "delta_quasi": quasi }));
                }
                let all = delta_w_with_budget(&x, &ws, *t, flow.budget)?;
                r.report("flow", json!({ "t": t, "per_weight": rows, "delta_w": all }), tab)
            } else {
                let grid = flow.grid(cfg.t_max)?;
                let trace = if *quasi {
                    if ws.len() != 1 {
                        return Err(Error::Domain("the quasi-norm trace takes a single weight".into()));
                    }
                    tau_hat_quasi_estimate(&x, &ws.weights()[0], &grid, &flow)?
                } else {
                    tau_hat_estimate(&x, &ws, &grid, &flow)?
                };
                let mut tab = Table::new(&["t", "w_index", "delta", "rate", "q"]);
                for s in &trace.samples {
                    tab.push(vec![num(s.t), s.w_index.to_string(), num(s.delta), num(s.rate), s.q.to_string()]);
                }
                let norm = if *quasi { "quasi" } else { "sup" };
                r.report("flow", json!({ "norm": norm, "flow_config": flow, "trace": trace }), tab)
            }
        }
        Command::Correspondence { x, slack, dani_delta } => {
            let x = r.x(x)?;
            let ws = r.ws(None, &x)?;
            r.inputs.insert("slack", slack.to_string());
            let s = verify_sandwich_with(&x, &ws, cfg.q_max, cfg.t_max, *slack, &est, &flow)?;
            let mut pairs = vec![
                ("sigma_hat", num(s.sigma_hat)),
                ("tau_hat", num(s.tau_hat)),
                ("lower", num(s.lower)),
                ("upper", num(s.upper)),
                ("lower_ok", s.lower_ok.to_string()),
                ("upper_ok", s.upper_ok.to_string()),
                ("sandwich_passed", s.passed.to_string()),
            ];
            let equality = if ws.len() == 1 {
                match single_weight_equality_check_with(&x, &ws.weights()[0], cfg.q_max, cfg.t_max, *slack, &est, &flow) {
                    Ok(e) => {
                        pairs.push(("quasi_tau_hat", num(e.tau_hat)));
                        pairs.push(("predicted_sigma", num(e.predicted_sigma)));
                        pairs.push(("equality_passed", e.passed.to_string()));
                        serde_json::to_value(e).map_err(|e| Error::Io(e.to_string()))?
                    }
                    Err(e) => error_value(&e),
                }
            } else {
                Value::Null
            };
            let dani = match dani_delta {
                Some(d) => {
                    r.inputs.insert("dani_delta", d.clone());
                    let rep = dani_cross_check(&x, &ws, &parse_rational(d)?, cfg.q_max, flow.budget)?;
                    pairs.push(("dani_passed", rep.passed.to_string()));
                    serde_json::to_value(rep).map_err(|e| Error::Io(e.to_string()))?
                }
                None => Value::Null,
            };
            let payload = json!({ "sandwich": s, "equality": equality, "dani": dani });
            r.report("correspondence", payload, Table::key_value(pairs))
        }
        Command::Covolume { basis, x, w, t, c } => {
            let rows = parse_integer_rows(basis)?;
            r.inputs.insert("basis", basis.clone());
            let x = r.x(x)?;
            let w = r.w(w, &x)?;
            r.inputs.insert("t", t.to_string());
            let b = SubmoduleBasis::new(rows)?;
            let ln = ln_submodule_covolume(&b, &x, &w, *t)?;
            let gram = if x.is_rational() { Some(gram_cross_check(&b, &x)?) } else { None };
            let dec = match c {
                Some(c) => Some(covolume_decomposition_check(&b, &x, &w, *t, *c)?),
                None => None,
            };
            let mut pairs = vec![("ln_covolume", num(ln)), ("covolume", num(ln.exp()))];
            if let Some(g) = &gram {
                pairs.push(("gram_equal", g.equal.to_string()));
            }
            if let Some(d) = &dec {
                pairs.push(("decomposition_ratio", num(d.ratio)));
                pairs.push(("decomposition_passed", d.passed.to_string()));
            }
            let basis: Vec<Vec<String>> = b
                .vectors()
                .iter()
                .map(|v| v.iter().map(|e| e.to_string()).collect())
                .collect();
            let plucker: Vec<(Vec<usize>, String)> = b.plucker().into_iter().map(|(i, v)| (i, v.to_string())).collect();
            let payload = json!({
                "basis": basis,
                "plucker": plucker,
                "ln_covolume": ln,
                "covolume": ln.exp(),
                "gram": gram,
                "decomposition": dec,
            });
            r.report("covolume", payload, Table::key_value(pairs))
        }
        Command::Structure { command } => match command {
            StructureCommand::Diophantine { a, b, c } => {
                r.inputs.insert("a", a.to_string());
                r.inputs.insert("b", b.to_string());
                r.inputs.insert("c", c.to_string());
                let s = solve_linear_diophantine(*a, *b, *c)?;
                let t = match &s {
                    None => Table::key_value(vec![("solution", "none".into())]),
                    Some(f) => Table::key_value(vec![
                        ("x0", f.base.0.to_string()),
                        ("y0", f.base.1.to_string()),
                        ("step_x", f.steps.0.to_string()),
                        ("step_y", f.steps.1.to_string()),
                        ("gcd", f.g.to_string()),
                    ]),
                };
                let summary = match &s {
                    None => "none".to_string(),
                    Some(f) => format!("({} + n*{}, {} + n*{})", f.base.0, f.steps.0, f.base.1, f.steps.1),
                };
                let payload = json!({ "solution": s, "summary": summary });
                r.report("structure-diophantine", payload, t)
            }
            StructureCommand::Pairs { x, delta } => {
                let x = r.x(x)?;
                same_dim("the pair analysis", 2, x.dim())?;
                r.inputs.insert("delta", delta.clone());
                let a = consecutive_pair_analysis(&x, &parse_rational(delta)?, cfg.q_max)?;
                let mut t = Table::new(&[
                    "n", "q", "q_next", "r", "x", "y", "c1", "c2", "l1", "l2", "k1", "k2", "selected", "bound_ok", "A",
                    "B", "label",
                ]);
                for row in &a.rows {
                    let (ra, rb) = row
                        .ratio
                        .as_ref()
                        .map(|(a, b)| (a.to_string(), b.to_string()))
                        .unwrap_or_default();
                    t.push(vec![
                        row.n.to_string(),
                        row.q.to_string(),
                        row.q_next.to_string(),
                        row.r.to_string(),
                        row.x.to_string(),
                        row.y.to_string(),
                        row.c[0].to_string(),
                        row.c[1].to_string(),
                        row.l[0].to_string(),
                        row.l[1].to_string(),
                        row.k[0].to_string(),
                        row.k[1].to_string(),
                        row.selected.to_string(),
                        row.bound_ok.to_string(),
                        ra,
                        rb,
                        serde_json::to_value(row.label)
                            .ok()
                            .and_then(|v| v.as_str().map(String::from))
                            .unwrap_or_default(),
                    ]);
                }
                r.report("structure-pairs", a, t)
            }
            StructureCommand::Relation { sigma2 } => {
                r.inputs.insert("sigma2", sigma2.clone());
                let s2 = parse_rational(sigma2)?;
                let s1 = exponent_relation_check(&s2)?;
                debug_assert_eq!(s1, exponent_relation_formula(&s2)?);
                let f = s1.to_f64().unwrap_or(f64::NAN);
                let t = Table::key_value(vec![("sigma2", s2.to_string()), ("sigma1", s1.to_string())]);
                r.report("structure-relation", json!({ "sigma1": s1.to_string(), "sigma1_approx": f }), t)
            }
        },
        Command::Construct { command } => match command {
            ConstructCommand::Hyperplane { w, head, tail, tolerance } => {
                r.inputs.insert("w", w.clone());
                r.inputs.insert("head", head.clone());
                r.inputs.insert("tolerance", tolerance.clone());
                let w = parse_weight(w)?;
                let head_v = parse_rational_list(head)?;
                let tol = parse_rational(tolerance)?;
                let (tail_coords, tail_text) = match tail {
                    Some(t) => {
                        r.inputs.insert("tail", t.clone());
                        let v = parse_vector(t, cfg.precision_bits)?;
                        (v.coords().to_vec(), t.clone())
                    }
                    None => {
                        let n = w.dim().saturating_sub(head_v.len());
                        let text = default_tail_text(n);
                        (default_tail(n), text)
                    }
                };
                let hp = hyperplane_point(&w, &head_v, Some(tail_coords))?;
                let x_text = head_v
                    .iter()
                    .map(|h| h.to_string())
                    .chain(std::iter::once(tail_text))
                    .collect::<Vec<_>>()
                    .join(",");
                let x = hp.x.clone().with_precision(cfg.precision_bits)?;
                let hp = crate::structure::HyperplanePoint { x, ..hp };
                let cert = hp.verify(&tol, cfg.q_max)?;
                let t = certificate_table(&cert);
                let payload = json!({
                    "x": x_text,
                    "predicted_epsilon": hp.predicted_epsilon.to_string(),
                    "certificate": cert,
                });
                r.report("construct-hyperplane", payload, t)
            }
            ConstructCommand::Cf { rule } => {
                r.inputs.insert("rule", rule.clone());
                let rl = cf_rule(rule)?;
                let v = continued_fraction_vector(rl.clone())?;
                let conv: Vec<(String, String, String)> = rl
                    .convergents()
                    .take(12)
                    .map(|(a, p, q)| (a.to_string(), p.to_string(), q.to_string()))
                    .collect();
                let mut t = Table::new(&["n", "a", "p", "q"]);
                for (n, (a, p, q)) in conv.iter().enumerate() {
                    t.push(vec![n.to_string(), a.clone(), p.clone(), q.clone()]);
                }
                let payload = json!({
                    "x": format!("cf({rule})"),
                    "x_approx": v.x.coord(0).to_f64(),
                    "sigma": v.sigma,
                    "sigma_finite": v.sigma_finite,
                    "sigma_hat": v.sigma_hat,
                    "convergents": conv,
                });
                r.report("construct-cf", payload, t)
            }
        },
        Command::Probe { a, b, curve, samples } => {
            r.inputs.insert("A", a.clone());
            r.inputs.insert("b", b.clone());
            r.inputs.insert("curve", curve.clone());
            let sub = AffineMap::new(parse_rational_rows(a)?, parse_rational_list(b)?)?;
            let cv = PolyCurve::new(parse_rational_rows(curve)?)?;
            let ws = match &cfg.weights {
                Some(_) => {
                    let dummy = TargetVector::new(vec![Coord::ratio(0, 1); sub.dim()])?;
                    r.ws(None, &dummy)?
                }
                None => {
                    let ws = WeightSet::singleton(Weight::standard(sub.dim()));
                    r.inputs.insert("W", weight_set_text(&ws));
                    ws
                }
            };
            let rep = inheritance_probe(&sub, &cv, &ws, cfg.q_max, *samples, cfg.seed, &est)?;
            let mut t = Table::new(&["set", "index", "value"]);
            for (name, st) in [("subspace", &rep.subspace_stats), ("curve", &rep.curve_stats)] {
                for (i, v) in st.values.iter().enumerate() {
                    t.push(vec![name.into(), i.to_string(), num(*v)]);
                }
            }
            r.report("probe", rep, t)
        }
        Command::Validate { file } => {
            r.inputs.insert("file", file.display().to_string());
            let text = std::fs::read_to_string(file).map_err(|e| io(e, file))?;
            let v = validate_document(&text)?;
            let t = Table::key_value(vec![
                ("kind", v.kind.clone()),
                ("checked", v.checked.to_string()),
                ("valid", v.valid.to_string()),
            ]);
            r.report("validation", v, t)
        }
    }
}

fn default_tail_text(n: usize) -> String {
    primes(n)
        .into_iter()
        .map(|p| format!("sqrt({p})-{}", num_integer::Roots::sqrt(&p)))
        .collect::<Vec<_>>()
        .join(",")
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 4 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let started = Instant::now();
    let cfg = resolve_config(cli)?;
    let rep = run_command(cli, cfg.clone())?;
    let code = match rep.payload.get("valid") {
        Some(Value::Bool(false)) if rep.kind == "validation" => 1,
        _ => 0,
    };
    let text = match cfg.format {
        OutputFormat::JsonDoc => to_json(&rep, &cfg, started.elapsed())?,
        OutputFormat::CsvColumnar => to_csv(&rep, &cfg)?,
    };
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| io(e, p))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    Ok(code)
}
