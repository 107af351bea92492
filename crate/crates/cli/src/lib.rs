//! Command implementations behind the `scgm` binary. Every command returns a
//! [`Report`]: text for the terminal plus named output files.

pub mod selftest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use scgm_core::{
    beta_from_eta, fit_constrained, graph_allocation, model_search, scgm_constraints, ContingencyTable, Criterion,
    FitOptions, FitResult, SearchOptions, StatementKind, StratifiedChainGraph, TableFormat, AIC_FORMULA, BIC_FORMULA,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Domain(_) => EXIT_DOMAIN,
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub files: Vec<(String, String)>,
    pub exit: i32,
}

impl Report {
    fn ok(text: String) -> Self {
        Report {
            text,
            files: Vec::new(),
            exit: EXIT_OK,
        }
    }

    /// Writes every file under `dir`, creating it when missing.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub table: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub fit: FitOptions,
    pub criterion: Criterion,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub json: bool,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        RunConfig {
            command: command.to_string(),
            table: None,
            graph: None,
            fit: FitOptions::default(),
            criterion: Criterion::default(),
            out: None,
            seed: 0,
            json: false,
        }
    }

    pub fn to_json(&self) -> Value {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        json!({
            "command": self.command,
            "table": path(&self.table),
            "graph": path(&self.graph),
            "criterion": self.criterion.as_str(),
            "seed": self.seed,
            "version": VERSION,
            "fit_options": {
                "max_iterations": self.fit.max_iterations,
                "constraint_tolerance": self.fit.constraint_tolerance,
                "step_halving_max": self.fit.step_halving_max,
                "gradient_tolerance": self.fit.gradient_tolerance,
                "smoothing": self.fit.smoothing,
            },
            "formulas": { "AIC": AIC_FORMULA, "BIC": BIC_FORMULA },
        })
    }

    /// Comment lines that open every CSV output.
    fn csv_preamble(&self) -> String {
        format!("# scgm {VERSION}\n# run: {}\n", self.to_json())
    }

    fn table_path(&self) -> Result<&Path, CliError> {
        self.table
            .as_deref()
            .ok_or_else(|| CliError::Input(format!("`{}` needs --table", self.command)))
    }

    fn graph_path(&self) -> Result<&Path, CliError> {
        self.graph
            .as_deref()
            .ok_or_else(|| CliError::Input(format!("`{}` needs --graph", self.command)))
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

pub fn load_table(path: &Path) -> Result<ContingencyTable, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    ContingencyTable::load(file, TableFormat::from_path(path))
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_graph(path: &Path) -> Result<StratifiedChainGraph, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    StratifiedChainGraph::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Reorders the graph to the table's variable order.
fn align(graph: &StratifiedChainGraph, table: &ContingencyTable) -> Result<StratifiedChainGraph, CliError> {
    let names: Vec<String> = table.variables().iter().map(|v| v.name.clone()).collect();
    graph.reordered(&names).ok_or_else(|| {
        CliError::Domain(format!(
            "graph vertices {:?} do not match table variables {:?}",
            graph.names(),
            names
        ))
    })
}

fn check_valid(graph: &StratifiedChainGraph) -> Result<(), CliError> {
    let issues = graph.validate();
    if issues.is_empty() {
        Ok(())
    } else {
        Err(CliError::Domain(format!("invalid graph: {issues:?}")))
    }
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<Report, CliError> {
    let graph = load_graph(cfg.graph_path()?)?;
    let issues = graph.validate();
    if issues.is_empty() {
        let comps: Vec<String> = graph
            .chain_components()
            .iter()
            .map(|&c| format!("{{{}}}", graph.set_label(c)))
            .collect();
        return Ok(Report::ok(format!("valid: components {}\n", comps.join(" < "))));
    }
    let mut text = String::new();
    for issue in &issues {
        let _ = writeln!(text, "{issue}");
    }
    Ok(Report {
        text,
        files: Vec::new(),
        exit: EXIT_DOMAIN,
    })
}

pub fn cmd_markov(cfg: &RunConfig) -> Result<Report, CliError> {
    let graph = load_graph(cfg.graph_path()?)?;
    let stmts = graph
        .stratified_markov()
        .map_err(|e| CliError::Domain(e.to_string()))?;
    let mut report = if cfg.json {
        let list: Vec<Value> = stmts.iter().map(|s| s.to_json(&graph)).collect();
        Report::ok(pretty(&json!({ "run": cfg.to_json(), "statements": list })))
    } else {
        let mut text = String::new();
        for s in &stmts {
            let _ = writeln!(text, "{:<20} {}", s.rule.as_str(), s.text(&graph));
        }
        Report::ok(text)
    };
    let list: Vec<Value> = stmts.iter().map(|s| s.to_json(&graph)).collect();
    let cs = stmts.iter().filter(|s| s.kind() == StatementKind::ContextSpecific).count();
    report.files.push((
        "markov.json".into(),
        pretty(&json!({
            "run": cfg.to_json(),
            "statements": list,
            "context_specific": cs,
            "marginals": graph.marginal_sets().iter().map(|&m| graph.set_label(m)).collect::<Vec<_>>(),
        })),
    ));
    Ok(report)
}

pub fn cmd_constraints(cfg: &RunConfig) -> Result<Report, CliError> {
    let table = load_table(cfg.table_path()?)?;
    let graph = align(&load_graph(cfg.graph_path()?)?, &table)?;
    check_valid(&graph)?;
    let sys = scgm_constraints(&graph, table.variables()).map_err(|e| CliError::Domain(e.to_string()))?;
    let doc = json!({
        "run": cfg.to_json(),
        "rows": sys.len(),
        "rank": sys.rank(),
        "constraints": sys.to_json(table.variables()),
    });
    let mut report = Report::ok(format!("{} constraint rows of rank {}\n", sys.len(), sys.rank()));
    if cfg.json {
        report.text = pretty(&doc);
    }
    report.files.push(("constraints.json".into(), pretty(&doc)));
    Ok(report)
}

/// Fits the graph model to the table.
pub fn fit_graph(
    table: &ContingencyTable,
    graph: &StratifiedChainGraph,
    options: &FitOptions,
) -> Result<FitResult, CliError> {
    check_valid(graph)?;
    let sys = scgm_constraints(graph, table.variables()).map_err(|e| CliError::Domain(e.to_string()))?;
    let alloc = graph_allocation(graph).map_err(|e| CliError::Domain(e.to_string()))?;
    let fit = fit_constrained(table, &sys, options).map_err(|e| CliError::Domain(e.to_string()))?;
    if fit.pi_hat.probs().iter().all(|&p| p > 0.0) {
        fit.with_parameters(&alloc).map_err(|e| CliError::Domain(e.to_string()))
    } else {
        Ok(fit)
    }
}

fn fit_line(label: &str, f: &FitResult) -> String {
    format!(
        "{label:<28} G2 {:>10.2}  df {:>4}  p {:.4}  AIC {:>10.2}  BIC {:>10.2}\n",
        f.g2, f.df, f.p_value, f.aic, f.bic
    )
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Report, CliError> {
    let table = load_table(cfg.table_path()?)?;
    let graph = align(&load_graph(cfg.graph_path()?)?, &table)?;
    let fit = fit_graph(&table, &graph, &cfg.fit)?;
    let mut doc = fit.to_json();
    doc["run"] = cfg.to_json();
    let mut report = Report::ok(fit_line("model", &fit));
    if let Some(eta) = &fit.eta_hat {
        let reg = beta_from_eta(eta, &graph).map_err(|e| CliError::Domain(e.to_string()))?;
        let mut rj = reg.to_json();
        rj["run"] = cfg.to_json();
        rj["context_tables"] = json!(reg.context_tables());
        report.files.push(("regression.json".into(), pretty(&rj)));
        report
            .files
            .push(("regression.csv".into(), format!("{}{}", cfg.csv_preamble(), reg.to_csv())));
    }
    report.files.insert(0, ("fit.json".into(), pretty(&doc)));
    if !fit.converged {
        report.text.push_str("warning: the fit did not converge\n");
        report.exit = EXIT_NOT_CONVERGED;
    }
    Ok(report)
}

pub fn cmd_search(cfg: &RunConfig) -> Result<Report, CliError> {
    let table = load_table(cfg.table_path()?)?;
    let graph = align(&load_graph(cfg.graph_path()?)?, &table)?;
    let options = SearchOptions {
        criterion: cfg.criterion,
        fit: cfg.fit,
        ..SearchOptions::default()
    };
    let trace = model_search(&table, &graph, &options).map_err(|e| CliError::Domain(e.to_string()))?;
    let mut text = String::new();
    let mut files = Vec::new();
    for (k, step) in trace.steps.iter().enumerate() {
        let _ = writeln!(text, "step {}: {} ({})", k + 1, step.name, step.decision);
        for (i, c) in step.candidates.iter().enumerate() {
            let mark = if step.selected == Some(i) { "*" } else { " " };
            match &c.fit {
                Ok(s) => {
                    let _ = writeln!(
                        text,
                        " {mark} {:<40} G2 {:>10.2}  df {:>4}  p {:.4}  AIC {:>10.2}  BIC {:>10.2}",
                        c.label, s.g2, s.df, s.p_value, s.aic, s.bic
                    );
                }
                Err(e) => {
                    let _ = writeln!(text, " {mark} {:<40} not fitted: {e}", c.label);
                }
            }
        }
        files.push((format!("search_step{}.csv", k + 1), format!("{}{}", cfg.csv_preamble(), step.to_csv())));
    }
    let _ = writeln!(text, "selected statements:");
    for s in trace.selected_statements() {
        let _ = writeln!(text, "  {s}");
    }
    let mut doc = trace.to_json();
    doc["run"] = cfg.to_json();
    files.insert(0, ("search.json".into(), pretty(&doc)));
    files.push(("selected.graph".into(), trace.selected.to_string()));
    Ok(Report {
        text,
        files,
        exit: EXIT_OK,
    })
}

/// Runs the planted round trips with seeds starting at `cfg.seed`.
pub fn cmd_selftest(cfg: &RunConfig, seeds: u64) -> Result<Report, CliError> {
    let outcomes: Vec<selftest::CaseOutcome> = selftest::planted_cases()
        .iter()
        .map(|c| selftest::run_case(c, cfg.seed, seeds))
        .collect();
    let mut text = String::new();
    for o in &outcomes {
        let _ = writeln!(
            text,
            "{} {:<26} planted residual {:.2e}  weakest violation {:.2e}{}",
            if o.passed() { "PASS" } else { "FAIL" },
            o.name,
            o.planted_residual,
            o.weakest_violation,
            o.error.as_deref().map(|e| format!("  error: {e}")).unwrap_or_default()
        );
    }
    let all = outcomes.iter().all(|o| o.passed());
    let doc = json!({
        "run": cfg.to_json(),
        "cases": outcomes.iter().map(|o| o.to_json()).collect::<Vec<_>>(),
        "passed": all,
    });
    Ok(Report {
        text,
        files: vec![("selftest.json".into(), pretty(&doc))],
        exit: if all { EXIT_OK } else { EXIT_DOMAIN },
    })
}
