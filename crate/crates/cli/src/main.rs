// NaN must fail every range check, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use levydens::bounds::{a0, sandwich_fit, weighted_integral_check, EnvelopeParams, WeightedIntegralCase};
use levydens::checker::{
    bernstein_spotcheck, check_lower_assumptions, check_upper_assumptions, derivative_selftest, Grid, LowerCheckConfig,
    Spacing, UpperCheckConfig, SCHEMA_VERSION,
};
use levydens::density::{convolution_check, density_grid, ConvolutionGrid, DensityConfig, DensityQuery, Method};
use levydens::{Error, LevySymbol};

#[derive(Debug, Parser)]
#[command(
    name = "levydens",
    version,
    about = "Transition densities and bound checks for iterated-logarithm Levy processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Densities on an x grid (CSV or JSON).
    Density(Common),
    /// Fit the two-sided envelope to densities on an x grid.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Largest allowed max/min ratio within a regime.
        #[arg(long, default_value_t = 1e3)]
        spread: f64,
        #[arg(long, default_value_t = 3)]
        min_per_regime: usize,
    },
    /// Certify the growth assumptions on a xi grid.
    Assumptions(Common),
    /// Semigroup check p_t * p_t2 = p_{t+t2} at the x grid points.
    Convolve {
        #[command(flatten)]
        common: Common,
        /// Second time (defaults to --t).
        #[arg(long)]
        t2: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        conv_tol: f64,
    },
    /// Weighted tower-integral estimates on an a grid (taken from --x).
    #[command(name = "lemma22", alias = "weighted-integral")]
    WeightedIntegral {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        case: u8,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha_eps: f64,
    },
    /// Derivative and Bernstein self-tests on a xi grid.
    Selfcheck(Common),
}

/// Flags shared by every command; a `--config` TOML file may set the same keys.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct Common {
    /// kind:n=..,eps=.. with kind in chain, sym, sq.
    #[arg(long)]
    symbol: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    t: Option<f64>,
    /// min:max:points:log|linear
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// min:max:points:log|linear
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    /// pairing, reference or auto.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Accepted for scripts; nothing here is random.
    #[arg(long)]
    #[serde(default)]
    seedless: bool,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

impl Common {
    /// Flags win over the config file.
    fn merged(self) -> Result<Common, Failure> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let file: Common = toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        Ok(Common {
            symbol: self.symbol.or(file.symbol),
            t: self.t.or(file.t),
            x: self.x.or(file.x),
            xi: self.xi.or(file.xi),
            method: self.method.or(file.method),
            tol: self.tol.or(file.tol),
            out: self.out.or(file.out),
            format: self.format.or(file.format),
            seedless: self.seedless || file.seedless,
            config: self.config,
        })
    }

    fn symbol(&self) -> Result<LevySymbol, Failure> {
        let s = self.symbol.as_deref().ok_or_else(|| Failure::Usage("--symbol is required".into()))?;
        s.parse().map_err(Failure::from)
    }

    fn t(&self) -> Result<f64, Failure> {
        match self.t {
            Some(t) if t > 0.0 && t.is_finite() => Ok(t),
            Some(t) => Err(Failure::Usage(format!("--t must be positive and finite, got {t}"))),
            None => Err(Failure::Usage("--t is required".into())),
        }
    }

    fn x_grid(&self) -> Result<Grid, Failure> {
        parse_range("--x", self.x.as_deref())
    }

    fn xi_grid(&self) -> Result<Grid, Failure> {
        parse_range("--xi", self.xi.as_deref())
    }

    fn format(&self, allowed: &[&str]) -> Result<String, Failure> {
        let f = self.format.clone().unwrap_or_else(|| allowed[0].to_string());
        if allowed.contains(&f.as_str()) {
            Ok(f)
        } else {
            Err(Failure::Usage(format!("--format must be one of {allowed:?}, got {f:?}")))
        }
    }

    fn density_config(&self) -> Result<DensityConfig, Failure> {
        let mut cfg = DensityConfig::default();
        if let Some(m) = &self.method {
            cfg.method = m.parse::<Method>()?;
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return Err(Failure::Usage(format!("--tol must be positive, got {tol}")));
            }
            cfg.tol = tol;
        }
        Ok(cfg)
    }
}

fn parse_range(flag: &str, s: Option<&str>) -> Result<Grid, Failure> {
    let s = s.ok_or_else(|| Failure::Usage(format!("{flag} is required")))?;
    let bad = |why: &str| Failure::Usage(format!("{flag} {s:?}: {why} (expected min:max:points:log|linear)"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err(bad("need four fields"));
    }
    let min: f64 = parts[0].parse().map_err(|_| bad("bad min"))?;
    let max: f64 = parts[1].parse().map_err(|_| bad("bad max"))?;
    let count: usize = parts[2].parse().map_err(|_| bad("bad point count"))?;
    let spacing = match parts[3] {
        "log" => Spacing::Log,
        "linear" => Spacing::Linear,
        _ => return Err(bad("spacing must be log or linear")),
    };
    let grid = Grid { min, max, count, spacing };
    grid.validate().map_err(|e| bad(&e.to_string()))?;
    Ok(grid)
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Check(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NoConvergence { .. }
            | Error::Divergence { .. }
            | Error::ToleranceNotMet { .. }
            | Error::NotStabilized { .. }
            | Error::BranchViolation { .. } => Failure::Numeric(msg),
            Error::InsufficientCoverage { .. } | Error::GridTooCoarse { .. } => Failure::Check(msg),
            _ => Failure::Usage(msg),
        }
    }
}

/// Writes to `out` via a temp file in the same directory, or to stdout.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<String, Failure> {
    let Some(path) = out else {
        std::io::stdout().write_all(bytes).map_err(|e| Failure::Usage(e.to_string()))?;
        return Ok("stdout".into());
    };
    let io = |e: std::io::Error| Failure::Usage(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(path.display().to_string())
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("reports serialize");
    s.push(b'\n');
    s
}

#[derive(Serialize)]
struct CsvRow {
    x: f64,
    t: f64,
    p: f64,
    err_est: f64,
    method: String,
    k_used: usize,
}

fn run_density(c: Common) -> Result<String, Failure> {
    let symbol = c.symbol()?;
    let t = c.t()?;
    let grid = c.x_grid()?;
    let format = c.format(&["csv", "json"])?;
    let cfg = c.density_config()?;
    let query = DensityQuery { symbol, t, xs: grid.points(), method: cfg.method, tol: cfg.tol };
    let rows = density_grid(&query, &cfg).into_iter().collect::<Result<Vec<_>, _>>()?;
    let bytes = if format == "csv" {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(CsvRow {
                x: r.x,
                t: r.t,
                p: r.p,
                err_est: r.err_est,
                method: r.method_used.to_string(),
                k_used: r.k_used,
            })
            .map_err(|e| Failure::Usage(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Failure::Usage(e.to_string()))?
    } else {
        to_json(&json!({ "schema_version": SCHEMA_VERSION, "symbol": symbol.to_string(), "rows": rows }))
    };
    let dest = emit(c.out.as_deref(), &bytes)?;
    Ok(format!("density: {} points for {symbol} at t={t} -> {dest}", rows.len()))
}

fn run_bounds(c: Common, spread: f64, min_per_regime: usize) -> Result<String, Failure> {
    let symbol = c.symbol()?;
    let t = c.t()?;
    let grid = c.x_grid()?;
    c.format(&["json"])?;
    let cfg = c.density_config()?;
    let upper = check_upper_assumptions(&symbol, &UpperCheckConfig::default())?;
    let alpha_up =
        upper.fitted.alpha_eps.filter(|a| *a > 0.0).ok_or_else(|| Failure::Check("no positive alpha_eps".into()))?;
    let alpha_low = if symbol.symmetric() {
        check_lower_assumptions(&symbol, &LowerCheckConfig::default())?.fitted.alpha_0.unwrap_or(alpha_up)
    } else {
        alpha_up
    };
    let query = DensityQuery { symbol, t, xs: grid.points(), method: cfg.method, tol: cfg.tol };
    let samples = density_grid(&query, &cfg).into_iter().collect::<Result<Vec<_>, _>>()?;
    let report = sandwich_fit(
        &samples,
        &EnvelopeParams::shape(symbol.params, alpha_up, false),
        &EnvelopeParams::shape(symbol.params, alpha_low, false),
        spread,
        min_per_regime,
    )?;
    let pass = report.pass;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "symbol": symbol.to_string(),
        "alpha_upper": alpha_up,
        "alpha_lower": alpha_low,
        "report": report,
    });
    let dest = emit(c.out.as_deref(), &to_json(&doc))?;
    verdict(pass, format!("bounds: {symbol} t={t} pass={pass} -> {dest}"))
}

fn run_assumptions(c: Common) -> Result<String, Failure> {
    let symbol = c.symbol()?;
    let grid = c.xi_grid()?;
    c.format(&["json"])?;
    let upper = check_upper_assumptions(&symbol, &UpperCheckConfig { grid, alpha_grid: grid, ..Default::default() })?;
    let lower = if symbol.symmetric() {
        Some(check_lower_assumptions(&symbol, &LowerCheckConfig { grid, d2_grid: grid })?)
    } else {
        None
    };
    let pass = upper.pass && lower.as_ref().is_none_or(|l| l.pass);
    let doc = json!({ "schema_version": SCHEMA_VERSION, "pass": pass, "upper": upper, "lower": lower });
    let dest = emit(c.out.as_deref(), &to_json(&doc))?;
    verdict(pass, format!("assumptions: {symbol} pass={pass} -> {dest}"))
}

fn run_convolve(c: Common, t2: Option<f64>, conv_tol: f64) -> Result<String, Failure> {
    let symbol = c.symbol()?;
    let t = c.t()?;
    let t2 = t2.unwrap_or(t);
    if !(t2 > 0.0) {
        return Err(Failure::Usage(format!("--t2 must be positive, got {t2}")));
    }
    let probes = c.x_grid()?.points();
    c.format(&["json"])?;
    let cfg = c.density_config()?;
    let grid = ConvolutionGrid { probes, tol: conv_tol, ..Default::default() };
    let report = convolution_check(&symbol, t, t2, &grid, &cfg)?;
    let pass = report.max_abs_dev <= conv_tol;
    let doc = json!({ "schema_version": SCHEMA_VERSION, "symbol": symbol.to_string(), "t1": t, "t2": t2, "pass": pass, "report": report });
    let dest = emit(c.out.as_deref(), &to_json(&doc))?;
    verdict(pass, format!("convolve: max deviation {:.3e} pass={pass} -> {dest}", report.max_abs_dev))
}

fn run_weighted_integral(c: Common, case: u8, alpha: f64, alpha_eps: f64) -> Result<String, Failure> {
    let symbol = c.symbol()?;
    let t = c.t()?;
    let a_grid = c.x_grid()?.points();
    c.format(&["json"])?;
    let case = WeightedIntegralCase::from_index(case)?;
    let report = weighted_integral_check(case, alpha, alpha_eps, t, symbol.params, &a_grid)?;
    let pass = report.pass;
    let shift =
        if case == WeightedIntegralCase::Shifted { Some(a0(alpha, t, symbol.params, alpha_eps)?) } else { None };
    let doc = json!({ "schema_version": SCHEMA_VERSION, "a0": shift, "report": report });
    let dest = emit(c.out.as_deref(), &to_json(&doc))?;
    verdict(
        pass,
        format!("weighted integral: case {} sup ratio {:.4} pass={pass} -> {dest}", case.index(), report.sup_ratio),
    )
}

fn run_selfcheck(c: Common) -> Result<String, Failure> {
    let symbol = c.symbol()?;
    let grid = c.xi_grid()?;
    c.format(&["json"])?;
    let deriv = derivative_selftest(&symbol, &grid)?;
    let bern_grid: Vec<f64> = grid.points().into_iter().filter(|x| *x > 0.0).collect();
    let bernstein = bernstein_spotcheck(symbol.params, 4, &bern_grid)?;
    let pass = deriv < 1e-6 && bernstein.pass;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "symbol": symbol.to_string(),
        "derivative_max_rel_err": deriv,
        "bernstein": bernstein,
        "pass": pass,
    });
    let dest = emit(c.out.as_deref(), &to_json(&doc))?;
    verdict(
        pass,
        format!(
            "selfcheck: {symbol} jet err {deriv:.2e}, bernstein inconclusive {} pass={pass} -> {dest}",
            bernstein.inconclusive
        ),
    )
}

fn verdict(pass: bool, msg: String) -> Result<String, Failure> {
    if pass {
        Ok(msg)
    } else {
        Err(Failure::Check(msg))
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("LEVYDENS_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().map_err(|_| Failure::Usage(format!("LEVYDENS_THREADS={v:?} is not a count")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<String, Failure> {
    init_threads()?;
    match cli.command {
        Command::Density(c) => run_density(c.merged()?),
        Command::Bounds { common, spread, min_per_regime } => run_bounds(common.merged()?, spread, min_per_regime),
        Command::Assumptions(c) => run_assumptions(c.merged()?),
        Command::Convolve { common, t2, conv_tol } => run_convolve(common.merged()?, t2, conv_tol),
        Command::WeightedIntegral { common, case, alpha, alpha_eps } => {
            run_weighted_integral(common.merged()?, case, alpha, alpha_eps)
        }
        Command::Selfcheck(c) => run_selfcheck(c.merged()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(msg) => {
            eprintln!("{msg}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            match &f {
                Failure::Check(m) => eprintln!("check failed: {m}"),
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Numeric(m) => eprintln!("numerical failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        let g = parse_range("--x", Some("0.1:10:3:log")).unwrap();
        let p = g.points();
        assert_eq!(p.len(), 3);
        assert!((p[1] - 1.0).abs() < 1e-15);
        assert_eq!(parse_range("--x", Some("-2:2:5:linear")).unwrap().points()[2], 0.0);
        for bad in ["", "1:2:3", "0:1:2:log", "2:1:3:linear", "1:2:x:log", "1:2:3:cubic"] {
            assert!(matches!(parse_range("--x", Some(bad)), Err(Failure::Usage(_))), "{bad}");
        }
        assert!(parse_range("--x", None).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::from(Error::NotStabilized { extent: 1.0, change: 1.0 }).code(), 3);
        assert_eq!(Failure::from(Error::GridTooCoarse { err_est: 1.0, tol: 0.1 }).code(), 1);
        assert_eq!(Failure::from(Error::InvalidParams("t".into())).code(), 2);
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["levydens", "weighted-integral", "--case", "3", "--alpha", "-2"]).unwrap();
        assert!(matches!(cli.command, Command::WeightedIntegral { case: 3, .. }));
    }
}
