use std::path::PathBuf;

use clap::{ArgAction, Args, ValueEnum};
use ultrametriclab::group::GroupDescriptor;

use crate::CliError;

/// A verification suite; each covers one acceptance criterion (plancherel is extra).
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    GroupAxioms,
    FundamentalCompact,
    FundamentalLc,
    FundamentalGraded,
    RieszSemigroup,
    HeatAbelian,
    Potentials,
    JumpKernel,
    Representations,
    HeatHeisenberg,
    HeatEngel,
    Homogeneity,
    CrossValidation,
    Plancherel,
}

impl Suite {
    pub fn name(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupChoice {
    Qp,
    Heisenberg,
    Engel,
}

/// Parameters shared by every suite. Unset fields fall back to the suite's
/// own defaults; list-valued flags take comma-separated values.
#[derive(Debug, Clone, Default, Args)]
pub struct SuiteConfig {
    /// Prime(s) p
    #[arg(long = "p", value_delimiter = ',', action = ArgAction::Set)]
    pub primes: Vec<u64>,
    /// Order(s) α of the operator
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub alpha: Vec<f64>,
    /// Riesz potential order(s) β
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub beta: Vec<f64>,
    #[arg(long, value_enum)]
    pub group: Option<GroupChoice>,
    /// Dimension d of ℚ_p^d or ℍ_d
    #[arg(long)]
    pub d: Option<usize>,
    /// Inner window level L_in (constancy index)
    #[arg(long)]
    pub level: Option<i64>,
    /// Outer window level L_out (support G_{L_out})
    #[arg(long = "level-out")]
    pub level_out: Option<i64>,
    /// λ-shell truncation: λ-valuations in [−M, M]
    #[arg(long = "trunc-M")]
    pub trunc_m: Option<i64>,
    /// Representation window depth K
    #[arg(long = "trunc-K")]
    pub trunc_k: Option<u32>,
    /// Tolerance overriding every numeric check of the suite
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Directory for report.csv and the suite's tables
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Invalid(msg));
        if let Some(p) = self.primes.iter().find(|&&p| !is_prime(p)) {
            return bad(format!("p = {p} is not prime"));
        }
        if matches!(self.group, Some(GroupChoice::Heisenberg | GroupChoice::Engel)) && self.primes.contains(&2) {
            return bad("p = 2 is excluded for the Heisenberg and Engel groups".into());
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return bad(format!("α = {a} must be positive and finite"));
        }
        if let Some(b) = self.beta.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return bad(format!("β = {b} must be positive and finite"));
        }
        if let Some(t) = self.tol.filter(|t| !(*t > 0.0)) {
            return bad(format!("tolerance {t} must be positive"));
        }
        if self.d == Some(0) {
            return bad("d must be at least 1".into());
        }
        if let (Some(lo), Some(li)) = (self.level_out, self.level) {
            if li < lo {
                return bad(format!("L_in = {li} must be at least L_out = {lo}"));
            }
        }
        if self.trials == Some(0) {
            return bad("trials must be positive".into());
        }
        Ok(())
    }

    pub fn primes_or(&self, default: &[u64]) -> Vec<u64> {
        if self.primes.is_empty() {
            default.to_vec()
        } else {
            self.primes.clone()
        }
    }

    pub fn prime_or(&self, default: u64) -> u64 {
        self.primes.first().copied().unwrap_or(default)
    }

    pub fn alphas_or(&self, default: &[f64]) -> Vec<f64> {
        if self.alpha.is_empty() {
            default.to_vec()
        } else {
            self.alpha.clone()
        }
    }

    pub fn betas_or(&self, default: &[f64]) -> Vec<f64> {
        if self.beta.is_empty() {
            default.to_vec()
        } else {
            self.beta.clone()
        }
    }

    /// The group selected by --group/--d/--p, or `None` if --group is unset.
    pub fn descriptor(&self, default_p: u64) -> Result<Option<GroupDescriptor>, CliError> {
        let Some(g) = self.group else { return Ok(None) };
        let p = self.prime_or(default_p);
        let d = self.d.unwrap_or(1);
        let desc = match g {
            GroupChoice::Qp => GroupDescriptor::abelian(p, d),
            GroupChoice::Heisenberg => GroupDescriptor::heisenberg(p, d),
            GroupChoice::Engel => {
                if self.d.is_some_and(|d| d != 4) {
                    return Err(CliError::Invalid("the Engel group has fixed dimension 4".into()));
                }
                GroupDescriptor::engel(p)
            }
        }?;
        Ok(Some(desc))
    }
}

/// Flattens a key-value TOML file into command-line flags. Arrays become
/// comma-separated lists; booleans become bare flags when true.
pub fn config_args(text: &str) -> Result<Vec<String>, CliError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    let scalar = |v: &toml::Value| -> Result<String, CliError> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(i) => Ok(i.to_string()),
            toml::Value::Float(f) => Ok(f.to_string()),
            other => Err(CliError::Config(format!("unsupported value {other}"))),
        }
    };
    let mut args = Vec::new();
    for (key, value) in &table {
        let flag = format!("--{key}");
        match value {
            toml::Value::Boolean(true) => args.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts: Result<Vec<String>, CliError> = items.iter().map(scalar).collect();
                args.extend([flag, parts?.join(",")]);
            }
            v => args.extend([flag, scalar(v)?]),
        }
    }
    Ok(args)
}
