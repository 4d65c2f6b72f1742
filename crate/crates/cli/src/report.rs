use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Exit codes shared by every subcommand.
pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_UNDECIDED: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Undecided,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Undecided => "UNDECIDED",
        })
    }
}

impl From<seqmeas::feasibility::Status> for CheckStatus {
    fn from(s: seqmeas::feasibility::Status) -> Self {
        use seqmeas::feasibility::Status;
        match s {
            Status::Feasible => CheckStatus::Pass,
            Status::Infeasible => CheckStatus::Fail,
            Status::Undecided => CheckStatus::Undecided,
        }
    }
}

/// One named check: the operation run, the tolerance it was judged at and
/// the residuals behind the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub operation: String,
    pub tolerance: f64,
    pub status: CheckStatus,
    /// Non-gating checks are reported but do not affect the exit code.
    pub gating: bool,
    pub residuals: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub seconds: f64,
}

impl Check {
    pub fn new(name: &str, operation: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            operation: operation.to_string(),
            tolerance,
            status: CheckStatus::Pass,
            gating: true,
            residuals: BTreeMap::new(),
            detail: None,
            seconds: 0.0,
        }
    }

    pub fn status(mut self, status: CheckStatus) -> Self {
        self.status = status;
        self
    }

    pub fn passed_if(self, ok: bool) -> Self {
        self.status(if ok { CheckStatus::Pass } else { CheckStatus::Fail })
    }

    pub fn residual(mut self, key: &str, value: f64) -> Self {
        self.residuals.insert(key.to_string(), value);
        self
    }

    pub fn detail(mut self, text: impl Into<String>) -> Self {
        self.detail = Some(text.into());
        self
    }

    pub fn heuristic(mut self) -> Self {
        self.gating = false;
        self
    }

    /// Runs `f` and stores its wall-clock time on the check it returns.
    pub fn timed(f: impl FnOnce() -> Check) -> Check {
        let start = Instant::now();
        let mut check = f();
        check.seconds = start.elapsed().as_secs_f64();
        check
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub tol: f64,
    pub max_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub options: RunOptions,
    pub inputs: Vec<InputDigest>,
    pub checks: Vec<Check>,
    pub exit_code: u8,
}

impl Report {
    pub fn new(command: Vec<String>, options: RunOptions) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            options,
            inputs: Vec::new(),
            checks: Vec::new(),
            exit_code: EXIT_PASS,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
        self.exit_code = exit_code(&self.checks);
    }
}

/// 1 if any gating check failed, else 3 if any gating check is undecided.
pub fn exit_code(checks: &[Check]) -> u8 {
    let gating = || checks.iter().filter(|c| c.gating);
    if gating().any(|c| c.status == CheckStatus::Fail) {
        EXIT_FAIL
    } else if gating().any(|c| c.status == CheckStatus::Undecided) {
        EXIT_UNDECIDED
    } else {
        EXIT_PASS
    }
}

/// One line per check, for the terminal.
pub fn summary_lines(report: &Report) -> Vec<String> {
    report
        .checks
        .iter()
        .map(|c| {
            let residuals: Vec<String> = c.residuals.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
            let mut line = format!(
                "{:<9} {} [{}, tol {:.0e}{}]",
                c.status,
                c.name,
                c.operation,
                c.tolerance,
                if c.gating { "" } else { ", heuristic" },
            );
            if !residuals.is_empty() {
                line.push(' ');
                line.push_str(&residuals.join(" "));
            }
            if let Some(d) = &c.detail {
                line.push_str(" :: ");
                line.push_str(d);
            }
            line
        })
        .collect()
}
