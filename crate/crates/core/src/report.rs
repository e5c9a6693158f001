//! Pass/fail reports used by the hypothesis checks and validators.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    /// Short clause label, e.g. `H1` or `monotone`.
    pub clause: String,
    pub passed: bool,
    /// Offending values for failures, notes for passes.
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, clause: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            clause: clause.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn extend(&mut self, other: CheckReport) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, clause: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.clause == clause)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            if c.detail.is_empty() {
                writeln!(f, "{tag} {}", c.clause)?;
            } else {
                writeln!(f, "{tag} {}: {}", c.clause, c.detail)?;
            }
        }
        Ok(())
    }
}
