//! Structured results for claim checks and the report format emitted by the
//! CLI. Reports are deterministic given inputs, seed and budgets; wall-clock
//! timing is intentionally kept out of the serialized form and printed
//! separately.

use std::collections::BTreeMap;

use serde::Serialize;

/// How a verdict was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// finite witness set sufficient to re-derive the verdict
    Exact,
    /// quantifier over a continuum checked on a declared sample plan
    Sampled,
    /// enumeration truncated at a declared budget
    ExhaustedWithinBudget,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Exact => write!(f, "EXACT"),
            Mode::Sampled => write!(f, "SAMPLED"),
            Mode::ExhaustedWithinBudget => write!(f, "EXHAUSTED_WITHIN_BUDGET"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Verified,
    Falsified,
    Inconclusive,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Verified => write!(f, "verified"),
            Outcome::Falsified => write!(f, "falsified"),
            Outcome::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// Outcome of one claim check. Composite claims carry children.
#[derive(Debug, Clone, Serialize)]
pub struct ClaimResult {
    pub claim: String,
    pub mode: Mode,
    pub outcome: Outcome,
    /// one-line statement of what was checked
    pub detail: String,
    /// computed value, when the claim is about an invariant
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    pub witnesses: Vec<String>,
    pub counterexamples: Vec<String>,
    /// sample plan description for non-exact modes
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<String>,
    pub notes: Vec<String>,
    pub children: Vec<ClaimResult>,
}

impl ClaimResult {
    pub fn new(claim: &str, mode: Mode, outcome: Outcome, detail: &str) -> Self {
        ClaimResult {
            claim: claim.to_string(),
            mode,
            outcome,
            detail: detail.to_string(),
            value: None,
            witnesses: Vec::new(),
            counterexamples: Vec::new(),
            sampling: None,
            notes: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn verified(&self) -> bool {
        self.outcome == Outcome::Verified
    }

    /// Weakest mode across this claim and its children (exact < sampled <
    /// budget-truncated).
    pub fn effective_mode(&self) -> Mode {
        let rank = |m: Mode| match m {
            Mode::Exact => 0,
            Mode::Sampled => 1,
            Mode::ExhaustedWithinBudget => 2,
        };
        let mut worst = self.mode;
        for c in &self.children {
            if rank(c.effective_mode()) > rank(worst) {
                worst = c.effective_mode();
            }
        }
        worst
    }
}

/// What the CLI emits: the claim result plus run parameters.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub claim: String,
    pub seed: u64,
    pub budgets: BTreeMap<String, String>,
    pub result: ClaimResult,
}

impl Report {
    pub fn new(result: ClaimResult, seed: u64, budgets: BTreeMap<String, String>) -> Self {
        Report {
            claim: result.claim.clone(),
            seed,
            budgets,
            result,
        }
    }

    /// 0 verified, 1 falsified with witness, 4 inconclusive within budget.
    pub fn exit_code(&self) -> i32 {
        match self.result.outcome {
            Outcome::Verified => 0,
            Outcome::Falsified => 1,
            Outcome::Inconclusive => 4,
        }
    }

    /// Canonical machine form; byte-identical across runs with equal inputs.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("claim: {}\n", self.claim));
        out.push_str(&format!("seed: {}\n", self.seed));
        for (k, v) in &self.budgets {
            out.push_str(&format!("budget {k}: {v}\n"));
        }
        render_claim(&self.result, 0, &mut out);
        out
    }
}

fn render_claim(c: &ClaimResult, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    out.push_str(&format!(
        "{pad}[{}] {} — {} ({})\n",
        c.mode, c.claim, c.outcome, c.detail
    ));
    if let Some(v) = &c.value {
        out.push_str(&format!("{pad}  value: {v}\n"));
    }
    if let Some(s) = &c.sampling {
        out.push_str(&format!("{pad}  sampling: {s}\n"));
    }
    for w in &c.witnesses {
        out.push_str(&format!("{pad}  witness: {w}\n"));
    }
    for x in &c.counterexamples {
        out.push_str(&format!("{pad}  counterexample: {x}\n"));
    }
    for n in &c.notes {
        out.push_str(&format!("{pad}  note: {n}\n"));
    }
    for child in &c.children {
        render_claim(child, depth + 1, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_outcomes() {
        let mk = |o| {
            Report::new(
                ClaimResult::new("t", Mode::Exact, o, "check"),
                7,
                BTreeMap::new(),
            )
        };
        assert_eq!(mk(Outcome::Verified).exit_code(), 0);
        assert_eq!(mk(Outcome::Falsified).exit_code(), 1);
        assert_eq!(mk(Outcome::Inconclusive).exit_code(), 4);
    }

    #[test]
    fn effective_mode_is_weakest() {
        let mut c = ClaimResult::new("outer", Mode::Exact, Outcome::Verified, "");
        c.children.push(ClaimResult::new(
            "inner",
            Mode::Sampled,
            Outcome::Verified,
            "",
        ));
        assert_eq!(c.effective_mode(), Mode::Sampled);
    }
}
