//! Prompt templates for initialization, crossover, mutation, refinement and
//! zero-shot synthesis.
//!
//! A template is an ordered list of sections (role, domain, task, constraint,
//! input). Rendering joins sections with a blank line and substitutes
//! `{placeholder}` names in a single pass, so inserted requirement text or C
//! code is never re-scanned for placeholders.
//!
//! Templates can be overridden from a directory holding any of
//! `init_code.txt`, `init_spec.txt`, `crossover.txt`, `mutation.txt`,
//! `refinement.txt` and `zero_shot.txt`, each split into sections by
//! `--- role` / `--- domain` / `--- task` / `--- constraint` / `--- input`
//! marker lines.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::types::{ConfigError, Individual, Requirement};

/// Default byte budget for a verifier report embedded in a prompt.
pub const DEFAULT_REPORT_LIMIT: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Role,
    Domain,
    Task,
    Constraint,
    Input,
}

impl SectionKind {
    fn from_marker(name: &str) -> Option<Self> {
        match name {
            "role" => Some(Self::Role),
            "domain" => Some(Self::Domain),
            "task" => Some(Self::Task),
            "constraint" => Some(Self::Constraint),
            "input" => Some(Self::Input),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    sections: Vec<(SectionKind, String)>,
}

impl PromptTemplate {
    /// Exactly one role section, exactly one input section, input last.
    pub fn new(sections: Vec<(SectionKind, String)>) -> Result<Self, ConfigError> {
        let count = |k: SectionKind| sections.iter().filter(|(kind, _)| *kind == k).count();
        if count(SectionKind::Role) != 1 {
            return Err(ConfigError::new("template needs exactly one role section"));
        }
        if count(SectionKind::Input) != 1 {
            return Err(ConfigError::new("template needs exactly one input section"));
        }
        if sections.last().map(|(k, _)| *k) != Some(SectionKind::Input) {
            return Err(ConfigError::new("input section must be last"));
        }
        Ok(Self { sections })
    }

    /// Parses the `--- <kind>` marker format.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: Vec<(SectionKind, String)> = Vec::new();
        let mut current: Option<(SectionKind, Vec<&str>)> = None;
        for line in text.lines() {
            if let Some(marker) = line.strip_prefix("--- ") {
                let kind = SectionKind::from_marker(marker.trim()).ok_or_else(|| {
                    ConfigError::new(format!("unknown template section `{}`", marker.trim()))
                })?;
                if let Some((k, lines)) = current.take() {
                    sections.push((k, trim_blank_lines(&lines)));
                }
                current = Some((kind, Vec::new()));
            } else if let Some((_, lines)) = current.as_mut() {
                lines.push(line);
            } else if !line.trim().is_empty() {
                return Err(ConfigError::new("template text before first section marker"));
            }
        }
        if let Some((k, lines)) = current {
            sections.push((k, trim_blank_lines(&lines)));
        }
        Self::new(sections)
    }

    pub fn sections(&self) -> &[(SectionKind, String)] {
        &self.sections
    }

    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        self.sections
            .iter()
            .map(|(_, text)| substitute(text, vars))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

impl fmt::Display for PromptTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (kind, text)) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let name = serde_json::to_value(kind).ok();
            let name = name.as_ref().and_then(|v| v.as_str()).unwrap_or("task");
            writeln!(f, "--- {name}")?;
            writeln!(f, "{text}")?;
        }
        Ok(())
    }
}

fn trim_blank_lines(lines: &[&str]) -> String {
    let start = lines.iter().position(|l| !l.trim().is_empty());
    let end = lines.iter().rposition(|l| !l.trim().is_empty());
    match (start, end) {
        (Some(s), Some(e)) => lines[s..=e].join("\n"),
        _ => String::new(),
    }
}

/// Replaces `{name}` for every `(name, value)` pair; unknown braces are kept.
fn substitute(text: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    ChainOfThought,
    StepBack,
}

impl StrategyName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ChainOfThought => "chain_of_thought",
            Self::StepBack => "step_back",
        }
    }
}

/// A reasoning directive inserted into the task description of both
/// initialization phases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningStrategy {
    pub name: StrategyName,
    /// Directive for the C-code phase.
    pub code_directive: String,
    /// Directive for the ACSL phase.
    pub spec_directive: String,
}

impl ReasoningStrategy {
    pub fn chain_of_thought() -> Self {
        Self {
            name: StrategyName::ChainOfThought,
            code_directive: "Reason step-by-step and create an implementation plan before writing the program.".into(),
            spec_directive: "Reason step-by-step from requirement and C program to ACSL clauses before writing the final specification.".into(),
        }
    }

    pub fn step_back() -> Self {
        Self {
            name: StrategyName::StepBack,
            code_directive: "Take a step back and first state the general algorithmic principles and the C concepts the requirement relies on, then derive the program from those principles.".into(),
            spec_directive: "Take a step back and first state the high-level properties the program must guarantee (preconditions, postconditions, loop invariants, termination), then derive the ACSL clauses from those properties.".into(),
        }
    }
}

/// Round-robin mapping from individual index to strategy.
pub fn assign_strategy(
    index: usize,
    registry: &[ReasoningStrategy],
) -> Result<&ReasoningStrategy, ConfigError> {
    if registry.is_empty() {
        return Err(ConfigError::new("reasoning-strategy registry is empty"));
    }
    Ok(&registry[index % registry.len()])
}

/// Keeps the last `limit` bytes of a report (rounded to a char boundary). The
/// tail is kept because verifier summaries are printed last.
pub fn truncate_report(report: &str, limit: usize) -> String {
    if report.len() <= limit {
        return report.to_string();
    }
    let mut start = report.len() - limit;
    while !report.is_char_boundary(start) {
        start += 1;
    }
    format!("[... {start} bytes truncated ...]\n{}", &report[start..])
}

const INIT_CODE: &str = "\
--- role
You are a skilled C programmer.
--- task
Your task is to model the given requirement written in natural language into C program.
--- task
{strategy}
--- constraint
You only need to return the C program without the ACSL formal specification and explanation.
--- input
Requirement:
{requirement}
";

const INIT_SPEC: &str = "\
--- role
You are an expert in ACSL formal specification.
--- task
Your task is to write ACSL specification for the given C program ensuring its correctness. The requirement written in natural language is provided.
--- task
{strategy}
--- constraint
You only need to return the completed ACSL formal specification together with C program without explanation.
--- input
Requirement:
{requirement}

C program:
```c
{code}
```
";

const CROSSOVER: &str = "\
--- role
You are an expert in C code optimization and formal verification with ACSL.
--- domain
The requirement written in natural language is provided. Below are two individuals implemented based on this requirement, parent1 and parent2, each with the following attributes:
- full_code: C code with ACSL-annotations
- base_info: Frama-C verification report without WP plugin
- base_pass: Whether the base Frama-C verification passed
- wp_info: Frama-C verification report with WP plugin
- wp_pass: Whether the WP-based verification passed
--- task
Your task is to analyze parent1 and parent2 comparatively, focusing on:
- Consistency between the full_code and requirement
- ACSL annotation completeness and correctness
- Reasons for the success or failure of base and WP verification
- Overall code robustness and specification adherence
Then, propose a refined full_code of parent1 that:
- Incorporates strengths from parent2 (e.g., better annotations, verified constructs)
- Addresses weaknesses in parent1 identified via Frama-C reports
- Enhances fitness by improving verification outcomes
- Maintains functional correctness and clarity
--- constraint
You only need to return the refined full_code of parent1 without explanation.
--- input
Requirement:
{requirement}

parent1:
{parent1}

parent2:
{parent2}
";

const MUTATION: &str = "\
--- role
You are an expert in C code optimization and formal verification with ACSL.
--- domain
The requirement written in natural language is provided. Below is an individual implemented based on this requirement, with the following attributes:
- full_code: C code with ACSL annotations
- base_info: Frama-C verification report without WP plugin
- base_pass: Whether the base Frama-C verification passed
- wp_info: Frama-C verification report with WP plugin
- wp_pass: Whether the WP-based verification passed
--- task
Analyze the provided full_code with its verification reports. Your goal is to generate an improved mutated version, focusing on:
- Consistency between the full_code and requirement
- ACSL Annotations: Check completeness, correctness, and consistency with code behavior
- Verification Gaps: Identify why base_pass or wp_pass failed (if applicable)
- Code Logic: Review for potential bugs, inefficiencies, or specification mismatches
Then, propose a refined full_code of the individual that:
- Ensure all Frama-C verification warnings are addressed
- Maintain functional correctness and code clarity
--- constraint
You only need to return the refined full_code of the individual without explanation.
--- input
Requirement:
{requirement}

individual:
{individual}
";

const REFINEMENT: &str = "\
--- role
You are an expert in C code optimization and formal verification with ACSL.
--- domain
The requirement written in natural language is provided. The ACSL-annotated code you generated failed verification with error information reported by Frama-C.
--- task
Your task is to analyze the error messages and provide precise corrections to make the ACSL-annotated code verifiable.
--- constraint
You only need to return the completed ACSL formal specification with the code without explanation.
--- input
Requirement:
{requirement}

ACSL-annotated code:
```c
{code}
```

Error messages:
```
{errors}
```
";

// Not a reprint of any published zero-shot prompt; a minimal role/task/constraint template.
const ZERO_SHOT: &str = "\
--- role
You are an expert in C programming and ACSL formal specification.
--- task
Your task is to write a C program annotated with ACSL specifications that implements the given requirement and can be verified by Frama-C with the WP plugin.
--- constraint
You only need to return the ACSL-annotated C program without explanation.
--- input
Requirement:
{requirement}
";

/// The complete set of templates plus the strategy registry.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub init_code: PromptTemplate,
    pub init_spec: PromptTemplate,
    pub crossover: PromptTemplate,
    pub mutation: PromptTemplate,
    pub refinement: PromptTemplate,
    pub zero_shot: PromptTemplate,
    pub strategies: Vec<ReasoningStrategy>,
    pub report_limit: usize,
}

impl Default for PromptSet {
    fn default() -> Self {
        let parse = |t: &str| PromptTemplate::parse(t).expect("built-in template is well-formed");
        Self {
            init_code: parse(INIT_CODE),
            init_spec: parse(INIT_SPEC),
            crossover: parse(CROSSOVER),
            mutation: parse(MUTATION),
            refinement: parse(REFINEMENT),
            zero_shot: parse(ZERO_SHOT),
            strategies: vec![
                ReasoningStrategy::chain_of_thought(),
                ReasoningStrategy::step_back(),
            ],
            report_limit: DEFAULT_REPORT_LIMIT,
        }
    }
}

impl PromptSet {
    /// Built-in templates, with any `<name>.txt` found in `dir` taking precedence.
    pub fn load_dir(dir: &Path) -> Result<Self, ConfigError> {
        let mut set = Self::default();
        let slots: [(&str, &mut PromptTemplate); 6] = [
            ("init_code", &mut set.init_code),
            ("init_spec", &mut set.init_spec),
            ("crossover", &mut set.crossover),
            ("mutation", &mut set.mutation),
            ("refinement", &mut set.refinement),
            ("zero_shot", &mut set.zero_shot),
        ];
        for (name, slot) in slots {
            let path = dir.join(format!("{name}.txt"));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
            *slot = PromptTemplate::parse(&text)
                .map_err(|e| ConfigError::new(format!("{}: {}", path.display(), e.0)))?;
        }
        Ok(set)
    }

    pub fn strategy_for(&self, index: usize) -> Result<&ReasoningStrategy, ConfigError> {
        assign_strategy(index, &self.strategies)
    }

    pub fn render_init_code(&self, req: &Requirement, strategy: &ReasoningStrategy) -> String {
        self.init_code.render(&[
            ("strategy", &strategy.code_directive),
            ("requirement", &req.text),
        ])
    }

    pub fn render_init_spec(
        &self,
        req: &Requirement,
        code: &str,
        strategy: &ReasoningStrategy,
    ) -> String {
        self.init_spec.render(&[
            ("strategy", &strategy.spec_directive),
            ("requirement", &req.text),
            ("code", code),
        ])
    }

    /// `baseline` is rendered as parent1 (the one being refined), `donor` as parent2.
    pub fn render_crossover(
        &self,
        req: &Requirement,
        baseline: &Individual,
        donor: &Individual,
    ) -> String {
        let p1 = self.serialize_individual(baseline);
        let p2 = self.serialize_individual(donor);
        self.crossover.render(&[
            ("requirement", &req.text),
            ("parent1", &p1),
            ("parent2", &p2),
        ])
    }

    pub fn render_mutation(&self, req: &Requirement, ind: &Individual) -> String {
        let body = self.serialize_individual(ind);
        self.mutation
            .render(&[("requirement", &req.text), ("individual", &body)])
    }

    pub fn render_refinement(&self, req: &Requirement, code: &str, errors: &str) -> String {
        let errors = truncate_report(errors, self.report_limit);
        self.refinement.render(&[
            ("requirement", &req.text),
            ("code", code),
            ("errors", &errors),
        ])
    }

    pub fn render_zero_shot(&self, req: &Requirement) -> String {
        self.zero_shot.render(&[("requirement", &req.text)])
    }

    /// Labeled plain-text block for the five individual attributes.
    pub fn serialize_individual(&self, ind: &Individual) -> String {
        let (syn_pass, syn_report, sem_pass, sem_report) = match &ind.evaluation {
            Some(e) => (e.syn_pass, e.syn_report.as_str(), e.sem_pass, e.sem_report.as_str()),
            None => (false, "", false, ""),
        };
        format!(
            "full_code:\n```c\n{}\n```\nbase_info:\n```\n{}\n```\nbase_pass: {}\nwp_info:\n```\n{}\n```\nwp_pass: {}",
            ind.code,
            truncate_report(syn_report, self.report_limit),
            syn_pass,
            truncate_report(sem_report, self.report_limit),
            sem_pass,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Evaluation, Lineage, Origin, Variant};

    fn req(text: &str) -> Requirement {
        Requirement::new("r1", text, Variant::Original, "test").unwrap()
    }

    fn individual(code: &str, syn: bool, sem: bool) -> Individual {
        Individual::evaluated(
            code,
            Evaluation {
                syn_pass: syn,
                syn_report: format!("base report for {code}"),
                sem_pass: sem,
                sem_report: format!("wp report for {code}"),
            },
            Lineage::new(Origin::Init, 0),
        )
    }

    #[test]
    fn init_code_uses_strategy_directive() {
        let set = PromptSet::default();
        let cot = ReasoningStrategy::chain_of_thought();
        let sbp = ReasoningStrategy::step_back();
        let r = req("find the maximum of an array");
        let p = set.render_init_code(&r, &cot);
        assert!(p.starts_with("You are a skilled C programmer."));
        assert!(p.contains("Reason step-by-step and create an implementation plan"));
        assert!(p.contains("without the ACSL formal specification and explanation"));
        let q = set.render_init_code(&r, &sbp);
        assert!(q.contains(&sbp.code_directive));
        assert!(!q.contains("Reason step-by-step"));
    }

    #[test]
    fn init_code_ends_with_requirement() {
        let set = PromptSet::default();
        let p = set.render_init_code(&req("sum two ints"), &ReasoningStrategy::chain_of_thought());
        assert!(p.ends_with("sum two ints"));
    }

    #[test]
    fn init_spec_embeds_inputs() {
        let set = PromptSet::default();
        let code = "int add(int a, int b) { return a + b; }";
        let r = req("sum two ints");
        let sbp = ReasoningStrategy::step_back();
        let p = set.render_init_spec(&r, code, &sbp);
        assert!(p.contains("write ACSL specification for the given C program"));
        assert!(p.contains(code));
        assert!(p.contains("sum two ints"));
        assert_eq!(p, set.render_init_spec(&r, code, &sbp));
    }

    #[test]
    fn crossover_role_swap() {
        let set = PromptSet::default();
        let r = req("arraymax");
        let a = individual("int a(void){return 1;}", true, false);
        let b = individual("int b(void){return 2;}", false, false);
        let ab = set.render_crossover(&r, &a, &b);
        assert!(ab.contains("Incorporates strengths from parent2"));
        for attr in ["full_code", "base_info", "base_pass", "wp_info", "wp_pass"] {
            assert!(ab.contains(attr));
        }
        let p1_ab = ab.split("parent1:\n").last().unwrap();
        assert!(p1_ab.starts_with("full_code:\n```c\nint a(void)"));
        assert!(p1_ab.contains("base_pass: true"));
        let ba = set.render_crossover(&r, &b, &a);
        let p1_ba = ba.split("parent1:\n").last().unwrap();
        assert!(p1_ba.starts_with("full_code:\n```c\nint b(void)"));
        assert!(p1_ba.contains("base_pass: false"));
    }

    #[test]
    fn mutation_prompt_contents() {
        let set = PromptSet::default();
        let ind = individual("int m(void){return 0;}", true, false);
        let p = set.render_mutation(&req("m"), &ind);
        assert!(p.contains("generate an improved mutated version"));
        assert!(p.contains("Verification Gaps"));
        assert!(p.contains("Code Logic"));
        assert!(p.contains("wp_pass: false"));
        assert!(p.contains("int m(void){return 0;}"));
        assert_eq!(p, set.render_mutation(&req("m"), &ind));
    }

    #[test]
    fn refinement_prompt_with_empty_errors() {
        let set = PromptSet::default();
        let code = "/*@ ensures \\result == 0; */ int z(void){return 0;}";
        let p = set.render_refinement(&req("zero"), code, "");
        assert!(p.contains("failed verification with error information"));
        assert!(p.contains(code));
        assert!(p.ends_with("Error messages:\n```\n\n```"));
    }

    #[test]
    fn braces_in_inputs_are_not_substituted() {
        let set = PromptSet::default();
        let code = "int f(void) { return 0; } /* {requirement} */";
        let p = set.render_refinement(&req("r"), code, "{code}");
        assert!(p.contains(code));
        assert!(p.contains("```\n{code}\n```"));
    }

    #[test]
    fn round_robin_assignment() {
        let reg = vec![
            ReasoningStrategy::chain_of_thought(),
            ReasoningStrategy::step_back(),
        ];
        assert_eq!(assign_strategy(0, &reg).unwrap().name, StrategyName::ChainOfThought);
        assert_eq!(assign_strategy(1, &reg).unwrap().name, StrategyName::StepBack);
        assert_eq!(assign_strategy(4, &reg).unwrap().name, StrategyName::ChainOfThought);
        let names: Vec<_> = (0..5).map(|i| assign_strategy(i, &reg).unwrap().name).collect();
        assert_eq!(
            names,
            [
                StrategyName::ChainOfThought,
                StrategyName::StepBack,
                StrategyName::ChainOfThought,
                StrategyName::StepBack,
                StrategyName::ChainOfThought
            ]
        );
        assert!(assign_strategy(0, &[]).is_err());
    }

    #[test]
    fn template_invariants() {
        assert!(PromptTemplate::parse("--- task\nx\n--- input\ny").is_err());
        assert!(PromptTemplate::parse("--- role\nx\n--- input\ny\n--- task\nz").is_err());
        assert!(PromptTemplate::parse("--- role\nx\n--- bogus\ny").is_err());
        let t = PromptTemplate::parse("--- role\nR\n\n--- task\nT\n--- input\n{requirement}\n").unwrap();
        assert_eq!(t.render(&[("requirement", "in")]), "R\n\nT\n\nin");
    }

    #[test]
    fn display_round_trips() {
        let set = PromptSet::default();
        let reparsed = PromptTemplate::parse(&set.crossover.to_string()).unwrap();
        assert_eq!(reparsed, set.crossover);
    }

    #[test]
    fn load_dir_overrides_single_template() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("zero_shot.txt"),
            "--- role\nCustom role.\n--- input\n{requirement}\n",
        )
        .unwrap();
        let set = PromptSet::load_dir(dir.path()).unwrap();
        assert_eq!(set.render_zero_shot(&req("abc")), "Custom role.\n\nabc");
        assert_eq!(set.crossover, PromptSet::default().crossover);
    }

    #[test]
    fn truncation_keeps_tail() {
        let report = format!("{}Proved goals: 3 / 4", "x".repeat(100));
        let t = truncate_report(&report, 20);
        assert!(t.ends_with("Proved goals: 3 / 4"));
        assert!(t.starts_with("[... "));
        assert_eq!(truncate_report("short", 20), "short");
        // multi-byte boundary
        let t = truncate_report("ééééé", 3);
        assert!(t.ends_with('é'));
    }
}
