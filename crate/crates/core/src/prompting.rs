//! Prompt strategies and byte-exact prompt assembly.
//!
//! Templates are data: four UTF-8 files (`sp.txt`, `ust_cot.txt`,
//! `st_cot.txt`, `fincot.txt`). The FinCoT template carries a `{{HINT}}`
//! placeholder that is replaced by one or more rendered blueprints.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::blueprint::{render_hint, BlueprintRegistry};
use crate::domain::{AnswerLetter, DomainCode};

pub const HINT_PLACEHOLDER: &str = "{{HINT}}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptKind {
    Sp,
    UstCot,
    StCot,
    FinCot,
}

impl PromptKind {
    pub const ALL: [PromptKind; 4] = [
        PromptKind::Sp,
        PromptKind::UstCot,
        PromptKind::StCot,
        PromptKind::FinCot,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            PromptKind::Sp => "sp",
            PromptKind::UstCot => "ust_cot",
            PromptKind::StCot => "st_cot",
            PromptKind::FinCot => "fincot",
        }
    }
}

/// Which blueprints a FinCoT prompt embeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FinCotMode {
    /// All nine blueprints, concatenated in fixed domain order.
    AllBlueprints,
    /// One domain's blueprint, applied to every item.
    SingleDomain(DomainCode),
    /// The blueprint matching each item's routed domain.
    Routed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptStrategy {
    Sp,
    UstCot,
    StCot,
    FinCot(FinCotMode),
}

impl PromptStrategy {
    /// The four model-level strategies compared against each other.
    pub const MAIN: [PromptStrategy; 4] = [
        PromptStrategy::Sp,
        PromptStrategy::UstCot,
        PromptStrategy::StCot,
        PromptStrategy::FinCot(FinCotMode::AllBlueprints),
    ];

    pub fn kind(self) -> PromptKind {
        match self {
            PromptStrategy::Sp => PromptKind::Sp,
            PromptStrategy::UstCot => PromptKind::UstCot,
            PromptStrategy::StCot => PromptKind::StCot,
            PromptStrategy::FinCot(_) => PromptKind::FinCot,
        }
    }

    pub fn fincot_mode(self) -> Option<FinCotMode> {
        match self {
            PromptStrategy::FinCot(mode) => Some(mode),
            _ => None,
        }
    }

    /// The nine single-domain FinCoT variants.
    pub fn domain_sweep() -> impl Iterator<Item = PromptStrategy> {
        DomainCode::BLUEPRINTED
            .into_iter()
            .map(|d| PromptStrategy::FinCot(FinCotMode::SingleDomain(d)))
    }

    /// Stable machine key, used for file names and cache keys.
    pub fn key(self) -> String {
        match self {
            PromptStrategy::Sp => "sp".into(),
            PromptStrategy::UstCot => "ust_cot".into(),
            PromptStrategy::StCot => "st_cot".into(),
            PromptStrategy::FinCot(FinCotMode::AllBlueprints) => "fincot_all".into(),
            PromptStrategy::FinCot(FinCotMode::Routed) => "fincot_routed".into(),
            PromptStrategy::FinCot(FinCotMode::SingleDomain(d)) => format!("fincot_{}", d.slug()),
        }
    }

    /// Human-readable row label in table form.
    pub fn label(self) -> String {
        match self {
            PromptStrategy::Sp => "SP".into(),
            PromptStrategy::UstCot => "UST-CoT".into(),
            PromptStrategy::StCot => "ST-CoT".into(),
            PromptStrategy::FinCot(FinCotMode::AllBlueprints) => "FinCoT (All Blueprints)".into(),
            PromptStrategy::FinCot(FinCotMode::Routed) => "FinCoT (Routed)".into(),
            PromptStrategy::FinCot(FinCotMode::SingleDomain(d)) => format!("FinCoT ({d})"),
        }
    }
}

impl fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown prompt strategy {0:?}")]
pub struct UnknownStrategy(pub String);

impl FromStr for PromptStrategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "sp" => PromptStrategy::Sp,
            "ust_cot" => PromptStrategy::UstCot,
            "st_cot" => PromptStrategy::StCot,
            "fincot_all" | "fincot" => PromptStrategy::FinCot(FinCotMode::AllBlueprints),
            "fincot_routed" => PromptStrategy::FinCot(FinCotMode::Routed),
            other => {
                let domain = other
                    .strip_prefix("fincot_")
                    .and_then(DomainCode::from_slug)
                    .filter(|d| d.has_blueprint())
                    .ok_or_else(|| UnknownStrategy(s.to_string()))?;
                PromptStrategy::FinCot(FinCotMode::SingleDomain(domain))
            }
        })
    }
}

impl Serialize for PromptStrategy {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for PromptStrategy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// One CFA-style multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    /// Stem followed by the formatted `A.`/`B.`/`C.` option lines.
    pub question: String,
    pub gold: AnswerLetter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainCode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledPrompt {
    pub system: String,
    pub user: String,
    pub strategy: PromptStrategy,
    pub hint_domains: Vec<DomainCode>,
}

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("item {0:?} has no domain label; routed FinCoT needs one")]
    MissingDomainLabel(String),
    #[error("no blueprint loaded for domain {0}")]
    UnknownDomain(DomainCode),
    #[error("FinCoT template does not contain the {HINT_PLACEHOLDER} placeholder")]
    MissingPlaceholder,
    #[error("reading template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The four system-prompt templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    sp: String,
    ust_cot: String,
    st_cot: String,
    fincot: String,
}

fn normalize(text: &str) -> String {
    text.trim_end_matches(['\n', '\r']).to_string()
}

impl TemplateSet {
    pub fn builtin() -> Self {
        TemplateSet {
            sp: normalize(include_str!("../../../templates/sp.txt")),
            ust_cot: normalize(include_str!("../../../templates/ust_cot.txt")),
            st_cot: normalize(include_str!("../../../templates/st_cot.txt")),
            fincot: normalize(include_str!("../../../templates/fincot.txt")),
        }
    }

    /// Reads `{sp,ust_cot,st_cot,fincot}.txt` from `dir`.
    pub fn load(dir: &Path) -> Result<Self, PromptError> {
        let read = |kind: PromptKind| {
            let path = dir.join(format!("{}.txt", kind.file_stem()));
            fs::read_to_string(&path)
                .map(|t| normalize(&t))
                .map_err(|source| PromptError::Io {
                    path: path.display().to_string(),
                    source,
                })
        };
        let set = TemplateSet {
            sp: read(PromptKind::Sp)?,
            ust_cot: read(PromptKind::UstCot)?,
            st_cot: read(PromptKind::StCot)?,
            fincot: read(PromptKind::FinCot)?,
        };
        if !set.fincot.contains(HINT_PLACEHOLDER) {
            return Err(PromptError::MissingPlaceholder);
        }
        Ok(set)
    }

    /// The stored template text, trailing newlines removed.
    pub fn golden_template(&self, kind: PromptKind) -> &str {
        match kind {
            PromptKind::Sp => &self.sp,
            PromptKind::UstCot => &self.ust_cot,
            PromptKind::StCot => &self.st_cot,
            PromptKind::FinCot => &self.fincot,
        }
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Builtin template text for `kind`.
pub fn golden_template(kind: PromptKind) -> String {
    TemplateSet::builtin().golden_template(kind).to_string()
}

/// Assembles prompts from a template set and a blueprint registry.
#[derive(Debug, Clone)]
pub struct PromptAssembler<'a> {
    pub templates: &'a TemplateSet,
    pub registry: &'a BlueprintRegistry,
}

impl<'a> PromptAssembler<'a> {
    pub fn new(templates: &'a TemplateSet, registry: &'a BlueprintRegistry) -> Self {
        PromptAssembler {
            templates,
            registry,
        }
    }

    pub fn assemble(
        &self,
        strategy: PromptStrategy,
        item: &McqItem,
    ) -> Result<AssembledPrompt, PromptError> {
        let hint_domains = match strategy.fincot_mode() {
            None => Vec::new(),
            Some(FinCotMode::AllBlueprints) => DomainCode::BLUEPRINTED.to_vec(),
            Some(FinCotMode::SingleDomain(d)) => vec![d],
            Some(FinCotMode::Routed) => match item.domain {
                None => return Err(PromptError::MissingDomainLabel(item.id.clone())),
                // No Ethics blueprint exists: fall back to plain structured CoT.
                Some(DomainCode::Ethics) => Vec::new(),
                Some(d) => vec![d],
            },
        };

        let system = if strategy.kind() == PromptKind::FinCot && !hint_domains.is_empty() {
            let hint = hint_domains
                .iter()
                .map(|&d| {
                    self.registry
                        .get(d)
                        .map(render_hint)
                        .ok_or(PromptError::UnknownDomain(d))
                })
                .collect::<Result<Vec<_>, _>>()?
                .join("\n\n");
            let template = self.templates.golden_template(PromptKind::FinCot);
            if !template.contains(HINT_PLACEHOLDER) {
                return Err(PromptError::MissingPlaceholder);
            }
            template.replacen(HINT_PLACEHOLDER, &hint, 1)
        } else if strategy.kind() == PromptKind::FinCot {
            self.templates
                .golden_template(PromptKind::StCot)
                .to_string()
        } else {
            self.templates.golden_template(strategy.kind()).to_string()
        };

        Ok(AssembledPrompt {
            system,
            user: item.question.clone(),
            strategy,
            hint_domains,
        })
    }
}

/// Assembles with the builtin templates.
pub fn assemble_prompt(
    strategy: PromptStrategy,
    item: &McqItem,
    registry: &BlueprintRegistry,
) -> Result<AssembledPrompt, PromptError> {
    let templates = TemplateSet::builtin();
    PromptAssembler::new(&templates, registry).assemble(strategy, item)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(domain: Option<DomainCode>) -> McqItem {
        McqItem {
            id: "q1".into(),
            question: "Which is a bond?\nA. x\nB. y\nC. z".into(),
            gold: AnswerLetter::B,
            domain,
        }
    }

    fn header_count(text: &str) -> usize {
        regex::Regex::new(r"\*\*\*[^*\n]+:\*\*\*")
            .unwrap()
            .find_iter(text)
            .count()
    }

    #[test]
    fn strategy_keys_round_trip() {
        let mut all: Vec<_> = PromptStrategy::MAIN.to_vec();
        all.extend(PromptStrategy::domain_sweep());
        all.push(PromptStrategy::FinCot(FinCotMode::Routed));
        for s in all {
            assert_eq!(s.key().parse::<PromptStrategy>().unwrap(), s);
        }
        assert!("fincot_ethics".parse::<PromptStrategy>().is_err());
        assert!("zero_shot".parse::<PromptStrategy>().is_err());
    }

    #[test]
    fn fincot_mode_present_only_for_fincot() {
        for s in PromptStrategy::MAIN {
            assert_eq!(s.fincot_mode().is_some(), s.kind() == PromptKind::FinCot);
        }
    }

    #[test]
    fn tag_invariants_per_strategy() {
        let reg = BlueprintRegistry::builtin();
        for s in PromptStrategy::MAIN {
            let p = assemble_prompt(s, &item(None), &reg).unwrap();
            let tagged = p.system.contains("<thinking>") && p.system.contains("<output>");
            let untagged = !p.system.contains("<thinking>") && !p.system.contains("<output>");
            match s.kind() {
                PromptKind::Sp | PromptKind::UstCot => assert!(untagged, "{s}"),
                PromptKind::StCot | PromptKind::FinCot => assert!(tagged, "{s}"),
            }
            assert_eq!(p.user, item(None).question);
        }
    }

    #[test]
    fn single_domain_embeds_exactly_one_blueprint() {
        let reg = BlueprintRegistry::builtin();
        let p = assemble_prompt(
            PromptStrategy::FinCot(FinCotMode::SingleDomain(DomainCode::Economics)),
            &item(None),
            &reg,
        )
        .unwrap();
        assert_eq!(p.system.matches("***Economics:***").count(), 1);
        assert_eq!(header_count(&p.system), 1);
        assert!(p.system.contains("Hint:***Economics:***"));
        assert_eq!(p.hint_domains, vec![DomainCode::Economics]);
    }

    #[test]
    fn all_blueprints_embeds_nine_headers() {
        let reg = BlueprintRegistry::builtin();
        let p = assemble_prompt(
            PromptStrategy::FinCot(FinCotMode::AllBlueprints),
            &item(None),
            &reg,
        )
        .unwrap();
        assert_eq!(header_count(&p.system), 9);
        assert!(!p.system.contains(HINT_PLACEHOLDER));
    }

    #[test]
    fn routed_requires_a_label() {
        let reg = BlueprintRegistry::builtin();
        let err = assemble_prompt(
            PromptStrategy::FinCot(FinCotMode::Routed),
            &item(None),
            &reg,
        )
        .unwrap_err();
        assert!(matches!(err, PromptError::MissingDomainLabel(_)));
    }

    #[test]
    fn routed_ethics_falls_back_to_structured_cot() {
        let reg = BlueprintRegistry::builtin();
        let p = assemble_prompt(
            PromptStrategy::FinCot(FinCotMode::Routed),
            &item(Some(DomainCode::Ethics)),
            &reg,
        )
        .unwrap();
        assert_eq!(p.system, golden_template(PromptKind::StCot));
        assert!(p.hint_domains.is_empty());
    }

    #[test]
    fn missing_blueprint_is_unknown_domain() {
        let reg = BlueprintRegistry::default();
        let err = assemble_prompt(
            PromptStrategy::FinCot(FinCotMode::SingleDomain(DomainCode::Derivatives)),
            &item(None),
            &reg,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            PromptError::UnknownDomain(DomainCode::Derivatives)
        ));
    }

    #[test]
    fn golden_template_spot_checks() {
        assert!(golden_template(PromptKind::StCot).contains("### Response Format:"));
        assert!(golden_template(PromptKind::FinCot)
            .contains("\"sector\": [The sector being addressed]"));
        assert!(!golden_template(PromptKind::Sp).contains("<thinking>"));
        assert_eq!(
            golden_template(PromptKind::Sp),
            golden_template(PromptKind::Sp)
        );
    }

    #[test]
    fn assembly_is_idempotent() {
        let reg = BlueprintRegistry::builtin();
        let s = PromptStrategy::FinCot(FinCotMode::AllBlueprints);
        assert_eq!(
            assemble_prompt(s, &item(None), &reg).unwrap(),
            assemble_prompt(s, &item(None), &reg).unwrap()
        );
    }

    #[test]
    fn loading_requires_placeholder() {
        let dir = tempfile::tempdir().unwrap();
        for kind in PromptKind::ALL {
            std::fs::write(
                dir.path().join(format!("{}.txt", kind.file_stem())),
                "plain\n",
            )
            .unwrap();
        }
        assert!(matches!(
            TemplateSet::load(dir.path()),
            Err(PromptError::MissingPlaceholder)
        ));
        std::fs::write(dir.path().join("fincot.txt"), "x {{HINT}}\n\n").unwrap();
        let set = TemplateSet::load(dir.path()).unwrap();
        assert_eq!(set.golden_template(PromptKind::FinCot), "x {{HINT}}");
    }
}
