use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{validate_blueprint, Blueprint, BlueprintFileError, Issue};
use crate::domain::DomainCode;

/// The shipped corpus, embedded so the harness works without a checkout.
const BUILTIN: [(&str, &str); 9] = [
    (
        "01_economics.mmd",
        include_str!("../../../../blueprints/01_economics.mmd"),
    ),
    (
        "02_fixed_income.mmd",
        include_str!("../../../../blueprints/02_fixed_income.mmd"),
    ),
    (
        "03_quantitative_methods.mmd",
        include_str!("../../../../blueprints/03_quantitative_methods.mmd"),
    ),
    (
        "04_equity_investing.mmd",
        include_str!("../../../../blueprints/04_equity_investing.mmd"),
    ),
    (
        "05_portfolio_management.mmd",
        include_str!("../../../../blueprints/05_portfolio_management.mmd"),
    ),
    (
        "06_derivatives.mmd",
        include_str!("../../../../blueprints/06_derivatives.mmd"),
    ),
    (
        "07_financial_reporting.mmd",
        include_str!("../../../../blueprints/07_financial_reporting.mmd"),
    ),
    (
        "08_alternative_investments.mmd",
        include_str!("../../../../blueprints/08_alternative_investments.mmd"),
    ),
    (
        "09_corporate_issuers.mmd",
        include_str!("../../../../blueprints/09_corporate_issuers.mmd"),
    ),
];

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    ParseFailure {
        file: PathBuf,
        #[source]
        source: BlueprintFileError,
    },
    #[error("{file}: blueprints cannot target the Ethics domain")]
    EthicsBlueprintRejected { file: PathBuf },
    #[error("domain {domain} is claimed by both {first} and {second}")]
    DuplicateDomain {
        domain: DomainCode,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("{file}: {}", .errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { file: PathBuf, errors: Vec<Issue> },
}

/// Immutable map from domain to blueprint. Never contains Ethics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlueprintRegistry {
    entries: BTreeMap<DomainCode, Blueprint>,
}

impl BlueprintRegistry {
    /// The nine blueprints shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_named_texts(
            BUILTIN
                .iter()
                .map(|(name, text)| (PathBuf::from(name), text.to_string())),
        )
        .expect("shipped blueprint corpus is valid")
    }

    fn from_named_texts(
        files: impl IntoIterator<Item = (PathBuf, String)>,
    ) -> Result<Self, RegistryError> {
        let mut entries = BTreeMap::new();
        let mut origin: BTreeMap<DomainCode, PathBuf> = BTreeMap::new();
        for (file, text) in files {
            let bp =
                Blueprint::from_file_text(&text).map_err(|source| RegistryError::ParseFailure {
                    file: file.clone(),
                    source,
                })?;
            if bp.domain == DomainCode::Ethics {
                return Err(RegistryError::EthicsBlueprintRejected { file });
            }
            if let Some(first) = origin.get(&bp.domain) {
                return Err(RegistryError::DuplicateDomain {
                    domain: bp.domain,
                    first: first.clone(),
                    second: file,
                });
            }
            let report = validate_blueprint(&bp);
            if !report.is_ok() {
                return Err(RegistryError::Invalid {
                    file,
                    errors: report.errors,
                });
            }
            for w in &report.warnings {
                tracing::warn!(file = %file.display(), "{w}");
            }
            origin.insert(bp.domain, file);
            entries.insert(bp.domain, bp);
        }
        Ok(BlueprintRegistry { entries })
    }

    pub fn get(&self, domain: DomainCode) -> Option<&Blueprint> {
        self.entries.get(&domain)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Blueprints in the fixed concatenation order, skipping absent domains.
    pub fn in_fixed_order(&self) -> impl Iterator<Item = &Blueprint> {
        DomainCode::BLUEPRINTED
            .iter()
            .filter_map(|d| self.entries.get(d))
    }

    pub fn is_complete(&self) -> bool {
        DomainCode::BLUEPRINTED
            .iter()
            .all(|d| self.entries.contains_key(d))
    }
}

/// Loads every `*.mmd` file in `dir`, in file-name order.
pub fn load_registry(dir: &Path) -> Result<BlueprintRegistry, RegistryError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RegistryError::Io { path, source }
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "mmd"))
        .collect();
    paths.sort();
    let mut files = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        files.push((path, text));
    }
    BlueprintRegistry::from_named_texts(files)
}
