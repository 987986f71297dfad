//! Token cost algebra.
//!
//! Costs are measured in input-token dollars: with `r` the ratio of the
//! output price to the effective input price, a profile `(I, O)` costs
//! `I + r * O`. Efficiency of a candidate prompt relative to a baseline is
//! the baseline cost over the candidate cost, so values above 1 mean the
//! candidate is cheaper.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenProfile {
    pub input_k: f64,
    pub output_k: f64,
}

impl TokenProfile {
    pub fn new(input_k: f64, output_k: f64) -> Self {
        TokenProfile { input_k, output_k }
    }

    pub fn scaled(self, c: f64) -> Self {
        TokenProfile::new(self.input_k * c, self.output_k * c)
    }
}

/// Prices in money per million tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingModel {
    pub name: String,
    pub price_in: f64,
    pub price_out: f64,
    #[serde(default)]
    pub cache_read: Option<f64>,
    #[serde(default)]
    pub cache_write: Option<f64>,
    /// Cache reuse counts `K` to place on the ratio grid.
    #[serde(default)]
    pub reuse: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub r: f64,
    pub cost_baseline: f64,
    pub cost_candidate: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEven {
    pub r: f64,
    /// True when `r` is negative: one profile is cheaper at every `r >= 0`.
    pub dominated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioPoint {
    pub label: String,
    pub reuse: Option<u32>,
    pub r: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CostError {
    #[error("candidate profile has zero cost at r = {0}")]
    DegenerateCandidate(f64),
    #[error("pricing profile {0:?} has no cache read/write prices")]
    MissingCachePrices(String),
    #[error("invalid pricing profile {name:?}: {reason}")]
    InvalidPricing { name: String, reason: String },
    #[error("cache reuse count must be at least 1")]
    InvalidReuse,
    #[error("unknown pricing profile {0:?}")]
    UnknownProfile(String),
    #[error("no token profile for {model} / {strategy}")]
    MissingProfile { model: String, strategy: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed pricing file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("malformed token table: {0}")]
    Csv(#[from] csv::Error),
}

pub fn cost(p: TokenProfile, r: f64) -> f64 {
    p.input_k + r * p.output_k
}

pub fn efficiency(
    baseline: TokenProfile,
    candidate: TokenProfile,
    r: f64,
) -> Result<f64, CostError> {
    let c = cost(candidate, r);
    if c <= 0.0 {
        return Err(CostError::DegenerateCandidate(r));
    }
    Ok(cost(baseline, r) / c)
}

/// Ratio at which both profiles cost the same. Absent when outputs match,
/// since the ranking then depends only on inputs.
pub fn break_even(baseline: TokenProfile, candidate: TokenProfile) -> Option<BreakEven> {
    let denom = baseline.output_k - candidate.output_k;
    if denom == 0.0 {
        return None;
    }
    let r = (candidate.input_k - baseline.input_k) / denom;
    Some(BreakEven {
        r,
        dominated: r < 0.0,
    })
}

impl PricingModel {
    pub fn validate(&self) -> Result<(), CostError> {
        let invalid = |reason: &str| CostError::InvalidPricing {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        let prices = [
            Some(self.price_in),
            Some(self.price_out),
            self.cache_read,
            self.cache_write,
        ];
        if prices.iter().flatten().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("prices must be finite and non-negative"));
        }
        if self.price_in == 0.0 {
            return Err(invalid("input price must be positive"));
        }
        if self.cache_read.is_some() != self.cache_write.is_some() {
            return Err(invalid("cache_read and cache_write must be given together"));
        }
        if self.cache_read == Some(0.0) {
            return Err(invalid("cache read price must be positive"));
        }
        if self.reuse.contains(&0) {
            return Err(CostError::InvalidReuse);
        }
        Ok(())
    }

    fn cache_prices(&self) -> Result<(f64, f64), CostError> {
        match (self.cache_read, self.cache_write) {
            (Some(read), Some(write)) => Ok((read, write)),
            _ => Err(CostError::MissingCachePrices(self.name.clone())),
        }
    }
}

/// `p_read + p_write / K`: the cache write amortized over `K` uses.
pub fn effective_input_price(pm: &PricingModel, k: u32) -> Result<f64, CostError> {
    if k == 0 {
        return Err(CostError::InvalidReuse);
    }
    let (read, write) = pm.cache_prices()?;
    Ok(read + write / f64::from(k))
}

/// Ratios for the uncached price, each reuse count in `ks`, and the
/// read-only limit as `K` grows without bound. Cache points are skipped for
/// profiles without cache prices.
pub fn ratio_grid(pm: &PricingModel, ks: &[u32]) -> Result<Vec<RatioPoint>, CostError> {
    pm.validate()?;
    let mut out = vec![RatioPoint {
        label: format!("{} no cache", pm.name),
        reuse: None,
        r: pm.price_out / pm.price_in,
    }];
    let Ok((read, _)) = pm.cache_prices() else {
        return Ok(out);
    };
    for &k in ks {
        out.push(RatioPoint {
            label: format!("{} K={k}", pm.name),
            reuse: Some(k),
            r: pm.price_out / effective_input_price(pm, k)?,
        });
    }
    out.push(RatioPoint {
        label: format!("{} read-only", pm.name),
        reuse: None,
        r: pm.price_out / read,
    });
    Ok(out)
}

/// Sorted, de-duplicated union of every profile's grid at its own reuse
/// counts, rounded to two decimals.
pub fn combined_grid(profiles: &[PricingModel]) -> Result<Vec<f64>, CostError> {
    let mut rs = Vec::new();
    for pm in profiles {
        rs.extend(
            ratio_grid(pm, &pm.reuse)?
                .into_iter()
                .map(|p| (p.r * 100.0).round() / 100.0),
        );
    }
    rs.sort_by(f64::total_cmp);
    rs.dedup();
    Ok(rs)
}

pub fn efficiency_curve(
    baseline: TokenProfile,
    candidate: TokenProfile,
    r_grid: &[f64],
) -> Result<Vec<EfficiencyPoint>, CostError> {
    r_grid
        .iter()
        .map(|&r| {
            Ok(EfficiencyPoint {
                r,
                cost_baseline: cost(baseline, r),
                cost_candidate: cost(candidate, r),
                efficiency: efficiency(baseline, candidate, r)?,
            })
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct PricingFile {
    #[serde(default)]
    profile: Vec<PricingModel>,
}

pub fn parse_pricing(text: &str) -> Result<Vec<PricingModel>, CostError> {
    let file: PricingFile = toml::from_str(text)?;
    for pm in &file.profile {
        pm.validate()?;
    }
    Ok(file.profile)
}

pub fn load_pricing(path: &Path) -> Result<Vec<PricingModel>, CostError> {
    let text = std::fs::read_to_string(path).map_err(|source| CostError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_pricing(&text)
}

pub fn find_profile<'a>(
    profiles: &'a [PricingModel],
    name: &str,
) -> Result<&'a PricingModel, CostError> {
    profiles
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| CostError::UnknownProfile(name.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTableRow {
    pub model: String,
    pub strategy: String,
    pub prompt: String,
    pub input_k: f64,
    pub output_k: f64,
}

/// Average token usage per (model, strategy key), in table order.
#[derive(Debug, Clone, Default)]
pub struct TokenTable {
    rows: Vec<TokenTableRow>,
    index: BTreeMap<(String, String), usize>,
}

impl TokenTable {
    pub fn from_rows(rows: Vec<TokenTableRow>) -> Self {
        let index = rows
            .iter()
            .enumerate()
            .map(|(i, r)| ((r.model.clone(), r.strategy.clone()), i))
            .collect();
        TokenTable { rows, index }
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self, CostError> {
        let rows = csv::Reader::from_reader(reader)
            .deserialize()
            .collect::<Result<Vec<TokenTableRow>, _>>()?;
        Ok(Self::from_rows(rows))
    }

    pub fn load(path: &Path) -> Result<Self, CostError> {
        let file = std::fs::File::open(path).map_err(|source| CostError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(file)
    }

    pub fn rows(&self) -> &[TokenTableRow] {
        &self.rows
    }

    /// Models in first-appearance order.
    pub fn models(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.model.as_str()) {
                seen.push(&r.model);
            }
        }
        seen
    }

    pub fn profile(&self, model: &str, strategy: &str) -> Result<TokenProfile, CostError> {
        self.index
            .get(&(model.to_string(), strategy.to_string()))
            .map(|&i| TokenProfile::new(self.rows[i].input_k, self.rows[i].output_k))
            .ok_or_else(|| CostError::MissingProfile {
                model: model.to_string(),
                strategy: strategy.to_string(),
            })
    }
}
