//! Flag value syntax shared by several subcommands.

use molgen_core::dataset::SplitStrategy;
use molgen_core::enumerate::FragmentRange;
use molgen_core::features::FeatureFamily;
use molgen_core::regress::ModelKind;

/// `prop:low:high`, e.g. `E_HOMO:-0.26:-0.24`.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub property: String,
    pub low: f64,
    pub high: f64,
}

pub fn parse_target(s: &str) -> Result<Target, String> {
    let bad = || format!("target {s:?} is not prop:low:high");
    let mut parts = s.rsplitn(3, ':');
    let high = parts.next().ok_or_else(bad)?;
    let low = parts.next().ok_or_else(bad)?;
    let property = parts.next().ok_or_else(bad)?;
    let low: f64 = low.trim().parse().map_err(|_| bad())?;
    let high: f64 = high.trim().parse().map_err(|_| bad())?;
    if property.is_empty() || !low.is_finite() || !high.is_finite() {
        return Err(bad());
    }
    if low > high {
        return Err(format!("target {s:?} has low > high"));
    }
    Ok(Target {
        property: property.to_string(),
        low,
        high,
    })
}

/// `SMILES:min[:max]`; an empty or missing max is unbounded.
pub fn parse_fragment(s: &str) -> Result<FragmentRange, String> {
    let bad = || format!("fragment {s:?} is not SMILES:min[:max]");
    let parts: Vec<&str> = s.split(':').collect();
    let (smiles, min, max) = match parts.as_slice() {
        [smiles, min] => (*smiles, *min, ""),
        [smiles, min, max] => (*smiles, *min, *max),
        _ => return Err(bad()),
    };
    let min: u32 = min.trim().parse().map_err(|_| bad())?;
    let max: Option<u32> = if max.trim().is_empty() {
        None
    } else {
        Some(max.trim().parse().map_err(|_| bad())?)
    };
    if max.is_some_and(|m| m < min) {
        return Err(format!("fragment {s:?} has min > max"));
    }
    FragmentRange::new(smiles, min, max).map_err(|e| format!("fragment {smiles:?}: {e}"))
}

/// Comma list of `atom_count`, `ring_count`, `aromatic_ring_count`,
/// `edge_subgraph:N`, or `standard`.
pub fn parse_families(s: &str) -> Result<Vec<FeatureFamily>, String> {
    let mut out = Vec::new();
    for name in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match name {
            "standard" => out.extend(FeatureFamily::standard()),
            "atom_count" | "atoms" => out.push(FeatureFamily::AtomCount),
            "ring_count" | "rings" => out.push(FeatureFamily::RingCount),
            "aromatic_ring_count" | "aromatic" => out.push(FeatureFamily::AromaticRingCount),
            other => {
                let n = other
                    .strip_prefix("edge_subgraph:")
                    .or_else(|| other.strip_prefix("subgraph:"))
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| format!("unknown feature family {other:?}"))?;
                out.push(FeatureFamily::EdgeSubgraph { max_edges: n });
            }
        }
    }
    if out.is_empty() {
        return Err("no feature families given".into());
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn parse_kinds(s: &str) -> Result<Vec<ModelKind>, String> {
    let kinds = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<ModelKind>, _>>()?;
    if kinds.is_empty() {
        return Err("no model kinds given".into());
    }
    Ok(kinds)
}

/// `stratified` (on the training target) or `random`.
pub fn parse_split(s: &str, property: Option<&str>) -> Result<SplitStrategy, String> {
    match s {
        "random" => Ok(SplitStrategy::Random),
        "stratified" => property
            .map(|p| SplitStrategy::Stratified { property: p.to_string() })
            .ok_or_else(|| "a stratified split needs --target".to_string()),
        other => Err(format!("unknown split {other:?} (expected stratified or random)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets() {
        assert_eq!(
            parse_target("E_HOMO:-0.26:-0.24").unwrap(),
            Target {
                property: "E_HOMO".into(),
                low: -0.26,
                high: -0.24
            }
        );
        assert!(parse_target("E_HOMO:-0.24:-0.26").is_err());
        assert!(parse_target("-0.2:0.1").is_err());
        assert!(parse_target("p:a:1").is_err());
    }

    #[test]
    fn fragments() {
        let f = parse_fragment("C=O:1:2").unwrap();
        assert_eq!((f.min, f.max), (1, Some(2)));
        let f = parse_fragment("CO:1").unwrap();
        assert_eq!((f.min, f.max), (1, None));
        assert!(parse_fragment("C1C:1").is_err());
        assert!(parse_fragment("CO:3:1").is_err());
    }

    #[test]
    fn families_and_kinds() {
        assert_eq!(parse_families("standard").unwrap(), FeatureFamily::standard());
        assert_eq!(
            parse_families("atoms,edge_subgraph:2").unwrap(),
            vec![FeatureFamily::AtomCount, FeatureFamily::EdgeSubgraph { max_edges: 2 }]
        );
        assert!(parse_families("bogus").is_err());
        assert_eq!(parse_kinds("ridge,kernel_ridge").unwrap(), vec![ModelKind::Ridge, ModelKind::KernelRidge]);
        assert!(parse_kinds("svm").is_err());
        assert!(parse_split("stratified", None).is_err());
    }
}
