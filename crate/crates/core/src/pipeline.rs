//! Serializable run specifications shared by the CLI and the service, and
//! the glue that turns them into training and generation runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{split, Dataset, DatasetError, SplitStrategy};
use crate::element::Element;
use crate::enumerate::{derive_pool, FragmentRange, GenerateError, GenerationConfig, Limits, PoolSyntaxError, ResourcePool};
use crate::features::FeatureFamily;
use crate::graph::MolGraph;
use crate::regress::{evaluate_on, train_property_model, CvOptions, CvReport, HyperGrid, ModelKind, TrainError, TrainedModel};
use crate::rules::{load_rules, RuleError, RuleSet, StructuralRule};
use crate::smiles::{self, SmilesError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Pool(#[from] PoolSyntaxError),
    #[error("seed {index}: {source}")]
    Seed { index: usize, source: SmilesError },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    /// Target column; the dataset's first property when absent.
    #[serde(default)]
    pub property: Option<String>,
    #[serde(default)]
    pub families: Option<Vec<FeatureFamily>>,
    #[serde(default)]
    pub kinds: Option<Vec<ModelKind>>,
    #[serde(default)]
    pub grid: Option<HyperGrid>,
    #[serde(default)]
    pub lambda_index: Option<usize>,
    #[serde(default)]
    pub folds: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Hold out a test set from the dataset.
    #[serde(default)]
    pub split: Option<SplitStrategy>,
}

impl TrainingSpec {
    pub fn cv_options(&self) -> CvOptions {
        let d = CvOptions::default();
        CvOptions {
            kinds: self.kinds.clone().unwrap_or(d.kinds),
            grid: self.grid.clone().unwrap_or(d.grid),
            folds: self.folds.unwrap_or(d.folds),
            seed: self.seed,
            lambda_index: self.lambda_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSet {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub smiles: String,
    pub set: FitSet,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub cv: CvReport,
    pub train_size: usize,
    pub test_size: usize,
    /// Predicted against actual for every training and test molecule.
    pub points: Vec<FitPoint>,
}

/// Splits if asked, trains with model selection, and scores both sets.
pub fn train(dataset: &Dataset, spec: &TrainingSpec) -> Result<TrainOutcome, PipelineError> {
    let property = match &spec.property {
        Some(p) => p.clone(),
        None => dataset
            .properties
            .first()
            .cloned()
            .ok_or_else(|| PipelineError::Invalid("dataset has no property columns".into()))?,
    };
    dataset.property_index(&property)?;
    let (train_set, test_set) = match &spec.split {
        Some(strategy) => {
            let (a, b) = split(dataset, strategy, spec.seed)?;
            (a, Some(b))
        }
        None => (dataset.clone(), None),
    };
    let families = spec.families.clone().unwrap_or_else(FeatureFamily::standard);
    let (mut model, cv) = train_property_model(&train_set, &property, &families, &spec.cv_options())?;
    if let Some(test) = &test_set {
        model.metrics.test_r2 = Some(evaluate_on(&model, test, &property)?);
    }
    let column = dataset.property_index(&property)?;
    let mut points = Vec::new();
    for (set, data) in [(FitSet::Train, Some(&train_set)), (FitSet::Test, test_set.as_ref())] {
        let Some(data) = data else { continue };
        for r in &data.records {
            points.push(FitPoint {
                smiles: r.smiles.clone(),
                set,
                actual: r.values[column],
                predicted: model.predict_graph(&r.graph).map_err(TrainError::from)?,
            });
        }
    }
    Ok(TrainOutcome {
        model,
        cv,
        train_size: train_set.len(),
        test_size: test_set.map_or(0, |t| t.len()),
        points,
    })
}

/// Atom budget as `"C:7,N:2"` or `{"C": 7, "N": 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoolSpec {
    Text(String),
    Map(BTreeMap<Element, u32>),
}

impl PoolSpec {
    pub fn atoms(&self) -> Result<BTreeMap<Element, u32>, PoolSyntaxError> {
        match self {
            PoolSpec::Text(t) => Ok(t.parse::<ResourcePool>()?.atoms),
            PoolSpec::Map(m) => Ok(m.iter().filter(|(_, &n)| n > 0).map(|(&e, &n)| (e, n)).collect()),
        }
    }
}

/// `"default"`, `"none"`, a rules file path, or inline rules.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RulesSpec {
    Named(String),
    Inline(Vec<StructuralRule>),
}

impl Default for RulesSpec {
    fn default() -> Self {
        RulesSpec::Named("default".into())
    }
}

impl RulesSpec {
    pub fn resolve(&self) -> Result<RuleSet, RuleError> {
        match self {
            RulesSpec::Named(name) => load_rules(name),
            RulesSpec::Inline(rules) => RuleSet::new(rules.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSpec {
    /// Derived from the training dataset when absent.
    #[serde(default)]
    pub atoms: Option<PoolSpec>,
    #[serde(default)]
    pub fragments: Vec<FragmentRange>,
    #[serde(default)]
    pub rules: RulesSpec,
    /// Acceptable prediction interval for the trained model; without it
    /// the model only annotates solutions.
    #[serde(default)]
    pub target: Option<[f64; 2]>,
    #[serde(default)]
    pub limits: Limits,
    /// Seed fragments as SMILES.
    #[serde(default)]
    pub seeds: Vec<String>,
    #[serde(default)]
    pub workers: Option<usize>,
}

/// Builds a generation config. `model` receives `spec.target` as its range.
pub fn generation_config(
    spec: &GenerationSpec,
    model: Option<TrainedModel>,
    dataset: Option<&Dataset>,
) -> Result<GenerationConfig, PipelineError> {
    let atoms = match (&spec.atoms, dataset) {
        (Some(p), _) => p.atoms()?,
        (None, Some(d)) => derive_pool(d)?.atoms,
        (None, None) => return Err(PipelineError::Invalid("no atom pool given and no dataset to derive one from".into())),
    };
    let mut config = GenerationConfig::new(ResourcePool {
        atoms,
        fragments: spec.fragments.clone(),
    });
    config.rules = spec.rules.resolve()?;
    config.limits = spec.limits;
    config.workers = spec.workers.unwrap_or(1);
    config.seeds = spec
        .seeds
        .iter()
        .enumerate()
        .map(|(index, s)| smiles::parse(s).map_err(|source| PipelineError::Seed { index, source }))
        .collect::<Result<Vec<MolGraph>, _>>()?;
    if let Some(mut m) = model {
        if spec.target.is_some() {
            m.target_range = spec.target;
        }
        config.models.push(m);
    } else if spec.target.is_some() {
        return Err(PipelineError::Invalid("a target range needs a trained model".into()));
    }
    config.validate()?;
    Ok(config)
}
