use crate::dataset::{Dataset, DatasetError};
use crate::features::{FeatureError, FeatureFamily, FeatureSchema};

use super::{cross_validate_select, r2, CvOptions, CvReport, RegressError, TrainedModel};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Regress(#[from] RegressError),
}

/// Builds a schema from `train`, runs model selection for `property` and
/// returns the refit winner with its schema attached.
pub fn train_property_model(
    train: &Dataset,
    property: &str,
    families: &[FeatureFamily],
    options: &CvOptions,
) -> Result<(TrainedModel, CvReport), TrainError> {
    let y = train.values(property)?;
    let schema = FeatureSchema::build(train.graphs(), families)?;
    let x: Vec<Vec<f64>> = train.graphs().map(|g| schema.encode(g)).collect();
    let (mut model, report) = cross_validate_select(&x, &y, options)?;
    model.property = Some(property.to_string());
    model.unit = train.units.get(property).cloned();
    model.schema = Some(schema);
    Ok((model, report))
}

/// R² of a schema-carrying model on a dataset.
pub fn evaluate_on(model: &TrainedModel, data: &Dataset, property: &str) -> Result<f64, TrainError> {
    let y = data.values(property)?;
    let predicted = data
        .graphs()
        .map(|g| model.predict_graph(g))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(r2(&y, &predicted)?)
}
