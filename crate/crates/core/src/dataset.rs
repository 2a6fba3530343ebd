//! Property datasets: CSV ingestion with a rejects report, splitting and
//! summary statistics.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canon::canonical_label;
use crate::graph::MolGraph;
use crate::smiles;

/// Share of unparseable rows above which loading fails.
pub const MAX_REJECT_FRACTION: f64 = 0.10;
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header row missing or lacks column {0:?}")]
    HeaderMissing(String),
    #[error("{rejected} of {total} rows rejected (see {report})")]
    TooManyRejects { rejected: usize, total: usize, report: PathBuf },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("unknown property {0:?}")]
    UnknownProperty(String),
}

#[derive(Debug, Clone)]
pub struct Record {
    pub smiles: String,
    pub graph: MolGraph,
    /// Values aligned with `Dataset::properties`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub name: String,
    pub properties: Vec<String>,
    /// Unit annotations, e.g. `E_HOMO -> Hartree`. Metadata only.
    pub units: BTreeMap<String, String>,
    pub records: Vec<Record>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub row: usize,
    pub smiles: String,
    pub error: String,
    pub position: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub smiles_column: Option<String>,
    /// Property columns to keep; all non-SMILES columns when empty.
    pub property_columns: Vec<String>,
    pub allow_duplicates: bool,
    /// Write `<input>.rejects.csv` when any row is rejected.
    pub write_rejects: bool,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub rejects: Vec<Reject>,
    pub rejects_path: Option<PathBuf>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn property_index(&self, name: &str) -> Result<usize, DatasetError> {
        self.properties
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| DatasetError::UnknownProperty(name.to_string()))
    }

    pub fn values(&self, property: &str) -> Result<Vec<f64>, DatasetError> {
        let i = self.property_index(property)?;
        Ok(self.records.iter().map(|r| r.values[i]).collect())
    }

    pub fn graphs(&self) -> impl Iterator<Item = &MolGraph> {
        self.records.iter().map(|r| &r.graph)
    }

    fn with_records(&self, name: String, records: Vec<Record>) -> Dataset {
        Dataset {
            name,
            properties: self.properties.clone(),
            units: self.units.clone(),
            records,
        }
    }

    /// Builds a dataset from SMILES strings and one property column.
    pub fn from_smiles(name: &str, property: &str, rows: &[(&str, f64)]) -> Result<Dataset, smiles::SmilesError> {
        let records = rows
            .iter()
            .map(|&(s, v)| {
                Ok(Record {
                    smiles: s.to_string(),
                    graph: smiles::parse(s)?,
                    values: vec![v],
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Dataset {
            name: name.to_string(),
            properties: vec![property.to_string()],
            units: BTreeMap::new(),
            records,
        })
    }
}

/// Splits `E_HOMO [Hartree]` or `E_HOMO(Hartree)` into name and unit.
fn split_unit(header: &str) -> (String, Option<String>) {
    let h = header.trim();
    for (open, close) in [('[', ']'), ('(', ')')] {
        if h.ends_with(close) {
            if let Some(i) = h.rfind(open) {
                let unit = h[i + 1..h.len() - 1].trim();
                let name = h[..i].trim();
                if !name.is_empty() && !unit.is_empty() {
                    return (name.to_string(), Some(unit.to_string()));
                }
            }
        }
    }
    (h.to_string(), None)
}

pub fn rejects_path_for(input: &Path) -> PathBuf {
    let mut os = input.as_os_str().to_owned();
    os.push(".rejects.csv");
    PathBuf::from(os)
}

pub fn load_csv(path: &Path, options: &LoadOptions) -> Result<Loaded, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut loaded = read_csv(file, &name, options)?;
    if !loaded.rejects.is_empty() && options.write_rejects {
        let report = rejects_path_for(path);
        write_rejects(&report, &loaded.rejects)?;
        loaded.rejects_path = Some(report);
    }
    let parse_failures = loaded.rejects.iter().filter(|r| r.error != DUPLICATE).count();
    let total = loaded.dataset.len() + loaded.rejects.len();
    if total > 0 && parse_failures as f64 > MAX_REJECT_FRACTION * total as f64 {
        return Err(DatasetError::TooManyRejects {
            rejected: parse_failures,
            total,
            report: loaded.rejects_path.unwrap_or_else(|| rejects_path_for(path)),
        });
    }
    Ok(loaded)
}

const DUPLICATE: &str = "Duplicate";

/// Parses CSV text from any reader. Rejected rows are returned, not dropped.
pub fn read_csv<R: std::io::Read>(reader: R, name: &str, options: &LoadOptions) -> Result<Loaded, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let smiles_name = options.smiles_column.clone().unwrap_or_else(|| "smiles".to_string());
    let smiles_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(&smiles_name))
        .ok_or_else(|| DatasetError::HeaderMissing(smiles_name.clone()))?;

    let parsed: Vec<(usize, String, Option<String>)> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != smiles_col)
        .map(|(i, h)| {
            let (n, u) = split_unit(h);
            (i, n, u)
        })
        .collect();
    let selected: Vec<(usize, String, Option<String>)> = if options.property_columns.is_empty() {
        parsed
    } else {
        options
            .property_columns
            .iter()
            .map(|want| {
                parsed
                    .iter()
                    .find(|(_, n, _)| n == want)
                    .cloned()
                    .ok_or_else(|| DatasetError::HeaderMissing(want.clone()))
            })
            .collect::<Result<_, _>>()?
    };

    let mut dataset = Dataset {
        name: name.to_string(),
        properties: selected.iter().map(|(_, n, _)| n.clone()).collect(),
        units: selected
            .iter()
            .filter_map(|(_, n, u)| u.clone().map(|u| (n.clone(), u)))
            .collect(),
        records: Vec::new(),
    };
    let mut rejects = Vec::new();
    let mut seen = HashSet::new();
    for (row, result) in rdr.records().enumerate() {
        let record = result?;
        let text = record.get(smiles_col).unwrap_or("").to_string();
        let graph = match smiles::parse(&text) {
            Ok(g) => g,
            Err(e) => {
                rejects.push(Reject {
                    row: row + 1,
                    smiles: text,
                    error: e.kind.to_string(),
                    position: Some(e.position),
                });
                continue;
            }
        };
        let mut values = Vec::with_capacity(selected.len());
        let mut bad = None;
        for (col, prop, _) in &selected {
            match record.get(*col).unwrap_or("").parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    bad = Some(prop.clone());
                    break;
                }
            }
        }
        if let Some(prop) = bad {
            rejects.push(Reject {
                row: row + 1,
                smiles: text,
                error: format!("InvalidValue({prop})"),
                position: None,
            });
            continue;
        }
        if !options.allow_duplicates && !seen.insert(canonical_label(&graph)) {
            rejects.push(Reject {
                row: row + 1,
                smiles: text,
                error: DUPLICATE.to_string(),
                position: None,
            });
            continue;
        }
        dataset.records.push(Record {
            smiles: text,
            graph,
            values,
        });
    }
    Ok(Loaded {
        dataset,
        rejects,
        rejects_path: None,
    })
}

pub fn write_rejects(path: &Path, rejects: &[Reject]) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["smiles", "error", "position"])?;
    for r in rejects {
        let pos = r.position.map(|p| p.to_string()).unwrap_or_default();
        w.write_record([r.smiles.as_str(), r.error.as_str(), pos.as_str()])?;
    }
    w.flush().map_err(|source| DatasetError::File {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

pub fn write_csv(d: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["smiles".to_string()];
    for p in &d.properties {
        header.push(match d.units.get(p) {
            Some(u) => format!("{p} [{u}]"),
            None => p.clone(),
        });
    }
    w.write_record(&header)?;
    for r in &d.records {
        let mut row = vec![r.smiles.clone()];
        // `{:?}` on f64 is the shortest representation that round-trips.
        row.extend(r.values.iter().map(|v| format!("{v:?}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| DatasetError::File {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Sort by the property, then alternate train/test.
    Stratified { property: String },
    /// Seeded shuffle, first half to train.
    Random,
}

pub fn split(d: &Dataset, strategy: &SplitStrategy, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
    if d.len() < 2 {
        return Err(DatasetError::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    match strategy {
        SplitStrategy::Stratified { property } => {
            let p = d.property_index(property)?;
            order.sort_by(|&a, &b| d.records[a].values[p].total_cmp(&d.records[b].values[p]).then(a.cmp(&b)));
        }
        SplitStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, &idx) in order.iter().enumerate() {
        if i % 2 == 0 {
            train.push(idx);
        } else {
            test.push(idx);
        }
    }
    // Keep file order inside each part.
    train.sort_unstable();
    test.sort_unstable();
    let pick = |ids: &[usize]| ids.iter().map(|&i| d.records[i].clone()).collect::<Vec<_>>();
    Ok((
        d.with_records(format!("{}-train", d.name), pick(&train)),
        d.with_records(format!("{}-test", d.name), pick(&test)),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub property: String,
    pub unit: Option<String>,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub histogram: Vec<HistogramBin>,
}

pub fn summarize(d: &Dataset, property: &str) -> Result<Summary, DatasetError> {
    let values = d.values(property)?;
    if values.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let n = values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let width = (max - min) / HISTOGRAM_BINS as f64;
    let mut histogram: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|i| HistogramBin {
            low: min + width * i as f64,
            high: if i + 1 == HISTOGRAM_BINS { max } else { min + width * (i + 1) as f64 },
            count: 0,
        })
        .collect();
    for v in &values {
        let bin = if width > 0.0 {
            (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        histogram[bin].count += 1;
    }
    Ok(Summary {
        property: property.to_string(),
        unit: d.units.get(property).cloned(),
        count: values.len(),
        min,
        max,
        mean,
        stddev: var.sqrt(),
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str) -> Loaded {
        read_csv(text.as_bytes(), "t", &LoadOptions::default()).unwrap()
    }

    #[test]
    fn three_rows() {
        let l = load_str("smiles,E_HOMO [Hartree]\nC,-0.4\nCC,-0.35\nCCO,-0.3\n");
        assert_eq!(l.dataset.len(), 3);
        assert!(l.rejects.is_empty());
        assert_eq!(l.dataset.properties, vec!["E_HOMO"]);
        assert_eq!(l.dataset.units["E_HOMO"], "Hartree");
    }

    #[test]
    fn unclosed_ring_goes_to_rejects() {
        let l = load_str("smiles,y\nC,1\nC1CC,2\n");
        assert_eq!(l.dataset.len(), 1);
        assert_eq!(l.rejects.len(), 1);
        assert_eq!(l.rejects[0].error, "UnclosedRing");
        assert_eq!(l.rejects[0].smiles, "C1CC");
    }

    #[test]
    fn duplicates_rejected_unless_allowed() {
        let text = "smiles,y\nCCO,1\nOCC,2\n";
        assert_eq!(load_str(text).rejects[0].error, DUPLICATE);
        let opts = LoadOptions {
            allow_duplicates: true,
            ..Default::default()
        };
        assert_eq!(read_csv(text.as_bytes(), "t", &opts).unwrap().dataset.len(), 2);
    }

    #[test]
    fn missing_smiles_header() {
        let err = read_csv("a,b\n1,2\n".as_bytes(), "t", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, DatasetError::HeaderMissing(_)));
    }

    #[test]
    fn too_many_rejects_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "smiles,y\nC,1\nC1CC,2\nX,3\nCC,4\n").unwrap();
        let opts = LoadOptions {
            write_rejects: true,
            ..Default::default()
        };
        let err = load_csv(&path, &opts).unwrap_err();
        assert!(matches!(err, DatasetError::TooManyRejects { rejected: 2, total: 4, .. }));
        let report = std::fs::read_to_string(rejects_path_for(&path)).unwrap();
        assert!(report.starts_with("smiles,error,position\n"));
        assert!(report.contains("C1CC,UnclosedRing,1"));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        std::fs::write(&a, "smiles,E_HOMO [Hartree],gap\nC,-0.4,0.5\nC=O,-0.1234567891234,0.25\n").unwrap();
        let first = load_csv(&a, &LoadOptions::default()).unwrap().dataset;
        let b = dir.path().join("b.csv");
        write_csv(&first, &b).unwrap();
        let second = load_csv(&b, &LoadOptions::default()).unwrap().dataset;
        assert_eq!(first.properties, second.properties);
        assert_eq!(first.units, second.units);
        for (x, y) in first.records.iter().zip(&second.records) {
            assert_eq!(x.smiles, y.smiles);
            assert_eq!(x.values, y.values);
            assert_eq!(x.graph, y.graph);
        }
    }

    #[test]
    fn stratified_alternates() {
        let d = Dataset::from_smiles("d", "p", &[("CCC", 3.0), ("C", 1.0), ("CCCC", 4.0), ("CC", 2.0)]).unwrap();
        let strategy = SplitStrategy::Stratified {
            property: "p".into(),
        };
        let (train, test) = split(&d, &strategy, 0).unwrap();
        let mut tv = train.values("p").unwrap();
        let mut sv = test.values("p").unwrap();
        tv.sort_by(f64::total_cmp);
        sv.sort_by(f64::total_cmp);
        assert_eq!(tv, vec![1.0, 3.0]);
        assert_eq!(sv, vec![2.0, 4.0]);
    }

    fn numbered(n: usize) -> Dataset {
        let mut d = Dataset {
            name: "n".into(),
            properties: vec!["p".into()],
            ..Default::default()
        };
        for i in 0..n {
            d.records.push(Record {
                smiles: "C".repeat(i + 1),
                graph: MolGraph::new(),
                values: vec![i as f64],
            });
        }
        d
    }

    #[test]
    fn random_split_is_seeded_partition() {
        let d = numbered(40);
        let (a1, b1) = split(&d, &SplitStrategy::Random, 7).unwrap();
        let (a2, _) = split(&d, &SplitStrategy::Random, 7).unwrap();
        let (a3, _) = split(&d, &SplitStrategy::Random, 8).unwrap();
        let ids = |x: &Dataset| x.records.iter().map(|r| r.smiles.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a1), ids(&a2));
        assert_ne!(ids(&a1), ids(&a3));
        let mut all: Vec<String> = ids(&a1).into_iter().chain(ids(&b1)).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 40);
    }

    #[test]
    fn stratified_means_close() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = numbered(301);
        for r in &mut d.records {
            r.values[0] = rng.random::<f64>().powi(3) * 10.0;
        }
        let (train, test) = split(&d, &SplitStrategy::Stratified { property: "p".into() }, 0).unwrap();
        let all = summarize(&d, "p").unwrap();
        let m1 = summarize(&train, "p").unwrap().mean;
        let m2 = summarize(&test, "p").unwrap().mean;
        assert!((m1 - m2).abs() < 0.05 * all.stddev);
    }

    #[test]
    fn summary_statistics() {
        let d = Dataset::from_smiles("d", "p", &[("C", -0.4), ("CC", -0.3)]).unwrap();
        let s = summarize(&d, "p").unwrap();
        assert!((s.mean + 0.35).abs() < 1e-12);
        assert_eq!(s.histogram.len(), HISTOGRAM_BINS);
        assert_eq!(s.histogram.iter().map(|b| b.count).sum::<usize>(), 2);

        let one = Dataset::from_smiles("d", "p", &[("C", 1.5)]).unwrap();
        assert_eq!(summarize(&one, "p").unwrap().stddev, 0.0);
        assert!(matches!(summarize(&one, "q"), Err(DatasetError::UnknownProperty(_))));
    }

    #[test]
    fn uniform_sample_mean() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut d = numbered(1000);
        for r in &mut d.records {
            r.values[0] = rng.random::<f64>();
        }
        let s = summarize(&d, "p").unwrap();
        assert!((s.mean - 0.5).abs() < 0.05);
    }
}
