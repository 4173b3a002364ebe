//! Experiment spec files.
//!
//! A spec is flat `key = value` text. `#` starts a comment, blank lines are
//! ignored, each key may appear once.
//!
//! ```text
//! seed = 7                        # mandatory; FAIRFED_SEED replaces it
//! data = synthetic                # or csv
//! data.n = 6000                   # synthetic: n, seed (mandatory), u0l u0h u1l u1h
//! data.seed = 2022
//! # data.path = train.csv         # csv: path (relative to the spec file); classes, groups inferred if unset
//! scheme = esg                    # esg | ssg | psg
//! clients = 40
//! imbalance_period = 4
//! folds = 3                       # >= 2 cross-validates; 0 evaluates on the training data
//! methods = fedminmax, fedavg, qfedavg:q5   # kind[:label]
//! out = runs/synthetic
//!
//! rounds = 2000                   # trainer defaults for every method ...
//! hidden = 32, 32
//! q5.q = 5.0                      # ... overridden per label
//! ```
//!
//! Trainer keys: `rounds`, `model_lr`, `adversary_lr`, `epsilon`,
//! `local_epochs`, `batch_size` (integer or `full`), `q`, `lipschitz`,
//! `hidden` (comma list, `none` for a linear model), `output`
//! (`average` | `final`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use fairfed::data::{CsvSchema, Scheme, SyntheticParams};
use fairfed::federation::{Method, OutputMode, TrainerConfig};
use fairfed::numerics::Shape;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

const TRAINER_KEYS: [&str; 10] = [
    "rounds",
    "model_lr",
    "adversary_lr",
    "epsilon",
    "local_epochs",
    "batch_size",
    "q",
    "lipschitz",
    "hidden",
    "output",
];

const TOP_KEYS: [&str; 8] = ["seed", "data", "scheme", "clients", "imbalance_period", "folds", "methods", "out"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticParams),
    Csv {
        /// As written in the spec file.
        path: PathBuf,
        #[serde(skip)]
        resolved: PathBuf,
        #[serde(skip_serializing_if = "Option::is_none")]
        classes: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        groups: Option<usize>,
    },
}

impl DataSource {
    pub fn csv_schema(&self) -> Option<CsvSchema> {
        match self {
            DataSource::Csv { classes, groups, .. } => Some(CsvSchema {
                num_classes: *classes,
                num_groups: *groups,
            }),
            DataSource::Synthetic(_) => None,
        }
    }
}

/// Trainer settings of one method, independent of the data dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub label: String,
    pub method: Method,
    pub hidden: Vec<usize>,
    /// Template with a placeholder shape; see [`MethodSpec::trainer_config`].
    template: TrainerConfig,
}

impl MethodSpec {
    pub fn trainer_config(&self, input_dim: usize, classes: usize) -> CliResult<TrainerConfig> {
        let mut sizes = vec![input_dim];
        sizes.extend(&self.hidden);
        sizes.push(classes);
        let mut config = self.template.clone();
        config.shape = Shape::new(sizes)?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub data: DataSource,
    pub scheme: Scheme,
    pub num_clients: usize,
    pub imbalance_period: usize,
    pub folds: usize,
    pub methods: Vec<MethodSpec>,
    pub out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_lines(text: &str) -> CliResult<BTreeMap<String, (usize, String)>> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("line {}: expected 'key = value'", i + 1)))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(usage(format!("line {}: empty key", i + 1)));
        }
        if let Some((first, _)) = entries.insert(key.clone(), (i + 1, value.trim().to_string())) {
            return Err(usage(format!("line {}: duplicate key '{key}' (first set on line {first})", i + 1)));
        }
    }
    Ok(entries)
}

fn parse_value<T: std::str::FromStr>(key: &str, line: usize, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| usage(format!("line {line}: invalid value '{value}' for '{key}'")))
}

fn parse_list(key: &str, line: usize, value: &str) -> CliResult<Vec<usize>> {
    if value.eq_ignore_ascii_case("none") || value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_value(key, line, v.trim())).collect()
}

fn apply_trainer_key(config: &mut TrainerConfig, hidden: &mut Vec<usize>, key: &str, line: usize, value: &str) -> CliResult<()> {
    let name = key.rsplit('.').next().unwrap_or(key);
    match name {
        "rounds" => config.rounds = parse_value(key, line, value)?,
        "model_lr" => config.model_lr = parse_value(key, line, value)?,
        "adversary_lr" => config.adversary_lr = parse_value(key, line, value)?,
        "epsilon" => config.epsilon = parse_value(key, line, value)?,
        "local_epochs" => config.local_epochs = parse_value(key, line, value)?,
        "batch_size" => {
            config.batch_size = if value.eq_ignore_ascii_case("full") {
                None
            } else {
                Some(parse_value(key, line, value)?)
            }
        }
        "q" => config.q = parse_value(key, line, value)?,
        "lipschitz" => config.lipschitz = Some(parse_value(key, line, value)?),
        "hidden" => *hidden = parse_list(key, line, value)?,
        "output" => {
            config.output = Some(match value.to_ascii_lowercase().as_str() {
                "average" => OutputMode::Average,
                "final" => OutputMode::Final,
                _ => return Err(usage(format!("line {line}: output must be 'average' or 'final'"))),
            })
        }
        _ => unreachable!("caller filters trainer keys"),
    }
    Ok(())
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

impl ExperimentSpec {
    /// Reads a spec file; relative data paths resolve against its directory.
    pub fn load(path: &Path, seed_override: Option<u64>) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, seed_override)
    }

    pub fn parse(text: &str, base_dir: &Path, seed_override: Option<u64>) -> CliResult<Self> {
        let entries = parse_lines(text)?;
        let get = |k: &str| entries.get(k).map(|(l, v)| (*l, v.as_str()));
        let required = |k: &str| get(k).ok_or_else(|| usage(format!("missing required key '{k}'")));

        let (line, v) = required("seed")?;
        let spec_seed: u64 = parse_value("seed", line, v)?;
        let seed = seed_override.unwrap_or(spec_seed);

        let data = parse_data(&entries, base_dir)?;

        let scheme: Scheme = match get("scheme") {
            Some((_, v)) => v.parse().map_err(|e: fairfed::Error| usage(e.to_string()))?,
            None => Scheme::Esg,
        };
        let num_clients = match get("clients") {
            Some((l, v)) => parse_value("clients", l, v)?,
            None => 40,
        };
        if num_clients == 0 {
            return Err(usage("clients must be >= 1"));
        }
        let imbalance_period = match get("imbalance_period") {
            Some((l, v)) => parse_value("imbalance_period", l, v)?,
            None => 4,
        };
        if imbalance_period == 0 {
            return Err(usage("imbalance_period must be >= 1"));
        }
        let folds = match get("folds") {
            Some((l, v)) => parse_value("folds", l, v)?,
            None => 0,
        };
        if folds == 1 {
            return Err(usage("folds must be 0 (no cross-validation) or >= 2"));
        }
        let out = get("out").map(|(_, v)| PathBuf::from(v));

        // Shared trainer defaults.
        let mut base = TrainerConfig::new(Shape::new(vec![1, 2])?, seed);
        let mut base_hidden = vec![32, 32];
        for k in TRAINER_KEYS {
            if let Some((l, v)) = get(k) {
                apply_trainer_key(&mut base, &mut base_hidden, k, l, v)?;
            }
        }

        let (line, v) = required("methods")?;
        let mut methods: Vec<MethodSpec> = Vec::new();
        for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (kind, label) = item.split_once(':').unwrap_or((item, item));
            let method: Method = kind.trim().parse().map_err(|e: fairfed::Error| usage(format!("line {line}: {e}")))?;
            let label = label.trim().to_string();
            if !valid_label(&label) {
                return Err(usage(format!("line {line}: label '{label}' must match [a-z0-9_-]+")));
            }
            if methods.iter().any(|m| m.label == label) {
                return Err(usage(format!("line {line}: duplicate method label '{label}'")));
            }
            methods.push(MethodSpec {
                label,
                method,
                hidden: base_hidden.clone(),
                template: base.clone(),
            });
        }
        if methods.is_empty() {
            return Err(usage(format!("line {line}: methods must name at least one method")));
        }

        let labels: BTreeSet<&str> = methods.iter().map(|m| m.label.as_str()).collect();
        let mut overrides = Vec::new();
        for (key, (l, _)) in &entries {
            if TOP_KEYS.contains(&key.as_str()) || TRAINER_KEYS.contains(&key.as_str()) || key.starts_with("data.") {
                continue;
            }
            match key.split_once('.') {
                Some((label, name)) if labels.contains(label) && TRAINER_KEYS.contains(&name) => {
                    overrides.push((label.to_string(), key.clone()));
                }
                Some((label, _)) if labels.contains(label) => {
                    return Err(usage(format!("line {l}: '{key}' is not a trainer setting")));
                }
                _ => return Err(usage(format!("line {l}: unknown key '{key}'"))),
            }
        }
        for (label, key) in overrides {
            let (l, v) = get(&key).expect("key comes from the map");
            let m = methods.iter_mut().find(|m| m.label == label).expect("label was checked");
            apply_trainer_key(&mut m.template, &mut m.hidden, &key, l, v)?;
        }
        for m in &methods {
            m.template
                .validate()
                .map_err(|e| usage(format!("method '{}': {e}", m.label)))?;
            if m.hidden.contains(&0) {
                return Err(usage(format!("method '{}': hidden layer sizes must be >= 1", m.label)));
            }
        }

        Ok(Self {
            seed,
            data,
            scheme,
            num_clients,
            imbalance_period,
            folds,
            methods,
            out,
        })
    }
}

fn parse_data(entries: &BTreeMap<String, (usize, String)>, base_dir: &Path) -> CliResult<DataSource> {
    let get = |k: &str| entries.get(k).map(|(l, v)| (*l, v.as_str()));
    let kind = get("data").map(|(_, v)| v).unwrap_or("synthetic");
    let allowed: &[&str] = match kind {
        "synthetic" => &["data.n", "data.seed", "data.u0l", "data.u0h", "data.u1l", "data.u1h"],
        "csv" => &["data.path", "data.classes", "data.groups"],
        other => return Err(usage(format!("data must be 'synthetic' or 'csv', got '{other}'"))),
    };
    for (key, (l, _)) in entries.range("data.".to_string()..) {
        if !key.starts_with("data.") {
            break;
        }
        if !allowed.contains(&key.as_str()) {
            return Err(usage(format!("line {l}: '{key}' does not apply to {kind} data")));
        }
    }
    if kind == "synthetic" {
        let mut p = SyntheticParams::default();
        let (l, v) = get("data.seed").ok_or_else(|| usage("missing required key 'data.seed'"))?;
        p.seed = parse_value("data.seed", l, v)?;
        if let Some((l, v)) = get("data.n") {
            p.n_samples = parse_value("data.n", l, v)?;
        }
        for (key, field) in [
            ("data.u0l", &mut p.u0_low),
            ("data.u0h", &mut p.u0_high),
            ("data.u1l", &mut p.u1_low),
            ("data.u1h", &mut p.u1_high),
        ] {
            if let Some((l, v)) = get(key) {
                *field = parse_value(key, l, v)?;
            }
        }
        p.validate()?;
        Ok(DataSource::Synthetic(p))
    } else {
        let (_, v) = get("data.path").ok_or_else(|| usage("missing required key 'data.path'"))?;
        let path = PathBuf::from(v);
        let resolved = base_dir.join(&path);
        if !resolved.is_file() {
            return Err(usage(format!("data file {} does not exist", resolved.display())));
        }
        let count = |k: &str| -> CliResult<Option<usize>> { get(k).map(|(l, v)| parse_value(k, l, v)).transpose() };
        Ok(DataSource::Csv {
            path,
            resolved,
            classes: count("data.classes")?,
            groups: count("data.groups")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "seed = 3\ndata.seed = 11\nmethods = fedminmax, qfedavg:q5\nq5.q = 5.0\nrounds = 20\n";

    fn parse(text: &str) -> CliResult<ExperimentSpec> {
        ExperimentSpec::parse(text, Path::new("."), None)
    }

    #[test]
    fn defaults_and_overrides() {
        let spec = parse(BASIC).unwrap();
        assert_eq!(spec.seed, 3);
        assert_eq!(spec.num_clients, 40);
        assert_eq!(spec.scheme, Scheme::Esg);
        assert_eq!(spec.methods.len(), 2);
        let q5 = spec.methods[1].trainer_config(1, 2).unwrap();
        assert_eq!(q5.q, 5.0);
        assert_eq!(q5.rounds, 20);
        assert_eq!(q5.seed, 3);
        assert_eq!(q5.shape.sizes(), &[1, 32, 32, 2]);
        assert_eq!(spec.methods[0].trainer_config(1, 2).unwrap().q, 0.0);
    }

    #[test]
    fn seed_override_wins() {
        let spec = ExperimentSpec::parse(BASIC, Path::new("."), Some(99)).unwrap();
        assert_eq!(spec.seed, 99);
        assert_eq!(spec.methods[0].trainer_config(1, 2).unwrap().seed, 99);
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in [
            "data.seed = 1\nmethods = fedavg\n",                   // no seed
            "seed = 1\nmethods = fedavg\n",                        // no data seed
            "seed = 1\ndata.seed = 1\nmethods = \n",               // empty methods
            "seed = 1\ndata.seed = 1\nmethods = sgd\n",            // unknown method
            "seed = 1\ndata.seed = 1\nmethods = fedavg\nseed = 2\n", // duplicate
            "seed = 1\ndata.seed = 1\nmethods = fedavg\nfoo = 2\n",  // unknown key
            "seed = 1\ndata.seed = 1\nmethods = fedavg\nafl.q = 2\n", // label not declared
            "seed = 1\ndata.seed = 1\nmethods = fedavg\nrounds = 0\n",
            "seed = 1\ndata.seed = 1\ndata.u1h = 1.01\nmethods = fedavg\n",
            "seed = 1\ndata.seed = 1\nmethods = fedavg, fedavg\n",
        ] {
            assert!(matches!(parse(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn comments_and_hidden_none() {
        let spec = parse("# header\nseed = 1 # inline\ndata.seed = 1\nmethods = afl\nhidden = none\n\n").unwrap();
        assert_eq!(spec.methods[0].trainer_config(3, 4).unwrap().shape.sizes(), &[3, 4]);
    }
}
