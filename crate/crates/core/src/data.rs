//! Datasets, the synthetic two-group generator, client partitioning and
//! count bookkeeping.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: usize,
    pub a: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    num_classes: usize,
    num_groups: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, num_classes: usize, num_groups: usize) -> Result<Self> {
        let dim = samples.first().map(|s| s.x.len());
        for (i, s) in samples.iter().enumerate() {
            if s.y >= num_classes {
                return Err(Error::Validation(format!(
                    "sample {i}: class {} >= class count {num_classes}",
                    s.y
                )));
            }
            if s.a >= num_groups {
                return Err(Error::Validation(format!(
                    "sample {i}: group {} >= group count {num_groups}",
                    s.a
                )));
            }
            if Some(s.x.len()) != dim {
                return Err(Error::Validation(format!("sample {i}: inconsistent feature dimension")));
            }
        }
        Ok(Self {
            samples,
            num_classes,
            num_groups,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn feature_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.x.len())
    }

    pub fn group_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_groups];
        for s in &self.samples {
            counts[s.a] += 1;
        }
        counts
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            num_classes: self.num_classes,
            num_groups: self.num_groups,
        }
    }
}

/// Bernoulli rates of the synthetic task: `P(Y = 1 | A = a, X = x)` is
/// `u{a}_low` for `x <= 0` and `u{a}_high` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub u0_low: f64,
    pub u1_low: f64,
    pub u0_high: f64,
    pub u1_high: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            u0_low: 0.3,
            u1_low: 0.1,
            u0_high: 0.6,
            u1_high: 0.9,
            n_samples: 6000,
            seed: 0,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        for (name, u) in [
            ("u0_low", self.u0_low),
            ("u1_low", self.u1_low),
            ("u0_high", self.u0_high),
            ("u1_high", self.u1_high),
        ] {
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::Validation(format!("{name} = {u} is outside [0, 1]")));
            }
        }
        if self.n_samples == 0 {
            return Err(Error::Validation("n_samples must be >= 1".into()));
        }
        Ok(())
    }

    /// `(low, high)` rates for group `a`.
    pub fn rates(&self, a: usize) -> (f64, f64) {
        if a == 0 {
            (self.u0_low, self.u0_high)
        } else {
            (self.u1_low, self.u1_high)
        }
    }
}

pub fn generate_synthetic(params: &SyntheticParams) -> Result<Dataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let samples = (0..params.n_samples)
        .map(|_| {
            let a = usize::from(rng.random_bool(0.5));
            let x: f64 = rng.sample(StandardNormal);
            let (low, high) = params.rates(a);
            let rate = if x <= 0.0 { low } else { high };
            let y = usize::from(rng.random::<f64>() < rate);
            Sample { x: vec![x], y, a }
        })
        .collect();
    Dataset::new(samples, 2, 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Every client gets an equal share of every group.
    Esg,
    /// Each client holds exactly one group.
    Ssg,
    /// Blocks of clients each hold a disjoint subset of groups.
    Psg,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "esg" => Ok(Scheme::Esg),
            "ssg" => Ok(Scheme::Ssg),
            "psg" => Ok(Scheme::Psg),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

/// A block of consecutive clients sharing one subset of groups under PSG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientBlock {
    pub clients: usize,
    pub groups: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionOptions {
    pub scheme: Scheme,
    pub num_clients: usize,
    pub seed: u64,
    /// Client `k` receives a share proportional to `1 + k % imbalance_period`
    /// of each group it holds under SSG/PSG. `1` gives equal shares.
    pub imbalance_period: usize,
    /// PSG layout; defaults to two halves of the clients over two halves of the groups.
    pub psg_blocks: Option<Vec<ClientBlock>>,
}

impl PartitionOptions {
    pub fn new(scheme: Scheme, num_clients: usize, seed: u64) -> Self {
        Self {
            scheme,
            num_clients,
            seed,
            imbalance_period: 4,
            psg_blocks: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    clients: Vec<Dataset>,
    num_groups: usize,
    num_classes: usize,
}

impl Partition {
    pub fn from_clients(clients: Vec<Dataset>) -> Result<Self> {
        let first = clients
            .first()
            .ok_or_else(|| Error::SchemeInfeasible("a partition needs at least one client".into()))?;
        let (num_groups, num_classes) = (first.num_groups, first.num_classes);
        for (k, c) in clients.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::EmptyClient(k));
            }
            if c.num_groups != num_groups || c.num_classes != num_classes {
                return Err(Error::Validation(format!("client {k} has a different schema")));
            }
        }
        Ok(Self {
            clients,
            num_groups,
            num_classes,
        })
    }

    /// Sample `i` goes to client `assignment[i]`.
    pub fn from_assignment(dataset: &Dataset, assignment: &[usize], num_clients: usize) -> Result<Self> {
        if assignment.len() != dataset.len() {
            return Err(Error::Validation("assignment length differs from dataset".into()));
        }
        let mut buckets = vec![Vec::new(); num_clients];
        for (i, &k) in assignment.iter().enumerate() {
            buckets
                .get_mut(k)
                .ok_or_else(|| Error::Validation(format!("client {k} out of range")))?
                .push(i);
        }
        Self::from_clients(buckets.iter().map(|idx| dataset.select(idx)).collect())
    }

    pub fn single(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Self::from_clients(vec![dataset.clone()])
    }

    pub fn clients(&self) -> &[Dataset] {
        &self.clients
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// All clients concatenated in client order.
    pub fn pooled(&self) -> Dataset {
        Dataset {
            samples: self.clients.iter().flat_map(|c| c.samples.iter().cloned()).collect(),
            num_classes: self.num_classes,
            num_groups: self.num_groups,
        }
    }
}

/// Splits `n` items into parts proportional to `weights` (largest remainder,
/// ties to the lower index).
fn proportional_sizes(n: usize, weights: &[usize]) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    let mut sizes: Vec<usize> = weights.iter().map(|&w| n * w / total).collect();
    let mut rem: Vec<(usize, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| ((n * w) % total, i))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let missing = n - sizes.iter().sum::<usize>();
    for &(_, i) in rem.iter().take(missing) {
        sizes[i] += 1;
    }
    sizes
}

pub fn partition(dataset: &Dataset, opts: &PartitionOptions) -> Result<Partition> {
    let k_total = opts.num_clients;
    let g_total = dataset.num_groups();
    if k_total == 0 {
        return Err(Error::SchemeInfeasible("num_clients must be >= 1".into()));
    }
    if opts.imbalance_period == 0 {
        return Err(Error::InvalidConfig("imbalance_period must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut by_group: Vec<Vec<usize>> = vec![Vec::new(); g_total];
    for (i, s) in dataset.samples().iter().enumerate() {
        by_group[s.a].push(i);
    }
    for idx in &mut by_group {
        idx.shuffle(&mut rng);
    }

    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); k_total];
    let spread = |buckets: &mut Vec<Vec<usize>>, idx: &[usize], clients: std::ops::Range<usize>| {
        let weights: Vec<usize> = clients.clone().map(|k| 1 + k % opts.imbalance_period).collect();
        let mut start = 0;
        for (k, size) in clients.zip(proportional_sizes(idx.len(), &weights)) {
            buckets[k].extend_from_slice(&idx[start..start + size]);
            start += size;
        }
    };

    match opts.scheme {
        Scheme::Esg => {
            for idx in &by_group {
                for (j, &i) in idx.iter().enumerate() {
                    buckets[j % k_total].push(i);
                }
            }
        }
        Scheme::Ssg => {
            if k_total % g_total != 0 {
                return Err(Error::SchemeInfeasible(format!(
                    "SSG needs num_clients ({k_total}) divisible by the group count ({g_total})"
                )));
            }
            let per = k_total / g_total;
            for (a, idx) in by_group.iter().enumerate() {
                spread(&mut buckets, idx, a * per..(a + 1) * per);
            }
        }
        Scheme::Psg => {
            if g_total <= 2 {
                return Err(Error::SchemeInfeasible(
                    "PSG needs more than two groups; with two groups it coincides with SSG".into(),
                ));
            }
            let blocks = match &opts.psg_blocks {
                Some(b) => b.clone(),
                None => {
                    if k_total < 2 {
                        return Err(Error::SchemeInfeasible("PSG needs at least two clients".into()));
                    }
                    let half = g_total / 2;
                    vec![
                        ClientBlock {
                            clients: k_total / 2,
                            groups: (0..half).collect(),
                        },
                        ClientBlock {
                            clients: k_total - k_total / 2,
                            groups: (half..g_total).collect(),
                        },
                    ]
                }
            };
            validate_blocks(&blocks, k_total, g_total)?;
            let mut first = 0;
            for block in &blocks {
                for &a in &block.groups {
                    spread(&mut buckets, &by_group[a], first..first + block.clients);
                }
                first += block.clients;
            }
        }
    }
    Partition::from_clients(buckets.iter().map(|idx| dataset.select(idx)).collect())
}

fn validate_blocks(blocks: &[ClientBlock], k_total: usize, g_total: usize) -> Result<()> {
    if blocks.len() < 2 {
        return Err(Error::SchemeInfeasible("PSG needs at least two client blocks".into()));
    }
    if blocks.iter().map(|b| b.clients).sum::<usize>() != k_total {
        return Err(Error::SchemeInfeasible(format!(
            "PSG block client counts must sum to {k_total}"
        )));
    }
    let mut seen = vec![false; g_total];
    for b in blocks {
        if b.clients == 0 || b.groups.is_empty() {
            return Err(Error::SchemeInfeasible("PSG blocks must be nonempty".into()));
        }
        for &a in &b.groups {
            if a >= g_total || std::mem::replace(&mut seen[a], true) {
                return Err(Error::SchemeInfeasible(format!(
                    "PSG group {a} is out of range or assigned to two blocks"
                )));
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::SchemeInfeasible("PSG blocks must cover every group".into()));
    }
    Ok(())
}

/// Sample counts `n`, `n_k`, `n_a`, `n_{a,k}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub n: usize,
    pub per_client: Vec<usize>,
    pub per_group: Vec<usize>,
    /// `[group][client]`
    pub per_group_client: Vec<Vec<usize>>,
}

impl CountTable {
    pub fn n_ak(&self, a: usize, k: usize) -> usize {
        self.per_group_client[a][k]
    }

    /// Empirical group fractions `n_a / n`.
    pub fn group_priors(&self) -> Vec<f64> {
        self.per_group.iter().map(|&c| c as f64 / self.n as f64).collect()
    }
}

pub fn count_table(partition: &Partition) -> CountTable {
    let g = partition.num_groups();
    let k = partition.num_clients();
    let mut per_group_client = vec![vec![0; k]; g];
    for (ki, c) in partition.clients().iter().enumerate() {
        for s in c.samples() {
            per_group_client[s.a][ki] += 1;
        }
    }
    let per_client: Vec<usize> = partition.clients().iter().map(Dataset::len).collect();
    let per_group: Vec<usize> = per_group_client.iter().map(|row| row.iter().sum()).collect();
    CountTable {
        n: per_client.iter().sum(),
        per_client,
        per_group,
        per_group_client,
    }
}

/// Matrix of per-client group priors `n_{a,k} / n_k`, indexed `[group][client]`.
pub fn client_group_priors(partition: &Partition) -> Result<Vec<Vec<f64>>> {
    let counts = count_table(partition);
    if let Some(k) = counts.per_client.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClient(k));
    }
    Ok(counts
        .per_group_client
        .iter()
        .map(|row| {
            row.iter()
                .zip(&counts.per_client)
                .map(|(&nak, &nk)| nak as f64 / nk as f64)
                .collect()
        })
        .collect())
}

/// Optional declared counts checked while loading a CSV file; missing ones are
/// inferred as `max + 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CsvSchema {
    pub num_classes: Option<usize>,
    pub num_groups: Option<usize>,
}

/// Reads `x0,...,xd,y,a` rows.
pub fn load_csv(path: &Path, schema: CsvSchema) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, schema)
}

pub fn parse_csv(text: &str, schema: CsvSchema) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::EmptyDataset)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let dim = cols.len().saturating_sub(2);
    let header_ok = cols.len() >= 3
        && cols[dim] == "y"
        && cols[dim + 1] == "a"
        && cols[..dim].iter().enumerate().all(|(i, c)| *c == format!("x{i}"));
    if !header_ok {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header x0,...,x{{d}},y,a, got '{header}'"),
        });
    }

    let mut samples = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        let parse_err = |msg: String| Error::Parse { line: line_no, msg };
        let x = fields[..dim]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("bad feature value '{f}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let y = fields[dim]
            .parse::<usize>()
            .map_err(|_| parse_err(format!("bad class '{}'", fields[dim])))?;
        let a = fields[dim + 1]
            .parse::<usize>()
            .map_err(|_| parse_err(format!("bad group '{}'", fields[dim + 1])))?;
        samples.push(Sample { x, y, a });
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let num_classes = schema
        .num_classes
        .unwrap_or_else(|| samples.iter().map(|s| s.y).max().unwrap() + 1)
        .max(2);
    let num_groups = schema
        .num_groups
        .unwrap_or_else(|| samples.iter().map(|s| s.a).max().unwrap() + 1);
    Dataset::new(samples, num_classes, num_groups)
}

pub fn write_csv<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let dim = dataset.feature_dim();
    let header: Vec<String> = (0..dim).map(|i| format!("x{i}")).chain(["y".into(), "a".into()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for s in dataset.samples() {
        for v in &s.x {
            write!(out, "{v:.16e},")?;
        }
        writeln!(out, "{},{}", s.y, s.a)?;
    }
    Ok(())
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_csv(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}
