//! Synthetic sparse-recovery data, LIBSVM ingestion, polynomial features and splits.

use std::fmt;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseKind {
    Gaussian,
    Laplace,
    Uniform,
}

impl NoiseKind {
    pub fn label(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gn",
            NoiseKind::Laplace => "ln",
            NoiseKind::Uniform => "un",
        }
    }

    fn sample<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            NoiseKind::Gaussian => StandardNormal.sample(rng),
            NoiseKind::Laplace => {
                let a: f64 = Exp1.sample(rng);
                let b: f64 = Exp1.sample(rng);
                a - b
            }
            NoiseKind::Uniform => Uniform::new(-1.0, 1.0).expect("valid range").sample(rng),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gn" | "gaussian" => Ok(NoiseKind::Gaussian),
            "ln" | "laplace" => Ok(NoiseKind::Laplace),
            "un" | "uniform" => Ok(NoiseKind::Uniform),
            _ => Err(invalid(format!("unknown noise kind {s:?} (expected gn, ln or un)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub m_train: usize,
    pub m_val: usize,
    pub m_test: usize,
    pub k: usize,
    pub noise_kind: NoiseKind,
    pub noise_level: f64,
    /// Planted magnitudes are `2^v` with `v` uniform on this interval.
    pub value_exponent_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 500,
            m_train: 200,
            m_val: 20,
            m_test: 100,
            k: 5,
            noise_kind: NoiseKind::Gaussian,
            noise_level: 1e-3,
            value_exponent_range: (0.0, 3.0),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m_train == 0 || self.m_val == 0 || self.m_test == 0 {
            return Err(invalid("feature and sample counts must be >= 1"));
        }
        if self.k > self.n {
            return Err(invalid(format!("sparsity k={} exceeds n={}", self.k, self.n)));
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return Err(invalid(format!("noise level must be >= 0, got {}", self.noise_level)));
        }
        let (lo, hi) = self.value_exponent_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(invalid(format!("bad exponent range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// One design matrix and its targets.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
}

impl DataSplit {
    pub fn n_samples(&self) -> usize {
        self.a.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: DataSplit,
    pub val: DataSplit,
    pub test: DataSplit,
    pub ground_truth: Option<Array1<f64>>,
}

impl SplitDataset {
    pub fn n_features(&self) -> usize {
        self.train.a.ncols()
    }

    /// SHA-256 of the serialized splits, as lowercase hex.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for split in [&self.train, &self.val, &self.test] {
            h.update(split_csv(split).as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Draws a Gaussian design with unit-norm columns, a `k`-sparse signal and noisy targets.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SplitDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = cfg.m_train + cfg.m_val + cfg.m_test;
    let mut a = Array2::<f64>::from_shape_simple_fn((m, cfg.n), || StandardNormal.sample(&mut rng));
    for mut col in a.axis_iter_mut(Axis(1)) {
        let norm = col.dot(&col).sqrt();
        col /= norm;
    }
    let mut truth = Array1::zeros(cfg.n);
    let (lo, hi) = cfg.value_exponent_range;
    for i in index::sample(&mut rng, cfg.n, cfg.k) {
        let v = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        truth[i] = sign * 2f64.powf(v);
    }
    let mut b = a.dot(&truth);
    if cfg.noise_level > 0.0 {
        for bi in b.iter_mut() {
            *bi += cfg.noise_level * cfg.noise_kind.sample(&mut rng);
        }
    }
    let cut = |lo: usize, hi: usize| DataSplit { a: a.slice(s![lo..hi, ..]).to_owned(), b: b.slice(s![lo..hi]).to_owned() };
    let (t, v) = (cfg.m_train, cfg.m_train + cfg.m_val);
    Ok(SplitDataset { train: cut(0, t), val: cut(t, v), test: cut(v, m), ground_truth: Some(truth) })
}

/// Rows of `(1-based index, value)` pairs plus labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LibsvmData {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub labels: Vec<f64>,
}

impl LibsvmData {
    pub fn max_index(&self) -> usize {
        self.rows.iter().filter_map(|r| r.last().map(|p| p.0)).max().unwrap_or(0)
    }

    /// Dense matrix with `n_features` columns (at least the largest index seen).
    pub fn to_dense(&self, n_features: Option<usize>) -> Result<(Array2<f64>, Array1<f64>)> {
        let width = n_features.unwrap_or(0).max(self.max_index());
        if let Some(n) = n_features {
            if self.max_index() > n {
                return Err(invalid(format!("feature index {} exceeds requested width {n}", self.max_index())));
            }
        }
        let mut x = Array2::zeros((self.rows.len(), width));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                x[[i, j - 1]] = v;
            }
        }
        Ok((x, Array1::from(self.labels.clone())))
    }
}

/// Parses `<label> <index>:<value> ...` lines. Blank lines and `#` comments are skipped.
pub fn libsvm_parse(reader: impl BufRead) -> Result<LibsvmData> {
    let mut out = LibsvmData::default();
    for (ln, line) in reader.lines().enumerate() {
        let line_no = ln + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: line_no, msg };
        let mut toks = content.split_whitespace();
        let label_tok = toks.next().expect("non-empty line has a token");
        let label: f64 = label_tok.parse().map_err(|_| perr(format!("bad label {label_tok:?}")))?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in toks {
            let (i, v) = tok.split_once(':').ok_or_else(|| perr(format!("malformed token {tok:?}")))?;
            let idx: usize = i.parse().map_err(|_| perr(format!("bad index {i:?}")))?;
            let val: f64 = v.parse().map_err(|_| perr(format!("bad value {v:?}")))?;
            if idx == 0 || idx <= last {
                return Err(perr(format!("index {idx} not strictly increasing (1-based)")));
            }
            if !val.is_finite() {
                return Err(perr(format!("non-finite value {v:?}")));
            }
            last = idx;
            row.push((idx, val));
        }
        out.rows.push(row);
        out.labels.push(label);
    }
    Ok(out)
}

/// Serializes in LIBSVM format using shortest round-trip float text.
pub fn libsvm_write(data: &LibsvmData) -> String {
    let mut s = String::new();
    for (row, label) in data.rows.iter().zip(&data.labels) {
        s.push_str(&label.to_string());
        for (i, v) in row {
            s.push_str(&format!(" {i}:{v}"));
        }
        s.push('\n');
    }
    s
}

/// Output width of a full polynomial expansion: `Σ_{k=0..degree} C(d + k − 1, k)`.
pub fn poly_width(d: usize, degree: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut term: u128 = 1;
    for k in 0..=degree {
        if k > 0 {
            // C(d+k-1, k) = C(d+k-2, k-1)·(d+k-1)/k
            term = term * (d + k - 1) as u128 / k as u128;
        }
        total = total.checked_add(usize::try_from(term).ok()?)?;
    }
    Some(total)
}

pub const DEFAULT_WIDTH_CAP: usize = 1 << 20;

/// Constant, then all monomials of total degree 1..=`degree` in lexicographic index order.
pub fn poly_expand(x: ArrayView2<f64>, degree: usize) -> Result<Array2<f64>> {
    poly_expand_capped(x, degree, DEFAULT_WIDTH_CAP)
}

pub fn poly_expand_capped(x: ArrayView2<f64>, degree: usize, cap: usize) -> Result<Array2<f64>> {
    let d = x.ncols();
    let width = poly_width(d, degree).filter(|w| *w <= cap).ok_or_else(|| {
        Error::Capacity(format!("degree-{degree} expansion of {d} features exceeds {cap} columns"))
    })?;
    let monomials = monomial_indices(d, degree);
    debug_assert_eq!(monomials.len(), width);
    let mut out = Array2::zeros((x.nrows(), width));
    for (i, row) in x.outer_iter().enumerate() {
        for (c, mono) in monomials.iter().enumerate() {
            out[[i, c]] = mono.iter().map(|&j| row[j]).product();
        }
    }
    Ok(out)
}

fn monomial_indices(d: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for j in start..d {
            cur.push(j);
            rec(d, j, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for k in 0..=degree {
        rec(d, 0, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Seeded row permutation followed by a contiguous train/val/test split.
///
/// Validation and test sizes are `round(fraction·m)`; train takes the rest.
pub fn split_random(x: ArrayView2<f64>, y: ArrayView1<f64>, fractions: [f64; 3], seed: u64) -> Result<SplitDataset> {
    let m = x.nrows();
    if y.len() != m {
        return Err(Error::DimensionMismatch(format!("{} targets for {m} rows", y.len())));
    }
    if fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("split fractions must be >= 0 and sum to 1, got {fractions:?}")));
    }
    let n_val = (fractions[1] * m as f64).round() as usize;
    let n_test = (fractions[2] * m as f64).round() as usize;
    let n_train = m.saturating_sub(n_val + n_test);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(invalid(format!("split {n_train}/{n_val}/{n_test} of {m} rows has an empty part")));
    }
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |rows: &[usize]| DataSplit { a: x.select(Axis(0), rows), b: y.select(Axis(0), rows) };
    Ok(SplitDataset {
        train: take(&perm[..n_train]),
        val: take(&perm[n_train..n_train + n_val]),
        test: take(&perm[n_train + n_val..]),
        ground_truth: None,
    })
}

/// Fractions that reproduce the given row counts exactly.
pub fn fractions_from_counts(counts: [usize; 3]) -> Result<[f64; 3]> {
    let m: usize = counts.iter().sum();
    if m == 0 {
        return Err(invalid("split counts are all zero"));
    }
    Ok(counts.map(|c| c as f64 / m as f64))
}

/// Parses a LIBSVM file, expands it and splits it.
pub fn load_libsvm_experiment(
    path: &Path,
    n_base_features: Option<usize>,
    degree: usize,
    counts: [usize; 3],
    seed: u64,
) -> Result<SplitDataset> {
    let file = fs::File::open(path)?;
    let parsed = libsvm_parse(std::io::BufReader::new(file))?;
    let (x, y) = parsed.to_dense(n_base_features)?;
    let total: usize = counts.iter().sum();
    if total != x.nrows() {
        return Err(invalid(format!("split counts sum to {total} but the file has {} rows", x.nrows())));
    }
    let xp = if degree > 1 { poly_expand(x.view(), degree)? } else { x };
    split_random(xp.view(), y.view(), fractions_from_counts(counts)?, seed)
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn split_csv(split: &DataSplit) -> String {
    let mut s = String::new();
    for (row, t) in split.a.outer_iter().zip(&split.b) {
        for v in row {
            s.push_str(&fmt_real(*v));
            s.push(',');
        }
        s.push_str(&fmt_real(*t));
        s.push('\n');
    }
    s
}

fn read_split(path: &Path) -> Result<DataSplit> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad number {t:?}") }))
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    let width = rows.first().map_or(0, |r| r.len());
    if width == 0 || rows.iter().any(|r| r.len() != width) {
        return Err(invalid(format!("{} has ragged or empty rows", path.display())));
    }
    let m = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let full = Array2::from_shape_vec((m, width), flat).expect("shape checked");
    Ok(DataSplit { a: full.slice(s![.., ..width - 1]).to_owned(), b: full.column(width - 1).to_owned() })
}

/// Writes `train.csv`, `val.csv`, `test.csv`, optional `truth.csv` and `meta.json`.
pub fn save_dataset(dir: &Path, ds: &SplitDataset, meta: &serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, split) in [("train.csv", &ds.train), ("val.csv", &ds.val), ("test.csv", &ds.test)] {
        fs::write(dir.join(name), split_csv(split))?;
    }
    if let Some(t) = &ds.ground_truth {
        let text: String = t.iter().map(|v| fmt_real(*v) + "\n").collect();
        fs::write(dir.join("truth.csv"), text)?;
    }
    let mut f = fs::File::create(dir.join("meta.json"))?;
    serde_json::to_writer_pretty(&mut f, meta)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<SplitDataset> {
    let train = read_split(&dir.join("train.csv"))?;
    let val = read_split(&dir.join("val.csv"))?;
    let test = read_split(&dir.join("test.csv"))?;
    if val.a.ncols() != train.a.ncols() || test.a.ncols() != train.a.ncols() {
        return Err(invalid("splits disagree on the feature count"));
    }
    let truth_path = dir.join("truth.csv");
    let ground_truth = if truth_path.exists() {
        let text = fs::read_to_string(truth_path)?;
        let vals = text
            .lines()
            .enumerate()
            .map(|(i, l)| l.trim().parse::<f64>().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad number {l:?}") }))
            .collect::<Result<Vec<_>>>()?;
        Some(Array1::from(vals))
    } else {
        None
    };
    Ok(SplitDataset { train, val, test, ground_truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn small(seed: u64, noise: NoiseKind, level: f64) -> SynthConfig {
        SynthConfig { n: 40, m_train: 20, m_val: 5, m_test: 7, k: 4, noise_kind: noise, noise_level: level, seed, ..SynthConfig::default() }
    }

    #[test]
    fn noiseless_targets_are_exact() {
        let ds = synth_generate(&small(1, NoiseKind::Gaussian, 0.0)).unwrap();
        let t = ds.ground_truth.as_ref().unwrap();
        assert_eq!(ds.train.b, ds.train.a.dot(t));
        assert_eq!(ds.test.b, ds.test.a.dot(t));
    }

    #[test]
    fn columns_are_unit_norm_before_split() {
        let ds = synth_generate(&small(2, NoiseKind::Laplace, 1e-3)).unwrap();
        let full = ndarray::concatenate(Axis(0), &[ds.train.a.view(), ds.val.a.view(), ds.test.a.view()]).unwrap();
        for col in full.axis_iter(Axis(1)) {
            assert!((col.dot(&col).sqrt() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn default_shapes() {
        let ds = synth_generate(&SynthConfig::default()).unwrap();
        assert_eq!(ds.train.a.dim(), (200, 500));
        assert_eq!(ds.val.a.dim(), (20, 500));
        assert_eq!(ds.test.a.dim(), (100, 500));
    }

    #[test]
    fn noise_sample_statistics() {
        // Sample standard deviations over 1e5 draws against the unit-variance scaling of each family:
        // N(0,1) has sd 1, Laplace(0,1) has sd √2, U(−1,1) has sd 1/√3.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (kind, sd) in [(NoiseKind::Gaussian, 1.0), (NoiseKind::Laplace, 2f64.sqrt()), (NoiseKind::Uniform, 1.0 / 3f64.sqrt())] {
            let level = 1e-3;
            let draws: Vec<f64> = (0..100_000).map(|_| level * kind.sample(&mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
            assert!((var.sqrt() / (level * sd) - 1.0).abs() <= 0.02, "{kind}: {}", var.sqrt());
        }
    }

    #[test]
    fn rejects_k_above_n() {
        let cfg = SynthConfig { k: 41, ..small(0, NoiseKind::Gaussian, 0.0) };
        assert!(synth_generate(&cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn planted_signal_shape(seed in 0u64..1000, k in 1usize..40) {
            let cfg = SynthConfig { k, ..small(seed, NoiseKind::Uniform, 1e-3) };
            let t = synth_generate(&cfg).unwrap().ground_truth.unwrap();
            prop_assert_eq!(t.iter().filter(|v| **v != 0.0).count(), k);
            prop_assert!(t.iter().filter(|v| **v != 0.0).all(|v| v.abs() >= 1.0 && v.abs() <= 8.0));
        }

        #[test]
        fn generation_is_reproducible(seed in 0u64..1000) {
            let cfg = small(seed, NoiseKind::Laplace, 1e-2);
            prop_assert_eq!(synth_generate(&cfg).unwrap(), synth_generate(&cfg).unwrap());
        }

        #[test]
        fn poly_width_closed_form(d in 0usize..=20) {
            let x = Array2::from_shape_fn((1, d), |(_, j)| j as f64 + 1.0);
            let binom = |n: usize, k: usize| -> usize { (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128) as usize };
            let want = 1 + d + binom(d + 1, 2) + binom(d + 2, 3);
            prop_assert_eq!(poly_expand(x.view(), 3).unwrap().ncols(), want);
            prop_assert_eq!(poly_width(d, 3), Some(want));
        }

        #[test]
        fn libsvm_round_trip(rows in prop::collection::vec(prop::collection::btree_map(1usize..50, -1e6f64..1e6, 0..8), 1..10),
                             labels in prop::collection::vec(-1e3f64..1e3, 10)) {
            let data = LibsvmData {
                rows: rows.into_iter().map(|m| m.into_iter().collect()).collect::<Vec<Vec<_>>>(),
                labels: labels.clone(),
            };
            let data = LibsvmData { labels: labels[..data.rows.len()].to_vec(), ..data };
            let back = libsvm_parse(libsvm_write(&data).as_bytes()).unwrap();
            prop_assert_eq!(back, data);
        }
    }

    #[test]
    fn libsvm_examples() {
        let d = libsvm_parse("1.0 1:2.5 3:-1\n".as_bytes()).unwrap();
        assert_eq!(d.rows, vec![vec![(1, 2.5), (3, -1.0)]]);
        assert_eq!(d.labels, vec![1.0]);
        let (x, y) = d.to_dense(None).unwrap();
        assert_eq!(x, array![[2.5, 0.0, -1.0]]);
        assert_eq!(y, array![1.0]);
        let d = libsvm_parse("0.5\n".as_bytes()).unwrap();
        assert_eq!(d.rows, vec![vec![]]);
        assert_eq!(d.to_dense(Some(3)).unwrap().0, array![[0.0, 0.0, 0.0]]);
    }

    #[test]
    fn libsvm_errors_carry_line_numbers() {
        let cases = ["1 1:2\n2 2:x\n", "1 1:2\n\n3 3:1 2:1\n", "1 1:2\nfoo 1:1\n", "1 0:1\n", "1 1-2\n"];
        let lines = [2, 3, 2, 1, 1];
        for (text, want) in cases.iter().zip(lines) {
            match libsvm_parse(text.as_bytes()) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn poly_examples() {
        assert_eq!(poly_width(14, 3), Some(680));
        assert_eq!(poly_expand(array![[2.0]].view(), 3).unwrap(), array![[1.0, 2.0, 4.0, 8.0]]);
        // Brute-force enumeration of exponent vectors (a, b) with a + b ≤ 3 for d = 2.
        let mut monos = BTreeSet::new();
        for a in 0..=3 {
            for b in 0..=3 - a {
                monos.insert((a, b));
            }
        }
        assert_eq!(monos.len(), 10);
        let x = array![[3.0, 5.0]];
        let e = poly_expand(x.view(), 3).unwrap();
        assert_eq!(e.ncols(), 10);
        let mut got: Vec<f64> = e.row(0).to_vec();
        let mut want: Vec<f64> = monos.iter().map(|&(a, b)| 3f64.powi(a) * 5f64.powi(b)).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        assert_eq!(got, want);
        assert_eq!(e.row(0).iter().filter(|v| **v == 15.0).count(), 1);
        assert_eq!(e.row(0).to_vec(), vec![1.0, 3.0, 5.0, 9.0, 15.0, 25.0, 27.0, 45.0, 75.0, 125.0]);
    }

    #[test]
    fn poly_capacity_error() {
        let x = Array2::<f64>::zeros((1, 100));
        assert!(matches!(poly_expand_capped(x.view(), 3, 1000), Err(Error::Capacity(_))));
    }

    #[test]
    fn split_examples() {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| (i * 2 + j) as f64);
        let y = Array1::from_shape_fn(30, |i| i as f64);
        assert!(split_random(x.view(), y.view(), [1.0, 0.0, 0.0], 0).is_err());
        let a = split_random(x.view(), y.view(), [0.6, 0.2, 0.2], 7).unwrap();
        let b = split_random(x.view(), y.view(), [0.6, 0.2, 0.2], 7).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.n_samples(), a.val.n_samples(), a.test.n_samples()), (18, 6, 6));
        let mut seen: Vec<f64> = a.train.b.iter().chain(&a.val.b).chain(&a.test.b).copied().collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, y.to_vec());
        for split in [&a.train, &a.val, &a.test] {
            for (row, t) in split.a.outer_iter().zip(&split.b) {
                assert_eq!(row[0], 2.0 * t);
            }
        }
    }

    #[test]
    fn bodyfat_sized_split_counts() {
        let f = fractions_from_counts([200, 26, 26]).unwrap();
        let x = Array2::<f64>::zeros((252, 1));
        let y = Array1::<f64>::zeros(252);
        let s = split_random(x.view(), y.view(), f, 1).unwrap();
        assert_eq!((s.train.n_samples(), s.val.n_samples(), s.test.n_samples()), (200, 26, 26));
    }

    #[test]
    fn dataset_round_trip() {
        let ds = synth_generate(&small(5, NoiseKind::Gaussian, 1e-3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &ds, &serde_json::json!({"seed": 5})).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.fingerprint(), ds.fingerprint());
    }
}
