//! Data model for objects, partial maps, map graphs and the linear
//! objective.
//!
//! Objects are indexed `0..n` internally; all file formats and log output
//! use 1-based indices. A pair always means an unordered pair `(i, j)` with
//! `i < j`; the transposed block `X(j, i) = X(i, j)^T` is exposed through
//! accessors and never stored twice.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polytope_lab::UniverseLabeling;

/// Box tolerance for `[0, 1]` membership of fractional solution entries.
pub const ENTRY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("object count must be at least 2, got {0}")]
    TooFewObjects(usize),
    #[error("object {0} has size 0; every object needs at least one element")]
    EmptyObject(usize),
    #[error("total element count overflows")]
    SizeOverflow,
    #[error("entry ({row},{col}) = {value} is not binary")]
    NonBinaryEntry { row: usize, col: usize, value: f64 },
    #[error("block for pair ({i},{j}) has shape {rows}x{cols}, expected {want_rows}x{want_cols}")]
    ShapeMismatch {
        i: usize,
        j: usize,
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("pair ({i},{j}) is out of range or not ordered (n = {n})")]
    BadPair { i: usize, j: usize, n: usize },
    #[error("block for pair ({i},{j}) violates the partial-map condition: {violation}")]
    NotPartialMap {
        i: usize,
        j: usize,
        violation: MapViolation,
    },
    #[error("ground truth labeling invalid: {0}")]
    BadLabeling(String),
    #[error("solution entry ({t},{q}) of pair ({i},{j}) = {value} outside [0,1] box")]
    EntryOutOfBox {
        i: usize,
        j: usize,
        t: usize,
        q: usize,
        value: f64,
    },
    #[error("instance file field `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// First witness of a row/column-sum violation in a would-be partial map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapViolation {
    /// 0-based row whose sum exceeds one.
    RowSum(usize),
    /// 0-based column whose sum exceeds one.
    ColSum(usize),
}

impl fmt::Display for MapViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapViolation::RowSum(r) => write!(f, "row {} sums to more than 1", r + 1),
            MapViolation::ColSum(c) => write!(f, "column {} sums to more than 1", c + 1),
        }
    }
}

/// Object count and per-object element counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectConfig {
    sizes: Vec<usize>,
}

impl ObjectConfig {
    pub fn new(sizes: Vec<usize>) -> Result<Self, InstanceError> {
        if sizes.len() < 2 {
            return Err(InstanceError::TooFewObjects(sizes.len()));
        }
        if let Some(i) = sizes.iter().position(|&d| d == 0) {
            return Err(InstanceError::EmptyObject(i + 1));
        }
        let mut total = 0usize;
        for &d in &sizes {
            total = total.checked_add(d).ok_or(InstanceError::SizeOverflow)?;
        }
        Ok(ObjectConfig { sizes })
    }

    pub fn uniform(n: usize, d: usize) -> Result<Self, InstanceError> {
        Self::new(vec![d; n])
    }

    pub fn n(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Total element count over all objects.
    pub fn total_elements(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn max_size(&self) -> usize {
        *self.sizes.iter().max().expect("nonempty")
    }

    /// True when every object has the same number of elements.
    pub fn is_uniform(&self) -> bool {
        self.sizes.windows(2).all(|w| w[0] == w[1])
    }

    /// All unordered pairs `(i, j)`, `i < j`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
    }

    /// All ordered triples `(i, j, k)`, `i < j < k`, in lexicographic order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| {
            (i + 1..n).flat_map(move |j| (j + 1..n).map(move |k| (i, j, k)))
        })
    }

    /// Position of pair `(i, j)` in lexicographic pair order.
    pub fn pair_id(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n());
        let n = self.n();
        // pairs (0,1)..(0,n-1), (1,2)..: offset of row i is i*n - i(i+3)/2 - ... derived below
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn pair_count(&self) -> usize {
        let n = self.n();
        n * (n - 1) / 2
    }
}

/// Dense real matrix block for one object pair, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl BlockMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BlockMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for t in 0..d {
            m.set(t, t, 1.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        BlockMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Permutation matrix with `m[t][perm[t]] = 1`.
    pub fn from_permutation(perm: &[usize]) -> Self {
        let d = perm.len();
        let mut m = Self::zeros(d, d);
        for (t, &q) in perm.iter().enumerate() {
            m.set(t, q, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Largest distance from any entry to its nearest integer in `{0, 1}`.
    pub fn binary_deviation(&self) -> f64 {
        self.data
            .iter()
            .map(|&v| (v - v.round().clamp(0.0, 1.0)).abs())
            .fold(0.0, f64::max)
    }

    pub fn rounded(&self) -> BlockMatrix {
        BlockMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|&v| v.round().clamp(0.0, 1.0))
                .collect(),
        }
    }

    pub fn transposed(&self) -> BlockMatrix {
        let mut t = BlockMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    fn row_sum(&self, r: usize) -> f64 {
        (0..self.cols).map(|c| self.get(r, c)).sum()
    }

    fn col_sum(&self, c: usize) -> f64 {
        (0..self.rows).map(|r| self.get(r, c)).sum()
    }
}

/// Checks the partial-map condition: every row and column of a binary block
/// sums to at most one. Returns the first violating row or column.
pub fn validate_partial_map(m: &BlockMatrix) -> Result<Result<(), MapViolation>, InstanceError> {
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let v = m.get(r, c);
            if v != 0.0 && v != 1.0 {
                return Err(InstanceError::NonBinaryEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
    }
    for r in 0..m.rows() {
        if m.row_sum(r) > 1.0 {
            return Ok(Err(MapViolation::RowSum(r)));
        }
    }
    for c in 0..m.cols() {
        if m.col_sum(c) > 1.0 {
            return Ok(Err(MapViolation::ColSum(c)));
        }
    }
    Ok(Ok(()))
}

/// One real-valued block per unordered pair; the common currency of LP
/// solutions, cut evaluation and classification.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionMaps {
    config: ObjectConfig,
    blocks: Vec<BlockMatrix>,
}

impl SolutionMaps {
    pub fn zeros(config: &ObjectConfig) -> Self {
        let blocks = config
            .pairs()
            .map(|(i, j)| BlockMatrix::zeros(config.size(i), config.size(j)))
            .collect();
        SolutionMaps {
            config: config.clone(),
            blocks,
        }
    }

    pub fn from_blocks(
        config: &ObjectConfig,
        blocks: Vec<BlockMatrix>,
    ) -> Result<Self, InstanceError> {
        assert_eq!(blocks.len(), config.pair_count());
        for ((i, j), b) in config.pairs().zip(&blocks) {
            if b.rows() != config.size(i) || b.cols() != config.size(j) {
                return Err(InstanceError::ShapeMismatch {
                    i: i + 1,
                    j: j + 1,
                    rows: b.rows(),
                    cols: b.cols(),
                    want_rows: config.size(i),
                    want_cols: config.size(j),
                });
            }
            for t in 0..b.rows() {
                for q in 0..b.cols() {
                    let v = b.get(t, q);
                    if !v.is_finite() || v < -ENTRY_TOL || v > 1.0 + ENTRY_TOL {
                        return Err(InstanceError::EntryOutOfBox {
                            i: i + 1,
                            j: j + 1,
                            t: t + 1,
                            q: q + 1,
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(SolutionMaps {
            config: config.clone(),
            blocks,
        })
    }

    /// Binary maps realizing a universe labeling: `X_{tq}(i,j) = 1` iff the
    /// two elements carry the same nonzero label.
    pub fn from_labeling(config: &ObjectConfig, labeling: &UniverseLabeling) -> Self {
        let mut maps = Self::zeros(config);
        for (i, j) in config.pairs() {
            for t in 0..config.size(i) {
                let lt = labeling.label(i, t);
                if lt == 0 {
                    continue;
                }
                for q in 0..config.size(j) {
                    if labeling.label(j, q) == lt {
                        maps.block_mut(i, j).set(t, q, 1.0);
                    }
                }
            }
        }
        maps
    }

    pub fn config(&self) -> &ObjectConfig {
        &self.config
    }

    /// Block for the ordered pair `i < j`.
    pub fn block(&self, i: usize, j: usize) -> &BlockMatrix {
        &self.blocks[self.config.pair_id(i, j)]
    }

    pub fn block_mut(&mut self, i: usize, j: usize) -> &mut BlockMatrix {
        let id = self.config.pair_id(i, j);
        &mut self.blocks[id]
    }

    /// Entry `X_{tq}(i, j)` for objects in either order; reads through the
    /// transpose when `i > j`.
    #[inline]
    pub fn entry(&self, i: usize, t: usize, j: usize, q: usize) -> f64 {
        if i < j {
            self.block(i, j).get(t, q)
        } else {
            self.block(j, i).get(q, t)
        }
    }

    pub fn blocks(&self) -> &[BlockMatrix] {
        &self.blocks
    }

    pub fn is_binary(&self) -> bool {
        self.blocks.iter().all(BlockMatrix::is_binary)
    }

    pub fn binary_deviation(&self) -> f64 {
        self.blocks
            .iter()
            .map(BlockMatrix::binary_deviation)
            .fold(0.0, f64::max)
    }

    pub fn rounded(&self) -> SolutionMaps {
        SolutionMaps {
            config: self.config.clone(),
            blocks: self.blocks.iter().map(BlockMatrix::rounded).collect(),
        }
    }
}

/// Outcome of a cycle-consistency check on binary maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consistency {
    Consistent,
    /// Witness `(i, j, k, l, t, q)` (0-based) of a violated triangle
    /// inequality: two of the three entries are one, the third is zero.
    Violated {
        i: usize,
        j: usize,
        k: usize,
        l: usize,
        t: usize,
        q: usize,
    },
}

impl Consistency {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Consistency::Consistent)
    }
}

/// Checks cycle consistency of binary, partial-map-valid maps: for every
/// triple `i < j < k` and elements `(l, t, q)`, if two of `X_lt(i,j)`,
/// `X_tq(j,k)`, `X_lq(i,k)` equal one, so does the third.
pub fn check_cycle_consistency(maps: &SolutionMaps) -> Result<Consistency, InstanceError> {
    let config = maps.config();
    for ((i, j), b) in config.pairs().zip(maps.blocks()) {
        if let Err(v) = validate_partial_map(b)? {
            return Err(InstanceError::NotPartialMap {
                i: i + 1,
                j: j + 1,
                violation: v,
            });
        }
    }
    for (i, j, k) in config.triples() {
        for l in 0..config.size(i) {
            for t in 0..config.size(j) {
                for q in 0..config.size(k) {
                    let a = maps.entry(i, l, j, t) == 1.0;
                    let b = maps.entry(j, t, k, q) == 1.0;
                    let c = maps.entry(i, l, k, q) == 1.0;
                    if (a as u8) + (b as u8) + (c as u8) == 2 {
                        return Ok(Consistency::Violated { i, j, k, l, t, q });
                    }
                }
            }
        }
    }
    Ok(Consistency::Consistent)
}

/// Matching instance: map graph, binary input blocks on observed edges and
/// optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    config: ObjectConfig,
    edges: Vec<(usize, usize)>,
    blocks: BTreeMap<(usize, usize), BlockMatrix>,
    ground_truth: Option<UniverseLabeling>,
    /// Free-form generator metadata, carried through serialization.
    meta: Option<String>,
}

impl Instance {
    pub fn new(
        config: ObjectConfig,
        mut edges: Vec<(usize, usize)>,
        blocks: BTreeMap<(usize, usize), BlockMatrix>,
        ground_truth: Option<UniverseLabeling>,
    ) -> Result<Self, InstanceError> {
        let n = config.n();
        edges.sort_unstable();
        edges.dedup();
        for &(i, j) in &edges {
            if i >= j || j >= n {
                return Err(InstanceError::BadPair {
                    i: i + 1,
                    j: j + 1,
                    n,
                });
            }
            let b = blocks
                .get(&(i, j))
                .ok_or_else(|| InstanceError::Schema {
                    field: format!("blocks[{},{}]", i + 1, j + 1),
                    message: "observed edge without a block".into(),
                })?;
            if b.rows() != config.size(i) || b.cols() != config.size(j) {
                return Err(InstanceError::ShapeMismatch {
                    i: i + 1,
                    j: j + 1,
                    rows: b.rows(),
                    cols: b.cols(),
                    want_rows: config.size(i),
                    want_cols: config.size(j),
                });
            }
            if let Err(v) = validate_partial_map(b)? {
                return Err(InstanceError::NotPartialMap {
                    i: i + 1,
                    j: j + 1,
                    violation: v,
                });
            }
        }
        for &(i, j) in blocks.keys() {
            if !edges.binary_search(&(i, j)).is_ok() {
                return Err(InstanceError::Schema {
                    field: format!("blocks[{},{}]", i + 1, j + 1),
                    message: "block for an unobserved pair".into(),
                });
            }
        }
        if let Some(gt) = &ground_truth {
            gt.check_shape(&config)
                .map_err(InstanceError::BadLabeling)?;
        }
        Ok(Instance {
            config,
            edges,
            blocks,
            ground_truth,
            meta: None,
        })
    }

    pub fn config(&self) -> &ObjectConfig {
        &self.config
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.blocks.contains_key(&(i.min(j), i.max(j)))
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.config.pair_count()
    }

    /// Input block `X^in(i, j)` of an observed pair `i < j`.
    pub fn input_block(&self, i: usize, j: usize) -> Option<&BlockMatrix> {
        self.blocks.get(&(i, j))
    }

    pub fn ground_truth(&self) -> Option<&UniverseLabeling> {
        self.ground_truth.as_ref()
    }

    pub fn ground_truth_maps(&self) -> Option<SolutionMaps> {
        self.ground_truth
            .as_ref()
            .map(|gt| SolutionMaps::from_labeling(&self.config, gt))
    }

    pub fn set_meta(&mut self, meta: impl Into<String>) {
        self.meta = Some(meta.into());
    }

    pub fn meta(&self) -> Option<&str> {
        self.meta.as_deref()
    }

    /// Number of matched pairs in the input.
    pub fn matched_input_pairs(&self) -> usize {
        self.blocks
            .values()
            .map(|b| b.entries().iter().filter(|&&v| v == 1.0).count())
            .sum()
    }

    /// True when every observed block is a full permutation matrix and all
    /// object sizes coincide.
    pub fn is_permutation_shaped(&self) -> bool {
        self.config.is_uniform()
            && self.blocks.values().all(|b| {
                b.is_binary()
                    && (0..b.rows()).all(|r| b.row_sum(r) == 1.0)
                    && (0..b.cols()).all(|c| b.col_sum(c) == 1.0)
            })
    }
}

/// Costs `a(i,j) = 1 - 2 X^in(i,j)` on observed edges, zero otherwise, with
/// transposed access for ordered pairs.
#[derive(Debug, Clone)]
pub struct CostTensor {
    config: ObjectConfig,
    blocks: Vec<BlockMatrix>,
}

impl CostTensor {
    pub fn from_instance(inst: &Instance) -> Self {
        let config = inst.config().clone();
        let blocks = config
            .pairs()
            .map(|(i, j)| {
                let mut a = BlockMatrix::zeros(config.size(i), config.size(j));
                if let Some(x) = inst.input_block(i, j) {
                    for t in 0..a.rows() {
                        for q in 0..a.cols() {
                            a.set(t, q, 1.0 - 2.0 * x.get(t, q));
                        }
                    }
                }
                a
            })
            .collect();
        CostTensor { config, blocks }
    }

    pub fn config(&self) -> &ObjectConfig {
        &self.config
    }

    /// Cost entry `a_{tq}(i, j)` for objects in either order, using
    /// `a(j,i) = a(i,j)^T`.
    #[inline]
    pub fn entry(&self, i: usize, t: usize, j: usize, q: usize) -> f64 {
        if i < j {
            self.blocks[self.config.pair_id(i, j)].get(t, q)
        } else {
            self.blocks[self.config.pair_id(j, i)].get(q, t)
        }
    }

    pub fn block(&self, i: usize, j: usize) -> &BlockMatrix {
        &self.blocks[self.config.pair_id(i, j)]
    }
}

/// Objective of the matching LP: sum over observed edges of
/// `<1*1^T - 2 X^in(i,j), X(i,j)>`.
pub fn linear_objective(inst: &Instance, maps: &SolutionMaps) -> Result<f64, InstanceError> {
    if maps.config() != inst.config() {
        return Err(InstanceError::Schema {
            field: "solution".into(),
            message: "object configuration differs from the instance".into(),
        });
    }
    let mut obj = 0.0;
    for &(i, j) in inst.edges() {
        let xin = inst.input_block(i, j).expect("observed edge has a block");
        let x = maps.block(i, j);
        for t in 0..x.rows() {
            for q in 0..x.cols() {
                obj += (1.0 - 2.0 * xin.get(t, q)) * x.get(t, q);
            }
        }
    }
    Ok(obj)
}

// --- serialization ---------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    sizes: Vec<usize>,
    edges: Vec<(usize, usize)>,
    blocks: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<String>,
}

pub fn write_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    let file = InstanceFile {
        n: inst.config.n(),
        sizes: inst.config.sizes().to_vec(),
        edges: inst.edges.iter().map(|&(i, j)| (i + 1, j + 1)).collect(),
        blocks: inst
            .blocks
            .iter()
            .map(|(&(i, j), b)| {
                let rows = (0..b.rows())
                    .map(|r| (0..b.cols()).map(|c| b.get(r, c)).collect())
                    .collect();
                (format!("{},{}", i + 1, j + 1), rows)
            })
            .collect(),
        ground_truth: inst
            .ground_truth
            .as_ref()
            .map(|gt| gt.labels().to_vec()),
        meta: inst.meta.clone(),
    };
    let out = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(out, &file)?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    let text = std::fs::read_to_string(path)?;
    read_instance_str(&text)
}

pub fn read_instance_str(text: &str) -> Result<Instance, InstanceError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.sizes.len() != file.n {
        return Err(InstanceError::Schema {
            field: "sizes".into(),
            message: format!("expected {} entries, got {}", file.n, file.sizes.len()),
        });
    }
    let config = ObjectConfig::new(file.sizes)?;
    let mut edges = Vec::with_capacity(file.edges.len());
    for &(i, j) in &file.edges {
        if i == 0 || j == 0 || i >= j || j > config.n() {
            return Err(InstanceError::Schema {
                field: "edges".into(),
                message: format!("bad 1-based pair ({i},{j}) for n = {}", config.n()),
            });
        }
        edges.push((i - 1, j - 1));
    }
    let mut blocks = BTreeMap::new();
    for (key, rows) in file.blocks {
        let (i, j) = parse_pair_key(&key, config.n())?;
        let b = BlockMatrix::from_rows(rows);
        blocks.insert((i, j), b);
    }
    let ground_truth = file
        .ground_truth
        .map(|labels| UniverseLabeling::new(labels).map_err(InstanceError::BadLabeling))
        .transpose()?;
    let mut inst = Instance::new(config, edges, blocks, ground_truth)?;
    if let Some(meta) = file.meta {
        inst.set_meta(meta);
    }
    Ok(inst)
}

fn parse_pair_key(key: &str, n: usize) -> Result<(usize, usize), InstanceError> {
    let bad = |message: String| InstanceError::Schema {
        field: format!("blocks[{key}]"),
        message,
    };
    let (a, b) = key
        .split_once(',')
        .ok_or_else(|| bad("expected \"i,j\"".into()))?;
    let i: usize = a
        .trim()
        .parse()
        .map_err(|_| bad(format!("bad index {a:?}")))?;
    let j: usize = b
        .trim()
        .parse()
        .map_err(|_| bad(format!("bad index {b:?}")))?;
    if i == 0 || j == 0 || i >= j || j > n {
        return Err(bad(format!("pair ({i},{j}) out of range for n = {n}")));
    }
    Ok((i - 1, j - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maps_from(config: &ObjectConfig, blocks: Vec<BlockMatrix>) -> SolutionMaps {
        SolutionMaps::from_blocks(config, blocks).unwrap()
    }

    /// Consistent partial maps with `d = (1, 2, 2)`: the element of object 1
    /// pairs with the second element of object 2, and the first elements of
    /// objects 2 and 3 pair up.
    fn example_consistent() -> (ObjectConfig, SolutionMaps) {
        let config = ObjectConfig::new(vec![1, 2, 2]).unwrap();
        let maps = maps_from(
            &config,
            vec![
                BlockMatrix::from_rows(vec![vec![0.0, 1.0]]),
                BlockMatrix::from_rows(vec![vec![0.0, 0.0]]),
                BlockMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.0]]),
            ],
        );
        (config, maps)
    }

    #[test]
    fn partial_map_accepts_examples() {
        let m = BlockMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(validate_partial_map(&m).unwrap(), Ok(()));
        let zero = BlockMatrix::zeros(3, 5);
        assert_eq!(validate_partial_map(&zero).unwrap(), Ok(()));
    }

    #[test]
    fn partial_map_rejects_row_sum_two() {
        let ones = BlockMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(
            validate_partial_map(&ones).unwrap(),
            Err(MapViolation::RowSum(0))
        );
    }

    #[test]
    fn partial_map_rejects_non_binary() {
        let m = BlockMatrix::from_rows(vec![vec![0.5]]);
        assert!(matches!(
            validate_partial_map(&m),
            Err(InstanceError::NonBinaryEntry { .. })
        ));
    }

    #[test]
    fn cycle_consistency_accepts_first_example() {
        let (_, maps) = example_consistent();
        assert!(check_cycle_consistency(&maps).unwrap().is_consistent());
    }

    #[test]
    fn cycle_consistency_rejects_second_example() {
        let config = ObjectConfig::new(vec![1, 2, 2]).unwrap();
        let maps = maps_from(
            &config,
            vec![
                BlockMatrix::from_rows(vec![vec![1.0, 0.0]]),
                BlockMatrix::from_rows(vec![vec![0.0, 1.0]]),
                BlockMatrix::zeros(2, 2),
            ],
        );
        // X_11(1,2) = X_12(1,3) = 1 forces X_12(2,3) = 1.
        assert_eq!(
            check_cycle_consistency(&maps).unwrap(),
            Consistency::Violated {
                i: 0,
                j: 1,
                k: 2,
                l: 0,
                t: 0,
                q: 1
            }
        );
    }

    #[test]
    fn cycle_consistency_accepts_identities() {
        let config = ObjectConfig::uniform(4, 3).unwrap();
        let blocks = config
            .pairs()
            .map(|_| BlockMatrix::identity(3))
            .collect::<Vec<_>>();
        let maps = maps_from(&config, blocks);
        assert!(check_cycle_consistency(&maps).unwrap().is_consistent());
    }

    #[test]
    fn objective_at_input_is_minus_matched_pairs() {
        let (config, maps) = example_consistent();
        let mut blocks = BTreeMap::new();
        for ((i, j), b) in config.pairs().zip(maps.blocks()) {
            blocks.insert((i, j), b.clone());
        }
        let edges: Vec<_> = config.pairs().collect();
        let inst = Instance::new(config.clone(), edges, blocks, None).unwrap();
        let n_matched = inst.matched_input_pairs() as f64;
        assert_eq!(linear_objective(&inst, &maps).unwrap(), -n_matched);
        let zero = SolutionMaps::zeros(&config);
        assert_eq!(linear_objective(&inst, &zero).unwrap(), 0.0);
    }

    #[test]
    fn cost_tensor_is_one_minus_two_x_and_symmetric() {
        let (config, maps) = example_consistent();
        let mut blocks = BTreeMap::new();
        blocks.insert((0, 1), maps.block(0, 1).clone());
        // leave (0,2) and (1,2) unobserved
        let inst = Instance::new(config, vec![(0, 1)], blocks, None).unwrap();
        let a = CostTensor::from_instance(&inst);
        assert_eq!(a.entry(0, 0, 1, 0), 1.0);
        assert_eq!(a.entry(0, 0, 1, 1), -1.0);
        assert_eq!(a.entry(1, 1, 0, 0), -1.0); // transposed access
        assert_eq!(a.entry(1, 0, 2, 1), 0.0); // unobserved pair
    }

    #[test]
    fn instance_round_trip() {
        let (config, maps) = example_consistent();
        let mut blocks = BTreeMap::new();
        for ((i, j), b) in config.pairs().zip(maps.blocks()) {
            blocks.insert((i, j), b.clone());
        }
        let gt = UniverseLabeling::new(vec![vec![1], vec![2, 1], vec![2, 0]]).unwrap();
        let edges: Vec<_> = config.pairs().collect();
        let mut inst = Instance::new(config, edges, blocks, Some(gt)).unwrap();
        inst.set_meta("test");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        write_instance(&inst, &path).unwrap();
        let back = read_instance(&path).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn read_rejects_row_sum_two_block() {
        let text = r#"{
            "n": 2, "sizes": [2, 2], "edges": [[1, 2]],
            "blocks": {"1,2": [[1, 1], [0, 0]]}
        }"#;
        assert!(matches!(
            read_instance_str(text),
            Err(InstanceError::NotPartialMap { .. })
        ));
    }

    #[test]
    fn read_rejects_missing_edges_field() {
        let text = r#"{"n": 2, "sizes": [2, 2], "blocks": {}}"#;
        assert!(matches!(read_instance_str(text), Err(InstanceError::Json(_))));
    }

    #[test]
    fn pair_ids_are_lexicographic() {
        let config = ObjectConfig::uniform(5, 2).unwrap();
        for (id, (i, j)) in config.pairs().enumerate() {
            assert_eq!(config.pair_id(i, j), id);
        }
    }
}
