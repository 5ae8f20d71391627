//! Desk-scale exact machinery for the joint matching polytope: vertex
//! enumeration through universe labelings, dimension and facet verification
//! in integer arithmetic, rational hull-membership tests and a brute-force
//! ILP oracle.
//!
//! Everything here is exact: ranks use fraction-free integer elimination,
//! hull membership runs the rational simplex. Guards keep the inputs at
//! sizes where exhaustive enumeration is meaningful.

use num::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cuts::LinearInequality;
use crate::instance::{Instance, ObjectConfig, SolutionMaps};
use crate::rational::{exact_solve_standard_form, ExactOutcome, Rat};

/// Maximum total element count for vertex enumeration.
pub const ENUM_GUARD: usize = 12;
/// Maximum total element count for the ILP oracle.
pub const ORACLE_GUARD: usize = 10;
/// Maximum total element count for hull-membership tests.
pub const HULL_GUARD: usize = 8;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("total element count {total} exceeds the guard {guard}")]
    Guard { total: usize, guard: usize },
    #[error("point has {got} coordinates, expected {want}")]
    PointShape { got: usize, want: usize },
}

/// Per-element universe labels; 0 marks an unmatched singleton. Within one
/// object nonzero labels are distinct, and labels are canonicalized to
/// first-occurrence order over the global element sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniverseLabeling {
    labels: Vec<Vec<u32>>,
}

impl UniverseLabeling {
    pub fn new(labels: Vec<Vec<u32>>) -> Result<Self, String> {
        for (i, obj) in labels.iter().enumerate() {
            let mut seen = std::collections::BTreeSet::new();
            for &l in obj {
                if l != 0 && !seen.insert(l) {
                    return Err(format!(
                        "object {} repeats label {} across its elements",
                        i + 1,
                        l
                    ));
                }
            }
        }
        let mut canon = UniverseLabeling { labels };
        canon.canonicalize();
        Ok(canon)
    }

    fn canonicalize(&mut self) {
        let mut remap = std::collections::BTreeMap::new();
        let mut next = 1u32;
        for obj in &mut self.labels {
            for l in obj.iter_mut() {
                if *l != 0 {
                    let id = *remap.entry(*l).or_insert_with(|| {
                        let id = next;
                        next += 1;
                        id
                    });
                    *l = id;
                }
            }
        }
    }

    pub fn check_shape(&self, config: &ObjectConfig) -> Result<(), String> {
        if self.labels.len() != config.n() {
            return Err(format!(
                "labeling covers {} objects, instance has {}",
                self.labels.len(),
                config.n()
            ));
        }
        for (i, obj) in self.labels.iter().enumerate() {
            if obj.len() != config.size(i) {
                return Err(format!(
                    "object {} has {} labels, expected {}",
                    i + 1,
                    obj.len(),
                    config.size(i)
                ));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn label(&self, object: usize, element: usize) -> u32 {
        self.labels[object][element]
    }

    pub fn labels(&self) -> &[Vec<u32>] {
        &self.labels
    }

    /// Number of distinct universe labels in use.
    pub fn universe_size(&self) -> usize {
        self.labels
            .iter()
            .flatten()
            .copied()
            .max()
            .unwrap_or(0) as usize
    }
}

/// Canonical vectorization order shared with the LP variable layout:
/// pairs `(i, j)` lexicographic, entries row-major within each block.
pub fn vectorize_binary(maps: &SolutionMaps) -> Vec<i64> {
    let config = maps.config();
    let mut v = Vec::new();
    for (i, j) in config.pairs() {
        let b = maps.block(i, j);
        for t in 0..b.rows() {
            for q in 0..b.cols() {
                let x = b.get(t, q);
                debug_assert!(x == 0.0 || x == 1.0);
                v.push(x as i64);
            }
        }
    }
    v
}

/// Ambient dimension of the vectorized maps.
pub fn ambient_dimension(config: &ObjectConfig) -> usize {
    config.pairs().map(|(i, j)| config.size(i) * config.size(j)).sum()
}

/// All vertices of the joint matching polytope for a configuration,
/// enumerated without duplicates via universe labelings.
#[derive(Debug, Clone)]
pub struct VertexSet {
    config: ObjectConfig,
    labelings: Vec<UniverseLabeling>,
}

impl VertexSet {
    pub fn len(&self) -> usize {
        self.labelings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labelings.is_empty()
    }

    pub fn config(&self) -> &ObjectConfig {
        &self.config
    }

    pub fn labeling(&self, k: usize) -> &UniverseLabeling {
        &self.labelings[k]
    }

    pub fn maps(&self, k: usize) -> SolutionMaps {
        SolutionMaps::from_labeling(&self.config, &self.labelings[k])
    }

    pub fn vector(&self, k: usize) -> Vec<i64> {
        vectorize_binary(&self.maps(k))
    }

    pub fn iter_vectors(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(|k| self.vector(k))
    }
}

/// Exhaustive duplicate-free enumeration: each element in global order
/// either joins an existing block that lacks its object or starts a new
/// block (a block that stays a singleton is an unmatched element).
pub fn enumerate_vertices(config: &ObjectConfig) -> Result<VertexSet, LabError> {
    let total = config.total_elements();
    if total > ENUM_GUARD {
        return Err(LabError::Guard {
            total,
            guard: ENUM_GUARD,
        });
    }
    let n = config.n();
    let mut elements = Vec::with_capacity(total);
    for i in 0..n {
        for t in 0..config.size(i) {
            elements.push((i, t));
        }
    }
    let mut blocks: Vec<(u64, Vec<(usize, usize)>)> = Vec::new();
    let mut out = Vec::new();
    fn recurse(
        config: &ObjectConfig,
        elements: &[(usize, usize)],
        pos: usize,
        blocks: &mut Vec<(u64, Vec<(usize, usize)>)>,
        out: &mut Vec<UniverseLabeling>,
    ) {
        if pos == elements.len() {
            let mut labels: Vec<Vec<u32>> =
                (0..config.n()).map(|i| vec![0; config.size(i)]).collect();
            let mut next = 1u32;
            for (_, members) in blocks.iter() {
                if members.len() >= 2 {
                    for &(i, t) in members {
                        labels[i][t] = next;
                    }
                    next += 1;
                }
            }
            out.push(UniverseLabeling { labels });
            return;
        }
        let (obj, elt) = elements[pos];
        let bit = 1u64 << obj;
        // join an existing block missing this object
        for b in 0..blocks.len() {
            if blocks[b].0 & bit == 0 {
                blocks[b].0 |= bit;
                blocks[b].1.push((obj, elt));
                recurse(config, elements, pos + 1, blocks, out);
                blocks[b].1.pop();
                blocks[b].0 &= !bit;
            }
        }
        // start a new block
        blocks.push((bit, vec![(obj, elt)]));
        recurse(config, elements, pos + 1, blocks, out);
        blocks.pop();
    }
    recurse(config, &elements, 0, &mut blocks, &mut out);
    Ok(VertexSet {
        config: config.clone(),
        labelings: out,
    })
}

/// Slow independent enumerator: filters every binary point against the
/// partial-map and triangle conditions. Cross-check for
/// [`enumerate_vertices`] on small configurations.
pub fn enumerate_vertices_by_filter(config: &ObjectConfig) -> Result<Vec<Vec<i64>>, LabError> {
    let total = config.total_elements();
    if total > 8 {
        return Err(LabError::Guard { total, guard: 8 });
    }
    let dim = ambient_dimension(config);
    let mut found = Vec::new();
    'outer: for bits in 0u64..(1u64 << dim) {
        let mut maps = SolutionMaps::zeros(config);
        let mut idx = 0;
        for (i, j) in config.pairs() {
            for t in 0..config.size(i) {
                for q in 0..config.size(j) {
                    if bits >> idx & 1 == 1 {
                        maps.block_mut(i, j).set(t, q, 1.0);
                    }
                    idx += 1;
                }
            }
        }
        for (i, j) in config.pairs() {
            let b = maps.block(i, j);
            for t in 0..b.rows() {
                if (0..b.cols()).map(|q| b.get(t, q)).sum::<f64>() > 1.0 {
                    continue 'outer;
                }
            }
            for q in 0..b.cols() {
                if (0..b.rows()).map(|t| b.get(t, q)).sum::<f64>() > 1.0 {
                    continue 'outer;
                }
            }
        }
        for (i, j, k) in config.triples() {
            for l in 0..config.size(i) {
                for t in 0..config.size(j) {
                    for q in 0..config.size(k) {
                        let a = maps.entry(i, l, j, t);
                        let b = maps.entry(j, t, k, q);
                        let c = maps.entry(i, l, k, q);
                        if -a + b + c > 1.0 || a - b + c > 1.0 || a + b - c > 1.0 {
                            continue 'outer;
                        }
                    }
                }
            }
        }
        found.push(vectorize_binary(&maps));
    }
    Ok(found)
}

/// Rank of an integer matrix by Bareiss fraction-free elimination.
pub fn integer_rank(mut m: Vec<Vec<i128>>) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut rank = 0usize;
    let mut prev: i128 = 1;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][col];
        for r in rank + 1..rows {
            let head = m[r][col];
            if head == 0 && prev == 1 {
                continue;
            }
            for c in col + 1..cols {
                m[r][c] = (m[r][c] * pivot - head * m[rank][c]) / prev;
            }
            m[r][col] = 0;
        }
        prev = pivot;
        rank += 1;
        if rank == rows.min(cols) {
            break;
        }
    }
    rank
}

/// Affine rank (dimension of the affine hull) of a set of integer points.
pub fn affine_rank(points: &[Vec<i64>]) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let base = &points[0];
    let rows: Vec<Vec<i128>> = points[1..]
        .iter()
        .map(|p| {
            p.iter()
                .zip(base)
                .map(|(&a, &b)| (a - b) as i128)
                .collect()
        })
        .collect();
    integer_rank(rows)
}

/// Dimension of the joint matching polytope, computed exactly as the
/// affine rank of its vertex set.
pub fn dimension(config: &ObjectConfig) -> Result<usize, LabError> {
    let vs = enumerate_vertices(config)?;
    let points: Vec<Vec<i64>> = vs.iter_vectors().collect();
    Ok(affine_rank(&points))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetReport {
    pub valid: bool,
    pub tight_count: usize,
    pub tight_rank: usize,
    pub is_facet: bool,
}

/// Validity and facetness of one linear inequality over the full vertex
/// set, in exact integer arithmetic: valid iff no vertex violates it,
/// facet iff the tight vertices span an affine subspace of dimension
/// exactly one less than the polytope.
pub fn verify_facet(
    ineq: &LinearInequality,
    config: &ObjectConfig,
    vertices: &VertexSet,
    poly_dim: usize,
) -> FacetReport {
    debug_assert_eq!(vertices.config(), config);
    let mut valid = true;
    let mut tight: Vec<Vec<i64>> = Vec::new();
    for k in 0..vertices.len() {
        let v = vertices.vector(k);
        let lhs = ineq.evaluate_integer(&v, config);
        let (sat, is_tight) = ineq.classify(lhs);
        if !sat {
            valid = false;
        }
        if is_tight {
            tight.push(v);
        }
    }
    let tight_rank = affine_rank(&tight);
    FacetReport {
        valid,
        tight_count: tight.len(),
        tight_rank,
        is_facet: valid && !tight.is_empty() && tight_rank == poly_dim.saturating_sub(1),
    }
}

#[derive(Debug, Clone)]
pub enum HullResult {
    Inside,
    /// Separating hyperplane `h . x <= rhs` valid on every vertex with
    /// `h . point > rhs`, exact rationals over the canonical coordinates.
    Outside { hyperplane: Vec<Rat>, rhs: Rat },
}

/// Exact convex-hull membership of a rational point: LP feasibility of a
/// convex combination of vertices, with a Farkas separating hyperplane on
/// failure.
pub fn hull_membership(point: &[Rat], config: &ObjectConfig) -> Result<HullResult, LabError> {
    let total = config.total_elements();
    if total > HULL_GUARD {
        return Err(LabError::Guard {
            total,
            guard: HULL_GUARD,
        });
    }
    let dim = ambient_dimension(config);
    if point.len() != dim {
        return Err(LabError::PointShape {
            got: point.len(),
            want: dim,
        });
    }
    let vs = enumerate_vertices(config)?;
    let ncols = vs.len();
    // rows: dim coordinate-matching equalities plus one convexity row
    let mut a: Vec<Vec<Rat>> = vec![vec![Rat::zero(); ncols]; dim + 1];
    for k in 0..ncols {
        let v = vs.vector(k);
        for (c, &val) in v.iter().enumerate() {
            if val != 0 {
                a[c][k] = Rat::from_integer(val.into());
            }
        }
        a[dim][k] = Rat::one();
    }
    let mut b: Vec<Rat> = point.to_vec();
    b.push(Rat::one());
    let c = vec![Rat::zero(); ncols];
    match exact_solve_standard_form(&a, &b, &c) {
        ExactOutcome::Optimal { .. } => Ok(HullResult::Inside),
        ExactOutcome::Unbounded => unreachable!("feasibility problem"),
        ExactOutcome::Infeasible { farkas } => {
            let rhs = -farkas[dim].clone();
            let hyperplane = farkas[..dim].to_vec();
            Ok(HullResult::Outside { hyperplane, rhs })
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub optimum: i64,
    /// Indices into the enumerated vertex set attaining the optimum.
    pub argmin: Vec<usize>,
    pub unique: bool,
}

/// Brute-force exact minimum of the matching objective over every vertex.
pub fn ilp_oracle(inst: &Instance) -> Result<(OracleResult, VertexSet), LabError> {
    let config = inst.config();
    let total = config.total_elements();
    if total > ORACLE_GUARD {
        return Err(LabError::Guard {
            total,
            guard: ORACLE_GUARD,
        });
    }
    let vs = enumerate_vertices(config)?;
    let mut best = i64::MAX;
    let mut argmin = Vec::new();
    for k in 0..vs.len() {
        let labeling = vs.labeling(k);
        let mut obj = 0i64;
        for &(i, j) in inst.edges() {
            let xin = inst.input_block(i, j).expect("observed block");
            for t in 0..config.size(i) {
                let lt = labeling.label(i, t);
                for q in 0..config.size(j) {
                    let matched = lt != 0 && labeling.label(j, q) == lt;
                    if matched {
                        obj += 1 - 2 * (xin.get(t, q) as i64);
                    }
                }
            }
        }
        if obj < best {
            best = obj;
            argmin.clear();
            argmin.push(k);
        } else if obj == best {
            argmin.push(k);
        }
    }
    let unique = argmin.len() == 1;
    Ok((
        OracleResult {
            optimum: best,
            argmin,
            unique,
        },
        vs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::check_cycle_consistency;

    #[test]
    fn tiny_vertex_counts() {
        let two_singletons = ObjectConfig::new(vec![1, 1]).unwrap();
        assert_eq!(enumerate_vertices(&two_singletons).unwrap().len(), 2);
        let three_singletons = ObjectConfig::new(vec![1, 1, 1]).unwrap();
        // graph-partition special case: Bell(3) set partitions
        assert_eq!(enumerate_vertices(&three_singletons).unwrap().len(), 5);
    }

    #[test]
    fn enumeration_matches_brute_filter() {
        for sizes in [vec![1, 2, 2], vec![2, 2, 2], vec![1, 1, 2, 2]] {
            let config = ObjectConfig::new(sizes).unwrap();
            let vs = enumerate_vertices(&config).unwrap();
            let mut a: Vec<Vec<i64>> = vs.iter_vectors().collect();
            let mut b = enumerate_vertices_by_filter(&config).unwrap();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn every_vertex_is_cycle_consistent() {
        let config = ObjectConfig::new(vec![2, 2, 2]).unwrap();
        let vs = enumerate_vertices(&config).unwrap();
        for k in 0..vs.len() {
            let maps = vs.maps(k);
            assert!(check_cycle_consistency(&maps).unwrap().is_consistent());
        }
    }

    #[test]
    fn labeling_canonicalizes_first_occurrence() {
        let l = UniverseLabeling::new(vec![vec![7, 0], vec![3, 7]]).unwrap();
        assert_eq!(l.labels(), &[vec![1, 0], vec![2, 1]]);
        assert_eq!(l.universe_size(), 2);
    }

    #[test]
    fn rank_of_simple_matrices() {
        assert_eq!(
            integer_rank(vec![vec![1, 0], vec![0, 1], vec![1, 1]]),
            2
        );
        assert_eq!(integer_rank(vec![vec![2, 4], vec![1, 2]]), 1);
        assert_eq!(affine_rank(&[vec![1, 1], vec![1, 1]]), 0);
    }
}
