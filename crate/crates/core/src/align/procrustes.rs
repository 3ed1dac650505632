//! Orthogonal Procrustes fit mapping translation-space vectors into the
//! source space.

use indexmap::IndexMap;
use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::anchors::AnchorPair;
use crate::error::{Error, Result};
use crate::merge::WordSequence;

pub const DEFAULT_MIN_ANCHORS: usize = 3;

/// Orthogonality tolerance per unit of dimension for `‖ΩᵀΩ − I‖_F`.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

/// An orthogonal `d × d` matrix Ω together with fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapRecord", into = "MapRecord")]
pub struct OrthogonalMap {
    omega: DMatrix<f64>,
    anchor_count: usize,
    residual: f64,
}

#[derive(Serialize, Deserialize)]
struct MapRecord {
    dimension: usize,
    anchor_count: usize,
    residual: f64,
    /// Row-major.
    omega: Vec<Vec<f64>>,
}

impl From<OrthogonalMap> for MapRecord {
    fn from(map: OrthogonalMap) -> Self {
        MapRecord {
            dimension: map.dimension(),
            anchor_count: map.anchor_count,
            residual: map.residual,
            omega: map.rows(),
        }
    }
}

impl TryFrom<MapRecord> for OrthogonalMap {
    type Error = Error;

    fn try_from(record: MapRecord) -> Result<Self> {
        if record.omega.len() != record.dimension {
            return Err(Error::Validation(format!(
                "map declares dimension {} but has {} rows",
                record.dimension,
                record.omega.len()
            )));
        }
        let mut map = OrthogonalMap::from_rows(&record.omega)?;
        map.anchor_count = record.anchor_count;
        map.residual = record.residual;
        Ok(map)
    }
}

impl OrthogonalMap {
    pub fn identity(dimension: usize) -> Self {
        Self {
            omega: DMatrix::identity(dimension, dimension),
            anchor_count: 0,
            residual: 0.0,
        }
    }

    /// Wraps a row-major matrix, checking that it is square, finite and orthogonal.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::Validation("empty map".into()));
        }
        if let Some(row) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Validation(format!(
                "map is not square: row of length {} in a {d}-row matrix",
                row.len()
            )));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("map matrix".into()));
        }
        let omega = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        let map = Self {
            omega,
            anchor_count: 0,
            residual: 0.0,
        };
        let err = map.orthogonality_error();
        if err > ORTHOGONALITY_TOLERANCE * d as f64 {
            return Err(Error::Validation(format!(
                "map is not orthogonal: ‖ΩᵀΩ − I‖_F = {err:e}"
            )));
        }
        Ok(map)
    }

    pub fn dimension(&self) -> usize {
        self.omega.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.omega
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn anchor_count(&self) -> usize {
        self.anchor_count
    }

    /// `‖ΩA − B‖_F` over the anchors the map was fitted on.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `‖ΩᵀΩ − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dimension();
        (self.omega.transpose() * &self.omega - DMatrix::<f64>::identity(d, d)).norm()
    }

    /// Ω·v. Panics if `v` does not have the map's dimension.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(
            v.len(),
            self.dimension(),
            "vector length must match map dimension"
        );
        self.omega
            .row_iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Solves `argmin ‖ΩA − B‖_F` subject to `ΩᵀΩ = I`, where column `i` of A is
/// `targets[i]` and column `i` of B is `sources[i]`.
///
/// With `M = B·Aᵀ = UΣVᵀ` the minimizer is `Ω = UVᵀ`. No determinant
/// correction is applied, so Ω may be a reflection.
pub fn fit_orthogonal(
    targets: &[&[f64]],
    sources: &[&[f64]],
    dimension: usize,
    min_anchors: usize,
) -> Result<OrthogonalMap> {
    if targets.len() != sources.len() {
        return Err(Error::LengthMismatch {
            left: targets.len(),
            right: sources.len(),
        });
    }
    let n = targets.len();
    if n == 0 || n < min_anchors {
        return Err(Error::InsufficientAnchors {
            found: n,
            required: min_anchors.max(1),
        });
    }
    for v in targets.iter().chain(sources) {
        if v.len() != dimension {
            return Err(Error::DimensionMismatch {
                sentence_id: "<anchor>".into(),
                reference: "fit".into(),
                expected: dimension,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("anchor vector".into()));
        }
    }

    let a = DMatrix::from_fn(dimension, n, |i, j| targets[j][i]);
    let b = DMatrix::from_fn(dimension, n, |i, j| sources[j][i]);
    let m = &b * a.transpose();
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NonFinite("singular value decomposition".into())),
    };
    let omega = u * v_t;
    if omega.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("fitted map".into()));
    }
    let residual = (&omega * &a - &b).norm();
    Ok(OrthogonalMap {
        omega,
        anchor_count: n,
        residual,
    })
}

/// Fits Ω on anchor pairs: translation vectors form A, source vectors form B.
pub fn fit_procrustes(
    pairs: &[AnchorPair],
    dimension: usize,
    min_anchors: usize,
) -> Result<OrthogonalMap> {
    let targets: Vec<&[f64]> = pairs.iter().map(|p| p.target.vector.as_slice()).collect();
    let sources: Vec<&[f64]> = pairs.iter().map(|p| p.source.vector.as_slice()).collect();
    fit_orthogonal(&targets, &sources, dimension, min_anchors)
}

/// Replaces every word vector v by Ω·v.
pub fn apply_map(map: &OrthogonalMap, seq: &WordSequence) -> Result<WordSequence> {
    let mut out = seq.clone();
    for word in &mut out.words {
        if word.vector.len() != map.dimension() {
            return Err(Error::DimensionMismatch {
                sentence_id: seq.sentence_id.clone(),
                reference: "map".into(),
                expected: map.dimension(),
                found: word.vector.len(),
            });
        }
        word.vector = map.apply(&word.vector);
    }
    Ok(out)
}

/// The map(s) used to bring translations into the source space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Alignment {
    /// One map fitted on anchors pooled over the whole corpus.
    Global { map: OrthogonalMap },
    /// A map per sentence; sentences with too few anchors use `fallback`.
    PerSentence {
        fallback: OrthogonalMap,
        maps: IndexMap<String, OrthogonalMap>,
    },
}

impl Alignment {
    pub fn global(map: OrthogonalMap) -> Self {
        Alignment::Global { map }
    }

    pub fn identity(dimension: usize) -> Self {
        Alignment::Global {
            map: OrthogonalMap::identity(dimension),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Alignment::Global { map } => map.dimension(),
            Alignment::PerSentence { fallback, .. } => fallback.dimension(),
        }
    }

    pub fn map_for(&self, sentence_id: &str) -> &OrthogonalMap {
        match self {
            Alignment::Global { map } => map,
            Alignment::PerSentence { fallback, maps } => maps.get(sentence_id).unwrap_or(fallback),
        }
    }

    /// Fits a global map over all pairs, plus per-sentence maps if requested.
    pub fn fit(
        pairs_by_sentence: &IndexMap<String, Vec<AnchorPair>>,
        dimension: usize,
        min_anchors: usize,
        per_sentence: bool,
    ) -> Result<Self> {
        let pooled: Vec<AnchorPair> = pairs_by_sentence.values().flatten().cloned().collect();
        let global = fit_procrustes(&pooled, dimension, min_anchors)?;
        if !per_sentence {
            return Ok(Alignment::Global { map: global });
        }
        let mut maps = IndexMap::new();
        for (id, pairs) in pairs_by_sentence {
            if pairs.len() < min_anchors.max(1) {
                warn!(
                    "sentence '{id}': {} anchor(s), below {min_anchors}; using the global map",
                    pairs.len()
                );
                continue;
            }
            maps.insert(id.clone(), fit_procrustes(pairs, dimension, min_anchors)?);
        }
        Ok(Alignment::PerSentence {
            fallback: global,
            maps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn as_slices(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn identical_sets_give_identity() {
        let a = vec![
            vec![1.0, 0.2, -0.3],
            vec![0.0, 1.5, 0.4],
            vec![-0.7, 0.1, 2.0],
            vec![0.3, 0.3, 0.3],
        ];
        let map = fit_orthogonal(&as_slices(&a), &as_slices(&a), 3, 3).unwrap();
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((map.matrix() - id).amax() <= 1e-10);
        assert!(map.residual() <= 1e-10);
        assert_eq!(map.anchor_count(), 4);
    }

    #[test]
    fn quarter_turn_is_recovered() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 1.0]];
        let b: Vec<Vec<f64>> = a.iter().map(|v| vec![-v[1], v[0]]).collect();
        let map = fit_orthogonal(&as_slices(&a), &as_slices(&b), 2, 3).unwrap();
        assert_eq!(map.apply(&[1.0, 0.0]).len(), 2);
        let turned = map.apply(&[3.0, 4.0]);
        assert!((turned[0] + 4.0).abs() < 1e-12 && (turned[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_anchors() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            fit_orthogonal(&as_slices(&a), &as_slices(&a), 2, 3),
            Err(Error::InsufficientAnchors {
                found: 2,
                required: 3
            })
        ));
        // Lowering the threshold lets the fit proceed.
        assert!(fit_orthogonal(&as_slices(&a[..1]), &as_slices(&a[..1]), 2, 1).is_ok());
        assert!(matches!(
            fit_orthogonal(&[], &[], 2, 0),
            Err(Error::InsufficientAnchors { found: 0, .. })
        ));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let a = vec![vec![1.0, f64::NAN], vec![0.0, 1.0], vec![1.0, 1.0]];
        let b = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(
            fit_orthogonal(&as_slices(&a), &as_slices(&b), 2, 3),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn reflections_are_allowed() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 2.0]];
        let b: Vec<Vec<f64>> = a.iter().map(|v| vec![v[0], -v[1]]).collect();
        let map = fit_orthogonal(&as_slices(&a), &as_slices(&b), 2, 3).unwrap();
        assert!(map.residual() < 1e-12);
        assert!((map.matrix().determinant() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_orthogonal_rows_are_rejected() {
        assert!(OrthogonalMap::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).is_err());
        assert!(OrthogonalMap::from_rows(&[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn map_json_round_trip() {
        let a = vec![
            vec![0.3, 0.9, 0.1],
            vec![1.0, -0.2, 0.5],
            vec![0.0, 0.4, -1.1],
        ];
        let b = vec![
            vec![0.5, 0.1, 0.7],
            vec![-0.3, 1.0, 0.2],
            vec![0.9, 0.9, 0.0],
        ];
        let map = fit_orthogonal(&as_slices(&a), &as_slices(&b), 3, 3).unwrap();
        let alignment = Alignment::global(map);
        let json = serde_json::to_string(&alignment).unwrap();
        let back: Alignment = serde_json::from_str(&json).unwrap();
        assert_eq!(back, alignment);
    }
}
