//! Target contact sources, per-point features for external contact
//! predictors, and contact quantization.

use std::path::PathBuf;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contact::{contact_maps, CapsuleConfig, ContactMap, MeshSide};
use crate::error::{Error, Result};
use crate::hand::{HandModel, HandParams};
use crate::loss::{check_targets, Targets};
use crate::mesh::TriMesh;
use crate::rng::rng_for;
use crate::spatial::PointIndex;

/// Where the target contact maps come from.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSource {
    /// Contact map files: the object map and optionally a hand map.
    GroundTruthFile { object: PathBuf, hand: Option<PathBuf> },
    /// Contact maps of the hand posed at these parameters.
    FromReferencePose(HandParams),
    PrecomputedMaps { hand: ContactMap, object: ContactMap },
    /// Object map only; the hand term is dropped.
    ObjectOnly(ContactMap),
}

pub fn resolve_targets(
    source: &TargetSource,
    object: &TriMesh,
    model: &HandModel,
    capsule: &CapsuleConfig,
) -> Result<Targets> {
    let targets = match source {
        TargetSource::GroundTruthFile { object, hand } => Targets {
            object: ContactMap::load_for(object, MeshSide::Object)?,
            hand: hand.as_deref().map(|p| ContactMap::load_for(p, MeshSide::Hand)).transpose()?,
        },
        TargetSource::FromReferencePose(params) => {
            let posed = model.pose(params)?;
            let state = contact_maps(object, &posed.mesh, capsule)?;
            Targets {
                object: state.object,
                hand: Some(state.hand),
            }
        }
        TargetSource::PrecomputedMaps { hand, object } => Targets {
            object: object.clone(),
            hand: Some(hand.clone()),
        },
        TargetSource::ObjectOnly(map) => Targets {
            object: map.clone(),
            hand: None,
        },
    };
    check_targets(&targets, object.len(), model.n_vertices())?;
    Ok(targets)
}

/// Geometric features of one point relative to the opposing mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointFeature {
    /// Vertex index within its own mesh.
    pub vertex: usize,
    /// 1 for hand points, 0 for object points.
    pub is_hand: u8,
    /// Distance (mm) to the nearest vertex of the other mesh.
    pub distance: f64,
    /// Dot product of this point's normal with the nearest vertex's normal.
    pub normal_dot: f64,
    /// Dot product of this point's normal with the unit direction to the
    /// nearest vertex; zero when the two coincide.
    pub offset_dot: f64,
}

/// Sampled object points followed by every hand vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFeatures {
    pub points: Vec<PointFeature>,
}

fn features_against(
    from: &TriMesh,
    vertices: impl Iterator<Item = usize>,
    to: &TriMesh,
    index: &PointIndex,
    is_hand: u8,
) -> Vec<PointFeature> {
    vertices
        .map(|v| {
            let (j, distance) = index.nearest(&from.vertices[v]).expect("opposing mesh is non-empty");
            let n = from.vertex_normals[v];
            let offset_dot = if distance > 0.0 {
                n.dot(&((to.vertices[j] - from.vertices[v]) / distance))
            } else {
                0.0
            };
            PointFeature {
                vertex: v,
                is_hand,
                distance,
                normal_dot: n.dot(&to.vertex_normals[j]),
                offset_dot,
            }
        })
        .collect()
}

/// Features of `n_object_samples` object vertices (drawn without
/// replacement, or with replacement when more are requested than exist) and
/// of every hand vertex.
pub fn extract_features(object: &TriMesh, hand: &TriMesh, n_object_samples: usize, seed: u64) -> Result<PointFeatures> {
    if object.is_empty() || hand.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut rng = rng_for(seed, &[0x6665_6174]);
    let picks: Vec<usize> = if n_object_samples <= object.len() {
        sample(&mut rng, object.len(), n_object_samples).into_vec()
    } else {
        (0..n_object_samples).map(|_| rng.random_range(0..object.len())).collect()
    };
    let hand_index = PointIndex::new(&hand.vertices);
    let object_index = PointIndex::new(&object.vertices);
    let mut points = features_against(object, picks.into_iter(), hand, &hand_index, 0);
    points.extend(features_against(hand, 0..hand.len(), object, &object_index, 1));
    Ok(PointFeatures { points })
}

impl PointFeatures {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex,is_hand,distance,normal_dot,offset_dot\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.vertex, p.is_hand, p.distance, p.normal_dot, p.offset_dot
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("features serialize")
    }
}

/// Uniform-width bin of every value; 1.0 falls in the last bin.
pub fn quantize_contact(map: &ContactMap, n_bins: usize) -> Result<Vec<usize>> {
    if n_bins < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 bins, got {n_bins}")));
    }
    Ok(map
        .values
        .iter()
        .map(|&v| ((v * n_bins as f64).floor() as usize).min(n_bins - 1))
        .collect())
}

/// Bin centres.
pub fn dequantize_contact(bins: &[usize], n_bins: usize, mesh: MeshSide) -> Result<ContactMap> {
    if n_bins < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 bins, got {n_bins}")));
    }
    if let Some(&b) = bins.iter().find(|&&b| b >= n_bins) {
        return Err(Error::InvalidConfig(format!("bin {b} out of range for {n_bins} bins")));
    }
    ContactMap::new(mesh, bins.iter().map(|&b| (b as f64 + 0.5) / n_bins as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::icosphere;
    use crate::spatial::nearest_brute_force;
    use crate::Vec3;

    fn map(values: Vec<f64>) -> ContactMap {
        ContactMap::new(MeshSide::Object, values).unwrap()
    }

    #[test]
    fn quantization_examples() {
        assert_eq!(quantize_contact(&map(vec![0.0, 1.0, 0.55]), 10).unwrap(), vec![0, 9, 5]);
        assert!(quantize_contact(&map(vec![0.5]), 1).is_err());
    }

    #[test]
    fn dequantize_within_half_bin() {
        let values: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        for n in [2, 7, 10] {
            let bins = quantize_contact(&map(values.clone()), n).unwrap();
            let back = dequantize_contact(&bins, n, MeshSide::Object).unwrap();
            for (a, b) in values.iter().zip(&back.values) {
                assert!((a - b).abs() <= 0.5 / n as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn features_match_brute_force() {
        let object = icosphere(20.0, 2);
        let hand = icosphere(8.0, 1).transformed(|p| p + Vec3::new(0.0, 0.0, 27.0)).unwrap();
        let f = extract_features(&object, &hand, 50, 3).unwrap();
        assert_eq!(f.points.iter().filter(|p| p.is_hand == 0).count(), 50);
        assert_eq!(f.points.iter().filter(|p| p.is_hand == 1).count(), hand.len());
        for p in &f.points {
            let (from, to) = if p.is_hand == 1 { (&hand, &object) } else { (&object, &hand) };
            let (_, d) = nearest_brute_force(&to.vertices, &from.vertices[p.vertex]).unwrap();
            assert_eq!(p.distance, d);
        }
        assert_eq!(f, extract_features(&object, &hand, 50, 3).unwrap());
        assert_ne!(f, extract_features(&object, &hand, 50, 4).unwrap());
    }

    #[test]
    fn touching_vertex_has_zero_distance() {
        let object = icosphere(20.0, 1);
        let top = object.vertices.iter().cloned().fold(Vec3::zeros(), |a, b| if b.z > a.z { b } else { a });
        let hand = icosphere(5.0, 1).transformed(|p| p + top + Vec3::new(0.0, 0.0, 5.0)).unwrap();
        let f = extract_features(&object, &hand, object.len(), 0).unwrap();
        assert!(f.points.iter().any(|p| p.distance < 1e-9));
    }
}
