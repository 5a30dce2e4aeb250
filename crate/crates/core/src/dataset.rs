//! Synthetic grasps, pose perturbation and evaluation datasets.

use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{contact_maps, one_sided_contact, CapsuleConfig, ContactMap};
use crate::error::{Error, Result};
use crate::hand::{HandModel, HandParams};
use crate::io::{load_mesh, save_mesh};
use crate::loss::Targets;
use crate::mesh::TriMesh;
use crate::primitives::{cylinder, icosphere, subdivided_box};
use crate::rng::{gaussian, gaussian_rotation, rng_for};
use crate::rotation::{compose, log_so3};
use crate::spatial::{PointIndex, SignedDistance};
use crate::synthetic::FLEX_SCALE;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    /// Standard deviation of the noise added to every pose coefficient.
    pub sigma_theta: f64,
    /// Per-axis translation standard deviation (mm).
    pub sigma_translation: f64,
    /// Standard deviation of the rotation angle (degrees).
    pub sigma_rotation: f64,
    pub n_perturbations_per_grasp: usize,
    pub seed: u64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            sigma_theta: 0.5,
            sigma_translation: 50.0,
            sigma_rotation: 15.0,
            n_perturbations_per_grasp: 1,
            seed: 0,
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.sigma_theta, self.sigma_translation, self.sigma_rotation];
        if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidConfig(format!("perturbation sigmas must be non-negative, got {sigmas:?}")));
        }
        Ok(())
    }
}

/// Adds i.i.d. Gaussian noise to the pose coefficients and the translation
/// and composes the rotation (on the left) with a random-axis rotation of
/// Gaussian angle. Shape is left unchanged.
pub fn perturb(params: &HandParams, cfg: &PerturbConfig, rng: &mut impl Rng) -> HandParams {
    let mut p = params.clone();
    for t in &mut p.theta {
        *t += gaussian(rng, cfg.sigma_theta);
    }
    let shift = Vec3::new(
        gaussian(rng, cfg.sigma_translation),
        gaussian(rng, cfg.sigma_translation),
        gaussian(rng, cfg.sigma_translation),
    );
    p.set_translation(p.translation() + shift);
    if cfg.sigma_rotation > 0.0 {
        let spin = gaussian_rotation(rng, cfg.sigma_rotation.to_radians());
        p.set_rotation(compose(&spin, &p.rotation()));
    }
    p
}

/// Primitive grasp objects, centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObjectShape {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
    /// Axis along z.
    Cylinder { radius: f64, half_height: f64 },
}

impl ObjectShape {
    pub fn mesh(&self) -> TriMesh {
        match *self {
            ObjectShape::Sphere { radius } => icosphere(radius, 3),
            ObjectShape::Box { half_extents } => subdivided_box(Vec3::from(half_extents), 8),
            ObjectShape::Cylinder { radius, half_height } => {
                let rings = (half_height / 6.0).ceil() as usize;
                cylinder(radius, half_height, 40, rings.max(4))
            }
        }
    }
}

/// A hand pose in contact with an object.
#[derive(Debug, Clone)]
pub struct Grasp {
    pub shape: ObjectShape,
    pub object: TriMesh,
    pub params: HandParams,
}

/// Palm centre on the palmar face, in the rest frame of the synthetic hand.
const PALM_CENTER: Vec3 = Vec3::new(0.0, 40.0, -11.0);
/// Gap (mm) left between the palm and the object surface.
const PALM_GAP: f64 = 0.5;
const CLOSE_STEP_DEG: f64 = 0.5;
const MAX_FLEX_DEG: f64 = 120.0;

/// Hand rotation and translation putting the palm centre at `contact` with
/// the palm facing `-outward` and the fingers pointing along `along`.
fn place_palm(contact: &Vec3, outward: &Vec3, along: &Vec3) -> (Vec3, Vec3) {
    let z = *outward;
    let y = (along - z * along.dot(&z)).normalize();
    let x = y.cross(&z);
    let rot = Matrix3::from_columns(&[x, y, z]);
    let translation = contact + outward * PALM_GAP - rot * PALM_CENTER;
    (log_so3(&rot), translation)
}

fn random_unit_perpendicular(axis: &Vec3, rng: &mut impl Rng) -> Vec3 {
    let helper = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = axis.cross(&helper).normalize();
    let v = axis.cross(&u);
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    u * a.cos() + v * a.sin()
}

/// Random object with the hand's palm resting against it, fingers open.
fn open_grasp(model: &HandModel, rng: &mut impl Rng, kind: usize) -> (ObjectShape, HandParams) {
    let mut params = model.zero_params();
    let (shape, rotation, translation) = match kind % 3 {
        0 => {
            let radius = rng.random_range(20.0..40.0);
            let outward = crate::rng::random_axis(rng);
            let along = random_unit_perpendicular(&outward, rng);
            let (r, t) = place_palm(&(outward * radius), &outward, &along);
            (ObjectShape::Sphere { radius }, r, t)
        }
        1 => {
            let half = [
                rng.random_range(25.0..35.0),
                rng.random_range(20.0..30.0),
                rng.random_range(20.0..35.0),
            ];
            // palm on the +z face, fingers across the shorter y extent
            let (r, t) = place_palm(&Vec3::new(0.0, -8.0, half[2]), &Vec3::z(), &Vec3::y());
            (ObjectShape::Box { half_extents: half }, r, t)
        }
        _ => {
            let radius = rng.random_range(18.0..30.0);
            let half_height = rng.random_range(45.0..60.0);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let outward = Vec3::new(angle.cos(), angle.sin(), 0.0);
            let along = Vec3::z().cross(&outward);
            let height = rng.random_range(-10.0..10.0);
            let (r, t) = place_palm(&(outward * radius + Vec3::z() * height), &outward, &along);
            (ObjectShape::Cylinder { radius, half_height }, r, t)
        }
    };
    params.set_rotation(rotation);
    params.set_translation(translation);
    // slight random spread of the digits
    for finger in 6..params.theta.len().min(12) {
        params.theta[finger] = rng.random_range(-0.3..0.3);
    }
    (shape, params)
}

/// Link contact: some link vertex within `c_rad` of an object capsule or
/// inside the object.
fn link_touches(
    object: &TriMesh,
    object_sdf: &SignedDistance,
    hand: &TriMesh,
    link: &[usize],
    capsule: &CapsuleConfig,
) -> Result<bool> {
    let points: Vec<Vec3> = link.iter().map(|&v| hand.vertices[v]).collect();
    if points.iter().any(|p| object_sdf.eval(p) <= 0.0) {
        return Ok(true);
    }
    let index = PointIndex::new(&points);
    let corr = one_sided_contact(&object.vertices, &object.vertex_normals, &index, capsule)?;
    Ok(corr.phi.iter().any(|&phi| phi <= capsule.c_rad))
}

/// Flexes every finger at a fixed angular rate. A link that touches the
/// object stops together with every link closer to the palm; the links
/// beyond it keep closing. A finger already touching at the start is first
/// extended until it clears the object.
pub fn close_fingers(
    model: &HandModel,
    object: &TriMesh,
    start: &HandParams,
    capsule: &CapsuleConfig,
) -> Result<HandParams> {
    let object_sdf = SignedDistance::new(object)?;
    let step = CLOSE_STEP_DEG.to_radians() / FLEX_SCALE;
    let max_steps = (MAX_FLEX_DEG / CLOSE_STEP_DEG).round() as usize;
    let mut params = start.clone();
    for finger in &model.fingers {
        let links: Vec<Vec<usize>> = finger
            .joints
            .iter()
            .map(|&j| (0..model.n_vertices()).filter(|&v| model.dominant_joint(v) == j).collect())
            .collect();
        let touches = |p: &HandParams| -> Result<bool> {
            let posed = model.pose(p)?;
            for link in &links {
                if link_touches(object, &object_sdf, &posed.mesh, link, capsule)? {
                    return Ok(true);
                }
            }
            Ok(false)
        };
        // extend a finger that starts in contact until it is clear
        for _ in 0..max_steps {
            if !touches(&params)? {
                break;
            }
            for &c in &finger.flex_coefficients {
                params.theta[c] -= step;
            }
        }
        let mut moving: Vec<bool> = vec![true; finger.flex_coefficients.len()];
        for _ in 0..max_steps {
            if !moving.iter().any(|&m| m) {
                break;
            }
            let mut trial = params.clone();
            for (k, &c) in finger.flex_coefficients.iter().enumerate() {
                if moving[k] {
                    trial.theta[c] += step;
                }
            }
            let posed = model.pose(&trial)?;
            let mut touched = None;
            for (k, link) in links.iter().enumerate().rev() {
                if moving[k] && link_touches(object, &object_sdf, &posed.mesh, link, capsule)? {
                    touched = Some(k);
                    break;
                }
            }
            match touched {
                // keep the pose at first contact and freeze this link and its ancestors
                Some(k) => {
                    params = trial;
                    moving[..=k].iter_mut().for_each(|m| *m = false);
                }
                None => params = trial,
            }
        }
    }
    Ok(params)
}

/// `n` reproducible grasps cycling through spheres, boxes and cylinders.
pub fn synth_grasps(model: &HandModel, n: usize, seed: u64, capsule: &CapsuleConfig) -> Result<Vec<Grasp>> {
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(seed, &[0x6772_6173, k as u64]);
            let (shape, open) = open_grasp(model, &mut rng, k);
            let object = shape.mesh();
            let params = close_fingers(model, &object, &open, capsule)?;
            Ok(Grasp { shape, object, params })
        })
        .collect()
}

/// One evaluation triple: a perturbed pose, the pose it came from, and the
/// contact targets computed at the true pose.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspSample {
    /// Index into [`Dataset::objects`].
    pub object: usize,
    pub grasp: usize,
    pub true_params: HandParams,
    pub perturbed_params: HandParams,
    pub target_object_contact: ContactMap,
    pub target_hand_contact: ContactMap,
}

impl GraspSample {
    pub fn targets(&self) -> Targets {
        Targets {
            object: self.target_object_contact.clone(),
            hand: Some(self.target_hand_contact.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub objects: Vec<TriMesh>,
    pub samples: Vec<GraspSample>,
}

/// `n_perturbations_per_grasp` samples per grasp with targets from the true
/// pose. Sample `p` of grasp `g` draws its noise from the stream `(seed, g, p)`.
pub fn make_dataset(
    model: &HandModel,
    grasps: &[(TriMesh, HandParams)],
    cfg: &PerturbConfig,
    capsule: &CapsuleConfig,
) -> Result<Dataset> {
    cfg.validate()?;
    let per_grasp: Vec<Vec<GraspSample>> = grasps
        .par_iter()
        .enumerate()
        .map(|(g, (object, truth))| {
            let posed = model.pose(truth)?;
            let contact = contact_maps(object, &posed.mesh, capsule)?;
            Ok((0..cfg.n_perturbations_per_grasp)
                .map(|p| {
                    let mut rng = rng_for(cfg.seed, &[0x7065_7274, g as u64, p as u64]);
                    GraspSample {
                        object: g,
                        grasp: g,
                        true_params: truth.clone(),
                        perturbed_params: perturb(truth, cfg, &mut rng),
                        target_object_contact: contact.object.clone(),
                        target_hand_contact: contact.hand.clone(),
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        objects: grasps.iter().map(|(o, _)| o.clone()).collect(),
        samples: per_grasp.into_iter().flatten().collect(),
    })
}

pub const DATASET_FORMAT: &str = "handcontact-dataset";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestSample {
    id: String,
    object: String,
    grasp: usize,
    true_params: String,
    perturbed_params: String,
    target_object_contact: String,
    target_hand_contact: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetManifest {
    format: String,
    version: u32,
    objects: Vec<String>,
    samples: Vec<ManifestSample>,
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    Error::format(path, e)
}

impl Dataset {
    /// Writes `manifest.json`, `objects/object_NNNN.obj` and one directory
    /// per sample under `samples/`. Paths in the manifest are relative.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        mkdir(&dir.join("objects"))?;
        mkdir(&dir.join("samples"))?;
        let mut objects = Vec::with_capacity(self.objects.len());
        for (k, object) in self.objects.iter().enumerate() {
            let rel = format!("objects/object_{k:04}.obj");
            save_mesh(object, &dir.join(&rel), 1.0)?;
            objects.push(rel);
        }
        let mut samples = Vec::with_capacity(self.samples.len());
        for (k, s) in self.samples.iter().enumerate() {
            let id = format!("sample_{k:04}");
            let base = format!("samples/{id}");
            mkdir(&dir.join(&base))?;
            let entry = ManifestSample {
                id,
                object: objects[s.object].clone(),
                grasp: s.grasp,
                true_params: format!("{base}/true_params.json"),
                perturbed_params: format!("{base}/perturbed_params.json"),
                target_object_contact: format!("{base}/target_object_contact.json"),
                target_hand_contact: format!("{base}/target_hand_contact.json"),
            };
            s.true_params.save(&dir.join(&entry.true_params))?;
            s.perturbed_params.save(&dir.join(&entry.perturbed_params))?;
            s.target_object_contact.save(&dir.join(&entry.target_object_contact))?;
            s.target_hand_contact.save(&dir.join(&entry.target_hand_contact))?;
            samples.push(entry);
        }
        let manifest = DatasetManifest {
            format: DATASET_FORMAT.into(),
            version: 1,
            objects,
            samples,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| json_error(&path, e))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| json_error(&path, e))?;
        if manifest.format != DATASET_FORMAT {
            return Err(Error::format(&path, format!("unexpected format {:?}", manifest.format)));
        }
        let objects = manifest
            .objects
            .iter()
            .map(|rel| load_mesh(&dir.join(rel), 1.0))
            .collect::<Result<Vec<_>>>()?;
        let samples = manifest
            .samples
            .iter()
            .map(|s| {
                let object = manifest
                    .objects
                    .iter()
                    .position(|o| *o == s.object)
                    .ok_or_else(|| Error::format(&path, format!("sample {} names unknown object {}", s.id, s.object)))?;
                let sample = GraspSample {
                    object,
                    grasp: s.grasp,
                    true_params: HandParams::load(&dir.join(&s.true_params))?,
                    perturbed_params: HandParams::load(&dir.join(&s.perturbed_params))?,
                    target_object_contact: ContactMap::load(&dir.join(&s.target_object_contact))?,
                    target_hand_contact: ContactMap::load(&dir.join(&s.target_hand_contact))?,
                };
                Error::check_len("object target map", objects[object].len(), sample.target_object_contact.len())?;
                Ok(sample)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { objects, samples })
    }

    pub fn sample_dir(dir: &Path, index: usize) -> PathBuf {
        dir.join("samples").join(format!("sample_{index:04}"))
    }
}
