//! Synthetic flow-MRI measurements: voxel meshes, phase encoding and noise.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::{read_msh, write_msh, Mesh, PointLocator};
use crate::scalar::vec3::Vec3;
use crate::scalar::Real;

/// Voxel size matching a 1 mm isotropic acquisition, in cm.
pub const DEFAULT_VOXEL_SIZE: f64 = 0.1;
/// Velocity encoding as a multiple of the peak velocity component.
pub const DEFAULT_VENC_FACTOR: f64 = 1.2;
pub const DEFAULT_SNR_DB: f64 = 22.0;

const LOCATE_SLACK: f64 = 1e-8;

/// Voxel-like simplicial mesh with the vertices that fall outside the flow domain flagged.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementMesh<T> {
    pub mesh: Mesh<T>,
    pub voxel_size: f64,
    /// Vertices outside the domain; their values are zero and they are never observed.
    pub clipped: Vec<bool>,
}

impl<T: Real> MeasurementMesh<T> {
    /// Measurements at every vertex of the flow mesh itself.
    pub fn from_domain(domain: &Mesh<T>) -> Self {
        Self { mesh: domain.clone(), voxel_size: 0.0, clipped: vec![false; domain.num_vertices()] }
    }

    pub fn num_observed_vertices(&self) -> usize {
        self.clipped.iter().filter(|c| !**c).count()
    }
}

/// Axis-aligned voxel lattice over the bounding box of `domain`, keeping voxels whose
/// centers lie inside the domain. Squares split into 2 triangles, cubes into 6 tetrahedra.
pub fn build_measurement_mesh<T: Real>(domain: &Mesh<T>, voxel_size: f64) -> Result<MeasurementMesh<T>> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::InvalidInput(format!("voxel size must be positive, got {voxel_size}")));
    }
    let dim = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let lo: Vec<f64> = lo.iter().map(|x| x.to_f64_lossy()).collect();
    let hi: Vec<f64> = hi.iter().map(|x| x.to_f64_lossy()).collect();
    let mut n = [1usize; 3];
    for k in 0..dim {
        let ext = hi[k] - lo[k];
        if voxel_size > ext * (1.0 + 1e-9) {
            return Err(Error::InvalidInput(format!(
                "voxel size {voxel_size} exceeds the domain extent {ext} along axis {k}"
            )));
        }
        n[k] = (ext / voxel_size - 1e-9).ceil().max(1.0) as usize;
    }
    let locator = PointLocator::new(domain);
    let slack = T::lit(LOCATE_SLACK);
    let lattice = |i: [usize; 3]| -> Vec3<T> {
        let mut p = [T::zero(); 3];
        for k in 0..dim {
            p[k] = T::lit(lo[k] + i[k] as f64 * voxel_size);
        }
        p
    };
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    let mut vid = |i: [usize; 3], vertices: &mut Vec<Vec3<T>>| -> usize {
        *index.entry(i).or_insert_with(|| {
            vertices.push(lattice(i));
            vertices.len() - 1
        })
    };
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let mut center = [T::zero(); 3];
                for (a, idx) in [i, j, k].into_iter().enumerate().take(dim) {
                    center[a] = T::lit(lo[a] + (idx as f64 + 0.5) * voxel_size);
                }
                if locator.locate(&center).is_none() {
                    continue;
                }
                if dim == 2 {
                    let a = vid([i, j, 0], &mut vertices);
                    let b = vid([i + 1, j, 0], &mut vertices);
                    let c = vid([i + 1, j + 1, 0], &mut vertices);
                    let d = vid([i, j + 1, 0], &mut vertices);
                    cells.extend_from_slice(&[a, b, c, a, c, d]);
                } else {
                    const PATHS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
                    for path in PATHS {
                        let mut c = [i, j, k];
                        cells.push(vid(c, &mut vertices));
                        for axis in path {
                            c[axis] += 1;
                            cells.push(vid(c, &mut vertices));
                        }
                    }
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidInput("no voxel center lies inside the domain".into()));
    }
    let clipped = vertices.iter().map(|p| locator.locate_with_slack(p, slack).is_none()).collect();
    let mesh = Mesh::with_classifier(dim, vertices, cells, |_, _| 1)?;
    Ok(MeasurementMesh { mesh, voxel_size, clipped })
}

/// Phase-encodes one velocity component and reconstructs it: `φ = π u / venc`, complex
/// Gaussian noise of standard deviation `sigma` per channel, `u = venc · arg(z) / π`.
pub fn encode_component<R: rand::Rng>(u: f64, venc: f64, sigma: f64, rng: &mut R) -> f64 {
    let phi = std::f64::consts::PI * u / venc;
    let (mut re, mut im) = (phi.cos(), phi.sin());
    if sigma > 0.0 {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        re += sigma * a;
        im += sigma * b;
    }
    venc * im.atan2(re) / std::f64::consts::PI
}

/// Per-channel noise standard deviation relative to unit magnetization; `∞` means none.
pub fn snr_sigma(snr_db: f64) -> f64 {
    if snr_db.is_infinite() && snr_db > 0.0 {
        0.0
    } else {
        10f64.powf(-snr_db / 20.0)
    }
}

/// Encodes every value with independent noise drawn from a generator seeded by `seed`.
pub fn encode_velocity(values: &[f64], venc: f64, snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    if !(venc > 0.0) {
        return Err(Error::InvalidInput(format!("venc must be positive, got {venc}")));
    }
    let sigma = snr_sigma(snr_db);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(values.iter().map(|&u| encode_component(u, venc, sigma, &mut rng)).collect())
}

/// Adds iid Gaussian noise with standard deviation `relative_std · max|u|` (the largest
/// nodal speed over all samples) to every velocity value.
pub fn additive_gaussian<T: Real>(samples: &[Vec<T>], dim: usize, relative_std: f64, seed: u64) -> Result<Vec<Vec<T>>> {
    if !(relative_std >= 0.0) {
        return Err(Error::InvalidInput(format!("relative std must be nonnegative, got {relative_std}")));
    }
    let umax = samples.iter().map(|s| max_speed(s, dim)).fold(0.0, f64::max);
    let std = relative_std * umax;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(samples
        .iter()
        .map(|s| {
            s.iter()
                .map(|&x| {
                    if std > 0.0 {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        T::lit(x.to_f64_lossy() + std * z)
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect())
}

fn max_speed<T: Real>(u: &[T], dim: usize) -> f64 {
    u.chunks(dim)
        .map(|c| c.iter().map(|x| x.to_f64_lossy().powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn max_component<T: Real>(u: &[T]) -> f64 {
    u.iter().map(|x| x.to_f64_lossy().abs()).fold(0.0, f64::max)
}

/// How measurement noise was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Exact interpolation.
    None,
    /// Phase encoding with `venc = venc_factor × max |u_i|` and complex noise at `snr_db`.
    Phase { venc_factor: f64, snr_db: f64, seed: u64 },
    /// Additive Gaussian noise relative to the peak speed.
    Additive { relative_std: f64, seed: u64 },
}

/// Linear map from a velocity field on the flow mesh to the observed measurement values
/// (all components at every unclipped measurement vertex).
#[derive(Clone, Debug)]
pub struct ObservationOperator {
    matrix: CsrMatrix<f64>,
    /// Indices into a full measurement field (`vertex * dim + component`).
    selected: Vec<usize>,
}

impl ObservationOperator {
    pub fn new<T: Real>(domain: &Mesh<T>, meas: &MeasurementMesh<T>) -> Result<Self> {
        let dim = domain.dim();
        if meas.mesh.dim() != dim {
            return Err(Error::InvalidInput("measurement and domain dimensions differ".into()));
        }
        let locator = PointLocator::new(domain);
        let slack = T::lit(LOCATE_SLACK);
        let n_obs = meas.num_observed_vertices() * dim;
        let mut b = TripletBuilder::new(n_obs, domain.num_vertices() * dim);
        let mut selected = Vec::with_capacity(n_obs);
        let mut row = 0;
        for (v, p) in meas.mesh.vertices().iter().enumerate() {
            if meas.clipped[v] {
                continue;
            }
            let at = locator.locate_with_slack(p, slack).ok_or_else(|| Error::PointLocation {
                x: p[0].to_f64_lossy(),
                y: p[1].to_f64_lossy(),
                z: p[2].to_f64_lossy(),
            })?;
            for c in 0..dim {
                for (k, &dv) in domain.cell(at.cell).iter().enumerate() {
                    let w = at.bary[k].to_f64_lossy();
                    if w != 0.0 {
                        b.push(row, dv * dim + c, w);
                    }
                }
                selected.push(v * dim + c);
                row += 1;
            }
        }
        Ok(Self { matrix: b.build(), selected })
    }

    pub fn num_observations(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }

    /// Observed values of a flow-mesh velocity field.
    pub fn apply<T: Real>(&self, u: &[T]) -> Vec<f64> {
        let x: Vec<f64> = u.iter().map(|v| v.to_f64_lossy()).collect();
        self.matrix.mul_vec(&x)
    }

    /// Observed entries of a full measurement-mesh field.
    pub fn select<T: Real>(&self, sample: &[T]) -> Vec<f64> {
        self.selected.iter().map(|&i| sample[i].to_f64_lossy()).collect()
    }

    /// Full measurement-mesh field (zero at clipped vertices) of a flow-mesh velocity.
    pub fn interpolate<T: Real>(&self, u: &[T], n_values: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n_values];
        for (i, v) in self.selected.iter().zip(self.apply(u)) {
            out[*i] = T::lit(v);
        }
        out
    }
}

/// Measurement samples on a voxel mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSeries<T> {
    pub mesh: MeasurementMesh<T>,
    pub times: Vec<f64>,
    /// Nodal velocity per sample, `dim` interleaved components per measurement vertex.
    pub samples: Vec<Vec<T>>,
    pub venc: Option<f64>,
    pub noise: NoiseModel,
    pub cadence: f64,
}

/// Samples a trajectory `(t, u)` every `cadence` seconds onto the measurement mesh and
/// applies the noise model.
pub fn synthesize_series<T: Real>(
    trajectory: &[(f64, &[T])],
    domain: &Mesh<T>,
    meas: &MeasurementMesh<T>,
    cadence: f64,
    noise: NoiseModel,
) -> Result<MeasurementSeries<T>> {
    if trajectory.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    if !(cadence > 0.0) {
        return Err(Error::InvalidInput(format!("cadence must be positive, got {cadence}")));
    }
    let picked: Vec<&(f64, &[T])> = trajectory
        .iter()
        .filter(|(t, _)| {
            let r = t / cadence;
            r.round() >= 1.0 && (r - r.round()).abs() < 1e-6
        })
        .collect();
    if picked.is_empty() {
        return Err(Error::InvalidInput(format!("no trajectory sample falls on the {cadence} s cadence")));
    }
    let op = ObservationOperator::new(domain, meas)?;
    let n_values = meas.mesh.num_vertices() * domain.dim();
    let times: Vec<f64> = picked.iter().map(|(t, _)| *t).collect();
    let clean: Vec<Vec<T>> = picked.iter().map(|(_, u)| op.interpolate(u, n_values)).collect();
    let (samples, venc) = match &noise {
        NoiseModel::None => (clean, None),
        NoiseModel::Additive { relative_std, seed } => {
            (additive_gaussian(&clean, domain.dim(), *relative_std, *seed)?, None)
        }
        NoiseModel::Phase { venc_factor, snr_db, seed } => {
            let peak = picked.iter().map(|(_, u)| max_component(u)).fold(0.0, f64::max);
            let venc = venc_factor * peak;
            if !(venc > 0.0) {
                return Err(Error::InvalidInput("velocity encoding needs a nonzero trajectory".into()));
            }
            let sigma = snr_sigma(*snr_db);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let encoded = clean
                .iter()
                .map(|s| {
                    s.iter()
                        .enumerate()
                        .map(|(i, &x)| {
                            if meas.clipped[i / domain.dim()] {
                                x
                            } else {
                                T::lit(encode_component(x.to_f64_lossy(), venc, sigma, &mut rng))
                            }
                        })
                        .collect()
                })
                .collect();
            (encoded, Some(venc))
        }
    };
    Ok(MeasurementSeries { mesh: meas.clone(), times, samples, venc, noise, cadence })
}

#[derive(Serialize, Deserialize)]
struct Meta {
    dim: usize,
    voxel_size_cm: f64,
    cadence_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    venc_cm_s: Option<f64>,
    times_s: Vec<f64>,
    clipped: Vec<usize>,
    noise: NoiseModel,
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    x: f64,
    y: f64,
    z: f64,
    ux: f64,
    uy: f64,
    uz: f64,
}

impl<T: Real> MeasurementSeries<T> {
    pub fn dim(&self) -> usize {
        self.mesh.mesh.dim()
    }

    /// Writes `meta`, `mesh.msh` and one `t_<i>.csv` per sample into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let meta = Meta {
            dim: self.dim(),
            voxel_size_cm: self.mesh.voxel_size,
            cadence_s: self.cadence,
            venc_cm_s: self.venc,
            times_s: self.times.clone(),
            clipped: (0..self.mesh.clipped.len()).filter(|&i| self.mesh.clipped[i]).collect(),
            noise: self.noise.clone(),
        };
        let text = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join("meta"), text)?;
        write_msh(&self.mesh.mesh, dir.join("mesh.msh"))?;
        let dim = self.dim();
        for (i, s) in self.samples.iter().enumerate() {
            let mut w = csv::Writer::from_path(dir.join(format!("t_{i}.csv"))).map_err(csv_error)?;
            for (v, p) in self.mesh.mesh.vertices().iter().enumerate() {
                let u = |c: usize| if c < dim { s[v * dim + c].to_f64_lossy() } else { 0.0 };
                w.serialize(SampleRow {
                    x: p[0].to_f64_lossy(),
                    y: p[1].to_f64_lossy(),
                    z: p[2].to_f64_lossy(),
                    ux: u(0),
                    uy: u(1),
                    uz: u(2),
                })
                .map_err(csv_error)?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = fs::read_to_string(dir.join("meta"))?;
        let meta: Meta = toml::from_str(&text).map_err(|e| Error::Config(format!("measurement meta: {e}")))?;
        let mesh: Mesh<T> = read_msh(dir.join("mesh.msh"))?;
        if mesh.dim() != meta.dim {
            return Err(Error::InvalidInput("measurement mesh dimension does not match meta".into()));
        }
        let mut clipped = vec![false; mesh.num_vertices()];
        for i in meta.clipped {
            *clipped.get_mut(i).ok_or_else(|| Error::InvalidInput(format!("clipped vertex {i} out of range")))? = true;
        }
        let dim = meta.dim;
        let mut samples = Vec::with_capacity(meta.times_s.len());
        for i in 0..meta.times_s.len() {
            let mut r = csv::Reader::from_path(dir.join(format!("t_{i}.csv"))).map_err(csv_error)?;
            let mut s = Vec::with_capacity(mesh.num_vertices() * dim);
            for row in r.deserialize() {
                let row: SampleRow = row.map_err(csv_error)?;
                s.extend([row.ux, row.uy, row.uz].iter().take(dim).map(|&x| T::lit(x)));
            }
            if s.len() != mesh.num_vertices() * dim {
                return Err(Error::InvalidInput(format!("t_{i}.csv has the wrong number of rows")));
            }
            samples.push(s);
        }
        Ok(Self {
            mesh: MeasurementMesh { mesh, voxel_size: meta.voxel_size_cm, clipped },
            times: meta.times_s,
            samples,
            venc: meta.venc_cm_s,
            noise: meta.noise,
            cadence: meta.cadence_s,
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}
