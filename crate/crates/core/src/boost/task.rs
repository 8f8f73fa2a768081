use crate::charts::ChartId;
use crate::geom::{double_area, Vec3, C64};
use crate::losses::LandmarkSpec;
use crate::mesh::{interpolate, locate_on_sphere, TriMesh};
use crate::{Error, Result};

use super::sphere::{ChartPoint, StandardSphere};

/// Landmark curves located once on the standard sphere.
#[derive(Clone, Debug)]
pub struct LandmarkTask {
    pub spec: LandmarkSpec,
    pub points: Vec<Vec<ChartPoint>>,
}

impl LandmarkTask {
    /// `moving_vertices` resolves index-based curves.
    pub fn new(sphere: &StandardSphere, spec: LandmarkSpec, moving_vertices: &[Vec3]) -> Result<Self> {
        spec.validate()?;
        let points = spec
            .curves
            .iter()
            .map(|c| {
                c.moving
                    .resolve(moving_vertices)?
                    .into_iter()
                    .map(|p| sphere.locate(p))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, points })
    }
}

/// Per-disk-vertex tables of a field on the standard sphere, one per chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartTables {
    pub south: Vec<f64>,
    pub north: Vec<f64>,
}

impl ChartTables {
    pub fn from_sphere_values(sphere: &StandardSphere, values: &[f64]) -> Self {
        Self {
            south: sphere.south_to_sphere.iter().map(|&v| values[v]).collect(),
            north: sphere.north_to_sphere.iter().map(|&v| values[v]).collect(),
        }
    }

    fn table(&self, chart: ChartId) -> &[f64] {
        match chart {
            ChartId::South => &self.south,
            ChartId::North => &self.north,
        }
    }
}

/// Where a deformed chart coordinate samples the standard-sphere tables.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Sample {
    chart: ChartId,
    face: usize,
    weights: [f64; 3],
    /// Gradients of the three barycentric weights in the sampled chart.
    basis: [C64; 3],
    /// `dq/dw` when the sample crossed to the other chart.
    jacobian: Option<C64>,
}

impl Sample {
    /// Points outside the unit disk of `chart` are read in the other chart
    /// through `q = 1/w`.
    pub(crate) fn at(sphere: &StandardSphere, chart: ChartId, w: C64) -> Result<Self> {
        let (chart, q, jacobian) = if w.norm() <= 1.0 {
            (chart, w, None)
        } else {
            let q = w.inv();
            (chart.other(), q, Some(-q * q))
        };
        let at = sphere.disk_handle(q).ok_or(Error::PointOutside {
            index: 0,
            x: q.re,
            y: q.im,
        })?;
        let f = sphere.disk.faces[at.face];
        let p = f.map(|v| sphere.disk.point2(v));
        let d = double_area(p[0], p[1], p[2]);
        let i = C64::new(0.0, 1.0);
        let basis = std::array::from_fn(|j| i * (p[(j + 2) % 3] - p[(j + 1) % 3]) / d);
        Ok(Self {
            chart,
            face: at.face,
            weights: at.weights,
            basis,
            jacobian,
        })
    }

    /// Value of the table's piecewise-linear interpolant and its gradient
    /// with respect to the deformed coordinate.
    pub(crate) fn read(&self, sphere: &StandardSphere, tables: &ChartTables) -> (f64, C64) {
        let t = tables.table(self.chart);
        let f = sphere.disk.faces[self.face];
        let mut value = 0.0;
        let mut grad = C64::new(0.0, 0.0);
        for j in 0..3 {
            value += self.weights[j] * t[f[j]];
            grad += self.basis[j] * t[f[j]];
        }
        if let Some(jac) = self.jacobian {
            grad = jac.conj() * grad;
        }
        (value, grad)
    }
}

/// Moving intensity per standard-sphere vertex and the fixed intensity as
/// chart tables.
#[derive(Clone, Debug)]
pub struct IntensityTask {
    pub moving: Vec<f64>,
    pub fixed: ChartTables,
}

/// Values of a per-vertex field on `source` at points of the sphere.
pub fn transfer_field(source: &TriMesh, values: &[f64], points: &[Vec3]) -> Result<Vec<f64>> {
    if values.len() != source.num_vertices() {
        return Err(Error::SizeMismatch {
            what: "per-vertex field",
            expected: source.num_vertices(),
            got: values.len(),
        });
    }
    let handles = locate_on_sphere(source, points)?;
    interpolate(source, &handles, values)
}

impl IntensityTask {
    pub fn new(
        sphere: &StandardSphere,
        moving_mesh: &TriMesh,
        moving: &[f64],
        fixed_mesh: &TriMesh,
        fixed: &[f64],
    ) -> Result<Self> {
        let pts = &sphere.sphere.vertices;
        let moving = transfer_field(moving_mesh, moving, pts)?;
        let fixed = transfer_field(fixed_mesh, fixed, pts)?;
        Ok(Self {
            moving,
            fixed: ChartTables::from_sphere_values(sphere, &fixed),
        })
    }
}

/// Parcel memberships on the standard sphere, transported softly.
#[derive(Clone, Debug)]
pub struct LabelTask {
    pub parcels: usize,
    pub moving: Vec<Vec<f64>>,
    pub fixed: Vec<ChartTables>,
}

fn one_hot(labels: &[usize], parcels: usize) -> Vec<Vec<f64>> {
    (0..parcels)
        .map(|p| labels.iter().map(|&l| if l == p { 1.0 } else { 0.0 }).collect())
        .collect()
}

impl LabelTask {
    pub fn new(
        sphere: &StandardSphere,
        moving_mesh: &TriMesh,
        moving: &[usize],
        fixed_mesh: &TriMesh,
        fixed: &[usize],
    ) -> Result<Self> {
        let parcels = moving.iter().chain(fixed).max().map_or(0, |m| m + 1);
        if parcels == 0 {
            return Err(Error::EmptySet);
        }
        let pts = &sphere.sphere.vertices;
        let mh = locate_on_sphere(moving_mesh, pts)?;
        let fh = locate_on_sphere(fixed_mesh, pts)?;
        let mut mv = Vec::with_capacity(parcels);
        let mut fx = Vec::with_capacity(parcels);
        for (m, f) in one_hot(moving, parcels).into_iter().zip(one_hot(fixed, parcels)) {
            mv.push(interpolate(moving_mesh, &mh, &m)?);
            fx.push(ChartTables::from_sphere_values(sphere, &interpolate(fixed_mesh, &fh, &f)?));
        }
        Ok(Self {
            parcels,
            moving: mv,
            fixed: fx,
        })
    }
}

/// Everything the task loss needs, already on the standard sphere. The task
/// loss is the sum of the terms present.
#[derive(Clone, Debug, Default)]
pub struct TaskContext {
    pub landmarks: Option<LandmarkTask>,
    pub intensity: Option<IntensityTask>,
    pub labels: Option<LabelTask>,
}

impl TaskContext {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_none() && self.intensity.is_none() && self.labels.is_none()
    }
}
