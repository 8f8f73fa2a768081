use crate::charts::ChartId;
use crate::geom::{barycentric, normalize, Vec3, C64};
use crate::mesh::{boundary_loop, disk_mesh, orient_outward, vertex_neighbors, Dim, PointLocator, TriMesh};
use crate::{Error, Result};

/// The sphere built from two copies of the standard disk: the south-chart
/// lift of every disk vertex (upper hemisphere, equator included) followed by
/// the north-chart lift of every interior disk vertex (lower hemisphere).
#[derive(Clone, Debug)]
pub struct StandardSphere {
    pub rings: usize,
    pub disk: TriMesh,
    /// Outward-oriented sphere mesh.
    pub sphere: TriMesh,
    /// Chart and disk vertex that each sphere vertex is read from.
    pub sources: Vec<(ChartId, usize)>,
    /// Sphere vertex of each south-chart disk vertex.
    pub south_to_sphere: Vec<usize>,
    /// Sphere vertex of each north-chart disk vertex; boundary vertices map to
    /// their south partner.
    pub north_to_sphere: Vec<usize>,
    /// `(south disk vertex, north disk vertex)` for each point of the seam.
    pub seam_pairs: Vec<(usize, usize)>,
    locator: PointLocator,
}

impl StandardSphere {
    pub fn new(rings: usize) -> Result<Self> {
        if rings < 2 {
            return Err(Error::InvalidArgument(format!("standard sphere needs rings >= 2, got {rings}")));
        }
        let disk = disk_mesh(rings)?;
        let pts = disk.points2();
        let nd = disk.num_vertices();
        let boundary = boundary_loop(&disk)?;
        let ring0 = crate::mesh::disk_ring_start(rings);
        let n = 6 * rings;

        let mut vertices: Vec<Vec3> = pts.iter().map(|&w| ChartId::South.lift(w)).collect();
        let mut sources: Vec<(ChartId, usize)> = (0..nd).map(|d| (ChartId::South, d)).collect();
        let south_to_sphere: Vec<usize> = (0..nd).collect();
        let mut north_to_sphere = vec![usize::MAX; nd];
        let mut seam_pairs = Vec::with_capacity(boundary.len());
        for d in 0..nd {
            if d >= ring0 {
                // the north lift of b equals the south lift of conj(b)
                let j = d - ring0;
                let partner = ring0 + (n - j) % n;
                north_to_sphere[d] = partner;
                seam_pairs.push((partner, d));
            } else {
                north_to_sphere[d] = vertices.len();
                vertices.push(ChartId::North.lift(pts[d]));
                sources.push((ChartId::North, d));
            }
        }
        seam_pairs.sort_unstable();
        let mut faces = disk.faces.clone();
        faces.extend(disk.faces.iter().map(|f| f.map(|v| north_to_sphere[v])));
        let sphere = orient_outward(&TriMesh::new(vertices, faces, Dim::Three)?)?;
        let locator = PointLocator::new(&disk);
        Ok(Self {
            rings,
            disk,
            sphere,
            sources,
            south_to_sphere,
            north_to_sphere,
            seam_pairs,
            locator,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.sphere.num_vertices()
    }

    pub fn chart_to_sphere(&self, chart: ChartId) -> &[usize] {
        match chart {
            ChartId::South => &self.south_to_sphere,
            ChartId::North => &self.north_to_sphere,
        }
    }

    /// Sphere positions from both charts: every vertex is the lift of its
    /// source chart's image, so the seam comes from the south chart.
    pub fn glue(&self, south: &[C64], north: &[C64]) -> Vec<Vec3> {
        self.sources
            .iter()
            .map(|&(c, d)| match c {
                ChartId::South => c.lift(south[d]),
                ChartId::North => c.lift(north[d]),
            })
            .collect()
    }

    /// Locates a chart point on the disk. Points just outside the polygonal
    /// boundary keep the unclamped weights of the nearest face, so linear maps
    /// are reproduced exactly.
    pub fn disk_handle(&self, w: C64) -> Option<DiskPoint> {
        if let Some((face, weights)) = self.locator.locate(w) {
            return Some(DiskPoint { face, weights });
        }
        let h = self.locator.nearest_handle(w)?;
        let f = self.disk.faces[h.face];
        let [a, b, c] = f.map(|v| self.disk.point2(v));
        Some(DiskPoint {
            face: h.face,
            weights: barycentric(w, a, b, c),
        })
    }

    /// Chart handle of a unit-sphere point: south chart on the upper
    /// hemisphere (equator included), north chart below.
    pub fn locate(&self, p: Vec3) -> Result<ChartPoint> {
        let chart = if p[2] >= 0.0 { ChartId::South } else { ChartId::North };
        let w = chart.project(normalize(p))?;
        let at = self.disk_handle(w).ok_or(Error::PointOutside {
            index: 0,
            x: w.re,
            y: w.im,
        })?;
        Ok(ChartPoint { chart, at })
    }

    /// Planar seam mesh in the north chart: the seam ring plus two rings on
    /// each side, with south-side vertices moved across by `1/w`. Returns the
    /// mesh at reference positions, the sphere vertex of each local vertex, and
    /// the local seam indices.
    pub fn seam_mesh(&self) -> Result<SeamMesh> {
        if self.rings < 3 {
            return Err(Error::InvalidArgument(format!(
                "the seam mesh needs rings >= 3, got {}",
                self.rings
            )));
        }
        let nb = vertex_neighbors(&self.sphere);
        let seam: Vec<usize> = self.seam_pairs.iter().map(|&(s, _)| s).collect();
        let mut depth = vec![usize::MAX; self.num_vertices()];
        let mut frontier = seam.clone();
        for &s in &seam {
            depth[s] = 0;
        }
        for d in 1..=2 {
            let mut next = Vec::new();
            for &v in &frontier {
                for &u in &nb[v] {
                    if depth[u] == usize::MAX {
                        depth[u] = d;
                        next.push(u);
                    }
                }
            }
            frontier = next;
        }
        let sphere_of: Vec<usize> = (0..self.num_vertices()).filter(|&v| depth[v] != usize::MAX).collect();
        let mut local = vec![usize::MAX; self.num_vertices()];
        for (i, &v) in sphere_of.iter().enumerate() {
            local[v] = i;
        }
        let faces: Vec<[usize; 3]> = self
            .sphere
            .faces
            .iter()
            .filter(|f| f.iter().all(|&v| local[v] != usize::MAX))
            .map(|f| f.map(|v| local[v]))
            .collect();
        let reference = self.seam_positions(&sphere_of, &self.disk.points2(), &self.disk.points2())?;
        let mesh = TriMesh::from_points2(&reference, faces)?;
        let seam_local = seam.iter().map(|&s| local[s]).collect();
        Ok(SeamMesh {
            mesh,
            sphere_of,
            seam: seam_local,
        })
    }

    /// North-chart positions of the given sphere vertices.
    pub(crate) fn seam_positions(&self, sphere_of: &[usize], south: &[C64], north: &[C64]) -> Result<Vec<C64>> {
        sphere_of
            .iter()
            .map(|&v| match self.sources[v] {
                (ChartId::North, d) => Ok(north[d]),
                (ChartId::South, d) => {
                    let w = south[d];
                    if w.norm() < 1e-9 {
                        Err(Error::SeamSingularity(d))
                    } else {
                        Ok(w.inv())
                    }
                }
            })
            .collect()
    }
}

/// Planar neighborhood of the seam in the north chart.
#[derive(Clone, Debug)]
pub struct SeamMesh {
    pub mesh: TriMesh,
    pub sphere_of: Vec<usize>,
    pub seam: Vec<usize>,
}

/// Raw barycentric location on the standard disk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiskPoint {
    pub face: usize,
    pub weights: [f64; 3],
}

impl DiskPoint {
    pub fn interpolate(&self, disk: &TriMesh, values: &[C64]) -> C64 {
        let f = disk.faces[self.face];
        values[f[0]] * self.weights[0] + values[f[1]] * self.weights[1] + values[f[2]] * self.weights[2]
    }

    pub fn interpolate_real(&self, disk: &TriMesh, values: &[f64]) -> f64 {
        let f = disk.faces[self.face];
        values[f[0]] * self.weights[0] + values[f[1]] * self.weights[1] + values[f[2]] * self.weights[2]
    }
}

/// A sphere point expressed in one chart of the standard sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartPoint {
    pub chart: ChartId,
    pub at: DiskPoint,
}

impl ChartPoint {
    /// Deformed chart coordinate and its lift.
    pub fn deform(&self, disk: &TriMesh, south: &[C64], north: &[C64]) -> (C64, Vec3) {
        let map = match self.chart {
            ChartId::South => south,
            ChartId::North => north,
        };
        let w = self.at.interpolate(disk, map);
        (w, self.chart.lift(w))
    }
}
