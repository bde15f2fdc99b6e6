use crate::error::{Error, Result};
use crate::scalar::{dist2, norm, Point3, Real};

/// One object sample: positions plus optional unit normals and ground-truth anomaly mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T: Real> {
    id: String,
    points: Vec<Point3<T>>,
    normals: Option<Vec<Point3<T>>>,
    anomaly_mask: Option<Vec<bool>>,
}

fn unit_tolerance<T: Real>() -> T {
    T::lit(1e-6).max(T::epsilon() * T::lit(16.0))
}

impl<T: Real> PointCloud<T> {
    /// Builds a cloud, rejecting NaN or infinite coordinates.
    pub fn new(id: impl Into<String>, points: Vec<Point3<T>>) -> Result<Self> {
        if let Some(i) = points
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self {
            id: id.into(),
            points,
            normals: None,
            anomaly_mask: None,
        })
    }

    /// Attaches normals. Every normal must have unit length within 1e-6.
    pub fn with_normals(mut self, normals: Vec<Point3<T>>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "{} normals for {} points",
                normals.len(),
                self.points.len()
            )));
        }
        let tol = unit_tolerance::<T>();
        if let Some(i) = normals
            .iter()
            .position(|n| !((norm(n) - T::one()).abs() <= tol))
        {
            return Err(Error::invalid(format!("normal {i} is not unit length")));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_anomaly_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "{} mask entries for {} points",
                mask.len(),
                self.points.len()
            )));
        }
        self.anomaly_mask = Some(mask);
        Ok(self)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn set_id(&mut self, id: impl Into<String>) {
        self.id = id.into();
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Point3<T>]> {
        self.normals.as_deref()
    }

    pub fn anomaly_mask(&self) -> Option<&[bool]> {
        self.anomaly_mask.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Converts the coordinate type, e.g. `f64` to `f32`.
    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        let conv = |p: &Point3<T>| p.map(|c| U::lit(c.to_f64_lossy()));
        PointCloud {
            id: self.id.clone(),
            points: self.points.iter().map(conv).collect(),
            normals: self.normals.as_ref().map(|ns| {
                ns.iter()
                    .map(|n| {
                        let m = conv(n);
                        let l = norm(&m);
                        m.map(|c| c / l)
                    })
                    .collect()
            }),
            anomaly_mask: self.anomaly_mask.clone(),
        }
    }
}

/// Arithmetic mean of all point coordinates.
pub fn centroid<T: Real>(cloud: &PointCloud<T>) -> Result<Point3<T>> {
    mean_point(cloud.points())
}

pub(crate) fn mean_point<T: Real>(points: &[Point3<T>]) -> Result<Point3<T>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("point cloud"));
    }
    let mut acc = [T::zero(); 3];
    for p in points {
        acc[0] += p[0];
        acc[1] += p[1];
        acc[2] += p[2];
    }
    let n = T::from_usize_lossy(points.len());
    Ok(acc.map(|c| c / n))
}

/// Index of the point farthest from the centroid, lowest index on ties.
pub fn choose_start_point<T: Real>(cloud: &PointCloud<T>) -> Result<usize> {
    let c = centroid(cloud)?;
    let mut best = 0;
    let mut best_d = T::neg_infinity();
    for (i, p) in cloud.points().iter().enumerate() {
        let d = dist2(p, &c);
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}

/// Centers the cloud at its centroid and scales it uniformly so the largest radius is 1.
pub fn normalize_cloud<T: Real>(cloud: &PointCloud<T>) -> Result<PointCloud<T>> {
    let c = centroid(cloud)?;
    let radius = cloud
        .points()
        .iter()
        .map(|p| dist2(p, &c))
        .fold(T::zero(), T::max)
        .sqrt();
    if !(radius > T::zero()) {
        return Err(Error::DegenerateInput("all points coincide".into()));
    }
    let points = cloud
        .points()
        .iter()
        .map(|p| [(p[0] - c[0]) / radius, (p[1] - c[1]) / radius, (p[2] - c[2]) / radius])
        .collect();
    Ok(PointCloud {
        id: cloud.id.clone(),
        points,
        normals: cloud.normals.clone(),
        anomaly_mask: cloud.anomaly_mask.clone(),
    })
}

/// Per-axis standardization to mean 0 and population variance 1.
pub fn standardize_cloud<T: Real>(cloud: &PointCloud<T>) -> Result<PointCloud<T>> {
    let mean = centroid(cloud)?;
    let n = T::from_usize_lossy(cloud.len());
    let mut var = [T::zero(); 3];
    for p in cloud.points() {
        for a in 0..3 {
            let d = p[a] - mean[a];
            var[a] += d * d;
        }
    }
    let mut sd = [T::zero(); 3];
    for a in 0..3 {
        let v = var[a] / n;
        if !(v > T::zero()) {
            return Err(Error::DegenerateInput(format!("axis {a} has zero variance")));
        }
        sd[a] = v.sqrt();
    }
    let points = cloud
        .points()
        .iter()
        .map(|p| {
            [
                (p[0] - mean[0]) / sd[0],
                (p[1] - mean[1]) / sd[1],
                (p[2] - mean[2]) / sd[2],
            ]
        })
        .collect();
    // Normals transform with the inverse-transpose of the axis scaling.
    let normals = cloud.normals.as_ref().map(|ns| {
        ns.iter()
            .map(|n| {
                let m = [n[0] * sd[0], n[1] * sd[1], n[2] * sd[2]];
                let l = norm(&m);
                m.map(|c| c / l)
            })
            .collect()
    });
    Ok(PointCloud {
        id: cloud.id.clone(),
        points,
        normals,
        anomaly_mask: cloud.anomaly_mask.clone(),
    })
}
