//! Seeded synthetic shapes and normal-offset pseudo-anomalies.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scalar::{dist, Point3, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Sphere,
    Cylinder,
    Torus,
    Superellipsoid,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::Sphere,
        ShapeKind::Cylinder,
        ShapeKind::Torus,
        ShapeKind::Superellipsoid,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::Torus => "torus",
            ShapeKind::Superellipsoid => "superellipsoid",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown shape '{s}'")))
    }
}

// Shape constants in the unscaled frame.
pub const CYLINDER_RADIUS: f64 = 0.5;
pub const CYLINDER_HALF_HEIGHT: f64 = 0.8;
pub const TORUS_MAJOR: f64 = 1.0;
pub const TORUS_MINOR: f64 = 0.7;
/// Semi-axes `(a, a, c)` of `|x/a|^p + |y/a|^p + |z/c|^p = 1`.
pub const SUPERELLIPSOID_AXES: [f64; 3] = [0.4, 0.4, 1.0];
pub const SUPERELLIPSOID_POWER: f64 = 3.0;

/// Circumradius of the noise-free surface about the origin; clouds are scaled by its inverse.
pub fn circumradius(kind: ShapeKind) -> f64 {
    match kind {
        ShapeKind::Sphere => 1.0,
        ShapeKind::Cylinder => CYLINDER_RADIUS.hypot(CYLINDER_HALF_HEIGHT),
        ShapeKind::Torus => TORUS_MAJOR + TORUS_MINOR,
        ShapeKind::Superellipsoid => superellipsoid_circumradius(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub shape: ShapeKind,
    pub n: usize,
    /// Per-axis Gaussian noise, in units of the normalised shape.
    pub sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 100 {
            return Err(Error::invalid(format!("n must be >= 100, got {}", self.n)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid("sigma must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalySign {
    Bump,
    Dent,
    Random,
}

impl FromStr for AnomalySign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(AnomalySign::Bump),
            "dent" => Ok(AnomalySign::Dent),
            "random" => Ok(AnomalySign::Random),
            _ => Err(Error::invalid(format!("unknown anomaly sign '{s}'"))),
        }
    }
}

impl fmt::Display for AnomalySign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnomalySign::Bump => "bump",
            AnomalySign::Dent => "dent",
            AnomalySign::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalySpec {
    /// Region radius in cloud units; synthetic clouds have unit circumradius,
    /// so this is a fraction of the shape scale.
    pub radius: f64,
    /// Offset amplitude range (the scaling factor), in cloud units.
    pub amplitude: (f64, f64),
    pub sign: AnomalySign,
    pub seed: u64,
}

impl AnomalySpec {
    /// Range of width 0.06 centred on `mean`, clipped at zero.
    pub fn amplitude_around(mean: f64) -> (f64, f64) {
        ((mean - 0.03).max(0.0), mean + 0.03)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return Err(Error::invalid(format!("anomaly radius must be in (0,1), got {}", self.radius)));
        }
        let (lo, hi) = self.amplitude;
        if !(lo >= 0.0 && lo <= hi) {
            return Err(Error::invalid(format!("amplitude range [{lo}, {hi}] is invalid")));
        }
        Ok(())
    }
}

fn unit_gaussian(rng: &mut ChaCha8Rng) -> Point3<f64> {
    loop {
        let v: Point3<f64> = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let l = crate::scalar::norm(&v);
        if l > 1e-12 {
            return v.map(|c| c / l);
        }
    }
}

fn sample_sphere(rng: &mut ChaCha8Rng) -> (Point3<f64>, Point3<f64>, usize) {
    let p = unit_gaussian(rng);
    let part = (p[0] >= 0.0) as usize | ((p[1] >= 0.0) as usize) << 1 | ((p[2] >= 0.0) as usize) << 2;
    (p, p, part)
}

fn sample_cylinder(rng: &mut ChaCha8Rng) -> (Point3<f64>, Point3<f64>, usize) {
    let (r, h) = (CYLINDER_RADIUS, CYLINDER_HALF_HEIGHT);
    let side = TAU * r * 2.0 * h;
    let cap = PI * r * r;
    let pick = rng.gen::<f64>() * (side + 2.0 * cap);
    if pick < side {
        let th = rng.gen::<f64>() * TAU;
        let z = rng.gen_range(-h..h);
        let quadrant = ((th / (TAU / 4.0)) as usize).min(3);
        ([r * th.cos(), r * th.sin(), z], [th.cos(), th.sin(), 0.0], quadrant)
    } else {
        let top = pick < side + cap;
        let rho = r * rng.gen::<f64>().sqrt();
        let th = rng.gen::<f64>() * TAU;
        let z = if top { h } else { -h };
        ([rho * th.cos(), rho * th.sin(), z], [0.0, 0.0, z.signum()], if top { 4 } else { 5 })
    }
}

fn sample_torus(rng: &mut ChaCha8Rng) -> (Point3<f64>, Point3<f64>, usize) {
    let (big, small) = (TORUS_MAJOR, TORUS_MINOR);
    loop {
        let u = rng.gen::<f64>() * TAU;
        let v = rng.gen::<f64>() * TAU;
        let w = rng.gen::<f64>();
        if w * (big + small) > big + small * v.cos() {
            continue;
        }
        let ring = big + small * v.cos();
        let p = [ring * u.cos(), ring * u.sin(), small * v.sin()];
        let n = [v.cos() * u.cos(), v.cos() * u.sin(), v.sin()];
        let sector = ((u / (TAU / 8.0)) as usize).min(7);
        return (p, n, sector);
    }
}

/// Farthest surface point from the origin. For a fixed height the radial
/// extent peaks on the diagonal `x = y` when `p > 2` and on an axis when
/// `p < 2`; both profiles are searched and the larger maximum kept.
fn superellipsoid_circumradius() -> f64 {
    let [a, _, c] = SUPERELLIPSOID_AXES;
    let q = SUPERELLIPSOID_POWER;
    let profile = |s: f64, diagonal: bool| {
        let rest = (1.0 - (s / c).powf(q)).max(0.0);
        if diagonal {
            let w = a * (rest / 2.0).powf(1.0 / q);
            2.0 * w * w + s * s
        } else {
            let x = a * rest.powf(1.0 / q);
            x * x + s * s
        }
    };
    let mut best = 0.0f64;
    for diagonal in [true, false] {
        let f = |s: f64| profile(s, diagonal);
        let steps: usize = 4096;
        let (mut i_best, mut v_best) = (0, f(0.0));
        for i in 1..=steps {
            let v = f(c * i as f64 / steps as f64);
            if v > v_best {
                i_best = i;
                v_best = v;
            }
        }
        let (mut lo, mut hi) = (
            c * i_best.saturating_sub(1) as f64 / steps as f64,
            c * (i_best + 1).min(steps) as f64 / steps as f64,
        );
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if f(m1) < f(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        best = best.max(v_best).max(f(0.5 * (lo + hi)));
    }
    best.sqrt()
}

fn superellipsoid_point(u: &Point3<f64>) -> (Point3<f64>, Point3<f64>) {
    let q = SUPERELLIPSOID_POWER;
    let s = SUPERELLIPSOID_AXES;
    let f: f64 = (0..3).map(|i| (u[i] / s[i]).abs().powf(q)).sum();
    let t = f.powf(-1.0 / q);
    let p = u.map(|c| c * t);
    let g: Point3<f64> = std::array::from_fn(|i| p[i].signum() * (p[i] / s[i]).abs().powf(q - 1.0) / s[i]);
    let l = crate::scalar::norm(&g);
    (p, g.map(|c| c / l))
}

fn superellipsoid_weight(u: &Point3<f64>) -> f64 {
    // Area element along a ray: rho^2 dOmega / cos(angle between ray and normal).
    let (p, n) = superellipsoid_point(u);
    let rho2 = crate::scalar::dot(&p, &p);
    rho2 / crate::scalar::dot(&n, u).max(1e-6)
}

fn superellipsoid_max_weight() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let m = (0..20_000)
        .map(|_| superellipsoid_weight(&unit_gaussian(&mut rng)))
        .fold(0.0, f64::max);
    m * 1.25
}

fn sample_superellipsoid(rng: &mut ChaCha8Rng, w_max: f64) -> (Point3<f64>, Point3<f64>, usize) {
    loop {
        let u = unit_gaussian(rng);
        if rng.gen::<f64>() * w_max > superellipsoid_weight(&u) {
            continue;
        }
        let (p, n) = superellipsoid_point(&u);
        let rel: Point3<f64> = std::array::from_fn(|i| (p[i] / SUPERELLIPSOID_AXES[i]).abs());
        let mut axis = 0;
        for a in 1..3 {
            if rel[a] > rel[axis] {
                axis = a;
            }
        }
        let face = 2 * axis + (p[axis] < 0.0) as usize;
        return (p, n, face);
    }
}

/// A generated cloud plus the part each point was sampled from.
#[derive(Debug, Clone)]
pub struct SyntheticShape<T: Real> {
    pub cloud: PointCloud<T>,
    pub parts: Vec<usize>,
}

/// `n` area-uniform surface samples with analytic normals, scaled to unit
/// circumradius about the origin, plus isotropic Gaussian noise.
pub fn make_shape_with_parts<T: Real>(spec: &SynthSpec) -> Result<SyntheticShape<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w_max = if spec.shape == ShapeKind::Superellipsoid {
        superellipsoid_max_weight()
    } else {
        0.0
    };
    let scale = 1.0 / circumradius(spec.shape);
    let mut points = Vec::with_capacity(spec.n);
    let mut normals = Vec::with_capacity(spec.n);
    let mut parts = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let (p, n, part) = match spec.shape {
            ShapeKind::Sphere => sample_sphere(&mut rng),
            ShapeKind::Cylinder => sample_cylinder(&mut rng),
            ShapeKind::Torus => sample_torus(&mut rng),
            ShapeKind::Superellipsoid => sample_superellipsoid(&mut rng, w_max),
        };
        let mut p = p.map(|c| c * scale);
        if spec.sigma > 0.0 {
            for c in p.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *c += spec.sigma * e;
            }
        }
        points.push(p);
        normals.push(n);
        parts.push(part);
    }
    let cloud = PointCloud::new(format!("{}-{}", spec.shape, spec.seed), points)?
        .with_normals(normals)?
        .cast::<T>();
    Ok(SyntheticShape { cloud, parts })
}

pub fn make_shape<T: Real>(spec: &SynthSpec) -> Result<PointCloud<T>> {
    Ok(make_shape_with_parts(spec)?.cloud)
}

/// Raised-cosine taper: 1 at the region centre, 0 at distance `radius`.
pub fn falloff(d: f64, radius: f64) -> f64 {
    if d >= radius {
        0.0
    } else {
        0.5 * (1.0 + (PI * d / radius).cos())
    }
}

/// Displaces a spherical region along the stored normals and marks it in the mask.
///
/// A seed point is drawn uniformly; every point within `radius` of it moves by
/// `sign * a * falloff(d)` along its normal, with one amplitude `a` drawn
/// uniformly from the range. Normals are left as they were before displacement.
pub fn inject_anomaly<T: Real>(cloud: &PointCloud<T>, spec: &AnomalySpec) -> Result<PointCloud<T>> {
    spec.validate()?;
    let normals = cloud
        .normals()
        .ok_or_else(|| Error::PreconditionFailed("anomaly injection needs normals".into()))?;
    if cloud.is_empty() {
        return Err(Error::invalid("cannot place an anomaly in an empty cloud"));
    }
    let radius = spec.radius;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centre_idx = rng.gen_range(0..cloud.len());
    let u: f64 = rng.gen();
    let amplitude = spec.amplitude.0 + u * (spec.amplitude.1 - spec.amplitude.0);
    let coin: bool = rng.gen();
    let sign = match spec.sign {
        AnomalySign::Bump => 1.0,
        AnomalySign::Dent => -1.0,
        AnomalySign::Random => {
            if coin {
                1.0
            } else {
                -1.0
            }
        }
    };

    let centre = cloud.points()[centre_idx];
    let mut points = cloud.points().to_vec();
    let mut mask = vec![false; cloud.len()];
    for (i, p) in points.iter_mut().enumerate() {
        let d = dist(p, &centre).to_f64_lossy();
        if d < radius {
            mask[i] = true;
            let off = T::lit(sign * amplitude * falloff(d, radius));
            for a in 0..3 {
                p[a] += off * normals[i][a];
            }
        }
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::invalid("anomaly region is empty"));
    }
    PointCloud::new(cloud.id(), points)?
        .with_normals(normals.to_vec())?
        .with_anomaly_mask(mask)
}
