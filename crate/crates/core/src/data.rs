//! Seeded synthetic data and point/trace file formats.
//!
//! Data files carry one point per row in ambient coordinates: CSV without a
//! header, or JSON as an array of arrays.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::manifold::{self, ManifoldKind, Point};

/// Samples `n` points uniformly from the geodesic ball of radius `radius`
/// around `center`.
///
/// On the sphere the colatitude is drawn by inverting the cap CDF and the
/// direction uniformly in the tangent space of `center` (uniform longitude on
/// `S^2`). On the sphere `radius` must lie in `(0, pi/2)`.
pub fn sample_ball<R: Rng + ?Sized>(center: &Point, radius: f64, n: usize, rng: &mut R) -> Result<Vec<Point>> {
    let manifold = center.manifold();
    let valid = match manifold {
        ManifoldKind::Sphere { .. } => radius > 0.0 && radius < std::f64::consts::FRAC_PI_2,
        ManifoldKind::Euclidean { .. } => radius > 0.0 && radius.is_finite(),
    };
    if !valid {
        return Err(Error::InvalidRadius(radius));
    }
    let k = manifold.intrinsic_dim();
    let basis = manifold::tangent_basis(center);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let step = match manifold {
            ManifoldKind::Sphere { .. } => invert_cap_cdf(u, radius, k),
            ManifoldKind::Euclidean { .. } => radius * u.powf(1.0 / k as f64),
        };
        let dir = random_direction(k, rng);
        let mut v = DVector::zeros(manifold.ambient_dim());
        for (e, c) in basis.iter().zip(dir.iter()) {
            v += e.vec() * *c;
        }
        points.push(manifold::exp_unchecked(center, &(v * step)));
    }
    Ok(points)
}

fn random_direction<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    match k {
        1 => vec![if rng.random::<bool>() { 1.0 } else { -1.0 }],
        2 => {
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            vec![phi.cos(), phi.sin()]
        }
        _ => loop {
            let g: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break g.into_iter().map(|x| x / norm).collect();
            }
        },
    }
}

/// `int_0^theta sin^j(t) dt`
fn sin_power_integral(j: usize, theta: f64) -> f64 {
    match j {
        0 => theta,
        1 => 1.0 - theta.cos(),
        _ => {
            let jf = j as f64;
            -theta.cos() * theta.sin().powi(j as i32 - 1) / jf + (jf - 1.0) / jf * sin_power_integral(j - 2, theta)
        }
    }
}

/// Colatitude with density proportional to `sin^(k-1)` on `[0, alpha]`.
fn invert_cap_cdf(u: f64, alpha: f64, k: usize) -> f64 {
    if k == 2 {
        return (1.0 - u * (1.0 - alpha.cos())).clamp(-1.0, 1.0).acos();
    }
    let total = sin_power_integral(k - 1, alpha);
    let target = u * total;
    let (mut lo, mut hi) = (0.0, alpha);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sin_power_integral(k - 1, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Shortest round-trip decimal form, or a fixed display width when `digits`
/// is given (fixed decimals down to `1e-4`, scientific below).
pub fn format_float(v: f64, digits: Option<usize>) -> String {
    match digits {
        None => format!("{v:?}"),
        Some(d) => {
            if v == 0.0 || v.abs() >= 1e-4 || !v.is_finite() {
                format!("{v:.d$}")
            } else {
                format!("{:.*e}", d.saturating_sub(2), v)
            }
        }
    }
}

pub fn write_points_csv<W: Write>(mut out: W, points: &[Point]) -> Result<()> {
    for p in points {
        let row: Vec<String> = p.coords().iter().map(|c| format_float(*c, None)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_points_csv<R: Read>(input: R, manifold: ManifoldKind) -> Result<Vec<Point>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {}: {e}", row + 1)))?;
        let coords = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Data(format!("row {}: {e}", row + 1))))
            .collect::<Result<Vec<f64>>>()?;
        points.push(point_from_row(manifold, &coords, row)?);
    }
    Ok(points)
}

pub fn read_points_json<R: Read>(input: R, manifold: ManifoldKind) -> Result<Vec<Point>> {
    let rows: Vec<Vec<f64>> = serde_json::from_reader(input).map_err(|e| Error::Data(e.to_string()))?;
    rows.iter().enumerate().map(|(i, r)| point_from_row(manifold, r, i)).collect()
}

/// Dispatches on the extension: `.json` is JSON, anything else CSV.
pub fn read_points_file(path: &Path, manifold: ManifoldKind) -> Result<Vec<Point>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let points = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        read_points_json(file, manifold)?
    } else {
        read_points_csv(file, manifold)?
    };
    if points.is_empty() {
        return Err(Error::Data(format!("{}: no data points", path.display())));
    }
    Ok(points)
}

fn point_from_row(manifold: ManifoldKind, coords: &[f64], row: usize) -> Result<Point> {
    Point::from_slice(manifold, coords).map_err(|e| Error::Data(format!("row {}: {e}", row + 1)))
}
