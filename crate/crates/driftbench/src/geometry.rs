//! 2-D Delaunay triangulation, alpha-complex extraction and boundary
//! peeling. This is the geometric engine behind alpha-shape core-support
//! extraction; it is deliberately restricted to two dimensions.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::Point;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("need at least 3 unique points, got {unique}")]
    TooFewUniquePoints { unique: usize },
    #[error("all points are collinear")]
    Collinear,
    #[error("alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("compaction percentage must lie in (0, 1], got {0}")]
    BadCompaction(f64),
    #[error("expected 2-d points, got dimension {0}")]
    NotPlanar(usize),
}

/// One triangle of a triangulation, with its circumcircle cached.
#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub circumcenter: [f64; 2],
    pub circumradius: f64,
}

/// A Delaunay triangulation of a set of unique 2-D points.
#[derive(Debug, Clone)]
pub struct Triangulation2D {
    /// Unique input points in lexicographic insertion order.
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
}

/// The subset of a triangulation whose triangles have circumradius at most
/// `alpha`, together with its boundary vertices.
#[derive(Debug, Clone)]
pub struct AlphaComplex<'a> {
    pub parent: &'a Triangulation2D,
    pub alpha: f64,
    /// Indices into `parent.triangles`, ascending.
    pub retained_triangles: Vec<usize>,
    /// Vertices incident to a retained edge bordering fewer than two
    /// retained triangles, plus vertices in no retained triangle. Ascending.
    pub boundary_vertices: Vec<usize>,
}

fn circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> ([f64; 2], f64) {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if d.abs() < 1e-300 {
        // Degenerate sliver: give it an everything-containing circle so it
        // cannot survive as a Delaunay triangle.
        return ([f64::INFINITY, f64::INFINITY], f64::INFINITY);
    }
    let a2 = a[0] * a[0] + a[1] * a[1];
    let b2 = b[0] * b[0] + b[1] * b[1];
    let c2 = c[0] * c[0] + c[1] * c[1];
    let ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d;
    let uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d;
    let center = [ux, uy];
    let r = ((a[0] - ux) * (a[0] - ux) + (a[1] - uy) * (a[1] - uy)).sqrt();
    (center, r)
}

fn strictly_in_circumcircle(center: [f64; 2], radius: f64, p: [f64; 2]) -> bool {
    if !radius.is_finite() {
        return true;
    }
    let d2 = (p[0] - center[0]) * (p[0] - center[0]) + (p[1] - center[1]) * (p[1] - center[1]);
    // Cocircular points count as outside, so ties are resolved by the
    // deterministic insertion order alone.
    d2 < radius * radius * (1.0 - 1e-12)
}

fn dedup_sorted(points: &[Point]) -> Result<Vec<[f64; 2]>, GeometryError> {
    if let Some(p) = points.iter().find(|p| p.len() != 2) {
        return Err(GeometryError::NotPlanar(p.len()));
    }
    let mut vs: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vs.dedup();
    Ok(vs)
}

/// Delaunay triangulation by Bowyer-Watson insertion into a super-triangle.
/// Exact duplicate points are removed first and points are inserted in
/// lexicographic order, which fixes the diagonal chosen for cocircular
/// configurations.
pub fn delaunay_2d(points: &[Point]) -> Result<Triangulation2D, GeometryError> {
    let vertices = dedup_sorted(points)?;
    triangulate(vertices)
}

fn triangulate(vertices: Vec<[f64; 2]>) -> Result<Triangulation2D, GeometryError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::TooFewUniquePoints { unique: n });
    }

    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for v in &vertices {
        min_x = min_x.min(v[0]);
        min_y = min_y.min(v[1]);
        max_x = max_x.max(v[0]);
        max_y = max_y.max(v[1]);
    }
    let span = (max_x - min_x).max(max_y - min_y).max(1.0);
    let cx = (min_x + max_x) / 2.0;
    let cy = (min_y + max_y) / 2.0;
    let s = 16.0 * span;
    let mut all = vertices.clone();
    all.push([cx - 2.0 * s, cy - s]);
    all.push([cx + 2.0 * s, cy - s]);
    all.push([cx, cy + 2.0 * s]);
    let super_base = n;

    struct Tri {
        v: [usize; 3],
        center: [f64; 2],
        radius: f64,
    }
    let make = |v: [usize; 3], all: &[[f64; 2]]| {
        let (center, radius) = circumcircle(all[v[0]], all[v[1]], all[v[2]]);
        Tri { v, center, radius }
    };

    let mut tris: Vec<Tri> = vec![make([super_base, super_base + 1, super_base + 2], &all)];
    for p in 0..n {
        let pt = all[p];
        let bad: Vec<usize> = tris
            .iter()
            .enumerate()
            .filter(|(_, t)| strictly_in_circumcircle(t.center, t.radius, pt))
            .map(|(i, _)| i)
            .collect();
        // Boundary of the cavity: edges belonging to exactly one bad triangle.
        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &i in &bad {
            let v = tris[i].v;
            for (a, b) in [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])] {
                let key = (a.min(b), a.max(b));
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }
        for &i in bad.iter().rev() {
            tris.swap_remove(i);
        }
        for (&(a, b), &count) in &edge_count {
            if count == 1 {
                tris.push(make([a, b, p], &all));
            }
        }
    }

    let triangles: Vec<Triangle> = tris
        .iter()
        .filter(|t| t.v.iter().all(|&v| v < super_base))
        .map(|t| Triangle {
            vertices: t.v,
            circumcenter: t.center,
            circumradius: t.radius,
        })
        .collect();
    if triangles.is_empty() {
        return Err(GeometryError::Collinear);
    }
    Ok(Triangulation2D { vertices, triangles })
}

/// Filters `tri` down to the triangles with circumradius at most `alpha`
/// and computes the boundary vertices of the result.
pub fn alpha_complex(tri: &Triangulation2D, alpha: f64) -> Result<AlphaComplex<'_>, GeometryError> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(GeometryError::NonPositiveAlpha(alpha));
    }
    let retained_triangles: Vec<usize> = tri
        .triangles
        .iter()
        .enumerate()
        .filter(|(_, t)| t.circumradius <= alpha)
        .map(|(i, _)| i)
        .collect();

    let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut in_retained: Vec<bool> = vec![false; tri.vertices.len()];
    for &i in &retained_triangles {
        let v = tri.triangles[i].vertices;
        for &vi in &v {
            in_retained[vi] = true;
        }
        for (a, b) in [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])] {
            *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut boundary: BTreeSet<usize> = BTreeSet::new();
    for (&(a, b), &count) in &edge_count {
        if count < 2 {
            boundary.insert(a);
            boundary.insert(b);
        }
    }
    for (v, &covered) in in_retained.iter().enumerate() {
        if !covered {
            boundary.insert(v);
        }
    }
    Ok(AlphaComplex {
        parent: tri,
        alpha,
        retained_triangles,
        boundary_vertices: boundary.into_iter().collect(),
    })
}

/// Iteratively removes alpha-shape boundary layers until at most
/// `ceil(cp * n)` of the input points remain; the last partial layer is
/// trimmed farthest-from-centroid first so the count is hit exactly.
/// Returns ascending indices into `points`. Exact duplicates follow the
/// retention decision of their surviving twin; if the survivor geometry
/// degenerates (fewer than 3 unique points, or collinear) the current
/// survivors are returned as-is.
pub fn peel_compaction(
    points: &[Point],
    alpha: f64,
    cp: f64,
) -> Result<Vec<usize>, GeometryError> {
    if cp.is_nan() || cp <= 0.0 || cp > 1.0 {
        return Err(GeometryError::BadCompaction(cp));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(GeometryError::NonPositiveAlpha(alpha));
    }
    if let Some(p) = points.iter().find(|p| p.len() != 2) {
        return Err(GeometryError::NotPlanar(p.len()));
    }
    let n = points.len();
    let target = (cp * n as f64).ceil() as usize;
    let mut survivors: Vec<usize> = (0..n).collect();

    while survivors.len() > target {
        // Group surviving duplicates by exact coordinates.
        let mut groups: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
        for &i in &survivors {
            let key = (points[i][0].to_bits(), points[i][1].to_bits());
            groups.entry(key).or_default().push(i);
        }
        let unique: Vec<Point> = groups
            .values()
            .map(|idxs| points[idxs[0]].clone())
            .collect();
        let tri = match delaunay_2d(&unique) {
            Ok(t) => t,
            Err(GeometryError::TooFewUniquePoints { .. }) | Err(GeometryError::Collinear) => {
                return Ok(survivors)
            }
            Err(e) => return Err(e),
        };
        let complex = alpha_complex(&tri, alpha)?;
        let boundary_coords: BTreeSet<(u64, u64)> = complex
            .boundary_vertices
            .iter()
            .map(|&v| {
                let p = tri.vertices[v];
                (p[0].to_bits(), p[1].to_bits())
            })
            .collect();
        let boundary_idx: Vec<usize> = survivors
            .iter()
            .copied()
            .filter(|&i| {
                boundary_coords.contains(&(points[i][0].to_bits(), points[i][1].to_bits()))
            })
            .collect();
        if boundary_idx.is_empty() {
            return Ok(survivors);
        }
        if survivors.len() - boundary_idx.len() >= target {
            let remove: BTreeSet<usize> = boundary_idx.into_iter().collect();
            survivors.retain(|i| !remove.contains(i));
        } else {
            // A full peel would overshoot; drop only the boundary points
            // farthest from the centroid of the current survivors until the
            // target count is reached (splitting duplicate twins if needed).
            let mut centroid = [0.0f64; 2];
            for &i in &survivors {
                centroid[0] += points[i][0];
                centroid[1] += points[i][1];
            }
            centroid[0] /= survivors.len() as f64;
            centroid[1] /= survivors.len() as f64;
            let mut ordered = boundary_idx;
            ordered.sort_by(|&a, &b| {
                let da = (points[a][0] - centroid[0]).powi(2)
                    + (points[a][1] - centroid[1]).powi(2);
                let db = (points[b][0] - centroid[0]).powi(2)
                    + (points[b][1] - centroid[1]).powi(2);
                db.partial_cmp(&da).unwrap().then(a.cmp(&b))
            });
            let excess = survivors.len() - target;
            let remove: BTreeSet<usize> = ordered.into_iter().take(excess).collect();
            survivors.retain(|i| !remove.contains(i));
            break;
        }
    }
    Ok(survivors)
}

/// Mean nearest-neighbor distance, the scale used for the default alpha.
pub fn mean_nearest_neighbor_distance(points: &[Point]) -> f64 {
    if points.len() < 2 {
        return 1.0;
    }
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (j, q) in points.iter().enumerate() {
            if i != j {
                let d = crate::util::squared_distance(p, q);
                if d < best {
                    best = d;
                }
            }
        }
        total += best.sqrt();
    }
    total / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn pts(raw: &[(f64, f64)]) -> Vec<Point> {
        raw.iter().map(|&(x, y)| vec![x, y]).collect()
    }

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect()
    }

    /// Brute-force empty-circumcircle check against every vertex.
    fn delaunay_oracle(tri: &Triangulation2D) -> bool {
        for t in &tri.triangles {
            for (i, v) in tri.vertices.iter().enumerate() {
                if t.vertices.contains(&i) {
                    continue;
                }
                let d = ((v[0] - t.circumcenter[0]).powi(2)
                    + (v[1] - t.circumcenter[1]).powi(2))
                .sqrt();
                if d < t.circumradius - 1e-9 {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn triangle_of_three_points() {
        let tri = delaunay_2d(&pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)])).unwrap();
        assert_eq!(tri.triangles.len(), 1);
    }

    #[test]
    fn unit_square_has_two_triangles() {
        let tri = delaunay_2d(&pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(tri.triangles.len(), 2);
        assert!(delaunay_oracle(&tri));
    }

    #[test]
    fn random_points_pass_circumcircle_oracle() {
        for seed in 0..10 {
            let tri = delaunay_2d(&random_points(50, seed)).unwrap();
            assert!(delaunay_oracle(&tri), "seed {seed}");
            // Euler sanity: a triangulation of the convex hull of n points
            // with h hull vertices has 2n - h - 2 triangles.
            assert!(tri.triangles.len() >= tri.vertices.len() - 2);
        }
    }

    #[test]
    fn degenerate_inputs_are_reported() {
        assert!(matches!(
            delaunay_2d(&pts(&[(0.0, 0.0), (1.0, 1.0)])),
            Err(GeometryError::TooFewUniquePoints { unique: 2 })
        ));
        assert!(matches!(
            delaunay_2d(&pts(&[(0.0, 0.0), (0.0, 0.0), (1.0, 1.0)])),
            Err(GeometryError::TooFewUniquePoints { unique: 2 })
        ));
        assert!(matches!(
            delaunay_2d(&pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)])),
            Err(GeometryError::Collinear)
        ));
    }

    #[test]
    fn alpha_infinite_keeps_all_and_bounds_hull() {
        let points = pts(&[
            (0.0, 0.0),
            (4.0, 0.0),
            (4.0, 4.0),
            (0.0, 4.0),
            (2.0, 2.0),
            (1.0, 2.0),
        ]);
        let tri = delaunay_2d(&points).unwrap();
        let complex = alpha_complex(&tri, f64::INFINITY).unwrap();
        assert_eq!(complex.retained_triangles.len(), tri.triangles.len());
        // Hull vertices are the four corners; interior points are not on
        // the boundary.
        let hull: Vec<[f64; 2]> = complex
            .boundary_vertices
            .iter()
            .map(|&v| tri.vertices[v])
            .collect();
        assert_eq!(hull.len(), 4);
        for v in hull {
            assert!(v[0] == 0.0 || v[0] == 4.0);
        }
    }

    #[test]
    fn alpha_below_min_radius_retains_nothing() {
        let points = random_points(30, 3);
        let tri = delaunay_2d(&points).unwrap();
        let min_r = tri
            .triangles
            .iter()
            .map(|t| t.circumradius)
            .fold(f64::INFINITY, f64::min);
        let complex = alpha_complex(&tri, min_r * 0.5).unwrap();
        assert!(complex.retained_triangles.is_empty());
        assert_eq!(complex.boundary_vertices.len(), tri.vertices.len());
    }

    #[test]
    fn alpha_rejects_non_positive() {
        let tri = delaunay_2d(&random_points(10, 1)).unwrap();
        assert!(alpha_complex(&tri, 0.0).is_err());
        assert!(alpha_complex(&tri, -1.0).is_err());
    }

    #[test]
    fn alpha_complex_is_monotone_in_alpha() {
        let tri = delaunay_2d(&random_points(80, 9)).unwrap();
        let mut radii: Vec<f64> = tri.triangles.iter().map(|t| t.circumradius).collect();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev: Option<Vec<usize>> = None;
        for i in 0..10 {
            let alpha = radii[radii.len() * i / 10].max(1e-6);
            let complex = alpha_complex(&tri, alpha).unwrap();
            if let Some(p) = &prev {
                assert!(p.iter().all(|t| complex.retained_triangles.contains(t)));
            }
            prev = Some(complex.retained_triangles);
        }
    }

    #[test]
    fn separated_blobs_split_into_two_components() {
        let mut points = random_points(40, 21);
        points.extend(random_points(40, 22).into_iter().map(|p| vec![p[0] + 10.0, p[1]]));
        let tri = delaunay_2d(&points).unwrap();
        // Between intra-blob scale (points in a 2x2 box) and the 8+ unit gap.
        let complex = alpha_complex(&tri, 2.0).unwrap();
        assert!(!complex.retained_triangles.is_empty());

        // Union-find over retained triangles sharing an edge.
        let retained = &complex.retained_triangles;
        let mut parent: Vec<usize> = (0..retained.len()).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let r = find(parent, parent[i]);
                parent[i] = r;
            }
            parent[i]
        }
        let mut edge_owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (slot, &ti) in retained.iter().enumerate() {
            let v = tri.triangles[ti].vertices;
            for (a, b) in [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])] {
                let key = (a.min(b), a.max(b));
                if let Some(&other) = edge_owner.get(&key) {
                    let (ra, rb) = (find(&mut parent, slot), find(&mut parent, other));
                    parent[ra] = rb;
                } else {
                    edge_owner.insert(key, slot);
                }
            }
        }
        let mut roots: BTreeSet<usize> = BTreeSet::new();
        for i in 0..retained.len() {
            let r = find(&mut parent, i);
            roots.insert(r);
        }
        assert_eq!(roots.len(), 2, "expected exactly two connected components");
    }

    #[test]
    fn peel_cp_one_keeps_everything() {
        let points = random_points(25, 4);
        let kept = peel_compaction(&points, 0.5, 1.0).unwrap();
        assert_eq!(kept.len(), 25);
    }

    #[test]
    fn peel_hits_exact_count() {
        let points = random_points(10, 6);
        let kept = peel_compaction(&points, f64::INFINITY, 0.5).unwrap();
        assert_eq!(kept.len(), 5);
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn peel_keeps_central_points_of_a_disk() {
        let mut rng = ChaCha20Rng::seed_from_u64(40);
        let points: Vec<Point> = (0..500)
            .map(|_| {
                let r = rng.gen_range(0.0f64..1.0).sqrt();
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                vec![r * a.cos(), r * a.sin()]
            })
            .collect();
        let kept = peel_compaction(&points, f64::INFINITY, 0.3).unwrap();
        assert_eq!(kept.len(), 150);
        let kept_set: BTreeSet<usize> = kept.iter().copied().collect();
        let mean_norm = |filter: &dyn Fn(usize) -> bool| {
            let mut total = 0.0;
            let mut n = 0;
            for (i, p) in points.iter().enumerate() {
                if filter(i) {
                    total += (p[0] * p[0] + p[1] * p[1]).sqrt();
                    n += 1;
                }
            }
            total / n as f64
        };
        let kept_mean = mean_norm(&|i| kept_set.contains(&i));
        let removed_mean = mean_norm(&|i| !kept_set.contains(&i));
        assert!(
            kept_mean < removed_mean,
            "kept {kept_mean} vs removed {removed_mean}"
        );
    }

    #[test]
    fn peel_rejects_bad_cp() {
        let points = random_points(10, 2);
        assert!(peel_compaction(&points, 1.0, 0.0).is_err());
        assert!(peel_compaction(&points, 1.0, 1.5).is_err());
    }

    #[test]
    fn peel_is_deterministic_and_subset() {
        let points = random_points(60, 11);
        let a = peel_compaction(&points, 0.4, 0.35).unwrap();
        let b = peel_compaction(&points, 0.4, 0.35).unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= (0.35f64 * 60.0).ceil() as usize);
        assert!(a.iter().all(|&i| i < 60));
    }

    #[test]
    fn peel_returns_survivors_on_degeneration() {
        // Collinear input degenerates immediately; everything survives.
        let points = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let kept = peel_compaction(&points, 1.0, 0.25).unwrap();
        assert_eq!(kept.len(), 4);
    }

    #[test]
    fn peel_follows_duplicate_twins() {
        // Four hull corners plus a duplicated interior point: the corners
        // peel away first, both duplicates survive together.
        let points = pts(&[
            (0.0, 0.0),
            (4.0, 0.0),
            (4.0, 4.0),
            (0.0, 4.0),
            (2.0, 2.0),
            (2.0, 2.0),
        ]);
        let kept = peel_compaction(&points, f64::INFINITY, 1.0 / 3.0).unwrap();
        assert_eq!(kept, vec![4, 5]);
    }
}
