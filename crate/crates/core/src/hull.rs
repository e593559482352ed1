//! Incremental 3D convex hull of measurement directions.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::hrir::Direction;

/// Relative tolerance for orientation tests.
const PLANE_EPS: f64 = 1e-12;

/// Triangulated hull with outward, counterclockwise triangles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HullTriangulation {
    pub triangles: Vec<[usize; 3]>,
    /// Unique edges with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl HullTriangulation {
    pub fn num_vertices(&self) -> usize {
        self.edges.iter().map(|&(_, j)| j + 1).max().unwrap_or(0)
    }

    /// Index of edge `(min(a, b), max(a, b))`.
    pub fn edge_index(&self) -> HashMap<(usize, usize), usize> {
        self.edges.iter().enumerate().map(|(k, &e)| (e, k)).collect()
    }
}

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    normal: [f64; 3],
    offset: f64,
    alive: bool,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn make_face(pts: &[[f64; 3]], v: [usize; 3]) -> Face {
    let n = cross(sub(pts[v[1]], pts[v[0]]), sub(pts[v[2]], pts[v[0]]));
    let len = norm(n);
    let normal = if len > 0.0 {
        [n[0] / len, n[1] / len, n[2] / len]
    } else {
        [0.0; 3]
    };
    Face {
        v,
        normal,
        offset: dot(normal, pts[v[0]]),
        alive: true,
    }
}

impl Face {
    fn distance(&self, p: [f64; 3]) -> f64 {
        dot(self.normal, p) - self.offset
    }

    fn edges(&self) -> [(usize, usize); 3] {
        let [a, b, c] = self.v;
        [(a, b), (b, c), (c, a)]
    }

    /// Whether `p`, assumed in the face plane, falls inside the triangle.
    fn contains(&self, pts: &[[f64; 3]], p: [f64; 3]) -> bool {
        self.edges().iter().all(|&(a, b)| {
            let side = dot(cross(sub(pts[b], pts[a]), sub(p, pts[a])), self.normal);
            side >= -1e-9
        })
    }
}

/// Triangulates the convex hull of `directions`.
///
/// Points are inserted one at a time against every live facet. A point that
/// sees no facet strictly but lies in the plane of one (cocircular samples
/// on a ring) replaces the facets containing it with a fan.
pub fn convex_hull_graph(directions: &[Direction]) -> Result<HullTriangulation> {
    let n = directions.len();
    if n < 4 {
        return Err(Error::DegenerateInput(format!("{n} points")));
    }
    let pts: Vec<[f64; 3]> = directions.iter().map(Direction::unit_vector).collect();
    let scale = pts.iter().map(|&p| norm(p)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let eps = PLANE_EPS * scale;

    let seed = initial_simplex(&pts, eps)?;
    let interior = {
        let mut c = [0.0; 3];
        for &i in &seed {
            for k in 0..3 {
                c[k] += pts[i][k] / 4.0;
            }
        }
        c
    };

    let mut faces: Vec<Face> = Vec::new();
    let mut edge_face: HashMap<(usize, usize), usize> = HashMap::new();
    let add_face = |faces: &mut Vec<Face>, edge_face: &mut HashMap<(usize, usize), usize>, v: [usize; 3]| {
        let f = make_face(&pts, v);
        let idx = faces.len();
        for e in f.edges() {
            edge_face.insert(e, idx);
        }
        faces.push(f);
    };

    let [a, b, c, d] = seed;
    for tri in [[a, b, c], [a, b, d], [a, c, d], [b, c, d]] {
        let f = make_face(&pts, tri);
        let oriented = if f.distance(interior) > 0.0 {
            [tri[0], tri[2], tri[1]]
        } else {
            tri
        };
        add_face(&mut faces, &mut edge_face, oriented);
    }

    for i in 0..n {
        if seed.contains(&i) {
            continue;
        }
        let p = pts[i];
        let mut visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && f.distance(p) > eps)
            .map(|(k, _)| k)
            .collect();
        if visible.is_empty() {
            visible = faces
                .iter()
                .enumerate()
                .filter(|(_, f)| f.alive && f.distance(p).abs() <= eps && f.contains(&pts, p))
                .map(|(k, _)| k)
                .collect();
            for &k in &visible {
                if let Some(&v) = faces[k].v.iter().find(|&&v| norm(sub(pts[v], p)) < 1e-9) {
                    return Err(Error::DegenerateInput(format!("points {v} and {i} coincide")));
                }
            }
            if visible.is_empty() {
                return Err(Error::DegenerateInput(format!("point {i} lies inside the hull")));
            }
        }

        let mut is_visible = vec![false; faces.len()];
        for &k in &visible {
            is_visible[k] = true;
        }
        let mut horizon = Vec::new();
        for &k in &visible {
            for (u, v) in faces[k].edges() {
                match edge_face.get(&(v, u)) {
                    Some(&g) if is_visible[g] => {}
                    _ => horizon.push((u, v)),
                }
            }
        }
        for &k in &visible {
            faces[k].alive = false;
            for e in faces[k].edges() {
                if edge_face.get(&e) == Some(&k) {
                    edge_face.remove(&e);
                }
            }
        }
        for (u, v) in horizon {
            add_face(&mut faces, &mut edge_face, [u, v, i]);
        }
    }

    let triangles: Vec<[usize; 3]> = faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    let mut edges: Vec<(usize, usize)> = triangles
        .iter()
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();

    let mut on_hull = vec![false; n];
    for t in &triangles {
        for &v in t {
            on_hull[v] = true;
        }
    }
    if let Some(missing) = on_hull.iter().position(|&x| !x) {
        return Err(Error::DegenerateInput(format!("point {missing} is not on the hull")));
    }
    Ok(HullTriangulation { triangles, edges })
}

fn initial_simplex(pts: &[[f64; 3]], eps: f64) -> Result<[usize; 4]> {
    let a = 0;
    let b = (0..pts.len())
        .max_by(|&i, &j| norm(sub(pts[i], pts[a])).total_cmp(&norm(sub(pts[j], pts[a]))))
        .unwrap();
    let ab = sub(pts[b], pts[a]);
    let line_dist = |i: usize| norm(cross(ab, sub(pts[i], pts[a])));
    let c = (0..pts.len()).max_by(|&i, &j| line_dist(i).total_cmp(&line_dist(j))).unwrap();
    if line_dist(c) <= eps * norm(ab).max(1.0) {
        return Err(Error::DegenerateInput("points are collinear".into()));
    }
    let plane = make_face(pts, [a, b, c]);
    let d = (0..pts.len())
        .max_by(|&i, &j| plane.distance(pts[i]).abs().total_cmp(&plane.distance(pts[j]).abs()))
        .unwrap();
    if plane.distance(pts[d]).abs() <= eps {
        return Err(Error::DegenerateInput("points are coplanar".into()));
    }
    Ok([a, b, c, d])
}

/// Largest signed distance of any point above any facet; `<= 0` for a valid hull.
pub fn max_violation(directions: &[Direction], hull: &HullTriangulation) -> f64 {
    let pts: Vec<[f64; 3]> = directions.iter().map(Direction::unit_vector).collect();
    let mut worst = f64::NEG_INFINITY;
    for &t in &hull.triangles {
        let f = make_face(&pts, t);
        for (i, &p) in pts.iter().enumerate() {
            if !t.contains(&i) {
                worst = worst.max(f.distance(p));
            }
        }
    }
    worst
}
