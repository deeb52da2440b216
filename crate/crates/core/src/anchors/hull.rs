//! Quickhull in two and three dimensions.
//!
//! Points within `HULL_EPS` (scaled by the extent of the point cloud when it
//! exceeds one) of a supporting line or plane are treated as interior, so
//! near-coplanar slivers never produce extra vertices.

use std::collections::HashMap;

use ndarray::ArrayView2;

use super::{candidates_from_mask, order_anchors, AnchorMethod, AnchorSet};
use crate::embed::{EmbedMethod, Embedding};
use crate::{Error, Result};

pub const HULL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    pub dim: usize,
    /// Input indices of the hull vertices, ascending.
    pub vertices: Vec<usize>,
    /// 2-D: edges `[a, b]` in counter-clockwise order. 3-D: outward-oriented triangles.
    pub facets: Vec<Vec<usize>>,
}

impl ConvexHull {
    /// Counter-clockwise vertex cycle of a 2-D hull, starting at the lowest-x vertex.
    pub fn ring(&self) -> Vec<usize> {
        self.facets.iter().map(|e| e[0]).collect()
    }
}

fn tolerance(points: ArrayView2<f64>) -> f64 {
    let mut extent: f64 = 0.0;
    for col in points.columns() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        extent = extent.max(hi - lo);
    }
    HULL_EPS * extent.max(1.0)
}

/// Exact convex hull of the rows of `points` (2 or 3 columns).
pub fn convex_hull(points: ArrayView2<f64>) -> Result<ConvexHull> {
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("hull input contains non-finite coordinates"));
    }
    let eps = tolerance(points);
    match points.ncols() {
        2 => {
            let pts: Vec<[f64; 2]> = points.rows().into_iter().map(|r| [r[0], r[1]]).collect();
            let ring = hull_2d(&pts, eps)?;
            let mut vertices = ring.clone();
            vertices.sort_unstable();
            let facets = (0..ring.len())
                .map(|i| vec![ring[i], ring[(i + 1) % ring.len()]])
                .collect();
            Ok(ConvexHull {
                dim: 2,
                vertices,
                facets,
            })
        }
        3 => {
            let pts: Vec<[f64; 3]> = points.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect();
            let faces = hull_3d(&pts, eps)?;
            let mut vertices: Vec<usize> = faces.iter().flatten().copied().collect();
            vertices.sort_unstable();
            vertices.dedup();
            Ok(ConvexHull {
                dim: 3,
                vertices,
                facets: faces.into_iter().map(|f| f.to_vec()).collect(),
            })
        }
        dim => Err(Error::UnsupportedDim { dim }),
    }
}

/// Anchors are the hull vertices of the candidate points, ordered by distance
/// from the candidate centroid.
pub fn exact_hull_anchors(embedding: &Embedding, candidate_mask: &[bool]) -> Result<AnchorSet> {
    let dim = embedding.dim();
    if dim != 2 && dim != 3 {
        return Err(Error::UnsupportedDim { dim });
    }
    if candidate_mask.len() != embedding.len() {
        return Err(Error::invalid("candidate mask length differs from embedding size"));
    }
    let method = match embedding.method {
        EmbedMethod::Pca => AnchorMethod::HullPca,
        EmbedMethod::Tsne => AnchorMethod::HullTsne,
        EmbedMethod::RandomProjection => {
            return Err(Error::invalid("exact hull anchors need a PCA or t-SNE embedding"))
        }
    };
    let candidates = candidates_from_mask(candidate_mask);
    if candidates.len() <= dim {
        return Err(Error::DegenerateGeometry { dim });
    }
    let sub = embedding.coords.select(ndarray::Axis(0), &candidates);
    let hull = convex_hull(sub.view())?;
    let vertices: Vec<usize> = hull.vertices.iter().map(|&i| candidates[i]).collect();
    order_anchors(&vertices, embedding.coords.view(), &candidates, method)
}

// ---------------------------------------------------------------------------
// 2-D

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn hull_2d(pts: &[[f64; 2]], eps: f64) -> Result<Vec<usize>> {
    let degenerate = Error::DegenerateGeometry { dim: 2 };
    if pts.len() < 3 {
        return Err(degenerate);
    }
    let lex = |i: usize, j: usize| {
        pts[i][0]
            .total_cmp(&pts[j][0])
            .then(pts[i][1].total_cmp(&pts[j][1]))
            .then(i.cmp(&j))
    };
    let a = (0..pts.len()).min_by(|&i, &j| lex(i, j)).expect("nonempty");
    let b = (0..pts.len()).max_by(|&i, &j| lex(i, j)).expect("nonempty");
    let len = ((pts[b][0] - pts[a][0]).powi(2) + (pts[b][1] - pts[a][1]).powi(2)).sqrt();
    if len <= eps {
        return Err(degenerate);
    }
    let dist = |p: usize| cross2(pts[a], pts[b], pts[p]) / len;
    let left: Vec<usize> = (0..pts.len()).filter(|&p| dist(p) > eps).collect();
    let right: Vec<usize> = (0..pts.len()).filter(|&p| dist(p) < -eps).collect();
    if left.is_empty() && right.is_empty() {
        return Err(degenerate);
    }

    // Counter-clockwise: a, the chain below a->b, b, the chain above.
    let mut ring = vec![a];
    ring.extend(chain_2d(pts, b, a, &right, eps).into_iter().rev());
    ring.push(b);
    ring.extend(chain_2d(pts, a, b, &left, eps).into_iter().rev());
    Ok(ring)
}

/// Hull vertices strictly left of `from -> to`, ordered from `from` to `to`.
fn chain_2d(pts: &[[f64; 2]], from: usize, to: usize, set: &[usize], eps: f64) -> Vec<usize> {
    if set.is_empty() {
        return Vec::new();
    }
    let dist = |p: usize, f: usize, t: usize| {
        let l = ((pts[t][0] - pts[f][0]).powi(2) + (pts[t][1] - pts[f][1]).powi(2)).sqrt();
        cross2(pts[f], pts[t], pts[p]) / l
    };
    let mut far = set[0];
    let mut far_d = dist(far, from, to);
    for &p in &set[1..] {
        let dp = dist(p, from, to);
        if dp > far_d || (dp == far_d && p < far) {
            far = p;
            far_d = dp;
        }
    }
    let s1: Vec<usize> = set.iter().copied().filter(|&p| dist(p, from, far) > eps).collect();
    let s2: Vec<usize> = set.iter().copied().filter(|&p| dist(p, far, to) > eps).collect();
    let mut res = chain_2d(pts, from, far, &s1, eps);
    res.push(far);
    res.extend(chain_2d(pts, far, to, &s2, eps));
    res
}

// ---------------------------------------------------------------------------
// 3-D

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn len3(a: V3) -> f64 {
    dot3(a, a).sqrt()
}

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    /// `adj[e]` is the face across edge `v[e] -> v[(e + 1) % 3]`.
    adj: [usize; 3],
    normal: V3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(pts: &[V3], v: [usize; 3]) -> Face {
        let n = cross(sub(pts[v[1]], pts[v[0]]), sub(pts[v[2]], pts[v[0]]));
        let l = len3(n);
        let normal = [n[0] / l, n[1] / l, n[2] / l];
        Face {
            v,
            adj: [usize::MAX; 3],
            normal,
            offset: dot3(normal, pts[v[0]]),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn dist(&self, p: V3) -> f64 {
        dot3(self.normal, p) - self.offset
    }
}

fn farthest(items: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    items.fold(None, |best, (i, d)| match best {
        Some((bi, bd)) if bd > d || (bd == d && bi < i) => Some((bi, bd)),
        _ => Some((i, d)),
    })
}

fn initial_tetrahedron(pts: &[V3], eps: f64) -> Result<[usize; 4]> {
    let degenerate = Error::DegenerateGeometry { dim: 3 };
    if pts.len() < 4 {
        return Err(degenerate);
    }
    let mut extremes = Vec::with_capacity(6);
    for axis in 0..3 {
        let key = |i: usize| pts[i][axis];
        let lo = (0..pts.len())
            .min_by(|&i, &j| key(i).total_cmp(&key(j)).then(i.cmp(&j)))
            .expect("nonempty");
        let hi = (0..pts.len())
            .max_by(|&i, &j| key(i).total_cmp(&key(j)).then(j.cmp(&i)))
            .expect("nonempty");
        extremes.push(lo);
        extremes.push(hi);
    }
    let mut best = (extremes[0], extremes[1], -1.0);
    for (x, &i) in extremes.iter().enumerate() {
        for &j in &extremes[x + 1..] {
            let d = len3(sub(pts[i], pts[j]));
            if d > best.2 {
                best = (i.min(j), i.max(j), d);
            }
        }
    }
    let (i0, i1, d01) = best;
    if d01 <= eps {
        return Err(degenerate);
    }
    let axis = sub(pts[i1], pts[i0]);
    let (i2, d2) =
        farthest((0..pts.len()).map(|p| (p, len3(cross(axis, sub(pts[p], pts[i0]))) / d01))).expect("nonempty");
    if d2 <= eps {
        return Err(degenerate);
    }
    let base = Face::new(pts, [i0, i1, i2]);
    let (i3, d3) = farthest((0..pts.len()).map(|p| (p, base.dist(pts[p]).abs()))).expect("nonempty");
    if d3 <= eps {
        return Err(degenerate);
    }
    Ok([i0, i1, i2, i3])
}

fn link_faces(faces: &mut [Face], ids: &[usize]) -> Result<()> {
    let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for &f in ids {
        for e in 0..3 {
            let a = faces[f].v[e];
            let b = faces[f].v[(e + 1) % 3];
            edges.insert((a, b), (f, e));
        }
    }
    for &f in ids {
        for e in 0..3 {
            let a = faces[f].v[e];
            let b = faces[f].v[(e + 1) % 3];
            let &(g, _) = edges.get(&(b, a)).ok_or(Error::Hull("open initial simplex"))?;
            faces[f].adj[e] = g;
        }
    }
    Ok(())
}

fn hull_3d(pts: &[V3], eps: f64) -> Result<Vec<[usize; 3]>> {
    let tet = initial_tetrahedron(pts, eps)?;
    let interior = {
        let mut c = [0.0; 3];
        for &i in &tet {
            for k in 0..3 {
                c[k] += pts[i][k] / 4.0;
            }
        }
        c
    };

    let mut faces: Vec<Face> = Vec::new();
    for tri in [[0, 1, 2], [0, 3, 1], [1, 3, 2], [0, 2, 3]] {
        let mut v = [tet[tri[0]], tet[tri[1]], tet[tri[2]]];
        let mut f = Face::new(pts, v);
        if f.dist(interior) > 0.0 {
            v.swap(1, 2);
            f = Face::new(pts, v);
        }
        faces.push(f);
    }
    link_faces(&mut faces, &[0, 1, 2, 3])?;

    for p in 0..pts.len() {
        if tet.contains(&p) {
            continue;
        }
        if let Some(f) = faces.iter_mut().find(|f| f.dist(pts[p]) > eps) {
            f.outside.push(p);
        }
    }

    let mut stamp: Vec<usize> = vec![0; faces.len()];
    let mut visible_flag: Vec<bool> = vec![false; faces.len()];
    let mut round = 0usize;
    let mut fi = 0;
    while fi < faces.len() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            fi += 1;
            continue;
        }
        round += 1;
        let (eye, _) =
            farthest(faces[fi].outside.iter().map(|&p| (p, faces[fi].dist(pts[p])))).expect("nonempty outside set");
        let eye_pt = pts[eye];

        // Flood the connected region of faces that see the eye point.
        let mut visible = vec![fi];
        stamp[fi] = round;
        visible_flag[fi] = true;
        let mut stack = vec![fi];
        while let Some(f) = stack.pop() {
            for e in 0..3 {
                let n = faces[f].adj[e];
                if stamp[n] == round {
                    continue;
                }
                stamp[n] = round;
                visible_flag[n] = faces[n].dist(eye_pt) > eps;
                if visible_flag[n] {
                    visible.push(n);
                    stack.push(n);
                }
            }
        }

        let mut horizon: Vec<(usize, usize, usize)> = Vec::new();
        for &f in &visible {
            for e in 0..3 {
                let n = faces[f].adj[e];
                if !(stamp[n] == round && visible_flag[n]) {
                    horizon.push((faces[f].v[e], faces[f].v[(e + 1) % 3], n));
                }
            }
        }

        let first_new = faces.len();
        let mut by_start: HashMap<usize, usize> = HashMap::with_capacity(horizon.len());
        let mut by_end: HashMap<usize, usize> = HashMap::with_capacity(horizon.len());
        for (k, &(a, b, n)) in horizon.iter().enumerate() {
            let id = first_new + k;
            let mut f = Face::new(pts, [a, b, eye]);
            if f.dist(interior) > eps {
                return Err(Error::Hull("new face is not outward-facing"));
            }
            f.adj[0] = n;
            let back = (0..3)
                .find(|&j| faces[n].v[j] == b && faces[n].v[(j + 1) % 3] == a)
                .ok_or(Error::Hull("horizon edge has no twin"))?;
            faces[n].adj[back] = id;
            if by_start.insert(a, id).is_some() || by_end.insert(b, id).is_some() {
                return Err(Error::Hull("horizon is not a simple cycle"));
            }
            faces.push(f);
        }
        for k in 0..horizon.len() {
            let (a, b, _) = horizon[k];
            let id = first_new + k;
            faces[id].adj[1] = *by_start.get(&b).ok_or(Error::Hull("open horizon"))?;
            faces[id].adj[2] = *by_end.get(&a).ok_or(Error::Hull("open horizon"))?;
        }
        stamp.resize(faces.len(), 0);
        visible_flag.resize(faces.len(), false);

        let mut orphans: Vec<usize> = Vec::new();
        for &f in &visible {
            faces[f].alive = false;
            orphans.extend(faces[f].outside.drain(..).filter(|&p| p != eye));
        }
        orphans.sort_unstable();
        for p in orphans {
            if let Some(f) = faces[first_new..].iter_mut().find(|f| f.dist(pts[p]) > eps) {
                f.outside.push(p);
            }
        }
    }

    Ok(faces.into_iter().filter(|f| f.alive).map(|f| f.v).collect())
}
