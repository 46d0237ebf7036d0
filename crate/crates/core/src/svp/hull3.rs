//! Incremental convex hull in R^3 for small point sets on the unit sphere.
//!
//! For points on a sphere the hull is the Delaunay triangulation, so the
//! outward facet normals are exactly the spherical Voronoi vertices. Facets
//! are returned as index triples oriented with the interior below them.

pub(crate) fn convex_hull_faces(points: &[[f64; 3]]) -> Option<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 4 {
        return None;
    }
    let eps = 1e-10;

    // Initial tetrahedron: spread four points as far as possible.
    let i0 = 0;
    let i1 = (0..n)
        .max_by(|&a, &b| dist2(points[a], points[i0]).total_cmp(&dist2(points[b], points[i0])))?;
    if dist2(points[i1], points[i0]) < eps {
        return None;
    }
    let i2 = (0..n).max_by(|&a, &b| {
        let ca = cross(sub(points[i1], points[i0]), sub(points[a], points[i0]));
        let cb = cross(sub(points[i1], points[i0]), sub(points[b], points[i0]));
        norm2(ca).total_cmp(&norm2(cb))
    })?;
    let base_normal = cross(sub(points[i1], points[i0]), sub(points[i2], points[i0]));
    if norm2(base_normal) < eps * eps {
        return None;
    }
    let i3 = (0..n).max_by(|&a, &b| {
        let va = dot(base_normal, sub(points[a], points[i0])).abs();
        let vb = dot(base_normal, sub(points[b], points[i0])).abs();
        va.total_cmp(&vb)
    })?;
    if dot(base_normal, sub(points[i3], points[i0])).abs() < eps {
        return None; // all points coplanar
    }

    let mut faces: Vec<[usize; 3]> = vec![[i0, i1, i2], [i0, i2, i3], [i0, i3, i1], [i1, i3, i2]];
    let centroid = [
        (points[i0][0] + points[i1][0] + points[i2][0] + points[i3][0]) / 4.0,
        (points[i0][1] + points[i1][1] + points[i2][1] + points[i3][1]) / 4.0,
        (points[i0][2] + points[i1][2] + points[i2][2] + points[i3][2]) / 4.0,
    ];
    for f in &mut faces {
        let nrm = face_normal(points, *f);
        if dot(nrm, sub(centroid, points[f[0]])) > 0.0 {
            f.swap(1, 2);
        }
    }

    let seed = [i0, i1, i2, i3];
    for p in 0..n {
        if seed.contains(&p) {
            continue;
        }
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&fi| {
                let f = faces[fi];
                let nrm = face_normal(points, f);
                dot(nrm, sub(points[p], points[f[0]])) > eps
            })
            .collect();
        if visible.is_empty() {
            continue;
        }
        // Horizon: edges of visible faces not shared (with opposite
        // orientation) by another visible face.
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &fi in &visible {
            let [a, b, c] = faces[fi];
            for e in [(a, b), (b, c), (c, a)] {
                if let Some(pos) = edges.iter().position(|&(u, v)| u == e.1 && v == e.0) {
                    edges.remove(pos);
                } else {
                    edges.push(e);
                }
            }
        }
        let mut keep: Vec<[usize; 3]> = faces
            .iter()
            .enumerate()
            .filter(|(fi, _)| !visible.contains(fi))
            .map(|(_, f)| *f)
            .collect();
        for (u, v) in edges {
            keep.push([u, v, p]);
        }
        faces = keep;
    }
    Some(faces)
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm2(a: [f64; 3]) -> f64 {
    dot(a, a)
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm2(sub(a, b))
}

pub(crate) fn face_normal(points: &[[f64; 3]], f: [usize; 3]) -> [f64; 3] {
    cross(
        sub(points[f[1]], points[f[0]]),
        sub(points[f[2]], points[f[0]]),
    )
}

pub(crate) fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm2(a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}
