//! Level sets of a sampled scalar field by marching squares.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A polyline in the plane. Closed polylines repeat their first point at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline<T> {
    pub points: Vec<(T, T)>,
    pub closed: bool,
}

impl<T: Real> Polyline<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

// Edge ids: 2·(i + nx·j) for the horizontal edge (i,j)-(i+1,j), +1 for the
// vertical edge (i,j)-(i,j+1).
fn h_edge(i: usize, j: usize, nx: usize) -> usize {
    2 * (i + nx * j)
}

fn v_edge(i: usize, j: usize, nx: usize) -> usize {
    2 * (i + nx * j) + 1
}

/// Traces the level set `f = level` of samples `f[j·nx + i]` at `(xs[i], ys[j])`.
/// Cells touching a NaN sample are skipped. Saddle cells are resolved with
/// the cell-centre average.
pub fn marching_squares<T: Real>(xs: &[T], ys: &[T], f: &[T], level: T) -> Vec<Polyline<T>> {
    let nx = xs.len();
    let ny = ys.len();
    assert_eq!(f.len(), nx * ny, "sample count must equal nx·ny");
    if nx < 2 || ny < 2 {
        return Vec::new();
    }
    let val = |i: usize, j: usize| f[j * nx + i] - level;
    let above = |v: T| v >= T::zero();

    let mut points: HashMap<usize, (T, T)> = HashMap::new();
    let mut crossing = |edge: usize, a: (T, T), b: (T, T), fa: T, fb: T| -> usize {
        points.entry(edge).or_insert_with(|| {
            let t = fa / (fa - fb);
            (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
        });
        edge
    };

    let mut segments: Vec<(usize, usize)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            if c.iter().any(|v| v.is_nan()) {
                continue;
            }
            let pos = [
                (xs[i], ys[j]),
                (xs[i + 1], ys[j]),
                (xs[i + 1], ys[j + 1]),
                (xs[i], ys[j + 1]),
            ];
            let up = [above(c[0]), above(c[1]), above(c[2]), above(c[3])];
            // edges: bottom 0-1, right 1-2, top 3-2, left 0-3
            let ends = [(0, 1), (1, 2), (3, 2), (0, 3)];
            let ids = [
                h_edge(i, j, nx),
                v_edge(i + 1, j, nx),
                h_edge(i, j + 1, nx),
                v_edge(i, j, nx),
            ];
            let mut cut = [None; 4];
            for e in 0..4 {
                let (a, b) = ends[e];
                if up[a] != up[b] {
                    cut[e] = Some(crossing(ids[e], pos[a], pos[b], c[a], c[b]));
                }
            }
            let hits: Vec<usize> = cut.iter().flatten().copied().collect();
            match hits.len() {
                2 => segments.push((hits[0], hits[1])),
                4 => {
                    let centre = (c[0] + c[1] + c[2] + c[3]) * T::lit(0.25);
                    let [b, r, t, l] = [
                        cut[0].unwrap(),
                        cut[1].unwrap(),
                        cut[2].unwrap(),
                        cut[3].unwrap(),
                    ];
                    // corner 0 and 2 share a state when the diagonal 1-3 is the other
                    let isolate_odd = up[0] == above(centre);
                    if isolate_odd {
                        segments.push((b, r));
                        segments.push((t, l));
                    } else {
                        segments.push((b, l));
                        segments.push((r, t));
                    }
                }
                _ => {}
            }
        }
    }

    let mut by_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(k);
        by_edge.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let next_from = |edge: usize, from_seg: usize, used: &[bool]| -> Option<usize> {
        by_edge
            .get(&edge)
            .and_then(|v| v.iter().copied().find(|&s| s != from_seg && !used[s]))
    };

    let mut out = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut forward = vec![a, b];
        let mut seg = start;
        let mut edge = b;
        let mut closed = false;
        while let Some(s) = next_from(edge, seg, &used) {
            used[s] = true;
            let (p, q) = segments[s];
            edge = if p == edge { q } else { p };
            seg = s;
            forward.push(edge);
            if edge == a {
                closed = true;
                break;
            }
        }
        if !closed {
            let mut backward = Vec::new();
            let mut seg = start;
            let mut edge = a;
            while let Some(s) = next_from(edge, seg, &used) {
                used[s] = true;
                let (p, q) = segments[s];
                edge = if p == edge { q } else { p };
                seg = s;
                backward.push(edge);
            }
            backward.reverse();
            backward.extend(forward);
            forward = backward;
        }
        out.push(Polyline {
            points: forward.iter().map(|e| points[e]).collect(),
            closed,
        });
    }
    out
}
