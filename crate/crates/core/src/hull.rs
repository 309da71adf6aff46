//! Upper concave envelope of sampled points (Andrew's monotone chain,
//! upper half only).

/// Indices of the upper-hull vertices of `(xs[i], ys[i])`; `xs` must be
/// strictly increasing. Points on a hull edge are dropped.
pub fn upper_hull(xs: &[f64], ys: &[f64], out: &mut Vec<usize>) {
    debug_assert_eq!(xs.len(), ys.len());
    out.clear();
    for i in 0..xs.len() {
        while out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross >= 0.0 {
                out.pop();
            } else {
                break;
            }
        }
        out.push(i);
    }
}

/// Evaluation of a hull built by [`upper_hull`].
#[derive(Debug, Clone, Copy)]
pub struct HullView<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub vertices: &'a [usize],
}

impl<'a> HullView<'a> {
    /// Index `k` into `vertices` such that `x` lies in
    /// `[xs[vertices[k]], xs[vertices[k + 1]]]`.
    pub fn edge(&self, x: f64) -> usize {
        let v = self.vertices;
        let k = v.partition_point(|&i| self.xs[i] <= x);
        k.saturating_sub(1).min(v.len().saturating_sub(2))
    }

    pub fn eval_on_edge(&self, k: usize, x: f64) -> f64 {
        let v = self.vertices;
        if v.len() == 1 {
            return self.ys[v[0]];
        }
        let (i, j) = (v[k], v[k + 1]);
        let t = (x - self.xs[i]) / (self.xs[j] - self.xs[i]);
        self.ys[i] + t * (self.ys[j] - self.ys[i])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_on_edge(self.edge(x), x)
    }

    /// Evaluates at nondecreasing query points, writing into `out`.
    pub fn eval_sorted(&self, queries: &[f64], out: &mut [f64]) {
        let v = self.vertices;
        let mut k = 0usize;
        let last = v.len().saturating_sub(2);
        for (x, o) in queries.iter().zip(out.iter_mut()) {
            while k < last && self.xs[v[k + 1]] <= *x {
                k += 1;
            }
            *o = self.eval_on_edge(k, *x);
        }
    }

    /// Neighbouring hull vertices around `x` (equal when `x` is a vertex).
    pub fn bracket(&self, x: f64) -> (f64, f64) {
        let v = self.vertices;
        if v.len() == 1 {
            return (self.xs[v[0]], self.xs[v[0]]);
        }
        let k = self.edge(x);
        let (a, b) = (self.xs[v[k]], self.xs[v[k + 1]]);
        if x == a {
            (a, a)
        } else if x == b {
            (b, b)
        } else {
            (a, b)
        }
    }
}
