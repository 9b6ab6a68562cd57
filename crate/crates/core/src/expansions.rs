//! Path expansions of lattice Green functions and graph resolvents, each
//! paired with a direct linear solve.
//!
//! With `A = (2d + m^2) I - J` (`J` the nearest-neighbour adjacency),
//! `(m^2 I - Delta)^{-1} = sum_n J^n / (2d + m^2)^{n+1}`, so the `(x, y)` entry
//! is `sum_n N_n(x, y) (2d + m^2)^{-(n+1)}` with `N_n` the number of length-`n`
//! nearest-neighbour paths. For a weighted graph `(L - J)^{-1} =
//! sum_n (D^{-1} J)^n D^{-1}` with `D = diag(lambda)`, which is the sum over
//! paths of `prod J_a prod_v lambda_v^{-eta(v)}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Largest box (in sites) the solvers will allocate.
pub const MAX_SITES: u64 = 1 << 24;
/// Largest expansion order accepted.
pub const MAX_PATH_LEN: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Zero outside the box.
    Dirichlet,
    /// Periodic in every coordinate.
    Torus,
}

/// The cube `[-half_width, half_width]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub dimension: usize,
    pub half_width: u64,
    pub mass: f64,
    pub boundary: Boundary,
}

impl BoxSpec {
    pub fn new(dimension: usize, half_width: u64, mass: f64, boundary: Boundary) -> Result<BoxSpec> {
        let b = BoxSpec { dimension, half_width, mass, boundary };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if self.mass == 0.0 || !self.mass.is_finite() {
            return Err(Error::InvalidArgument(format!("mass must be finite and nonzero, got {}", self.mass)));
        }
        if self.half_width == 0 {
            return Err(Error::InvalidArgument("half width must be positive".into()));
        }
        let sites = (self.side() as u128).checked_pow(self.dimension as u32);
        match sites {
            Some(s) if s <= MAX_SITES as u128 => Ok(()),
            _ => Err(Error::Budget {
                what: "box sites",
                requested: sites.map_or(u64::MAX, |s| s.min(u64::MAX as u128) as u64),
                limit: MAX_SITES,
            }),
        }
    }

    pub fn side(&self) -> u64 {
        2 * self.half_width + 1
    }

    pub fn sites(&self) -> usize {
        (self.side() as usize).pow(self.dimension as u32)
    }

    /// `2d + m^2`.
    pub fn diagonal(&self) -> f64 {
        2.0 * self.dimension as f64 + self.mass * self.mass
    }

    /// `2d / (2d + m^2)`.
    pub fn contraction(&self) -> f64 {
        contraction(self.dimension, self.mass)
    }

    fn index(&self, p: &[i64]) -> Result<usize> {
        if p.len() != self.dimension {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, box has dimension {}",
                p.len(),
                self.dimension
            )));
        }
        let w = self.half_width as i64;
        let mut idx = 0usize;
        for &c in p.iter().rev() {
            if c < -w || c > w {
                return Err(Error::InvalidArgument(format!("point {p:?} outside box of half width {w}")));
            }
            idx = idx * self.side() as usize + (c + w) as usize;
        }
        Ok(idx)
    }

    /// `y = J x` for the box adjacency.
    fn apply_adjacency(&self, x: &[f64], y: &mut [f64]) {
        let side = self.side() as usize;
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut stride = 1usize;
        for _ in 0..self.dimension {
            let block = stride * side;
            for (i, yi) in y.iter_mut().enumerate() {
                let c = (i / stride) % side;
                let base = i - c * stride;
                if c > 0 {
                    *yi += x[i - stride];
                } else if self.boundary == Boundary::Torus {
                    *yi += x[base + (side - 1) * stride];
                }
                if c + 1 < side {
                    *yi += x[i + stride];
                } else if self.boundary == Boundary::Torus {
                    *yi += x[base];
                }
            }
            stride = block;
        }
    }

    /// Geometric bound on `|G_Z^d(x, y) - G_box(x, y)|` for Dirichlet boxes:
    /// a path from `x` leaving the box has at least `half_width - |x|_inf + 1` steps.
    pub fn truncation_bound(&self, x: &[i64]) -> Option<f64> {
        match self.boundary {
            Boundary::Torus => None,
            Boundary::Dirichlet => {
                let inf = x.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0);
                let exit = self.half_width.saturating_sub(inf) + 1;
                Some(self.contraction().powf(exit as f64) / (self.mass * self.mass))
            }
        }
    }
}

pub fn contraction(dimension: usize, mass: f64) -> f64 {
    let two_d = 2.0 * dimension as f64;
    two_d / (two_d + mass * mass)
}

/// Tail of the Green path sum beyond length `max_len`: `rho^{max_len+1} / m^2`.
pub fn green_tail_bound(dimension: usize, mass: f64, max_len: u64) -> f64 {
    contraction(dimension, mass).powf(max_len as f64 + 1.0) / (mass * mass)
}

/// Smallest `max_len` whose tail bound is at most `tol`.
pub fn green_len_for_tolerance(dimension: usize, mass: f64, tol: f64) -> u64 {
    let rho = contraction(dimension, mass);
    let l = ((tol * mass * mass).ln() / rho.ln() - 1.0).ceil().max(0.0) as u64;
    // guard against rounding in the logarithms
    (l.saturating_sub(2)..=l + 2).find(|&n| green_tail_bound(dimension, mass, n) <= tol).unwrap_or(l + 2)
}

/// Smallest half width making the Dirichlet truncation bound at `x` at most `tol`.
pub fn half_width_for_tolerance(dimension: usize, mass: f64, x: &[i64], tol: f64) -> u64 {
    let inf = x.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0);
    let exit = green_len_for_tolerance(dimension, mass, tol) + 1;
    inf + exit.saturating_sub(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenSolve {
    pub value: f64,
    /// Bound on `|value - G_box(x, y)|` from the final residual.
    pub solver_error: f64,
    /// Bound on `|G_box - G_Z^d|` (Dirichlet only).
    pub truncation_bound: Option<f64>,
    pub iterations: usize,
}

/// `((m^2 I - Delta)^{-1})_{xy}` on the box by conjugate gradients.
///
/// `A = (2d + m^2) I - J` is symmetric with spectrum in `[m^2, 4d + m^2]`, so
/// the solution error is at most `|residual|_2 / m^2`. Fails with
/// [`Error::Solver`] if that bound does not reach `solver_tol`.
pub fn laplacian_green_direct(b: &BoxSpec, x: &[i64], y: &[i64], solver_tol: f64) -> Result<GreenSolve> {
    b.validate()?;
    let xi = b.index(x)?;
    let yi = b.index(y)?;
    let n = b.sites();
    let diag = b.diagonal();
    let m2 = b.mass * b.mass;
    let apply = |v: &[f64], out: &mut [f64]| {
        b.apply_adjacency(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = diag * vi - *o;
        }
    };
    let mut sol = vec![0.0; n];
    let mut r = vec![0.0; n];
    r[yi] = 1.0;
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = 1.0f64;
    let max_iter = 10 * n + 100;
    let mut iterations = 0;
    while rr.sqrt() / m2 > solver_tol * 0.1 && iterations < max_iter {
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            sol[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        iterations += 1;
    }
    // recompute the true residual so the bound does not rely on the recurrence
    apply(&sol, &mut ap);
    ap[yi] -= 1.0;
    let solver_error = dot(&ap, &ap).sqrt() / m2;
    if solver_error > solver_tol {
        return Err(Error::Solver(format!(
            "conjugate gradients reached error bound {solver_error:e} after {iterations} iterations"
        )));
    }
    Ok(GreenSolve {
        value: sol[xi],
        solver_error,
        truncation_bound: b.truncation_bound(x),
        iterations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSum {
    pub value: f64,
    /// Bound on the omitted terms beyond `max_len`.
    pub tail_bound: f64,
    pub max_len: u64,
}

/// `sum_{n <= max_len} N_n(x, y) (2d + m^2)^{-(n+1)}` with paths confined to the box.
///
/// `N_n(x, .)` is advanced by one push of `J` per length; with
/// `half_width >= |x|_inf + max_len` no counted path touches the boundary and
/// the sum equals the infinite-lattice one.
pub fn laplacian_green_path_sum(b: &BoxSpec, x: &[i64], y: &[i64], max_len: u64) -> Result<PathSum> {
    b.validate()?;
    let xi = b.index(x)?;
    let yi = b.index(y)?;
    let dist: u64 = x.iter().zip(y).map(|(a, c)| a.abs_diff(*c)).sum();
    if max_len < dist && b.boundary == Boundary::Dirichlet {
        return Err(Error::InvalidArgument(format!("max_len {max_len} is below the distance {dist}")));
    }
    if max_len > MAX_PATH_LEN {
        return Err(Error::Budget { what: "path length", requested: max_len, limit: MAX_PATH_LEN });
    }
    let inv = 1.0 / b.diagonal();
    // counts scaled by (2d + m^2)^{-n} to stay in range
    let mut cur = vec![0.0; b.sites()];
    let mut next = vec![0.0; b.sites()];
    cur[xi] = inv;
    let mut value = cur[yi];
    for _ in 0..max_len {
        b.apply_adjacency(&cur, &mut next);
        next.iter_mut().for_each(|v| *v *= inv);
        std::mem::swap(&mut cur, &mut next);
        value += cur[yi];
    }
    Ok(PathSum { value, tail_bound: green_tail_bound(b.dimension, b.mass, max_len), max_len })
}

/// Vertex weights `lambda` and symmetric couplings `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    pub j: DMatrix<f64>,
    pub lambda: Vec<f64>,
}

/// JSON form `{"vertices": n, "edges": [[u, v, w], ...], "lambda": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphInput {
    pub vertices: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub lambda: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(j: DMatrix<f64>, lambda: Vec<f64>) -> Result<WeightedGraph> {
        let n = lambda.len();
        if j.nrows() != n || j.ncols() != n {
            return Err(Error::InvalidArgument("coupling matrix and lambda sizes differ".into()));
        }
        for u in 0..n {
            if !(lambda[u] > 0.0 && lambda[u].is_finite()) {
                return Err(Error::InvalidArgument(format!("lambda[{u}] = {} is not positive", lambda[u])));
            }
            if j[(u, u)] != 0.0 {
                return Err(Error::InvalidArgument(format!("coupling J[{u}][{u}] must be zero")));
            }
            for v in 0..n {
                if j[(u, v)] < 0.0 || !j[(u, v)].is_finite() || j[(u, v)] != j[(v, u)] {
                    return Err(Error::InvalidArgument(format!(
                        "coupling J[{u}][{v}] must be finite, nonnegative and symmetric"
                    )));
                }
            }
        }
        Ok(WeightedGraph { j, lambda })
    }

    pub fn from_input(input: &GraphInput) -> Result<WeightedGraph> {
        let n = input.vertices;
        if input.lambda.len() != n {
            return Err(Error::InvalidArgument(format!(
                "lambda has {} entries for {n} vertices",
                input.lambda.len()
            )));
        }
        let mut j = DMatrix::zeros(n, n);
        for &(u, v, w) in &input.edges {
            if u >= n || v >= n || u == v {
                return Err(Error::InvalidArgument(format!("edge ({u}, {v}) is not a valid pair of distinct vertices")));
            }
            j[(u, v)] = w;
            j[(v, u)] = w;
        }
        WeightedGraph::new(j, input.lambda.clone())
    }

    pub fn to_input(&self) -> GraphInput {
        let n = self.len();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if self.j[(u, v)] != 0.0 {
                    edges.push((u, v, self.j[(u, v)]));
                }
            }
        }
        GraphInput { vertices: n, edges, lambda: self.lambda.clone() }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// `|diag(lambda)^{-1} J|_inf`.
    pub fn spectral_bound(&self) -> f64 {
        (0..self.len())
            .map(|u| self.j.row(u).iter().sum::<f64>() / self.lambda[u])
            .fold(0.0, f64::max)
    }

    /// The path expansion converges geometrically when the bound is below 1.
    pub fn is_contracting(&self) -> bool {
        self.spectral_bound() < 1.0
    }

    fn check_vertex(&self, u: usize) -> Result<()> {
        if u >= self.len() {
            return Err(Error::InvalidArgument(format!("vertex {u} out of range 0..{}", self.len())));
        }
        Ok(())
    }

    /// Random graph on `n` vertices: each pair coupled with probability 1/2 and
    /// weight uniform in `(0, 1]`; `lambda_u` exceeds the row sum of `J` by a
    /// factor at least `1 + margin`, so the expansion contracts.
    pub fn random(n: usize, margin: f64, rng: &mut RngStream) -> WeightedGraph {
        let mut j = DMatrix::zeros(n, n);
        for u in 0..n {
            for v in u + 1..n {
                if rng.bit() {
                    let w = 1.0 - rng.uniform_f64();
                    j[(u, v)] = w;
                    j[(v, u)] = w;
                }
            }
        }
        let lambda = (0..n)
            .map(|u| {
                let row: f64 = j.row(u).iter().sum();
                row * (1.0 + margin) * (1.0 + rng.uniform_f64()) + 0.5
            })
            .collect();
        WeightedGraph { j, lambda }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventSolve {
    pub value: f64,
    pub spectral_bound: f64,
    /// False when the path expansion is not guaranteed to converge.
    pub contracting: bool,
}

/// `((L - J)^{-1})_{uv}` by LU factorisation.
pub fn resolvent_direct(g: &WeightedGraph, u: usize, v: usize) -> Result<ResolventSolve> {
    g.check_vertex(u)?;
    g.check_vertex(v)?;
    let inv = resolvent_matrix(g)?;
    let bound = g.spectral_bound();
    Ok(ResolventSolve { value: inv[(u, v)], spectral_bound: bound, contracting: bound < 1.0 })
}

/// The full inverse `(L - J)^{-1}`.
pub fn resolvent_matrix(g: &WeightedGraph) -> Result<DMatrix<f64>> {
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(g.lambda.clone())) - &g.j;
    a.lu()
        .try_inverse()
        .ok_or_else(|| Error::Solver("L - J is singular".into()))
}

/// `sum_{n <= max_len} ((D^{-1} J)^n D^{-1})_{uv}` with tail bound
/// `rho^{max_len+1} / ((1 - rho) lambda_v)`, `rho` the spectral bound.
///
/// Fails with [`Error::NonContracting`] when `rho >= 1`.
pub fn resolvent_path_sum(g: &WeightedGraph, u: usize, v: usize, max_len: u64) -> Result<PathSum> {
    g.check_vertex(u)?;
    g.check_vertex(v)?;
    if max_len > MAX_PATH_LEN {
        return Err(Error::Budget { what: "path length", requested: max_len, limit: MAX_PATH_LEN });
    }
    let rho = g.spectral_bound();
    if rho >= 1.0 {
        return Err(Error::NonContracting { bound: rho });
    }
    let n = g.len();
    let mut cur = vec![0.0; n];
    cur[v] = 1.0 / g.lambda[v];
    let mut value = cur[u];
    let mut next = vec![0.0; n];
    for _ in 0..max_len {
        for a in 0..n {
            let mut s = 0.0;
            for b in 0..n {
                s += g.j[(a, b)] * cur[b];
            }
            next[a] = s / g.lambda[a];
        }
        std::mem::swap(&mut cur, &mut next);
        value += cur[u];
    }
    let tail_bound = rho.powf(max_len as f64 + 1.0) / ((1.0 - rho) * g.lambda[v]);
    Ok(PathSum { value, tail_bound, max_len })
}

/// Smallest `max_len` with resolvent tail bound at most `tol`.
pub fn resolvent_len_for_tolerance(g: &WeightedGraph, v: usize, tol: f64) -> Result<u64> {
    let rho = g.spectral_bound();
    if rho >= 1.0 {
        return Err(Error::NonContracting { bound: rho });
    }
    if rho == 0.0 {
        return Ok(0);
    }
    let scale = (1.0 - rho) * g.lambda[v];
    let l = ((tol * scale).ln() / rho.ln() - 1.0).ceil().max(0.0) as u64;
    Ok((l.saturating_sub(2)..=l + 2)
        .find(|&n| rho.powf(n as f64 + 1.0) / scale <= tol)
        .unwrap_or(l + 2))
}

/// `prod_a J_a prod_v lambda_v^{-eta(v)}` with `eta` counting every visit,
/// endpoints included.
pub fn path_weight_occupation(g: &WeightedGraph, path: &[usize]) -> f64 {
    let mut eta = vec![0i32; g.len()];
    for &w in path {
        eta[w] += 1;
    }
    let couplings: f64 = path.windows(2).map(|e| g.j[(e[0], e[1])]).product();
    let vertices: f64 = eta.iter().zip(&g.lambda).map(|(&k, l)| l.powi(-k)).product();
    couplings * vertices
}

/// `lambda_{w_0}^{-1} prod_k J_{w_{k-1} w_k} / lambda_{w_k}`.
pub fn path_weight_stepwise(g: &WeightedGraph, path: &[usize]) -> f64 {
    let mut w = 1.0 / g.lambda[path[0]];
    for e in path.windows(2) {
        w *= g.j[(e[0], e[1])] / g.lambda[e[1]];
    }
    w
}
