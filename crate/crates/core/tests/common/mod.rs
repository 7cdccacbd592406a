//! Independent oracles for the integration tests: a dense two-phase simplex
//! for the transport LP and brute-force vertex enumeration for tiny sizes.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

const EPS: f64 = 1e-12;

/// Dense tableau simplex for `min c'x` s.t. `Ax = b`, `x >= 0`, with Bland's
/// rule throughout. Returns `(optimum, x)`.
pub fn simplex(a: &DMatrix<f64>, b: &[f64], c: &[f64]) -> Option<(f64, Vec<f64>)> {
    let (rows, cols) = a.shape();
    // tableau columns: originals, artificials, rhs
    let width = cols + rows + 1;
    let mut t = DMatrix::zeros(rows, width);
    for r in 0..rows {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..cols {
            t[(r, k)] = sign * a[(r, k)];
        }
        t[(r, cols + r)] = 1.0;
        t[(r, width - 1)] = sign * b[r];
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    let phase1: Vec<f64> = (0..cols + rows).map(|k| if k >= cols { 1.0 } else { 0.0 }).collect();
    run_phase(&mut t, &mut basis, &phase1, cols + rows)?;
    let infeas: f64 = basis.iter().enumerate().filter(|(_, &k)| k >= cols).map(|(r, _)| t[(r, width - 1)]).sum();
    if infeas > 1e-9 {
        return None;
    }
    // drive zero-level artificials out of the basis; drop redundant rows
    let mut keep = vec![true; rows];
    for r in 0..rows {
        if basis[r] >= cols {
            match (0..cols).find(|&k| t[(r, k)].abs() > 1e-10) {
                Some(k) => pivot(&mut t, &mut basis, r, k),
                None => keep[r] = false,
            }
        }
    }
    let kept: Vec<usize> = (0..rows).filter(|r| keep[*r]).collect();
    let mut t2 = DMatrix::zeros(kept.len(), cols + 1);
    let mut basis2 = Vec::new();
    for (i, &r) in kept.iter().enumerate() {
        for k in 0..cols {
            t2[(i, k)] = t[(r, k)];
        }
        t2[(i, cols)] = t[(r, width - 1)];
        basis2.push(basis[r]);
    }
    run_phase(&mut t2, &mut basis2, c, cols)?;
    let mut x = vec![0.0; cols];
    for (i, &k) in basis2.iter().enumerate() {
        x[k] = t2[(i, cols)];
    }
    let value = x.iter().zip(c).map(|(a, b)| a * b).sum();
    Some((value, x))
}

fn pivot(t: &mut DMatrix<f64>, basis: &mut [usize], r: usize, k: usize) {
    let p = t[(r, k)];
    let row = t.row(r) / p;
    t.set_row(r, &row);
    for i in 0..t.nrows() {
        if i != r {
            let f = t[(i, k)];
            if f != 0.0 {
                let upd = t.row(i) - &row * f;
                t.set_row(i, &upd);
            }
        }
    }
    basis[r] = k;
}

/// Minimizes `cost' x` over the first `active` columns from a feasible basis.
fn run_phase(t: &mut DMatrix<f64>, basis: &mut [usize], cost: &[f64], active: usize) -> Option<()> {
    let rhs = t.ncols() - 1;
    for _ in 0..100_000 {
        // reduced costs c_k - c_B B^{-1} A_k
        let entering = (0..active).find(|&k| {
            if basis.contains(&k) {
                return false;
            }
            let z: f64 = basis.iter().enumerate().map(|(r, &bk)| cost[bk] * t[(r, k)]).sum();
            cost[k] - z < -EPS
        });
        let Some(k) = entering else { return Some(()) };
        let mut best: Option<(f64, usize, usize)> = None;
        for r in 0..t.nrows() {
            let a = t[(r, k)];
            if a > EPS {
                let ratio = t[(r, rhs)] / a;
                let better = match best {
                    None => true,
                    Some((br, _, bk)) => ratio < br - EPS || ((ratio - br).abs() <= EPS && basis[r] < bk),
                };
                if better {
                    best = Some((ratio, r, basis[r]));
                }
            }
        }
        let (_, r, _) = best?;
        pivot(t, basis, r, k);
    }
    None
}

/// Equality constraints of the transport polytope: row sums `w`, column sums `1/M`.
pub fn transport_constraints(w: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let m = w.len();
    let mut a = DMatrix::zeros(2 * m, m * m);
    let mut b = vec![0.0; 2 * m];
    for i in 0..m {
        for j in 0..m {
            a[(i, i * m + j)] = 1.0;
            a[(m + j, i * m + j)] = 1.0;
        }
        b[i] = w[i];
        b[m + i] = 1.0 / m as f64;
    }
    (a, b)
}

/// Optimal transport cost and plan (`plan[i][j]`) by the simplex oracle.
pub fn lp_transport(cost: &DMatrix<f64>, w: &[f64]) -> (f64, DMatrix<f64>) {
    let m = w.len();
    let (a, b) = transport_constraints(w);
    let c: Vec<f64> = (0..m * m).map(|k| cost[(k / m, k % m)]).collect();
    let (value, x) = simplex(&a, &b, &c).expect("transport LP is feasible");
    (value, DMatrix::from_row_slice(m, m, &x))
}

/// Minimum over all basic feasible solutions, by enumerating every choice
/// of `2M - 1` basic variables. Only for `M <= 4`.
pub fn vertex_enumeration(cost: &DMatrix<f64>, w: &[f64]) -> f64 {
    let m = w.len();
    assert!(m <= 4, "enumeration is exponential");
    let (a, b) = transport_constraints(w);
    // the last column constraint is implied by the others
    let a = a.rows(0, 2 * m - 1).into_owned();
    let b = DVector::from_column_slice(&b[..2 * m - 1]);
    let n = m * m;
    let k = 2 * m - 1;
    let mut best = f64::INFINITY;
    let mut chosen: Vec<usize> = (0..k).collect();
    loop {
        let sub = DMatrix::from_fn(k, k, |r, c| a[(r, chosen[c])]);
        if let Some(x) = sub.clone().lu().solve(&b) {
            if (&sub * &x - &b).amax() < 1e-9 && x.iter().all(|v| *v >= -1e-12) {
                let val: f64 = chosen.iter().zip(x.iter()).map(|(&v, xv)| cost[(v / m, v % m)] * xv).sum();
                best = best.min(val);
            }
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if chosen[i] < n - k + i {
                chosen[i] += 1;
                for j in i + 1..k {
                    chosen[j] = chosen[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Random weights on the simplex, some of them exactly zero.
pub fn random_weights<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..m).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() }).collect();
    if w.iter().all(|x| *x == 0.0) {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Squared Euclidean costs of `d`-dimensional random points (one per column).
pub fn random_members<R: Rng>(rng: &mut R, d: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, m, |_, _| rng.gen_range(-2.0..2.0))
}

/// Manufactured Darcy solution on `[0, L]^2` compatible with the solver's
/// boundary conditions: `P = 100` at `y = 0`, no flow on `x = L` and `y = L`,
/// inflow `-k P_x` at `x = 0`.
pub struct Manufactured {
    pub length: f64,
}

impl Manufactured {
    fn a(&self) -> f64 {
        std::f64::consts::PI / self.length
    }

    pub fn k(&self, x: f64, y: f64) -> f64 {
        (0.3 * (self.a() * x).sin() * (self.a() * y).cos()).exp()
    }

    fn g(&self, x: f64) -> (f64, f64, f64) {
        let (a, l) = (self.a(), self.length);
        let s = (x - l) / l;
        (1.0 + (a * x).cos() + s * s, -a * (a * x).sin() + 2.0 * s / l, -a * a * (a * x).cos() + 2.0 / (l * l))
    }

    fn h(&self, y: f64) -> (f64, f64, f64) {
        let b = 0.5 * self.a();
        ((b * y).sin(), b * (b * y).cos(), -b * b * (b * y).sin())
    }

    pub fn pressure(&self, x: f64, y: f64) -> f64 {
        100.0 + self.g(x).0 * self.h(y).0
    }

    /// `F = -∇·(k ∇P)`.
    pub fn source(&self, x: f64, y: f64) -> f64 {
        let a = self.a();
        let k = self.k(x, y);
        let kx = k * 0.3 * a * (a * x).cos() * (a * y).cos();
        let ky = -k * 0.3 * a * (a * x).sin() * (a * y).sin();
        let (g, g1, g2) = self.g(x);
        let (h, h1, h2) = self.h(y);
        -(kx * g1 * h + k * g2 * h + ky * g * h1 + k * g * h2)
    }

    /// Flux density entering through `x = 0`.
    pub fn inflow(&self, y: f64) -> f64 {
        -self.k(0.0, y) * self.g(0.0).1 * self.h(y).0
    }

    /// Root-mean-square cell error of the discrete solution on an `n x n` grid.
    pub fn error(&self, n: usize) -> f64 {
        use ensemble_da::models::{DarcyProblem, SourceTerm};
        use ensemble_da::GridSpec;
        let grid = GridSpec::with_length(n, self.length).unwrap();
        let centers = grid.centers();
        let k: Vec<f64> = centers.iter().map(|p| self.k(p.x, p.y)).collect();
        let f: Vec<f64> = centers.iter().map(|p| self.source(p.x, p.y)).collect();
        let inflow: Vec<f64> = (0..n).map(|j| self.inflow((j as f64 + 0.5) * grid.dx())).collect();
        let mut problem = DarcyProblem::new(grid, SourceTerm::Cells(f), inflow, 100.0).unwrap();
        problem.solver.rel_tol = 1e-13;
        problem.solver.max_iter = 100_000;
        let p = problem.solve(&k, 0.0).unwrap();
        let sq: f64 = centers.iter().zip(&p).map(|(c, v)| (v - self.pressure(c.x, c.y)).powi(2)).sum();
        (sq / p.len() as f64).sqrt()
    }
}
