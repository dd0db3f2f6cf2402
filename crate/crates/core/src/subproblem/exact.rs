//! Exact trust-region solutions through an eigendecomposition of `B`.
//!
//! Both solvers reduce the problem to components `(eig_i, c_i)` with
//! `c_i = v_i^T g` and work in the shifted variable `t = lambda + lambda_min`,
//! so every denominator is a nonnegative gap `eig_i - lambda_min` plus `t`.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{cauchy_point, check_inputs, TrsSolution, TrsStatus};
use crate::error::{Error, Result};
use crate::lsr1::Lsr1State;
use crate::model::Curvature;

const BOUNDARY_RTOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;
const GROUP_RTOL: f64 = 1e-10;
const HARD_CASE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
enum RootMethod {
    Newton,
    Bisection,
}

#[derive(Debug)]
struct Spectral {
    lambda: f64,
    /// Coordinates of `d` along each eigen-direction.
    weights: Vec<f64>,
    /// Index of the component whose direction gets the hard-case step, and that step's length.
    hard: Option<(usize, f64)>,
    status: TrsStatus,
}

fn shifted_norm(gaps: &[f64], c: &[f64], t: f64, skip: impl Fn(usize) -> bool) -> f64 {
    let mut sum = 0.0;
    for (i, (&gap, &ci)) in gaps.iter().zip(c).enumerate() {
        if ci == 0.0 || skip(i) {
            continue;
        }
        let r = ci / (gap + t);
        sum += r * r;
    }
    sum.sqrt()
}

fn solve_spectral(eig: &[f64], c: &[f64], delta: f64, gnorm: f64, method: RootMethod) -> Result<Spectral> {
    let lmin = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = eig.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let gaps: Vec<f64> = eig
        .iter()
        .map(|&e| {
            let gap = e - lmin;
            if gap <= GROUP_RTOL * scale {
                0.0
            } else {
                gap
            }
        })
        .collect();
    let in_min = |i: usize| gaps[i] == 0.0;
    let c_min = (0..c.len()).filter(|&i| in_min(i)).map(|i| c[i] * c[i]).sum::<f64>().sqrt();
    let weights_at = |t: f64| -> Vec<f64> {
        gaps.iter().zip(c).map(|(&gap, &ci)| if ci == 0.0 { 0.0 } else { -ci / (gap + t) }).collect()
    };

    if lmin > 0.0 && shifted_norm(&gaps, c, lmin, |_| false) <= delta {
        return Ok(Spectral { lambda: 0.0, weights: weights_at(lmin), hard: None, status: TrsStatus::Interior });
    }

    if lmin <= 0.0 && c_min <= HARD_CASE_RTOL * gnorm {
        let partial = shifted_norm(&gaps, c, 0.0, in_min);
        if partial <= delta {
            let mut weights = weights_at(0.0);
            for (i, w) in weights.iter_mut().enumerate() {
                if in_min(i) {
                    *w = 0.0;
                }
            }
            let tau = (delta * delta - partial * partial).max(0.0).sqrt();
            let j = (0..gaps.len()).find(|&i| in_min(i)).expect("minimum group is nonempty");
            return Ok(Spectral { lambda: -lmin, weights, hard: Some((j, tau)), status: TrsStatus::HardCase });
        }
    }

    // Boundary: find t > max(lmin, 0) with ||d(t)|| = delta.
    let t_lo = lmin.max(0.0);
    let t0 = if t_lo == 0.0 && c_min > 0.0 { c_min / delta } else { t_lo };
    // ||d(t)|| <= ||g|| / t for every t > 0
    let t_hi = (gnorm / delta).max(t0);
    let t = match method {
        RootMethod::Newton => newton_root(&gaps, c, delta, t0, t_hi)?,
        RootMethod::Bisection => bisection_root(&gaps, c, delta, t_lo, t_hi),
    };
    Ok(Spectral { lambda: t - lmin, weights: weights_at(t), hard: None, status: TrsStatus::Boundary })
}

/// Newton on `phi(t) = 1/||d(t)|| - 1/delta`, which is concave and increasing,
/// kept inside a shrinking bracket with bisection as a safeguard.
fn newton_root(gaps: &[f64], c: &[f64], delta: f64, t0: f64, t_hi: f64) -> Result<f64> {
    let (mut lo, mut hi) = (t0, t_hi);
    let mut t = t0;
    for _ in 0..NEWTON_MAX_ITER {
        let n = shifted_norm(gaps, c, t, |_| false);
        if (n - delta).abs() <= BOUNDARY_RTOL * delta {
            return Ok(t);
        }
        if n > delta {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
        let cubic: f64 =
            gaps.iter().zip(c).filter(|(_, &ci)| ci != 0.0).map(|(&gap, &ci)| ci * ci / (gap + t).powi(3)).sum();
        let phi = 1.0 / n - 1.0 / delta;
        let dphi = cubic / (n * n * n);
        let next = t - phi / dphi;
        t = if next.is_finite() && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    Err(Error::NonFinite("trust-region secular equation did not converge"))
}

fn bisection_root(gaps: &[f64], c: &[f64], delta: f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shifted_norm(gaps, c, mid, |_| false) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn clamp_to_region(d: &mut DVector<f64>, delta: f64) {
    let n = d.norm();
    if n > delta {
        *d *= delta / n;
    }
}

/// Global minimizer of the trust-region subproblem for an L-SR1 matrix.
///
/// Uses a thin QR of the compact factor `U` so only a `k x k` symmetric
/// eigenproblem is solved; the orthogonal complement of `range(U)` carries
/// the eigenvalue `tau0`. If the secular iteration fails, the Cauchy point
/// is returned with [`TrsStatus::CauchyFallback`].
pub fn lsr1_trs(g: &DVector<f64>, b: &Lsr1State, delta: f64) -> Result<TrsSolution> {
    let gnorm = check_inputs(g, delta)?;
    let n = b.dim();
    if g.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: g.len() });
    }
    let curv = Curvature::Lsr1(std::sync::Arc::new(b.clone()));
    let tau0 = b.tau0();

    let (basis, mut eig, mut c) = match b.compact_factors() {
        None => (DMatrix::zeros(n, 0), Vec::new(), Vec::new()),
        Some((u, v)) => {
            let qr = u.clone().qr();
            let (q, r) = (qr.q(), qr.r());
            let w = &r * v * r.transpose();
            let w = (&w + w.transpose()) * 0.5;
            let se = SymmetricEigen::new(w);
            let basis = q * se.eigenvectors;
            let c: Vec<f64> = (basis.transpose() * g).iter().copied().collect();
            (basis, se.eigenvalues.iter().map(|l| tau0 + l).collect(), c)
        }
    };
    let k = basis.ncols();
    let g_perp = g - &basis * (basis.transpose() * g);
    let c_perp = g_perp.norm();
    let has_perp = k < n;
    if has_perp {
        eig.push(tau0);
        c.push(c_perp);
    }

    let sp = match solve_spectral(&eig, &c, delta, gnorm, RootMethod::Newton) {
        Ok(sp) => sp,
        Err(e) => {
            warn!("L-SR1 subproblem solver failed ({e}), using the Cauchy point");
            let mut s = cauchy_point(g, &curv, delta)?;
            s.status = TrsStatus::CauchyFallback;
            return Ok(s);
        }
    };

    let mut d = &basis * DVector::from_column_slice(&sp.weights[..k]);
    if has_perp && c_perp > 0.0 {
        d.axpy(sp.weights[k] / c_perp, &g_perp, 1.0);
    }
    if let Some((j, tau)) = sp.hard {
        let z = if j < k { basis.column(j).into_owned() } else { complement_vector(&basis) };
        d.axpy(tau, &z, 1.0);
    }
    clamp_to_region(&mut d, delta);
    TrsSolution::new(g, &curv, d, sp.lambda, sp.status)
}

/// A unit vector orthogonal to the orthonormal columns of `basis`.
fn complement_vector(basis: &DMatrix<f64>) -> DVector<f64> {
    let n = basis.nrows();
    let mut best = DVector::zeros(n);
    let mut best_norm = -1.0;
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        for _ in 0..2 {
            let proj = basis.transpose() * &e;
            e -= basis * proj;
        }
        let en = e.norm();
        if en > best_norm {
            best_norm = en;
            best = e;
        }
        if en > 0.5 {
            break;
        }
    }
    best / best_norm
}

/// Global minimizer for a dense symmetric `B` through a full
/// eigendecomposition and bisection on the secular equation.
///
/// Slow and simple; intended as a reference for the other solvers.
pub fn dense_trs_oracle(g: &DVector<f64>, b: &DMatrix<f64>, delta: f64) -> Result<TrsSolution> {
    let gnorm = check_inputs(g, delta)?;
    if b.nrows() != g.len() || b.ncols() != g.len() {
        return Err(Error::DimensionMismatch { expected: g.len(), got: b.nrows() });
    }
    let sym = (b + b.transpose()) * 0.5;
    let se = SymmetricEigen::new(sym.clone());
    let eig: Vec<f64> = se.eigenvalues.iter().copied().collect();
    let c: Vec<f64> = (se.eigenvectors.transpose() * g).iter().copied().collect();
    let sp = solve_spectral(&eig, &c, delta, gnorm, RootMethod::Bisection)?;
    let mut d = &se.eigenvectors * DVector::from_vec(sp.weights);
    if let Some((j, tau)) = sp.hard {
        d.axpy(tau, &se.eigenvectors.column(j).into_owned(), 1.0);
    }
    clamp_to_region(&mut d, delta);
    TrsSolution::new(g, &Curvature::Dense(sym), d, sp.lambda, sp.status)
}
