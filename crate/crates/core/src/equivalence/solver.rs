//! Grid scan plus damped Gauss-Newton (Levenberg-Marquardt) polishing for
//! residual maps `params → residuals`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EquivalenceError;
use crate::linalg::solve_square;

pub type ResidualFn = dyn Fn(&[f64]) -> Result<Vec<f64>, String> + Send + Sync;

/// A scanned parameter vector and its residual, `None` where evaluation failed.
pub type ScanNode = (Vec<f64>, Option<Vec<f64>>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    /// Grid nodes along this axis during the scan.
    pub points: usize,
}

impl Param {
    pub fn new(name: &str, lo: f64, hi: f64, points: usize) -> Self {
        Self {
            name: name.to_string(),
            lo,
            hi,
            points,
        }
    }

    fn node(&self, i: usize) -> f64 {
        if self.points <= 1 {
            0.5 * (self.lo + self.hi)
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64
        }
    }

    fn span(&self) -> f64 {
        (self.hi - self.lo).abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// A polished point counts as a root when its residual norm is below this.
    pub root_tol: f64,
    /// Relative central-difference step for the Jacobian.
    pub fd_step: f64,
    /// Roots closer than this fraction of each axis span are merged.
    pub dedup_tol: f64,
    pub max_seeds: usize,
    pub keep_scan: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 60,
            root_tol: 1e-8,
            fd_step: 1e-6,
            dedup_tol: 1e-5,
            max_seeds: 64,
            keep_scan: false,
        }
    }
}

#[derive(Clone)]
pub struct EquivalenceProblem {
    pub name: String,
    pub params: Vec<Param>,
    pub residual: Arc<ResidualFn>,
    pub config: SolverConfig,
}

impl fmt::Debug for EquivalenceProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EquivalenceProblem")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl EquivalenceProblem {
    fn eval(&self, p: &[f64]) -> Option<Vec<f64>> {
        (self.residual)(p)
            .ok()
            .filter(|r| r.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceSolution {
    pub roots: Vec<Root>,
    /// The residual vanished on every scanned node: a whole family of solutions.
    pub degenerate: bool,
    pub evaluations: usize,
    /// Scanned nodes and their residuals (present when `keep_scan` is set).
    pub scan: Option<Vec<ScanNode>>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unravel(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for d in (0..dims.len()).rev() {
        idx[d] = flat % dims[d];
        flat /= dims[d];
    }
    idx
}

fn ravel(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (i, d)| acc * d + i)
}

/// Damped Gauss-Newton from `start`, kept inside the parameter box.
pub fn polish(problem: &EquivalenceProblem, start: &[f64]) -> Option<Root> {
    let cfg = &problem.config;
    let n = start.len();
    let clamp = |p: &mut [f64]| {
        for (x, par) in p.iter_mut().zip(&problem.params) {
            *x = x.clamp(par.lo.min(par.hi), par.hi.max(par.lo));
        }
    };
    let mut p = start.to_vec();
    clamp(&mut p);
    let mut r = problem.eval(&p)?;
    let m = r.len();
    let mut cost = norm(&r);
    let mut damping = 1e-3;
    let mut iterations = 0;
    for _ in 0..cfg.max_iter {
        if cost == 0.0 {
            break;
        }
        iterations += 1;
        // central-difference Jacobian, m × n
        let mut jac = vec![0.0; m * n];
        for j in 0..n {
            let h = cfg.fd_step * p[j].abs().max(1.0);
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[j] += h;
            lo[j] -= h;
            let (rh, rl) = (problem.eval(&hi)?, problem.eval(&lo)?);
            for i in 0..m {
                jac[i * n + j] = (rh[i] - rl[i]) / (2.0 * h);
            }
        }
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for a in 0..n {
            for b in 0..n {
                jtj[a * n + b] = (0..m).map(|i| jac[i * n + a] * jac[i * n + b]).sum();
            }
            jtr[a] = (0..m).map(|i| jac[i * n + a] * r[i]).sum();
        }
        let mut improved = false;
        while damping < 1e12 {
            let mut lhs = jtj.clone();
            for a in 0..n {
                lhs[a * n + a] += damping * jtj[a * n + a].max(1e-300);
            }
            let Some(step) = solve_square(lhs, jtr.iter().map(|v| -v).collect(), 1e-300) else {
                damping *= 4.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(&step).map(|(x, s)| x + s).collect();
            clamp(&mut trial);
            match problem.eval(&trial) {
                Some(rt) if norm(&rt) < cost => {
                    let moved = trial
                        .iter()
                        .zip(&p)
                        .zip(&problem.params)
                        .map(|((a, b), par)| (a - b).abs() / par.span())
                        .fold(0.0, f64::max);
                    p = trial;
                    r = rt;
                    cost = norm(&r);
                    damping = (damping / 3.0).max(1e-12);
                    improved = moved > 1e-15;
                    break;
                }
                _ => damping *= 4.0,
            }
        }
        if !improved {
            break;
        }
    }
    Some(Root {
        params: p,
        residual_norm: cost,
        residuals: r,
        iterations,
    })
}

fn seeds(
    problem: &EquivalenceProblem,
    nodes: &[Vec<f64>],
    values: &[Option<Vec<f64>>],
) -> Vec<Vec<f64>> {
    let dims: Vec<usize> = problem.params.iter().map(|p| p.points.max(1)).collect();
    let nd = dims.len();
    let mut out: Vec<Vec<f64>> = Vec::new();

    // cells in which every residual component takes both signs
    let cell_dims: Vec<usize> = dims.iter().map(|d| d.saturating_sub(1).max(1)).collect();
    let n_cells: usize = cell_dims.iter().product();
    if dims.iter().all(|&d| d >= 2) {
        for c in 0..n_cells {
            let base = unravel(c, &cell_dims);
            let corners: Vec<&Vec<f64>> = (0..1usize << nd)
                .filter_map(|mask| {
                    let idx: Vec<usize> = base
                        .iter()
                        .enumerate()
                        .map(|(d, b)| b + ((mask >> d) & 1))
                        .collect();
                    values[ravel(&idx, &dims)].as_ref()
                })
                .collect();
            if corners.len() != 1 << nd {
                continue;
            }
            let m = corners[0].len();
            let brackets = (0..m).all(|i| {
                let lo = corners.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min);
                let hi = corners
                    .iter()
                    .map(|v| v[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                lo <= 0.0 && hi >= 0.0
            });
            if brackets {
                let center: Vec<f64> = (0..nd)
                    .map(|d| {
                        0.5 * (problem.params[d].node(base[d])
                            + problem.params[d].node(base[d] + 1))
                    })
                    .collect();
                out.push(center);
            }
        }
    }

    // discrete local minima of the residual norm, best first
    let norms: Vec<f64> = values
        .iter()
        .map(|v| v.as_ref().map_or(f64::INFINITY, |r| norm(r)))
        .collect();
    let mut minima: Vec<(f64, usize)> = Vec::new();
    for (flat, &value) in norms.iter().enumerate() {
        if !value.is_finite() {
            continue;
        }
        let idx = unravel(flat, &dims);
        let mut is_min = true;
        for off in 0..3usize.pow(nd as u32) {
            let mut o = off;
            let mut nb = idx.clone();
            let mut valid = true;
            for d in 0..nd {
                let step = (o % 3) as isize - 1;
                o /= 3;
                let v = nb[d] as isize + step;
                if v < 0 || v >= dims[d] as isize {
                    valid = false;
                    break;
                }
                nb[d] = v as usize;
            }
            if valid && nb != idx && norms[ravel(&nb, &dims)] < value {
                is_min = false;
                break;
            }
        }
        if is_min {
            minima.push((value, flat));
        }
    }
    minima.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let room = problem.config.max_seeds.saturating_sub(out.len());
    out.extend(
        minima
            .into_iter()
            .take(room)
            .map(|(_, flat)| nodes[flat].clone()),
    );
    out.truncate(problem.config.max_seeds.max(1));
    out
}

/// Scan the parameter box, polish every promising seed and return the distinct roots.
pub fn solve_equivalence(
    problem: &EquivalenceProblem,
) -> Result<EquivalenceSolution, EquivalenceError> {
    if problem.params.is_empty() {
        return Err(EquivalenceError::InvalidInput(
            "problem has no free parameters".into(),
        ));
    }
    if let Some(p) = problem
        .params
        .iter()
        .find(|p| !(p.lo.is_finite() && p.hi.is_finite() && p.hi > p.lo) || p.points == 0)
    {
        return Err(EquivalenceError::InvalidInput(format!(
            "bad parameter range {p:?}"
        )));
    }
    let dims: Vec<usize> = problem.params.iter().map(|p| p.points).collect();
    let total: usize = dims.iter().product();
    let nodes: Vec<Vec<f64>> = (0..total)
        .map(|flat| {
            unravel(flat, &dims)
                .iter()
                .zip(&problem.params)
                .map(|(i, p)| p.node(*i))
                .collect()
        })
        .collect();
    let values: Vec<Option<Vec<f64>>> = nodes.par_iter().map(|p| problem.eval(p)).collect();
    let cfg = problem.config;
    let scan = cfg
        .keep_scan
        .then(|| nodes.iter().cloned().zip(values.iter().cloned()).collect());

    if values
        .iter()
        .all(|v| v.as_ref().is_some_and(|r| norm(r) <= cfg.root_tol))
    {
        return Ok(EquivalenceSolution {
            roots: Vec::new(),
            degenerate: true,
            evaluations: total,
            scan,
        });
    }

    let starts = seeds(problem, &nodes, &values);
    let polished: Vec<Option<Root>> = starts.par_iter().map(|s| polish(problem, s)).collect();
    let evaluations = total
        + polished
            .iter()
            .flatten()
            .map(|r| r.iterations * (2 * dims.len() + 2))
            .sum::<usize>();

    let mut roots: Vec<Root> = Vec::new();
    for root in polished
        .iter()
        .flatten()
        .filter(|r| r.residual_norm <= cfg.root_tol)
    {
        let dup = roots.iter_mut().find(|known| {
            known
                .params
                .iter()
                .zip(&root.params)
                .zip(&problem.params)
                .all(|((a, b), p)| (a - b).abs() <= cfg.dedup_tol * p.span())
        });
        match dup {
            Some(known) if root.residual_norm < known.residual_norm => *known = root.clone(),
            Some(_) => {}
            None => roots.push(root.clone()),
        }
    }
    if roots.is_empty() {
        let best = polished
            .iter()
            .flatten()
            .map(|r| (r.params.clone(), r.residual_norm))
            .chain(
                nodes
                    .iter()
                    .zip(&values)
                    .filter_map(|(p, v)| v.as_ref().map(|r| (p.clone(), norm(r)))),
            )
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let (best_params, best_residual) = best.unwrap_or((Vec::new(), f64::INFINITY));
        return Err(EquivalenceError::NoRootFound {
            best_params,
            best_residual,
        });
    }
    roots.sort_by(|a, b| {
        a.params
            .iter()
            .zip(&b.params)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(EquivalenceSolution {
        roots,
        degenerate: false,
        evaluations,
        scan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_line() -> EquivalenceProblem {
        // x² + y² = 4 and y = x: roots (±√2, ±√2)
        EquivalenceProblem {
            name: "circle".into(),
            params: vec![
                Param::new("x", -3.0, 3.0, 25),
                Param::new("y", -3.0, 3.0, 25),
            ],
            residual: Arc::new(|p: &[f64]| Ok(vec![p[0] * p[0] + p[1] * p[1] - 4.0, p[1] - p[0]])),
            config: SolverConfig::default(),
        }
    }

    #[test]
    fn finds_both_roots() {
        let sol = solve_equivalence(&circle_line()).unwrap();
        assert_eq!(sol.roots.len(), 2, "{:?}", sol.roots);
        let s = 2.0_f64.sqrt();
        assert!((sol.roots[0].params[0] + s).abs() < 1e-8);
        assert!((sol.roots[1].params[0] - s).abs() < 1e-8);
    }

    #[test]
    fn tangential_zero_is_found_from_minima() {
        // (x − 1)² has no sign change
        let problem = EquivalenceProblem {
            name: "touch".into(),
            params: vec![Param::new("x", -2.0, 3.0, 40)],
            residual: Arc::new(|p: &[f64]| Ok(vec![(p[0] - 1.0).powi(2), (p[0] - 1.0) * 0.5])),
            config: SolverConfig::default(),
        };
        let sol = solve_equivalence(&problem).unwrap();
        assert_eq!(sol.roots.len(), 1);
        assert!((sol.roots[0].params[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn reports_no_root() {
        let problem = EquivalenceProblem {
            name: "none".into(),
            params: vec![Param::new("x", -1.0, 1.0, 11)],
            residual: Arc::new(|p: &[f64]| Ok(vec![p[0] * p[0] + 1.0])),
            config: SolverConfig::default(),
        };
        match solve_equivalence(&problem) {
            Err(EquivalenceError::NoRootFound {
                best_residual,
                best_params,
            }) => {
                assert!((best_residual - 1.0).abs() < 1e-6);
                assert!(best_params[0].abs() < 1e-3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_residual_is_degenerate() {
        let problem = EquivalenceProblem {
            name: "zero".into(),
            params: vec![Param::new("x", 0.0, 1.0, 5)],
            residual: Arc::new(|_: &[f64]| Ok(vec![0.0, 0.0])),
            config: SolverConfig::default(),
        };
        let sol = solve_equivalence(&problem).unwrap();
        assert!(sol.degenerate);
    }

    #[test]
    fn deterministic_across_runs() {
        let a = solve_equivalence(&circle_line()).unwrap();
        let b = solve_equivalence(&circle_line()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ravel_roundtrip() {
        let dims = [3, 4, 5];
        for flat in 0..60 {
            assert_eq!(ravel(&unravel(flat, &dims), &dims), flat);
        }
    }
}
