//! Derivative-free box-constrained minimisers for the outer estimation
//! problem: a grid + golden-section + parabolic-polish routine for scalar
//! parameters and Nelder-Mead with restarts otherwise.

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    /// Relative tolerance on the parameter (scalar) or simplex spread (NM).
    pub tol: f64,
    pub max_iter: usize,
    /// Grid points scanned before the golden-section stage.
    pub scalar_grid: usize,
    pub restarts: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 2000,
            scalar_grid: 41,
            restarts: 5,
        }
    }
}

/// Minimises `f` over the box. Scalar problems take the golden-section fast
/// path; otherwise Nelder-Mead is run from the box centre and
/// `restarts - 1` deterministic jittered starts, keeping the best.
pub fn minimize_box<F>(f: F, bounds: &[(f64, f64)], opts: &OptimOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    if bounds.len() == 1 {
        let (lo, hi) = bounds[0];
        return minimize_scalar(|x| f(&[x]), lo, hi, opts);
    }
    let clamp = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(bounds)
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    };
    // objective on the closed box, with a quadratic penalty outside it
    let penalised = |x: &[f64]| -> f64 {
        let c = clamp(x);
        let dist: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        let v = f(&c);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v + 1e8 * dist
        }
    };
    let mut best: Option<Minimum> = None;
    let mut iterations = 0;
    for start in 0..opts.restarts.max(1) {
        let x0: Vec<f64> = bounds
            .iter()
            .enumerate()
            .map(|(j, (lo, hi))| {
                let frac = if start == 0 {
                    0.5
                } else {
                    // low-discrepancy offsets, distinct per coordinate
                    let g = 0.618_033_988_749_895 * (start * (j + 1)) as f64 + 0.25 * j as f64;
                    0.15 + 0.7 * g.fract()
                };
                lo + frac * (hi - lo)
            })
            .collect();
        let steps: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.1 * (hi - lo)).collect();
        let mut m = nelder_mead(&penalised, &x0, &steps, opts);
        iterations += m.iterations;
        m.x = clamp(&m.x);
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let mut best = best.expect("at least one start");
    best.iterations = iterations;
    best
}

/// Grid scan, golden-section refinement of the best bracket, then a
/// parabolic step (exact for quadratic objectives) kept only if it improves.
pub fn minimize_scalar<F>(f: F, lo: f64, hi: f64, opts: &OptimOptions) -> Minimum
where
    F: Fn(f64) -> f64,
{
    let eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let n = opts.scalar_grid.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let x = if k == n - 1 { hi } else { lo + step * k as f64 };
            (x, eval(x))
        })
        .collect();
    let kbest = (0..n)
        .min_by(|&a, &b| grid[a].1.total_cmp(&grid[b].1))
        .expect("nonempty grid");
    let mut a = grid[kbest.saturating_sub(1)].0;
    let mut b = grid[(kbest + 1).min(n - 1)].0;
    let (mut best_x, mut best_f) = grid[kbest];

    let invphi = 0.618_033_988_749_894_9;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    let mut iterations = n + 2;
    let tol = opts.tol * (1.0 + best_x.abs().max(hi.abs().max(lo.abs())));
    let mut converged = false;
    while iterations < opts.max_iter {
        if (b - a).abs() <= tol {
            converged = true;
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = eval(d);
        }
        iterations += 1;
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best_f {
            best_x = x;
            best_f = v;
        }
    }

    // parabolic polish through three points around the incumbent
    let h = (1e-4 * (hi - lo)).max(1e-12);
    let (x0, x1, x2) = (best_x - h, best_x, best_x + h);
    if x0 >= lo && x2 <= hi {
        let (f0, f1, f2) = (eval(x0), best_f, eval(x2));
        iterations += 2;
        let denom = f0 - 2.0 * f1 + f2;
        if denom > 0.0 {
            let xv = x1 - 0.5 * h * (f2 - f0) / denom;
            if xv >= lo && xv <= hi {
                let fv = eval(xv);
                iterations += 1;
                if fv <= best_f {
                    best_x = xv;
                    best_f = fv;
                }
            }
        }
    }

    Minimum {
        x: vec![best_x],
        value: best_f,
        converged,
        iterations,
    }
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2).
pub fn nelder_mead<F>(f: &F, x0: &[f64], steps: &[f64], opts: &OptimOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for j in 0..dim {
        let mut v = x0.to_vec();
        v[j] += steps[j];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[dim] - values[0]).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        let scale = 1.0 + simplex[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if spread <= opts.tol * (1.0 + values[0].abs()) && size <= 1e3 * opts.tol * scale {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
        } else {
            let (xc, fc) = if fr < values[dim] {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < values[dim].min(fr) {
                simplex[dim] = xc;
                values[dim] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=dim {
                    for j in 0..dim {
                        simplex[i][j] = best[j] + 0.5 * (simplex[i][j] - best[j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let k = (0..=dim)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("nonempty simplex");
    Minimum {
        x: simplex[k].clone(),
        value: values[k],
        converged,
        iterations,
    }
}
