//! Small dense linear solves used for boundary-condition fitting and
//! Newton-type polishing.

/// Solve `m · x = rhs` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `rel_tol` times the largest
/// entry of its (row-scaled) column, i.e. the matrix is singular to working
/// precision.
pub fn solve_dense<const N: usize>(
    m: [[f64; N]; N],
    rhs: [f64; N],
    rel_tol: f64,
) -> Option<[f64; N]> {
    let mut flat: Vec<f64> = m.iter().flatten().copied().collect();
    let mut b = rhs.to_vec();
    solve_in_place(&mut flat, &mut b, N, rel_tol)?;
    let mut x = [0.0; N];
    x.copy_from_slice(&b);
    Some(x)
}

/// Runtime-sized variant of [`solve_dense`]; `m` is row-major `n × n`.
pub fn solve_square(mut m: Vec<f64>, mut rhs: Vec<f64>, rel_tol: f64) -> Option<Vec<f64>> {
    let n = rhs.len();
    if m.len() != n * n {
        return None;
    }
    solve_in_place(&mut m, &mut rhs, n, rel_tol)?;
    Some(rhs)
}

fn solve_in_place(m: &mut [f64], rhs: &mut [f64], n: usize, rel_tol: f64) -> Option<()> {
    // Row equilibration so the pivot test is scale free.
    for i in 0..n {
        let row = &mut m[i * n..(i + 1) * n];
        let s = row.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if s == 0.0 || !s.is_finite() {
            return None;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
        rhs[i] /= s;
    }
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(pmax > rel_tol) {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            rhs.swap(col, piv);
        }
        for r in col + 1..n {
            let factor = m[r * n + col] / m[col * n + col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                m[r * n + c] -= factor * m[col * n + c];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for c in i + 1..n {
            acc -= m[i * n + c] * rhs[c];
        }
        rhs[i] = acc / m[i * n + i];
    }
    Some(())
}
