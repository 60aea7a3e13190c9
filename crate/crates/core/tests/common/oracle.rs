//! Straightforward MFDFA used as a cross-check: explicit loops, a polynomial
//! fit through the normal equations and direct powers.

/// `F_q(s)` for every `(q, s)` pair, `out[i][j]` for `q[i]` and `s[j]`.
pub fn surface(x: &[f64], q: &[f64], s: &[usize], order: usize) -> Vec<Vec<f64>> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut y = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for v in x {
        acc += v - mean;
        y.push(acc);
    }
    let columns: Vec<Vec<f64>> = s.iter().map(|&s| fq_column(&y, q, s, order)).collect();
    (0..q.len())
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect()
}

fn fq_column(y: &[f64], q: &[f64], s: usize, order: usize) -> Vec<f64> {
    let n = y.len();
    let k = n / s;
    let mut var = Vec::with_capacity(2 * k);
    for v in 0..k {
        var.push(segment_variance(&y[v * s..(v + 1) * s], order));
    }
    for v in 0..k {
        let start = n - (v + 1) * s;
        var.push(segment_variance(&y[start..start + s], order));
    }
    q.iter()
        .map(|&q| {
            if q == 0.0 {
                let l = var.iter().map(|v| v.ln()).sum::<f64>() / var.len() as f64;
                (0.5 * l).exp()
            } else {
                let m = var.iter().map(|v| v.powf(q / 2.0)).sum::<f64>() / var.len() as f64;
                m.powf(1.0 / q)
            }
        })
        .collect()
}

fn segment_variance(seg: &[f64], order: usize) -> f64 {
    let s = seg.len();
    let t: Vec<f64> = (0..s)
        .map(|i| 2.0 * i as f64 / (s - 1) as f64 - 1.0)
        .collect();
    let p = order + 1;
    let mut a = vec![vec![0.0; p + 1]; p];
    for (ti, yi) in t.iter().zip(seg) {
        let pw: Vec<f64> = (0..p).map(|e| ti.powi(e as i32)).collect();
        for r in 0..p {
            for c in 0..p {
                a[r][c] += pw[r] * pw[c];
            }
            a[r][p] += pw[r] * yi;
        }
    }
    let coef = solve(a);
    let ss: f64 = t
        .iter()
        .zip(seg)
        .map(|(ti, yi)| {
            let fit: f64 = coef.iter().enumerate().map(|(e, c)| c * ti.powi(e as i32)).sum();
            (yi - fit).powi(2)
        })
        .sum();
    ss / s as f64
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..=n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - tail) / a[r][r];
    }
    x
}

/// Largest relative deviation between two surfaces.
pub fn max_relative_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| ((x - y) / y).abs())
        .fold(0.0, f64::max)
}
