use crate::Field;

/// Index into `0..n` after point reflection about the nearest edge sample.
/// Returns `(index, edge)`; the padded value is `2·f[edge] − f[index]`.
fn reflect(k: isize, n: usize) -> (usize, Option<usize>) {
    let last = n as isize - 1;
    if k < 0 {
        ((-k).min(last) as usize, Some(0))
    } else if k > last {
        ((2 * last - k).max(0) as usize, Some(n - 1))
    } else {
        (k as usize, None)
    }
}

fn padded(line: &[f64], k: isize) -> f64 {
    match reflect(k, line.len()) {
        (i, None) => line[i],
        (i, Some(e)) => 2.0 * line[e] - line[i],
    }
}

pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn correlate_line(line: &[f64], kernel: &[f64], out: &mut [f64]) {
    let r = (kernel.len() / 2) as isize;
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as isize;
        *o = kernel
            .iter()
            .enumerate()
            .map(|(t, &k)| k * padded(line, i + t as isize - r))
            .sum();
    }
}

/// Separable correlation along rows then columns with point-reflected
/// borders, which keep affine images affine.
pub(crate) fn separable(f: &Field, row_kernel: &[f64], col_kernel: &[f64]) -> Field {
    let (h, w) = f.dim();
    let mut tmp = Field::zeros((h, w));
    let mut buf = vec![0.0; w.max(h)];
    for i in 0..h {
        let line: Vec<f64> = f.row(i).to_vec();
        correlate_line(&line, row_kernel, &mut buf[..w]);
        tmp.row_mut(i).iter_mut().zip(&buf).for_each(|(d, &s)| *d = s);
    }
    let mut out = Field::zeros((h, w));
    for j in 0..w {
        let line: Vec<f64> = tmp.column(j).to_vec();
        correlate_line(&line, col_kernel, &mut buf[..h]);
        out.column_mut(j).iter_mut().zip(&buf).for_each(|(d, &s)| *d = s);
    }
    out
}

pub fn gaussian_blur(f: &Field, sigma: f64) -> Field {
    let k = gaussian_kernel(sigma);
    separable(f, &k, &k)
}

/// Value at `(i + di, j + dj)` with point reflection on both axes.
pub(crate) fn at(f: &Field, i: usize, j: usize, di: isize, dj: isize) -> f64 {
    let (h, w) = f.dim();
    let (ii, ei) = reflect(i as isize + di, h);
    let (jj, ej) = reflect(j as isize + dj, w);
    let v = f[[ii, jj]];
    match (ei, ej) {
        (None, None) => v,
        (Some(e), None) => 2.0 * f[[e, jj]] - v,
        (None, Some(e)) => 2.0 * f[[ii, e]] - v,
        (Some(a), Some(b)) => 2.0 * f[[a, b]] - v,
    }
}

/// Sobel derivatives `(gx, gy)`, x along columns, y along rows.
pub fn sobel(f: &Field) -> (Field, Field) {
    let (h, w) = f.dim();
    let mut gx = Field::zeros((h, w));
    let mut gy = Field::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let v = |di, dj| at(f, i, j, di, dj);
            gx[[i, j]] = (v(-1, 1) + 2.0 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2.0 * v(0, -1) + v(1, -1));
            gy[[i, j]] = (v(1, -1) + 2.0 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2.0 * v(-1, 0) + v(-1, 1));
        }
    }
    (gx, gy)
}

/// Second differences `(hxx, hxy, hyy)`.
pub fn hessian(f: &Field) -> (Field, Field, Field) {
    let (h, w) = f.dim();
    let mut hxx = Field::zeros((h, w));
    let mut hxy = Field::zeros((h, w));
    let mut hyy = Field::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let v = |di, dj| at(f, i, j, di, dj);
            let c = v(0, 0);
            hxx[[i, j]] = v(0, 1) - 2.0 * c + v(0, -1);
            hyy[[i, j]] = v(1, 0) - 2.0 * c + v(-1, 0);
            hxy[[i, j]] = 0.25 * (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1));
        }
    }
    (hxx, hxy, hyy)
}
