use nalgebra::DMatrix;

const PADE_ORDER: usize = 6;

/// Matrix exponential by scaling and squaring with a diagonal Padé(6, 6)
/// approximant. The scaled matrix has infinity norm at most 0.5.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = inf_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);

    let mut coeff = 1.0;
    let mut num = DMatrix::<f64>::identity(n, n);
    let mut den = DMatrix::<f64>::identity(n, n);
    let mut power = DMatrix::<f64>::identity(n, n);
    let q = PADE_ORDER as f64;
    for k in 1..=PADE_ORDER {
        let kf = k as f64;
        coeff *= (q - kf + 1.0) / (kf * (2.0 * q - kf + 1.0));
        power = &power * &scaled;
        num += &power * coeff;
        if k % 2 == 0 {
            den += &power * coeff;
        } else {
            den -= &power * coeff;
        }
    }
    let mut e = den
        .lu()
        .solve(&num)
        .expect("Pade denominator is nonsingular for norm <= 0.5");
    for _ in 0..squarings {
        e = &e * &e;
    }
    e
}

fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
