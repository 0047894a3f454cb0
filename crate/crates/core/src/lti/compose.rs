use nalgebra::DMatrix;

use super::{same_domain, Domain, LtiError, LtiSystem};

fn joint_domain(a: &LtiSystem, b: &LtiSystem) -> Result<Domain, LtiError> {
    match (a.order(), b.order()) {
        (0, _) => Ok(b.domain()),
        (_, 0) => Ok(a.domain()),
        _ if same_domain(a.domain(), b.domain()) => Ok(a.domain()),
        _ => Err(LtiError::Dimension("systems have different domains".into())),
    }
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// `second ∘ first`: the output of `first` drives `second`.
pub fn series(first: &LtiSystem, second: &LtiSystem) -> Result<LtiSystem, LtiError> {
    if first.outputs() != second.inputs() {
        return Err(LtiError::Dimension(format!(
            "series: {} outputs into {} inputs",
            first.outputs(),
            second.inputs()
        )));
    }
    let domain = joint_domain(first, second)?;
    let (n1, n2) = (first.order(), second.order());
    let mut a = block_diag(first.a(), second.a());
    a.view_mut((n1, 0), (n2, n1))
        .copy_from(&(second.b() * first.c()));
    let mut b = DMatrix::zeros(n1 + n2, first.inputs());
    b.view_mut((0, 0), (n1, first.inputs())).copy_from(first.b());
    b.view_mut((n1, 0), (n2, first.inputs()))
        .copy_from(&(second.b() * first.d()));
    let mut c = DMatrix::zeros(second.outputs(), n1 + n2);
    c.view_mut((0, 0), (second.outputs(), n1))
        .copy_from(&(second.d() * first.c()));
    c.view_mut((0, n1), (second.outputs(), n2))
        .copy_from(second.c());
    let d = second.d() * first.d();
    LtiSystem::new(a, b, c, d, domain)
}

/// Sum of two systems driven by the same input.
pub fn parallel(a: &LtiSystem, b: &LtiSystem) -> Result<LtiSystem, LtiError> {
    if a.inputs() != b.inputs() || a.outputs() != b.outputs() {
        return Err(LtiError::Dimension("parallel: shapes differ".into()));
    }
    let domain = joint_domain(a, b)?;
    let (n1, n2) = (a.order(), b.order());
    let am = block_diag(a.a(), b.a());
    let mut bm = DMatrix::zeros(n1 + n2, a.inputs());
    bm.view_mut((0, 0), (n1, a.inputs())).copy_from(a.b());
    bm.view_mut((n1, 0), (n2, a.inputs())).copy_from(b.b());
    let mut cm = DMatrix::zeros(a.outputs(), n1 + n2);
    cm.view_mut((0, 0), (a.outputs(), n1)).copy_from(a.c());
    cm.view_mut((0, n1), (a.outputs(), n2)).copy_from(b.c());
    LtiSystem::new(am, bm, cm, a.d() + b.d(), domain)
}

/// Negative feedback loop `forward / (1 + forward * back)`.
///
/// The loop is `u = r - back(y)`, `y = forward(u)`; it is rejected when
/// `I + D_forward D_back` is singular.
pub fn feedback(forward: &LtiSystem, back: &LtiSystem) -> Result<LtiSystem, LtiError> {
    if forward.outputs() != back.inputs() || back.outputs() != forward.inputs() {
        return Err(LtiError::Dimension("feedback: loop shapes differ".into()));
    }
    let domain = joint_domain(forward, back)?;
    let (n1, n2) = (forward.order(), back.order());
    let p = forward.outputs();
    let m = forward.inputs();
    let (a1, b1, c1, d1) = (forward.a(), forward.b(), forward.c(), forward.d());
    let (a2, b2, c2, d2) = (back.a(), back.b(), back.c(), back.d());

    let loop_matrix = DMatrix::<f64>::identity(p, p) + d1 * d2;
    let lu = loop_matrix.lu();
    let det = lu.determinant();
    if !det.is_finite() || det.abs() < 1e-12 {
        return Err(LtiError::IllPosedFeedback);
    }
    let e = lu.try_inverse().ok_or(LtiError::IllPosedFeedback)?;

    // y = E (C1 x1 - D1 C2 x2 + D1 r)
    let y_x1 = &e * c1;
    let y_x2 = -(&e * d1 * c2);
    let y_r = &e * d1;
    // u = r - C2 x2 - D2 y
    let u_x1 = -(d2 * &y_x1);
    let u_x2 = -c2 - d2 * &y_x2;
    let u_r = DMatrix::<f64>::identity(m, m) - d2 * &y_r;

    let n = n1 + n2;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&(a1 + b1 * &u_x1));
    a.view_mut((0, n1), (n1, n2)).copy_from(&(b1 * &u_x2));
    a.view_mut((n1, 0), (n2, n1)).copy_from(&(b2 * &y_x1));
    a.view_mut((n1, n1), (n2, n2)).copy_from(&(a2 + b2 * &y_x2));
    let mut b = DMatrix::zeros(n, m);
    b.view_mut((0, 0), (n1, m)).copy_from(&(b1 * &u_r));
    b.view_mut((n1, 0), (n2, m)).copy_from(&(b2 * &y_r));
    let mut c = DMatrix::zeros(p, n);
    c.view_mut((0, 0), (p, n1)).copy_from(&y_x1);
    c.view_mut((0, n1), (p, n2)).copy_from(&y_x2);
    LtiSystem::new(a, b, c, y_r, domain)
}
