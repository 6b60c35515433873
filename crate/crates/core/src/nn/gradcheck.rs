//! Central finite-difference gradient checking.

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central difference of `f` along coordinate `i` of `params`.
pub fn central_difference<F>(params: &mut [f64], i: usize, h: f64, mut f: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let orig = params[i];
    params[i] = orig + h;
    let plus = f(params);
    params[i] = orig - h;
    let minus = f(params);
    params[i] = orig;
    (plus - minus) / (2.0 * h)
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
}

/// Compare `analytic` against central differences of `f` at the given coordinates.
pub fn check<F>(params: &mut [f64], analytic: &[f64], indices: &[usize], h: f64, floor: f64, mut f: F) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst_index: 0,
    };
    for &i in indices {
        let numeric = central_difference(params, i, h, &mut f);
        let err = relative_error(analytic[i], numeric, floor);
        report.checked += 1;
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_gradient() {
        let mut p = vec![1.5, -0.5];
        let f = |p: &[f64]| p[0].powi(3) + 2.0 * p[1] * p[0];
        let analytic = vec![3.0 * 1.5f64.powi(2) + 2.0 * -0.5, 2.0 * 1.5];
        let r = check(&mut p, &analytic, &[0, 1], 1e-5, 1e-8, f);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }
}
