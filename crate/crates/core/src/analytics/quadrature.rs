//! Adaptive Gauss–Kronrod (10/21-point) quadrature with global bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            max_subdivisions: 512,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::invalid("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions < 8 {
            return Err(Error::invalid("max_subdivisions must be at least 8"));
        }
        Ok(())
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Weights of the embedded 10-point Gauss rule (nodes XGK[1], XGK[3], ...).
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = f(center);
    let mut kronrod = WGK[10] * f_center;
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    if !kronrod.is_finite() {
        return Err(Error::numerical(format!(
            "integrand is not finite on [{lo}, {hi}]"
        )));
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();

    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment { lo, hi, value, error })
}

/// Integrates `f` over `[lo, hi]`.
///
/// Succeeds when the error estimate is at most `max(abs_tol, rel_tol·|result|)`;
/// otherwise returns [`Error::ConvergenceFailure`] with the best estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_with_breaks(f, lo, hi, &[], spec)
}

/// Like [`integrate`], but starts from a partition at the interior
/// `breaks`, which should mark kinks of the integrand.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("integration limits must be finite"));
    }
    if lo > hi {
        return Err(Error::invalid(format!("empty interval: lo {lo} > hi {hi}")));
    }
    if lo == hi {
        return Ok(0.0);
    }

    let mut points = vec![lo];
    let mut interior: Vec<f64> = breaks.iter().copied().filter(|b| *b > lo && *b < hi).collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    points.extend(interior);
    points.push(hi);

    let mut segments = Vec::with_capacity(spec.max_subdivisions.max(points.len()));
    for w in points.windows(2) {
        segments.push(kronrod21(&f, w[0], w[1])?);
    }

    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let tolerance = spec.abs_tol.max(spec.rel_tol * value.abs());
        if error <= tolerance {
            return Ok(value);
        }
        if segments.len() >= spec.max_subdivisions {
            return Err(Error::ConvergenceFailure {
                estimate: value,
                error,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("at least one segment");
        let seg = segments[worst];
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo || mid >= seg.hi {
            // Bisection has hit floating-point resolution.
            return Err(Error::ConvergenceFailure {
                estimate: value,
                error,
            });
        }
        segments[worst] = kronrod21(&f, seg.lo, mid)?;
        segments.push(kronrod21(&f, mid, seg.hi)?);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tight() -> QuadratureSpec {
        QuadratureSpec {
            rel_tol: 1e-12,
            abs_tol: 1e-13,
            max_subdivisions: 512,
        }
    }

    #[test]
    fn polynomial() {
        let v = integrate(|x| x * x, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn sine() {
        let v = integrate(f64::sin, 0.0, PI, &QuadratureSpec::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate(|x| x, 3.0, 3.0, &QuadratureSpec::default()).unwrap(), 0.0);
        assert!(integrate(|x| x, 3.0, 2.0, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn kink_with_breakpoint() {
        let f = |x: f64| (x - 0.3).abs();
        let exact = 0.5 * (0.3f64.powi(2) + 0.7f64.powi(2));
        let v = integrate_with_breaks(f, 0.0, 1.0, &[0.3], &tight()).unwrap();
        assert!((v - exact).abs() < 1e-12);
        let v = integrate(f, 0.0, 1.0, &tight()).unwrap();
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        let v = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-5);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let spec = QuadratureSpec {
            rel_tol: 1e-15,
            abs_tol: 1e-300,
            max_subdivisions: 8,
        };
        match integrate(|x: f64| (1.0 / x).sin(), 1e-3, 1.0, &spec) {
            Err(Error::ConvergenceFailure { estimate, error }) => {
                assert!(estimate.is_finite());
                assert!(error > 0.0);
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_integrand() {
        assert!(matches!(
            integrate(|_| f64::NAN, 0.0, 1.0, &QuadratureSpec::default()),
            Err(Error::NumericalFailure(_))
        ));
    }
}
