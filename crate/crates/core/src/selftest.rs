//! Built-in accuracy checks for the special functions, run by the CLI's
//! `specfun-selftest` subcommand.

use serde::Serialize;

use crate::specfun::{self, NcChiSq, SpecfunError};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    /// Largest relative error, or absolute where the reference is near zero.
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

// 20-digit reference values.
const EI_TABLE: [(f64, f64); 8] = [
    (0.05, -2.367_884_598_579_374_5),
    (0.5, 0.454_219_904_863_173_58),
    (1.0, 1.895_117_816_355_936_8),
    (2.0, 4.954_234_356_001_890_2),
    (5.0, 40.185_275_355_803_177),
    (10.0, 2_492.228_976_241_877_8),
    (50.0, 1.058_563_689_713_169_1e20),
    (200.0, 3.631_235_233_159_356_9e84),
];

const J0_TABLE: [(f64, f64); 5] = [
    (0.5, 0.938_469_807_240_812_9),
    (1.0, 0.765_197_686_557_966_55),
    (5.0, -0.177_596_771_314_338_3),
    (10.0, -0.245_935_764_451_348_34),
    (30.0, -0.086_367_983_581_040_21),
];

const MARCUM_TABLE: [(u32, f64, f64, f64); 5] = [
    (1, 1.0, 1.0, 0.732_879_803_796_820_2),
    (2, 1.5, 2.0, 0.655_277_900_252_366_1),
    (4, 3.0, 2.5, 0.963_878_080_952_742_4),
    (16, 4.0, 6.0, 0.860_104_101_017_634_5),
    (16, 10.0, 9.0, 0.995_797_148_496_040_7),
];

fn rel(got: f64, want: f64) -> f64 {
    let d = (got - want).abs();
    if want.abs() > 1e-3 {
        d / want.abs()
    } else {
        d
    }
}

fn check<I>(name: &'static str, tolerance: f64, errors: I) -> Result<Check, SpecfunError>
where
    I: IntoIterator<Item = Result<f64, SpecfunError>>,
{
    let mut cases = 0;
    let mut max_error: f64 = 0.0;
    for e in errors {
        let e = e?;
        cases += 1;
        // NaN must fail the check
        max_error = if e.is_nan() { f64::NAN } else { max_error.max(e) };
    }
    Ok(Check {
        name,
        cases,
        max_error,
        tolerance,
        passed: max_error <= tolerance,
    })
}

pub fn run() -> Result<SelftestReport, SpecfunError> {
    let grid: Vec<f64> = (0..60).map(|k| -30.0 + 2.0 * k as f64).collect();
    let eps_grid = [0.5, 0.1, 0.01, 1e-3, 1e-4];
    let ncx_cases = [(1u32, 0.5, 0.2), (4, 2.0, 0.05), (16, 40.0, 0.05), (16, 3.0, 0.5), (64, 500.0, 0.01)];

    let checks = vec![
        check("ei reference table", 1e-13, EI_TABLE.iter().map(|&(x, w)| specfun::ei(x).map(|g| rel(g, w))))?,
        check("ei root", 1e-15, [specfun::ei(specfun::EI_ROOT).map(f64::abs)])?,
        check(
            "ei_inv round trip",
            1e-11,
            grid.iter().filter(|y| **y > -25.0).map(|&y| {
                let x = specfun::ei_inv(y)?;
                specfun::ei(x).map(|back| (back - y).abs() / y.abs().max(1.0))
            }),
        )?,
        check(
            "marcum_q closed forms",
            1e-13,
            [0.1f64, 0.5, 1.0, 2.0, 4.0].iter().flat_map(|&b| {
                let y = 0.5 * b * b;
                [
                    specfun::marcum_q(1, 0.0, b).map(|g| rel(g, (-y).exp())),
                    specfun::marcum_q(2, 0.0, b).map(|g| rel(g, (-y).exp() * (1.0 + y))),
                ]
            }),
        )?,
        check(
            "marcum_q reference table",
            1e-12,
            MARCUM_TABLE.iter().map(|&(m, a, b, w)| specfun::marcum_q(m, a, b).map(|g| rel(g, w))),
        )?,
        check(
            "ncx2 central quantile",
            1e-10,
            eps_grid.iter().map(|&eps| {
                let p = NcChiSq::new(1, 0.0, 1.0)?;
                p.quantile(eps).map(|q| rel(q, -(1.0 - eps).ln()))
            }),
        )?,
        check(
            "ncx2 quantile inverts cdf (relative x error)",
            1e-11,
            ncx_cases.iter().flat_map(|&(m, mu, s)| {
                eps_grid.iter().map(move |&eps| {
                    let p = NcChiSq::new(m, mu, s)?;
                    let q = p.quantile(eps)?;
                    // CDF residual mapped back through the density
                    Ok((p.cdf(q)? - eps).abs() / (p.pdf(q)? * q))
                })
            }),
        )?,
        check("bessel_j0 reference table", 1e-13, J0_TABLE.iter().map(|&(x, w)| Ok(rel(specfun::bessel_j0(x), w))))?,
        check(
            "quad_adaptive",
            1e-11,
            [
                specfun::quad_adaptive(f64::sin, 0.0, std::f64::consts::PI, 1e-13).map(|v| rel(v, 2.0)),
                specfun::quad_adaptive(|t| (-t * t).exp(), 0.0, 10.0, 1e-14)
                    .map(|v| rel(v, 0.5 * std::f64::consts::PI.sqrt())),
            ],
        )?,
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(SelftestReport { checks, passed })
}
