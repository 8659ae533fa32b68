//! Invariant checks run by `beamspace selftest`, plus the random model
//! generators they share with the test suites.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use crate::beamspace::{
    apply_perturbation, basis_correlation_db, compute_basis, evm_map, perturbed_basis, power_imbalance_db,
    PerturbationField, StatePatternSet,
};
use crate::constellation::{PskConstellation, RatioSet};
use crate::error::Result;
use crate::generate::{
    generate_mirror_pair, generate_perturbation, AntennaProfile, PatternLobe, PerturbationLobe, PolarizationSelector,
};
use crate::link::{
    build_channel, draw_geometry, receive, run_monte_carlo, scenario_rng, zf_equalize, LinkGeometry, MonteCarloConfig,
    SolidAngle,
};
use crate::sphere::{build_grid, SphericalGrid, VectorPattern};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
}

/// One to three Gaussian lobes kept away from the mirror plane so that the
/// second basis pattern carries power.
pub fn random_profile<R: Rng + ?Sized>(rng: &mut R) -> AntennaProfile {
    let n = rng.random_range(1..=3);
    let lobes = (0..n)
        .map(|_| {
            let phi = rng.random_range(20.0..160.0f64) + if rng.random_bool(0.5) { 180.0 } else { 0.0 };
            PatternLobe {
                theta: rng.random_range(20.0..160.0f64).to_radians(),
                phi: phi.to_radians(),
                width: rng.random_range(20.0..50.0f64).to_radians(),
                amp_theta: random_unit(rng) * rng.random_range(0.2..1.0),
                amp_phi: random_unit(rng) * rng.random_range(0.0..0.6),
            }
        })
        .collect();
    AntennaProfile { lobes }
}

/// One broad lobe per state with independent amplitude, phase and position,
/// so every state sees a different field.
pub fn random_perturbation<R: Rng + ?Sized>(rng: &mut R, ratios: &RatioSet) -> Vec<PerturbationLobe> {
    (0..ratios.len())
        .map(|k| PerturbationLobe {
            states: Some(vec![k]),
            polarization: PolarizationSelector::Both,
            theta: rng.random_range(30.0..150.0f64).to_radians(),
            phi: rng.random_range(0.0..360.0f64).to_radians(),
            width: rng.random_range(40.0..80.0f64).to_radians(),
            amplitude: rng.random_range(-0.6..-0.2),
            phase: rng.random_range(-1.0..1.0),
        })
        .collect()
}

/// Smooth, nowhere-vanishing random factor map.
pub fn random_factor_map<R: Rng + ?Sized>(rng: &mut R, grid: &Arc<SphericalGrid>) -> crate::sphere::ComplexAngularMap {
    let a = random_unit(rng) * rng.random_range(0.1..0.4);
    let b = random_unit(rng) * rng.random_range(0.1..0.4);
    let c = random_unit(rng) * rng.random_range(0.5..1.5);
    let values = (0..grid.len())
        .map(|k| {
            let (t, p) = grid.coords(k);
            c * (Complex64::new(1.0, 0.0) + a * t.cos() + b * (t.sin() * p.sin()))
        })
        .collect();
    crate::sphere::ComplexAngularMap::new(Arc::clone(grid), values).expect("grid-sized map")
}

/// Draws geometries until one is invertible under the default cap.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R, s: &StatePatternSet) -> Result<crate::link::LinkScenario> {
    let basis = perturbed_basis(s)?;
    loop {
        let rx = draw_geometry(rng, (3f64.to_radians(), 5f64.to_radians()));
        let scenario = build_channel(&basis, LinkGeometry::new(rx[0], rx[1]))?;
        if scenario.is_invertible() {
            return Ok(scenario);
        }
    }
}

/// Groups points closer than `tol` (single linkage).
pub fn count_clusters(points: &[Complex64], tol: f64) -> usize {
    let mut label: Vec<usize> = (0..points.len()).collect();
    for i in 0..points.len() {
        for j in 0..i {
            if (points[i] - points[j]).norm() <= tol {
                let (a, b) = (label[i], label[j]);
                for l in &mut label {
                    if *l == a {
                        *l = b;
                    }
                }
            }
        }
    }
    label.sort_unstable();
    label.dedup();
    label.len()
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Transmit-side decomposition onto the perturbed basis at `omega`.
pub fn transmit_estimates(
    s_hat: &StatePatternSet,
    constellation: &PskConstellation,
    omega: SolidAngle,
) -> Result<Vec<(crate::constellation::SymbolPair, [Complex64; 2])>> {
    let basis = perturbed_basis(s_hat)?;
    let st = s_hat.grid().stencil(omega.theta, omega.phi)?;
    let (b1, b2) = (basis.b1.sample(&st), basis.b2.sample(&st));
    let inv = crate::link::Matrix2([[b1[0], b2[0]], [b1[1], b2[1]]])
        .inverse()
        .ok_or(crate::error::Error::IllConditioned(f64::INFINITY))?;
    Ok(constellation
        .symbol_pairs()
        .into_iter()
        .map(|pair| {
            let f = s_hat.pattern(pair.ratio_index).sample(&st);
            (pair, inv.mul_vec([pair.x1 * f[0], pair.x1 * f[1]]))
        })
        .collect())
}

/// Runs every check on a reduced workload.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    let qpsk = PskConstellation::qpsk();
    let ratios = qpsk.ratio_set();
    let mut rng = scenario_rng(seed, u64::MAX);
    let mut out = Vec::new();

    out.push(check("free-space exactness", || {
        let grid = build_grid(37, 72)?;
        let (mut worst_err, mut worst_evm) = (0.0f64, 0.0f64);
        for _ in 0..10 {
            let s = generate_mirror_pair(&random_profile(&mut rng), &grid, &ratios)?;
            worst_evm = worst_evm.max(evm_map(&perturbed_basis(&s)?, &s, &ratios)?.max());
            let sc = random_scenario(&mut rng, &s)?;
            for pair in qpsk.symbol_pairs() {
                let x = zf_equalize(receive(&s, pair.x1, pair.x2, &sc)?, &sc)?;
                worst_err = worst_err.max((x[0] - pair.x1).norm()).max((x[1] - pair.x2).norm());
            }
        }
        Ok((
            worst_err <= 1e-10 && worst_evm <= 1e-12,
            format!("max error {worst_err:.2e}, max EVM {worst_evm:.2e}"),
        ))
    }));

    out.push(check("+-1 exact, +-j displaced", || {
        let grid = build_grid(37, 72)?;
        let mut ok = true;
        let (mut exact, mut displaced) = (0.0f64, f64::INFINITY);
        for _ in 0..5 {
            let free = generate_mirror_pair(&AntennaProfile::calibrated_default(), &grid, &ratios)?;
            let psi = generate_perturbation(&random_perturbation(&mut rng, &ratios), &grid, &ratios)?;
            let s = apply_perturbation(&free, &psi)?;
            let basis = perturbed_basis(&s)?;
            let geo = LinkGeometry::new(
                SolidAngle::from_degrees(45.0, 294.0),
                SolidAngle::from_degrees(45.0, 298.0),
            );
            let sc = build_channel(&basis, geo)?;
            let mut worst_j: f64 = 0.0;
            for pair in qpsk.symbol_pairs() {
                let x = zf_equalize(receive(&s, pair.x1, pair.x2, &sc)?, &sc)?;
                let e = (x[0] - pair.x1).norm().max((x[1] - pair.x2).norm());
                if ratios.is_basis_state(pair.ratio_index) {
                    exact = exact.max(e);
                } else {
                    worst_j = worst_j.max(e);
                }
            }
            displaced = displaced.min(worst_j);
            for n in 0..2 {
                for &sym in qpsk.points() {
                    let pts: Vec<Complex64> = transmit_estimates(&s, &qpsk, geo.rx[0])?
                        .into_iter()
                        .filter(|(p, _)| [p.x1, p.x2][n] == sym)
                        .map(|(_, x)| x[n])
                        .collect();
                    ok &= count_clusters(&pts, 1e-6) == 3;
                }
            }
        }
        ok &= exact <= 1e-10 && displaced >= 1e-3;
        Ok((ok, format!("+-1 error {exact:.2e}, smallest +-j error {displaced:.2e}")))
    }));

    out.push(check("common-factor cancellation", || {
        let grid = build_grid(19, 36)?;
        let free = generate_mirror_pair(&AntennaProfile::calibrated_default(), &grid, &ratios)?;
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let psi = PerturbationField::state_independent(
                ratios.clone(),
                random_factor_map(&mut rng, &grid),
                random_factor_map(&mut rng, &grid),
            )?;
            let s = apply_perturbation(&free, &psi)?;
            worst = worst.max(evm_map(&perturbed_basis(&s)?, &s, &ratios)?.max());
        }
        Ok((worst <= 1e-10, format!("max EVM {worst:.2e}")))
    }));

    out.push(check("mirror-pair orthogonality", || {
        let grid = build_grid(91, 180)?;
        let s = generate_mirror_pair(&AntennaProfile::calibrated_default(), &grid, &ratios)?;
        let basis = compute_basis(s.plus_one()?, s.minus_one()?)?;
        let corr = basis_correlation_db(&basis)?;
        let imb = power_imbalance_db(&basis)?;
        Ok((
            corr <= -100.0 && (imb - 0.8).abs() <= 0.2,
            format!("correlation {corr} dB, imbalance {imb:.3} dB"),
        ))
    }));

    out.push(check("quadrature", || {
        let grid = build_grid(91, 180)?;
        let sum = grid.total_weight();
        let g = Arc::clone(&grid);
        let p = VectorPattern::from_fn(g, |t, _| [Complex64::new(t.cos(), 0.0), Complex64::new(0.0, 0.0)])?;
        let exact = 4.0 * PI / 3.0;
        let rel = (p.integrate_power() - exact).abs() / exact;
        let sum_err = (sum - 4.0 * PI).abs() / (4.0 * PI);
        Ok((
            sum_err <= 1e-9 && rel <= 1e-4,
            format!("weight sum error {sum_err:.1e}, cos^2 error {rel:.1e}"),
        ))
    }));

    out.push(check("Monte Carlo determinism", || {
        let grid = build_grid(37, 72)?;
        let free = generate_mirror_pair(&AntennaProfile::calibrated_default(), &grid, &ratios)?;
        let psi = generate_perturbation(&random_perturbation(&mut rng, &ratios), &grid, &ratios)?;
        let s = apply_perturbation(&free, &psi)?;
        let basis = perturbed_basis(&s)?;
        let start = Instant::now();
        let runs = [Some(1), Some(2), None]
            .into_iter()
            .map(|threads| {
                let cfg = MonteCarloConfig {
                    scenarios: 1000,
                    seed,
                    threads,
                    ..MonteCarloConfig::default()
                };
                run_monte_carlo(&s, &basis, &qpsk, &cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        let same = runs.windows(2).all(|w| w[0] == w[1]);
        Ok((
            same,
            format!("3 runs x 1000 scenarios in {:.2} s", start.elapsed().as_secs_f64()),
        ))
    }));

    out
}
