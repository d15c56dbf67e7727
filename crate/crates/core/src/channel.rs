//! Link-level channel model: distance-based path gain, Rician small-scale
//! fading, and the composite complex channel coefficient including the
//! antenna pattern.

use crate::error::Result;
use crate::gain::{directional_gain, smoothed_gain};
use crate::geometry::ScenarioLayout;
use crate::params::{SystemParams, REF_DISTANCE_M};
use crate::vec3::Vec3;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Which antenna pattern enters the channel coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainKind {
    /// Hard-cutoff directional pattern.
    Exact,
    /// Softplus-smoothed pattern used inside the optimizer.
    Smoothed,
    /// Unit gain in every direction; the boresight is ignored.
    Isotropic,
    /// Unit gain on the forward hemisphere of the boresight, zero behind.
    IsotropicHemisphere,
}

/// Large-scale path gain at distance `d` meters.
pub fn path_gain(d: f64, params: &SystemParams) -> f64 {
    debug_assert!(d >= REF_DISTANCE_M, "distance {d} below reference");
    params.ref_gain_linear() * (REF_DISTANCE_M / d).powf(params.pathloss_exp)
}

/// Small-scale fading coefficients for every (AP, user) pair. The Rician
/// line-of-sight component carries the deterministic phase set by the link
/// length, the diffuse part is complex Gaussian.
#[derive(Debug, Clone)]
pub struct FadingRealization {
    pub coeffs: Array2<Complex64>,
}

pub fn draw_fading(layout: &ScenarioLayout, params: &SystemParams, seed: u64) -> FadingRealization {
    let (l, k) = layout.distances.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa = params.rician_k;
    let los_w = (kappa / (kappa + 1.0)).sqrt();
    let diffuse_w = (1.0 / (kappa + 1.0)).sqrt();
    let mut coeffs = Array2::from_elem((l, k), Complex64::new(0.0, 0.0));
    for li in 0..l {
        for ki in 0..k {
            let phase = -std::f64::consts::TAU * layout.distances[[li, ki]] / params.wavelength;
            let los = Complex64::from_polar(1.0, phase);
            // CN(0, 1): each quadrature has variance 1/2.
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let diffuse = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            coeffs[[li, ki]] = los * los_w + diffuse * diffuse_w;
        }
    }
    FadingRealization { coeffs }
}

/// Pattern gain for one link under the selected mode.
pub fn antenna_gain(boresight: Vec3, direction: Vec3, params: &SystemParams, kind: GainKind) -> f64 {
    match kind {
        GainKind::Exact => directional_gain(boresight, direction, params.directivity),
        GainKind::Smoothed => smoothed_gain(boresight, direction, params.directivity, params.smoothness),
        GainKind::Isotropic => 1.0,
        GainKind::IsotropicHemisphere => {
            if boresight.dot(direction) > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Composite channel coefficient for AP `l` and user `k`.
pub fn channel_coeff(
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    boresight: Vec3,
    l: usize,
    k: usize,
    params: &SystemParams,
    kind: GainKind,
) -> Complex64 {
    let d = layout.distances[[l, k]];
    let g = antenna_gain(boresight, layout.directions[[l, k]], params, kind);
    fading.coeffs[[l, k]] * (path_gain(d, params) * g).sqrt()
}

/// Full channel matrix for a boresight configuration, one row per AP.
pub fn channel_matrix(
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    pointing: &[Vec3],
    params: &SystemParams,
    kind: GainKind,
) -> Result<Array2<Complex64>> {
    let (l, k) = layout.distances.dim();
    if pointing.len() != l {
        return Err(crate::error::Error::DimensionMismatch(format!(
            "pointing has {} entries for {} APs",
            pointing.len(),
            l
        )));
    }
    let mut h = Array2::from_elem((l, k), Complex64::new(0.0, 0.0));
    for li in 0..l {
        for ki in 0..k {
            h[[li, ki]] = channel_coeff(layout, fading, pointing[li], li, ki, params, kind);
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_layout;

    #[test]
    fn path_gain_reference_values() {
        let p = SystemParams::default();
        assert!((path_gain(1.0, &p) - 1e-4).abs() < 1e-19);
        assert!((path_gain(10.0, &p) - 6.309573444801931e-8).abs() < 1e-21);
        assert!((path_gain(100.0, &p) - 3.98107170553497e-11).abs() < 1e-24);
    }

    #[test]
    fn path_gain_decreases_with_distance() {
        let p = SystemParams::default();
        let mut prev = path_gain(1.0, &p);
        for d in [2.0, 5.0, 20.0, 150.0, 400.0] {
            let g = path_gain(d, &p);
            assert!(g < prev, "gain must fall with distance");
            prev = g;
        }
    }

    #[test]
    fn fading_is_deterministic_and_unit_power_on_average() {
        let p = SystemParams { num_aps: 12, num_users: 6, ..SystemParams::default() };
        let layout = make_layout(&p, 5).unwrap();
        let a = draw_fading(&layout, &p, 17);
        let b = draw_fading(&layout, &p, 17);
        assert_eq!(a.coeffs, b.coeffs);
        let c = draw_fading(&layout, &p, 18);
        assert_ne!(a.coeffs, c.coeffs);

        let mut acc = 0.0;
        let mut n = 0usize;
        for seed in 0..200u64 {
            let f = draw_fading(&layout, &p, seed);
            acc += f.coeffs.iter().map(|g| g.norm_sqr()).sum::<f64>();
            n += f.coeffs.len();
        }
        let mean = acc / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean |g|^2 = {mean}, expected ~1");
    }

    #[test]
    fn strong_los_pins_magnitude_and_phase() {
        let p = SystemParams { num_aps: 2, num_users: 1, rician_k: 1e12, ..SystemParams::default() };
        let layout = make_layout(&p, 9).unwrap();
        let f = draw_fading(&layout, &p, 1);
        for l in 0..2 {
            let g = f.coeffs[[l, 0]];
            assert!((g.norm() - 1.0).abs() < 1e-5);
            let expected = -std::f64::consts::TAU * layout.distances[[l, 0]] / p.wavelength;
            let diff = (g.arg() - expected).rem_euclid(std::f64::consts::TAU);
            let wrapped = diff.min(std::f64::consts::TAU - diff);
            assert!(wrapped < 1e-5, "phase off by {wrapped}");
        }
    }

    #[test]
    fn channel_magnitude_composes_path_and_pattern() {
        // One AP one meter from the user, boresight dead on, fading forced
        // to 1: |h| = sqrt(beta(1) * G0) = sqrt(1e-3).
        let layout = ScenarioLayout::from_positions(
            vec![Vec3::new(0.0, 0.0, 0.0)],
            vec![Vec3::new(1.0, 0.0, 0.0)],
        )
        .unwrap();
        let p = SystemParams { num_aps: 1, num_users: 1, ..SystemParams::default() };
        let fading = FadingRealization {
            coeffs: Array2::from_elem((1, 1), Complex64::new(1.0, 0.0)),
        };
        let f = Vec3::new(1.0, 0.0, 0.0);
        let h = channel_coeff(&layout, &fading, f, 0, 0, &p, GainKind::Exact);
        assert!((h.norm() - 0.03162277660168379).abs() < 1e-15);
        assert_eq!(h.im, 0.0);

        // Behind the boresight the exact pattern kills the link entirely.
        let back = channel_coeff(&layout, &fading, -f, 0, 0, &p, GainKind::Exact);
        assert_eq!(back, Complex64::new(0.0, 0.0));

        // Isotropic mode ignores the boresight.
        let iso = channel_coeff(&layout, &fading, -f, 0, 0, &p, GainKind::Isotropic);
        assert!((iso.norm() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn hemisphere_mode_gates_on_forward_cone() {
        let layout = ScenarioLayout::from_positions(
            vec![Vec3::new(0.0, 0.0, 0.0)],
            vec![Vec3::new(2.0, 0.0, 0.0)],
        )
        .unwrap();
        let p = SystemParams { num_aps: 1, num_users: 1, ..SystemParams::default() };
        let fading = FadingRealization {
            coeffs: Array2::from_elem((1, 1), Complex64::new(1.0, 0.0)),
        };
        let fwd = channel_coeff(&layout, &fading, Vec3::new(1.0, 0.0, 0.0), 0, 0, &p, GainKind::IsotropicHemisphere);
        let bwd = channel_coeff(&layout, &fading, Vec3::new(-1.0, 0.0, 0.0), 0, 0, &p, GainKind::IsotropicHemisphere);
        assert!(fwd.norm() > 0.0);
        assert_eq!(bwd.norm(), 0.0);
    }

    #[test]
    fn channel_matrix_checks_pointing_length() {
        let p = SystemParams { num_aps: 3, num_users: 2, ..SystemParams::default() };
        let layout = make_layout(&p, 2).unwrap();
        let fading = draw_fading(&layout, &p, 3);
        let short = vec![Vec3::new(1.0, 0.0, 0.0); 2];
        assert!(channel_matrix(&layout, &fading, &short, &p, GainKind::Exact).is_err());
    }
}
