//! Precoding, SINR, and achievable rate evaluation.
//!
//! Every AP transmits to its associated user with normalized conjugate
//! precoding at fixed power `P`. A user's signal is the coherent sum over
//! its serving APs; everything radiated for other users is interference.

use crate::association::AssociationMatrix;
use crate::channel::{channel_matrix, FadingRealization, GainKind};
use crate::error::Result;
use crate::geometry::ScenarioLayout;
use crate::params::SystemParams;
use crate::vec3::Vec3;
use ndarray::Array2;
use num_complex::Complex64;

/// How the interference power in the SINR denominator is aggregated.
///
/// `Coherent` squares the magnitude of the total interfering field, i.e. the
/// magnitude-square sits outside the sum over interfering users. That is the
/// form the optimizer's closed-form multiplier is derived from, so it is the
/// default. `PerInterferer` squares each interfering user's contribution
/// separately before summing, the statistically conventional choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DenomMode {
    #[default]
    Coherent,
    PerInterferer,
}

impl DenomMode {
    pub fn label(self) -> &'static str {
        match self {
            DenomMode::Coherent => "as_printed",
            DenomMode::PerInterferer => "per_interferer",
        }
    }
}

impl std::str::FromStr for DenomMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "as_printed" => Ok(DenomMode::Coherent),
            "per_interferer" => Ok(DenomMode::PerInterferer),
            other => Err(format!("unknown denominator mode '{other}', expected as_printed or per_interferer")),
        }
    }
}

/// Normalized conjugate precoder for a scalar channel. Dead links get the
/// inert value 1: the transmitted product `h * phi` is zero either way.
pub fn conjugate_precoder(h: Complex64) -> Complex64 {
    let n = h.norm();
    if n == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        h.conj() / n
    }
}

/// Per-AP precoders for the users they serve.
pub(crate) fn precoders(h: &Array2<Complex64>, served: &[usize]) -> Vec<Complex64> {
    served
        .iter()
        .enumerate()
        .map(|(l, &u)| conjugate_precoder(h[[l, u]]))
        .collect()
}

/// Signal and interference aggregates for one user, computed from a channel
/// matrix, the per-AP served-user list, and the per-AP precoders.
pub(crate) struct Aggregates {
    /// Coherent serving-AP sum: Sigma_l h[l,k] * phi_l over serving APs.
    pub s: Complex64,
    /// Coherent interfering field: the same sum over non-serving APs.
    pub t_coherent: Complex64,
    /// Sum over interfering users of the squared magnitude of their fields.
    pub per_user_power: f64,
}

pub(crate) fn aggregates(h: &Array2<Complex64>, served: &[usize], w: &[Complex64], k: usize) -> Aggregates {
    let num_users = h.ncols();
    let mut s = Complex64::new(0.0, 0.0);
    let mut per_user = vec![Complex64::new(0.0, 0.0); num_users];
    for (l, &u) in served.iter().enumerate() {
        let contrib = h[[l, k]] * w[l];
        if u == k {
            s += contrib;
        } else {
            per_user[u] += contrib;
        }
    }
    let t_coherent = per_user.iter().sum();
    let per_user_power = per_user.iter().map(|c| c.norm_sqr()).sum();
    Aggregates { s, t_coherent, per_user_power }
}

/// SINR of user `k` from an explicit channel matrix.
pub fn sinr_from_channel(
    h: &Array2<Complex64>,
    assoc: &AssociationMatrix,
    params: &SystemParams,
    k: usize,
    mode: DenomMode,
) -> f64 {
    let served = assoc.served();
    let w = precoders(h, &served);
    sinr_from_served(h, &served, &w, params, k, mode)
}

fn sinr_from_served(
    h: &Array2<Complex64>,
    served: &[usize],
    w: &[Complex64],
    params: &SystemParams,
    k: usize,
    mode: DenomMode,
) -> f64 {
    let agg = aggregates(h, served, w, k);
    let p = params.tx_power_w();
    let interference = match mode {
        DenomMode::Coherent => agg.t_coherent.norm_sqr(),
        DenomMode::PerInterferer => agg.per_user_power,
    };
    p * agg.s.norm_sqr() / (p * interference + params.noise_w())
}

/// SINR of user `k` with exact-pattern channels evaluated at `pointing`.
pub fn compute_sinr(
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    pointing: &[Vec3],
    params: &SystemParams,
    k: usize,
    mode: DenomMode,
) -> Result<f64> {
    let h = channel_matrix(layout, fading, pointing, params, GainKind::Exact)?;
    Ok(sinr_from_channel(&h, assoc, params, k, mode))
}

/// Per-user SINRs and rates plus their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_user_sinr: Vec<f64>,
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
}

/// Rates from an explicit channel matrix.
pub fn rate_from_channel(
    h: &Array2<Complex64>,
    assoc: &AssociationMatrix,
    params: &SystemParams,
    mode: DenomMode,
) -> RateReport {
    let served = assoc.served();
    let w = precoders(h, &served);
    let k_total = h.ncols();
    let mut per_user_sinr = Vec::with_capacity(k_total);
    let mut per_user_rate = Vec::with_capacity(k_total);
    let mut sum_rate = 0.0;
    for k in 0..k_total {
        let sinr = sinr_from_served(h, &served, &w, params, k, mode);
        let rate = (1.0 + sinr).log2();
        per_user_sinr.push(sinr);
        per_user_rate.push(rate);
        sum_rate += rate;
    }
    RateReport { per_user_sinr, per_user_rate, sum_rate }
}

/// Rates with exact-pattern channels evaluated at `pointing`.
pub fn rate_report(
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    pointing: &[Vec3],
    params: &SystemParams,
    mode: DenomMode,
) -> Result<RateReport> {
    rate_report_with_gain(layout, fading, assoc, pointing, params, GainKind::Exact, mode)
}

/// Rates under an explicit gain mode; the isotropic modes ignore `pointing`
/// directions only insofar as the pattern does.
pub fn rate_report_with_gain(
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    pointing: &[Vec3],
    params: &SystemParams,
    kind: GainKind,
    mode: DenomMode,
) -> Result<RateReport> {
    let h = channel_matrix(layout, fading, pointing, params, kind)?;
    Ok(rate_from_channel(&h, assoc, params, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_fading;
    use crate::geometry::make_layout;
    use proptest::prelude::*;

    fn unit_fading(l: usize, k: usize) -> FadingRealization {
        FadingRealization { coeffs: Array2::from_elem((l, k), Complex64::new(1.0, 0.0)) }
    }

    #[test]
    fn precoder_examples() {
        let phi = conjugate_precoder(Complex64::new(3.0, 4.0));
        assert!((phi - Complex64::new(0.6, -0.8)).norm() < 1e-15);
        assert!((phi.norm() - 1.0).abs() < 1e-15);
        assert_eq!(conjugate_precoder(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn single_link_reduction_matches_closed_form() {
        // One AP at 1 m, aligned boresight, fading pinned to 1:
        // gamma = P * beta(1) * G0 / sigma^2.
        let layout = ScenarioLayout::from_positions(
            vec![Vec3::new(0.0, 0.0, 0.0)],
            vec![Vec3::new(1.0, 0.0, 0.0)],
        )
        .unwrap();
        let p = SystemParams { num_aps: 1, num_users: 1, ..SystemParams::default() };
        let fading = unit_fading(1, 1);
        let assoc = AssociationMatrix::from_served(&[0], 1).unwrap();
        let f = vec![Vec3::new(1.0, 0.0, 0.0)];
        let sinr = compute_sinr(&layout, &fading, &assoc, &f, &p, 0, DenomMode::Coherent).unwrap();
        assert!((sinr - 6.309573444801937e8).abs() / 6.309573444801937e8 < 1e-12);
        let report = rate_report(&layout, &fading, &assoc, &f, &p, DenomMode::Coherent).unwrap();
        assert!((report.sum_rate - 29.232967237295306).abs() < 1e-9);
        assert_eq!(report.per_user_rate.len(), 1);
    }

    #[test]
    fn unit_sinr_gives_unit_rate() {
        let p = SystemParams { num_aps: 1, num_users: 1, ..SystemParams::default() };
        // |h|^2 = sigma^2 / P makes the single-link SINR exactly 1.
        let hmag = (p.noise_w() / p.tx_power_w()).sqrt();
        let h = Array2::from_elem((1, 1), Complex64::new(hmag, 0.0));
        let assoc = AssociationMatrix::from_served(&[0], 1).unwrap();
        let report = rate_from_channel(&h, &assoc, &p, DenomMode::Coherent);
        assert!((report.per_user_sinr[0] - 1.0).abs() < 1e-12);
        assert!((report.per_user_rate[0] - 1.0).abs() < 1e-12);
        assert!((report.sum_rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_channel_gives_zero_rate() {
        let p = SystemParams { num_aps: 2, num_users: 1, ..SystemParams::default() };
        let h = Array2::from_elem((2, 1), Complex64::new(0.0, 0.0));
        let assoc = AssociationMatrix::from_served(&[0, 0], 1).unwrap();
        let report = rate_from_channel(&h, &assoc, &p, DenomMode::Coherent);
        assert_eq!(report.sum_rate, 0.0);
        assert_eq!(report.per_user_sinr[0], 0.0);
    }

    #[test]
    fn denominator_modes_differ_under_cancellation() {
        // Two distinct interfering users leak onto user 0 with opposite
        // phases. The coherent field cancels across them; the per-interferer
        // power sum cannot. (Leakage from multiple APs serving the same user
        // is grouped coherently in both modes, so a single interferer would
        // never separate them.)
        let p = SystemParams { num_aps: 3, num_users: 3, ..SystemParams::default() };
        let mut h = Array2::from_elem((3, 3), Complex64::new(0.0, 0.0));
        h[[0, 0]] = Complex64::new(1e-6, 0.0);
        h[[1, 1]] = Complex64::new(1e-6, 0.0);
        h[[2, 2]] = Complex64::new(1e-6, 0.0);
        h[[1, 0]] = Complex64::new(1e-4, 0.0);
        h[[2, 0]] = Complex64::new(-1e-4, 0.0);
        let assoc = AssociationMatrix::from_served(&[0, 1, 2], 3).unwrap();
        let coherent = sinr_from_channel(&h, &assoc, &p, 0, DenomMode::Coherent);
        let split = sinr_from_channel(&h, &assoc, &p, 0, DenomMode::PerInterferer);
        // Coherent mode sees only noise.
        let expected = p.tx_power_w() * 1e-12 / p.noise_w();
        assert!((coherent - expected).abs() / expected < 1e-12);
        // Per-interferer mode sees 2 * P * 1e-8 of interference power.
        let denom = p.tx_power_w() * 2e-8 + p.noise_w();
        let expected_split = p.tx_power_w() * 1e-12 / denom;
        assert!((split - expected_split).abs() / expected_split < 1e-12);
        assert!(split < coherent * 1e-3, "split {split} vs coherent {coherent}");
    }

    #[test]
    fn matches_independent_scalar_recomputation() {
        // Same SINR recomputed with bare (re, im) arithmetic, no complex
        // type, directly from the definition.
        let p = SystemParams { num_aps: 4, num_users: 2, ..SystemParams::default() };
        let layout = make_layout(&p, 21).unwrap();
        let fading = draw_fading(&layout, &p, 22);
        let assoc = crate::association::two_stage_association(&layout).unwrap();
        let pointing: Vec<Vec3> = (0..4).map(|l| layout.directions[[l, assoc.served_user(l)]]).collect();
        let h = channel_matrix(&layout, &fading, &pointing, &p, GainKind::Exact).unwrap();

        for k in 0..2 {
            let got = sinr_from_channel(&h, &assoc, &p, k, DenomMode::Coherent);

            let (mut s_re, mut s_im) = (0.0f64, 0.0f64);
            let (mut t_re, mut t_im) = (0.0f64, 0.0f64);
            for l in 0..4 {
                let u = assoc.served_user(l);
                let (hu_re, hu_im) = (h[[l, u]].re, h[[l, u]].im);
                let mag = (hu_re * hu_re + hu_im * hu_im).sqrt();
                let (phi_re, phi_im) = if mag == 0.0 { (1.0, 0.0) } else { (hu_re / mag, -hu_im / mag) };
                let (hk_re, hk_im) = (h[[l, k]].re, h[[l, k]].im);
                let prod_re = hk_re * phi_re - hk_im * phi_im;
                let prod_im = hk_re * phi_im + hk_im * phi_re;
                if u == k {
                    s_re += prod_re;
                    s_im += prod_im;
                } else {
                    t_re += prod_re;
                    t_im += prod_im;
                }
            }
            let pw = p.tx_power_w();
            let expected = pw * (s_re * s_re + s_im * s_im)
                / (pw * (t_re * t_re + t_im * t_im) + p.noise_w());
            assert!(
                (got - expected).abs() <= 1e-12 * expected.abs().max(1e-300),
                "user {k}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn report_sum_equals_component_sum() {
        let p = SystemParams { num_aps: 8, num_users: 3, ..SystemParams::default() };
        let layout = make_layout(&p, 31).unwrap();
        let fading = draw_fading(&layout, &p, 32);
        let assoc = crate::association::two_stage_association(&layout).unwrap();
        let pointing: Vec<Vec3> = (0..8).map(|l| layout.directions[[l, assoc.served_user(l)]]).collect();
        let report = rate_report(&layout, &fading, &assoc, &pointing, &p, DenomMode::Coherent).unwrap();
        let s: f64 = report.per_user_rate.iter().sum();
        assert_eq!(report.sum_rate, s, "sum must be the literal accumulation");
        for (r, g) in report.per_user_rate.iter().zip(&report.per_user_sinr) {
            assert!((r - (1.0 + g).log2()).abs() < 1e-15);
        }
    }

    proptest! {
        // Coherent combining: h * phi(h) is |h| up to rounding.
        #[test]
        fn precoded_product_is_real_nonnegative(re in -10.0f64..10.0, im in -10.0f64..10.0) {
            let h = Complex64::new(re, im);
            let prod = h * conjugate_precoder(h);
            prop_assert!((prod.norm() - h.norm()).abs() <= 1e-12 * h.norm().max(1.0));
            prop_assert!(prod.im.abs() <= 1e-12 * h.norm().max(1.0));
            prop_assert!(prod.re >= -1e-12);
        }

        // A common phase rotation of user k's fading column leaves that
        // user's SINR unchanged once precoders are recomputed.
        #[test]
        fn sinr_invariant_to_column_phase(seed in 0u64..100, theta in 0.0f64..std::f64::consts::TAU) {
            let p = SystemParams { num_aps: 6, num_users: 3, ..SystemParams::default() };
            let layout = make_layout(&p, seed).unwrap();
            let fading = draw_fading(&layout, &p, seed ^ 0xABCD);
            let assoc = crate::association::two_stage_association(&layout).unwrap();
            let pointing: Vec<Vec3> = (0..6).map(|l| layout.directions[[l, assoc.served_user(l)]]).collect();
            let h = channel_matrix(&layout, &fading, &pointing, &p, GainKind::Exact).unwrap();
            let k = (seed % 3) as usize;
            let base = sinr_from_channel(&h, &assoc, &p, k, DenomMode::Coherent);

            let rot = Complex64::from_polar(1.0, theta);
            let mut h2 = h.clone();
            for l in 0..6 {
                h2[[l, k]] *= rot;
            }
            let rotated = sinr_from_channel(&h2, &assoc, &p, k, DenomMode::Coherent);
            prop_assert!((base - rotated).abs() <= 1e-9 * base.max(1e-12),
                "base {} rotated {}", base, rotated);
        }

        // With a single user there is no interference and the pattern gain
        // is maximal on the user direction, so alignment is optimal.
        #[test]
        fn alignment_never_hurts_single_user(seed in 0u64..100, fx in -1.0f64..1.0, fy in -1.0f64..1.0, fz in -1.0f64..1.0) {
            let p = SystemParams { num_aps: 3, num_users: 1, ..SystemParams::default() };
            let layout = make_layout(&p, seed).unwrap();
            let fading = draw_fading(&layout, &p, seed.wrapping_add(1));
            let assoc = AssociationMatrix::from_served(&[0, 0, 0], 1).unwrap();
            let raw = Vec3::new(fx, fy, fz);
            prop_assume!(raw.norm() > 1e-3);
            let f = raw.normalized().unwrap();
            let random_pointing = vec![f; 3];
            let aligned: Vec<Vec3> = (0..3).map(|l| layout.directions[[l, 0]]).collect();
            let g_rand = compute_sinr(&layout, &fading, &assoc, &random_pointing, &p, 0, DenomMode::Coherent).unwrap();
            let g_aligned = compute_sinr(&layout, &fading, &assoc, &aligned, &p, 0, DenomMode::Coherent).unwrap();
            prop_assert!(g_aligned >= g_rand - 1e-9 * g_aligned.max(1.0));
        }
    }
}
