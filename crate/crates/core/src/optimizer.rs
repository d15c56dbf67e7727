//! Boresight optimization.
//!
//! The sum rate is a non-smooth, non-convex function of the AP boresights.
//! Each outer iteration freezes the precoders and one auxiliary multiplier
//! per user at the current pointing (the anchor), smooths the pattern
//! cutoff, linearizes the smoothed channel in the boresights, and maximizes
//! the resulting concave surrogate over a product of unit balls with
//! projected gradient ascent. Multiplier updates are closed form and make
//! the surrogate tight at the anchor. The final boresights are rescaled to
//! unit norm.

use crate::association::AssociationMatrix;
use crate::channel::{channel_matrix, path_gain, FadingRealization, GainKind};
use crate::error::{Error, Result};
use crate::gain::{sigmoid, softplus};
use crate::geometry::ScenarioLayout;
use crate::params::SystemParams;
use crate::rate::{aggregates, precoders, rate_from_channel, DenomMode};
use crate::vec3::Vec3;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Smallest admissible value of the per-user log argument; anything at or
/// below this counts as a domain violation the line search must back away
/// from.
const DOMAIN_FLOOR: f64 = 1e-12;

/// Line search bounds. Expansion doubles the step while it keeps paying off,
/// which matters when the anchor sits in the nearly flat region behind the
/// boresight where gradients are orders of magnitude too small for unit
/// steps to make representable progress. The backtrack budget must be able
/// to shrink a warm-started step all the way back from the expansion cap.
const MAX_BACKTRACKS: usize = 200;
const MAX_EXPANSIONS: usize = 200;

/// Outer-loop damping budget: how many times a subproblem step is halved
/// toward its anchor when the full step would lower the exact sum rate.
const MAX_DAMPINGS: usize = 20;

/// Per-AP boresight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PointingConfiguration {
    pub vectors: Vec<Vec3>,
}

impl PointingConfiguration {
    pub fn max_norm(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn all_unit(&self, tol: f64) -> bool {
        self.vectors.iter().all(|v| v.is_unit(tol))
    }
}

/// Per-user auxiliary multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet {
    pub z: Vec<Complex64>,
}

/// Starting point for the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Each boresight starts on its served user. Strong feasible start.
    Aligned,
    /// All boresights start at (1, 0, 0).
    Fixed,
    /// Uniform random unit vectors drawn from the given seed.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Outer stopping threshold on the relative objective increase.
    pub xi: f64,
    /// Outer iteration cap.
    pub max_outer: usize,
    /// Projected-gradient residual tolerance for the subproblem.
    pub inner_tol: f64,
    /// Subproblem iteration cap.
    pub max_inner: usize,
    /// Armijo sufficient-increase coefficient.
    pub armijo_c: f64,
    /// Step shrink factor on backtracking.
    pub armijo_shrink: f64,
    pub init_mode: InitMode,
    /// Slope rule for the channel linearization. The default differentiates
    /// the smoothed channel amplitude (factor p, exponent p-1 on the
    /// softplus term); setting this uses the full even-exponent chain rule
    /// (factor 2p, exponent 2p-1) instead.
    pub exact_chain_rule: bool,
    /// Denominator aggregation for the reported true rates. The surrogate
    /// machinery always uses the coherent form its multiplier derivation
    /// assumes.
    pub denom_mode: DenomMode,
    /// Keep per-subproblem surrogate traces in the result.
    pub record_inner: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            xi: 1e-3,
            max_outer: 20,
            inner_tol: 1e-6,
            max_inner: 200,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            init_mode: InitMode::Aligned,
            exact_chain_rule: false,
            denom_mode: DenomMode::Coherent,
            record_inner: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Error::InvalidParameter { name: "xi", reason: format!("must be positive, got {}", self.xi) });
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter { name: "max_outer", reason: "must be at least 1".into() });
        }
        if !(self.inner_tol > 0.0 && self.inner_tol.is_finite()) {
            return Err(Error::InvalidParameter { name: "inner_tol", reason: format!("must be positive, got {}", self.inner_tol) });
        }
        if self.max_inner == 0 {
            return Err(Error::InvalidParameter { name: "max_inner", reason: "must be at least 1".into() });
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidParameter { name: "armijo_c", reason: format!("must lie in (0, 1), got {}", self.armijo_c) });
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(Error::InvalidParameter { name: "armijo_shrink", reason: format!("must lie in (0, 1), got {}", self.armijo_shrink) });
        }
        Ok(())
    }
}

/// Radial projection onto the closed unit ball.
pub fn project_to_ball(v: Vec3) -> Vec3 {
    let n2 = v.norm_squared();
    if n2 <= 1.0 {
        v
    } else {
        v * (1.0 / n2.sqrt())
    }
}

/// Closed-form multiplier for user `k`, evaluated on exact-pattern channels
/// at `pointing`: sqrt(P) times the serving coherent sum over the coherent
/// interference power plus noise.
pub fn optimal_multiplier(
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    pointing: &[Vec3],
    params: &SystemParams,
    k: usize,
) -> Result<Complex64> {
    let h = channel_matrix(layout, fading, pointing, params, GainKind::Exact)?;
    let served = assoc.served();
    let w = precoders(&h, &served);
    Ok(multiplier_from_channel(&h, &served, &w, params, k))
}

/// All users' multipliers in one pass.
pub fn multiplier_set(
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    pointing: &[Vec3],
    params: &SystemParams,
) -> Result<MultiplierSet> {
    let h = channel_matrix(layout, fading, pointing, params, GainKind::Exact)?;
    let served = assoc.served();
    let w = precoders(&h, &served);
    let z = (0..layout.num_users())
        .map(|k| multiplier_from_channel(&h, &served, &w, params, k))
        .collect();
    Ok(MultiplierSet { z })
}

fn multiplier_from_channel(
    h: &Array2<Complex64>,
    served: &[usize],
    w: &[Complex64],
    params: &SystemParams,
    k: usize,
) -> Complex64 {
    let agg = aggregates(h, served, w, k);
    let p = params.tx_power_w();
    let denom = p * agg.t_coherent.norm_sqr() + params.noise_w();
    agg.s * (p.sqrt() / denom)
}

/// Value of the transformed SINR for user `k` at multiplier `z[k]`, with
/// channels in the requested gain mode. Always uses the coherent
/// interference form the multiplier is derived from.
#[allow(clippy::too_many_arguments)]
pub fn quadratic_transform_value(
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    pointing: &[Vec3],
    z: &MultiplierSet,
    params: &SystemParams,
    k: usize,
    kind: GainKind,
) -> Result<f64> {
    let h = channel_matrix(layout, fading, pointing, params, kind)?;
    let served = assoc.served();
    let w = precoders(&h, &served);
    Ok(qt_from_channel(&h, &served, &w, z.z[k], params, k))
}

fn qt_from_channel(
    h: &Array2<Complex64>,
    served: &[usize],
    w: &[Complex64],
    z: Complex64,
    params: &SystemParams,
    k: usize,
) -> f64 {
    let agg = aggregates(h, served, w, k);
    let p = params.tx_power_w();
    2.0 * p.sqrt() * (z * agg.s).re - z.norm_sqr() * (p * agg.t_coherent.norm_sqr() + params.noise_w())
}

/// Constant and slope of the first-order expansion of one smoothed channel
/// coefficient around `anchor`, in the direction of its link.
fn linearization_coeffs(
    anchor: Vec3,
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    l: usize,
    k: usize,
    params: &SystemParams,
    exact_chain_rule: bool,
) -> (Complex64, Complex64) {
    let dir = layout.directions[[l, k]];
    let amp = (path_gain(layout.distances[[l, k]], params) * params.peak_gain()).sqrt();
    let g = fading.coeffs[[l, k]];
    let m = params.smoothness;
    let p = params.directivity;
    let t0 = anchor.dot(dir);
    let sp = softplus(m * t0) / m;
    let value = g * (amp * sp.powi(p as i32));
    if p == 0 {
        // The slope carries a factor of p, so the expansion is constant.
        return (value, Complex64::new(0.0, 0.0));
    }
    let sig = sigmoid(m * t0);
    let slope_mag = if exact_chain_rule {
        2.0 * f64::from(p) * sp.powi(2 * p as i32 - 1) * sig
    } else {
        f64::from(p) * sp.powi(p as i32 - 1) * sig
    };
    (value, g * (amp * slope_mag))
}

/// First-order expansion of the smoothed channel for link (l, k) around
/// `f_anchor`, evaluated at `f`. Affine in `f`.
pub fn linearize_channel(
    f_anchor: Vec3,
    f: Vec3,
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    l: usize,
    k: usize,
    params: &SystemParams,
) -> Complex64 {
    let (value, slope) = linearization_coeffs(f_anchor, layout, fading, l, k, params, false);
    value + slope * (f - f_anchor).dot(layout.directions[[l, k]])
}

/// Frozen surrogate data for one outer iteration: linearization
/// coefficients, anchored precoders, and multipliers.
pub(crate) struct SurrogateModel {
    anchor: Vec<Vec3>,
    consts: Array2<Complex64>,
    slopes: Array2<Complex64>,
    dirs: Array2<Vec3>,
    served: Vec<usize>,
    w: Vec<Complex64>,
    z: Vec<Complex64>,
    sqrt_p: f64,
    p_w: f64,
    noise: f64,
}

impl SurrogateModel {
    pub(crate) fn build(
        layout: &ScenarioLayout,
        fading: &FadingRealization,
        assoc: &AssociationMatrix,
        anchor: &[Vec3],
        z: &[Complex64],
        params: &SystemParams,
        exact_chain_rule: bool,
    ) -> Result<Self> {
        let (lc, kc) = layout.distances.dim();
        if anchor.len() != lc {
            return Err(Error::DimensionMismatch(format!(
                "anchor has {} entries for {} APs",
                anchor.len(),
                lc
            )));
        }
        if z.len() != kc {
            return Err(Error::DimensionMismatch(format!(
                "{} multipliers for {} users",
                z.len(),
                kc
            )));
        }
        let served = assoc.served();
        let h_exact = channel_matrix(layout, fading, anchor, params, GainKind::Exact)?;
        let w = precoders(&h_exact, &served);
        let mut consts = Array2::from_elem((lc, kc), Complex64::new(0.0, 0.0));
        let mut slopes = consts.clone();
        for l in 0..lc {
            for k in 0..kc {
                let (c, s) = linearization_coeffs(anchor[l], layout, fading, l, k, params, exact_chain_rule);
                consts[[l, k]] = c;
                slopes[[l, k]] = s;
            }
        }
        Ok(SurrogateModel {
            anchor: anchor.to_vec(),
            consts,
            slopes,
            dirs: layout.directions.clone(),
            served,
            w,
            z: z.to_vec(),
            sqrt_p: params.tx_power_w().sqrt(),
            p_w: params.tx_power_w(),
            noise: params.noise_w(),
        })
    }

    /// Surrogate value and its gradient with respect to every boresight.
    pub(crate) fn eval(&self, pointing: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
        let lc = self.anchor.len();
        let kc = self.z.len();
        debug_assert_eq!(pointing.len(), lc);

        let mut lam = Array2::from_elem((lc, kc), Complex64::new(0.0, 0.0));
        let mut s = vec![Complex64::new(0.0, 0.0); kc];
        let mut t = vec![Complex64::new(0.0, 0.0); kc];
        for l in 0..lc {
            let delta = pointing[l] - self.anchor[l];
            for k in 0..kc {
                let v = self.consts[[l, k]] + self.slopes[[l, k]] * delta.dot(self.dirs[[l, k]]);
                lam[[l, k]] = v;
                let contrib = v * self.w[l];
                if self.served[l] == k {
                    s[k] += contrib;
                } else {
                    t[k] += contrib;
                }
            }
        }

        let ln2 = std::f64::consts::LN_2;
        let mut value = 0.0;
        let mut a = vec![0.0; kc];
        for k in 0..kc {
            let zk = self.z[k];
            let gamma = 2.0 * self.sqrt_p * (zk * s[k]).re
                - zk.norm_sqr() * (self.p_w * t[k].norm_sqr() + self.noise);
            let ak = 1.0 + gamma;
            if ak <= DOMAIN_FLOOR {
                return Err(Error::SurrogateDomain { user: k, value: ak });
            }
            a[k] = ak;
            // ln_1p keeps tiny transformed SINRs representable; a plain
            // log2(1 + x) underflows to zero for x below machine epsilon
            // and the gradient signal with it.
            value += gamma.ln_1p() / ln2;
        }

        let mut grad = vec![Vec3::ZERO; lc];
        for (l, gl) in grad.iter_mut().enumerate() {
            let wl = self.w[l];
            let ul = self.served[l];
            let mut acc = Vec3::ZERO;
            for k in 0..kc {
                let sl = self.slopes[[l, k]];
                if sl.re == 0.0 && sl.im == 0.0 {
                    continue;
                }
                let zk = self.z[k];
                let da = if ul == k {
                    2.0 * self.sqrt_p * (zk * wl * sl).re
                } else {
                    -2.0 * self.p_w * zk.norm_sqr() * (t[k].conj() * wl * sl).re
                };
                acc += self.dirs[[l, k]] * (da / (a[k] * ln2));
            }
            *gl = acc;
        }
        Ok((value, grad))
    }
}

/// Surrogate value and gradient at `pointing` for an expansion anchored at
/// `anchor` with frozen multipliers `z`. Precoders are recomputed from the
/// exact channel at the anchor.
pub fn surrogate_objective(
    pointing: &[Vec3],
    anchor: &[Vec3],
    z: &MultiplierSet,
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    params: &SystemParams,
) -> Result<(f64, Vec<Vec3>)> {
    let model = SurrogateModel::build(layout, fading, assoc, anchor, &z.z, params, false)?;
    model.eval(pointing)
}

/// Same as [`surrogate_objective`] with the slope rule selectable.
#[allow(clippy::too_many_arguments)]
pub fn surrogate_objective_with(
    pointing: &[Vec3],
    anchor: &[Vec3],
    z: &MultiplierSet,
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    params: &SystemParams,
    exact_chain_rule: bool,
) -> Result<(f64, Vec<Vec3>)> {
    let model = SurrogateModel::build(layout, fading, assoc, anchor, &z.z, params, exact_chain_rule)?;
    model.eval(pointing)
}

#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub pointing: PointingConfiguration,
    /// Surrogate value at the start and after each accepted step;
    /// non-decreasing by construction.
    pub u_trace: Vec<f64>,
    pub iterations: usize,
    /// Projected-gradient residual at exit.
    pub residual: f64,
}

/// Maximizes the frozen surrogate over the product of unit balls, starting
/// from `anchor`.
pub fn solve_subproblem(
    anchor: &PointingConfiguration,
    z: &MultiplierSet,
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    params: &SystemParams,
    cfg: &OptimizerConfig,
) -> Result<SubproblemResult> {
    cfg.validate()?;
    let model = SurrogateModel::build(layout, fading, assoc, &anchor.vectors, &z.z, params, cfg.exact_chain_rule)?;
    run_subproblem(&model, anchor.vectors.clone(), cfg)
}

/// First-order stationarity measure on the product of unit balls: how far a
/// unit-length stacked-gradient step moves the iterate after projection.
/// Normalizing by the gradient magnitude keeps the test scale-free; the raw
/// gradient can be astronomically small far behind a boresight while the
/// maximizer is still on the other side of the ball.
fn stacked_residual(x: &[Vec3], g: &[Vec3]) -> f64 {
    let gnorm = g.iter().map(|gi| gi.norm_squared()).sum::<f64>().sqrt();
    if gnorm == 0.0 {
        return 0.0;
    }
    let inv = 1.0 / gnorm;
    x.iter()
        .zip(g)
        .map(|(xi, gi)| (project_to_ball(*xi + *gi * inv) - *xi).norm_squared())
        .sum::<f64>()
        .sqrt()
}

struct Trial {
    x: Vec<Vec3>,
    value: f64,
    grad: Vec<Vec3>,
    dot: f64,
}

fn run_subproblem(model: &SurrogateModel, start: Vec<Vec3>, cfg: &OptimizerConfig) -> Result<SubproblemResult> {
    let (mut value, mut grad) = model.eval(&start)?;
    let mut x = start;
    let mut u_trace = vec![value];
    let mut residual = stacked_residual(&x, &grad);
    let mut iterations = 0;
    let mut step_seed = 1.0f64;

    let evaluate = |x_cur: &[Vec3], g_cur: &[Vec3], alpha: f64| -> Option<Trial> {
        let xn: Vec<Vec3> = x_cur
            .iter()
            .zip(g_cur)
            .map(|(xi, gi)| project_to_ball(*xi + *gi * alpha))
            .collect();
        let dot: f64 = g_cur.iter().zip(&xn).zip(x_cur).map(|((gi, ni), xi)| gi.dot(*ni - *xi)).sum();
        match model.eval(&xn) {
            Ok((v, g)) => Some(Trial { x: xn, value: v, grad: g, dot }),
            Err(_) => None,
        }
    };
    let accepts = |t: &Trial, base: f64| t.value >= base + cfg.armijo_c * t.dot.max(0.0);

    for _ in 0..cfg.max_inner {
        residual = stacked_residual(&x, &grad);
        if residual < cfg.inner_tol {
            break;
        }
        iterations += 1;

        let mut alpha = step_seed;
        let mut best: Option<Trial> = None;
        let first = evaluate(&x, &grad, alpha);

        match first {
            Some(t) if accepts(&t, value) && t.value > value => {
                // Expand while each doubling still satisfies the sufficient
                // increase and strictly improves on the best so far.
                let mut cur = t;
                for _ in 0..MAX_EXPANSIONS {
                    let next_alpha = alpha * 2.0;
                    match evaluate(&x, &grad, next_alpha) {
                        Some(n) if accepts(&n, value) && n.value > cur.value => {
                            let moved = n.x.iter().zip(&cur.x).any(|(a, b)| (*a - *b).norm() > 0.0);
                            alpha = next_alpha;
                            cur = n;
                            if !moved {
                                break;
                            }
                        }
                        _ => break,
                    }
                }
                best = Some(cur);
            }
            Some(t) if t.value >= value => {
                // Flat region: the unit step made no representable progress
                // but did not hurt either. Probe larger steps before giving
                // up; tiny gradients deep behind the boresight need huge
                // steps to produce any visible change.
                let mut probe_alpha = alpha;
                for _ in 0..MAX_EXPANSIONS {
                    probe_alpha *= 2.0;
                    match evaluate(&x, &grad, probe_alpha) {
                        Some(n) if accepts(&n, value) && n.value > value => {
                            let mut cur = n;
                            alpha = probe_alpha;
                            for _ in 0..MAX_EXPANSIONS {
                                let next_alpha = alpha * 2.0;
                                match evaluate(&x, &grad, next_alpha) {
                                    Some(n2) if accepts(&n2, value) && n2.value > cur.value => {
                                        alpha = next_alpha;
                                        cur = n2;
                                    }
                                    _ => break,
                                }
                            }
                            best = Some(cur);
                            break;
                        }
                        Some(n) if n.value >= value => continue,
                        _ => break,
                    }
                }
            }
            _ => {}
        }

        if best.is_none() {
            // Classic backtracking from the seed step.
            let mut a = step_seed;
            for _ in 0..MAX_BACKTRACKS {
                a *= cfg.armijo_shrink;
                if let Some(t) = evaluate(&x, &grad, a) {
                    if accepts(&t, value) {
                        alpha = a;
                        best = Some(t);
                        break;
                    }
                }
            }
        }

        let Some(t) = best else {
            // Line search failure: return the best feasible iterate held.
            break;
        };
        debug_assert!(t.value >= value, "accepted step must not lose surrogate value");
        x = t.x;
        value = t.value;
        grad = t.grad;
        u_trace.push(value);
        step_seed = alpha.clamp(1e-12, 1e30);
    }

    Ok(SubproblemResult {
        pointing: PointingConfiguration { vectors: x },
        u_trace,
        iterations,
        residual,
    })
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Relative objective increase fell below `xi`.
    Converged,
    /// A candidate step failed to preserve the exact sum rate, or the
    /// subproblem could not be built; the last good iterate is returned.
    Stalled,
    /// Iteration cap reached.
    MaxOuterReached,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    /// Final boresights, unit norm.
    pub pointing: PointingConfiguration,
    /// Exact sum rate at the (normalized) iterate after each outer
    /// iteration, starting with the initial point.
    pub trace: Vec<f64>,
    pub iterations_used: usize,
    pub stop: StopReason,
    /// Per-outer-iteration surrogate traces when `record_inner` is set.
    pub inner_traces: Vec<Vec<f64>>,
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        if let Some(u) = v.normalized() {
            return u;
        }
    }
}

/// Full outer loop. Returns unit-norm boresights and the per-iteration
/// exact sum-rate trace.
pub fn optimize_pointing(
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    params: &SystemParams,
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult> {
    cfg.validate()?;
    let lc = layout.num_aps();
    let kc = layout.num_users();
    if assoc.num_aps() != lc || assoc.num_users() != kc {
        return Err(Error::DimensionMismatch(format!(
            "association is {}x{} but layout is {}x{}",
            assoc.num_aps(),
            assoc.num_users(),
            lc,
            kc
        )));
    }
    let served = assoc.served();
    let aligned: Vec<Vec3> = (0..lc).map(|l| layout.directions[[l, served[l]]]).collect();

    let mut f: Vec<Vec3> = match cfg.init_mode {
        InitMode::Aligned => aligned.clone(),
        InitMode::Fixed => vec![Vec3::new(1.0, 0.0, 0.0); lc],
        InitMode::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..lc).map(|_| random_unit(&mut rng)).collect()
        }
    };

    let exact_rate = |vs: &[Vec3]| -> Result<f64> {
        let h = channel_matrix(layout, fading, vs, params, GainKind::Exact)?;
        Ok(rate_from_channel(&h, assoc, params, cfg.denom_mode).sum_rate)
    };
    let normalize = |vs: &[Vec3]| -> Vec<Vec3> {
        vs.iter()
            .enumerate()
            .map(|(l, v)| v.normalized().unwrap_or(aligned[l]))
            .collect()
    };
    // Objective for the stopping rule: transformed sum rate on exact
    // channels under the current multipliers, floored away from log(0).
    let qt_objective = |vs: &[Vec3], z: &[Complex64]| -> Result<f64> {
        let h = channel_matrix(layout, fading, vs, params, GainKind::Exact)?;
        let w = precoders(&h, &served);
        let mut total = 0.0;
        for (k, zk) in z.iter().enumerate() {
            let gamma = qt_from_channel(&h, &served, &w, *zk, params, k);
            total += (1.0 + gamma).max(f64::MIN_POSITIVE).log2();
        }
        Ok(total)
    };

    let mut trace = vec![exact_rate(&f)?];
    let mut inner_traces = Vec::new();
    let mut iterations_used = 0;
    let mut stop = StopReason::MaxOuterReached;

    for _ in 0..cfg.max_outer {
        iterations_used += 1;

        // Multipliers from the smoothed channel with anchored precoders, in
        // the conjugate form that keeps the transform tight even when the
        // coherent serving sum has residual phase. On exact channels with
        // matched precoders the two forms coincide.
        let h_sm = channel_matrix(layout, fading, &f, params, GainKind::Smoothed)?;
        let h_ex = channel_matrix(layout, fading, &f, params, GainKind::Exact)?;
        let w = precoders(&h_ex, &served);
        let p_w = params.tx_power_w();
        let z: Vec<Complex64> = (0..kc)
            .map(|k| {
                let agg = aggregates(&h_sm, &served, &w, k);
                let denom = p_w * agg.t_coherent.norm_sqr() + params.noise_w();
                agg.s.conj() * (p_w.sqrt() / denom)
            })
            .collect();

        let obj_anchor = qt_objective(&f, &z)?;
        let model = match SurrogateModel::build(layout, fading, assoc, &f, &z, params, cfg.exact_chain_rule) {
            Ok(m) => m,
            Err(_) => {
                stop = StopReason::Stalled;
                break;
            }
        };
        let sub = match run_subproblem(&model, f.clone(), cfg) {
            Ok(s) => s,
            Err(_) => {
                stop = StopReason::Stalled;
                break;
            }
        };

        let full = {
            let mut c = sub.pointing.vectors;
            for (l, v) in c.iter_mut().enumerate() {
                // A vanished boresight has no direction to normalize later;
                // nudge it toward the served user.
                if v.norm() < 1e-12 {
                    *v = aligned[l] * 1e-6;
                }
            }
            c
        };

        let prev_rate = *trace.last().expect("trace starts non-empty");
        // The surrogate step can overshoot where the linearization is stale
        // and lower the exact rate. Damp it toward the anchor until the rate
        // is kept; the surrogate value along the segment stays at or above
        // the anchor value by concavity, and a vanishing step recovers the
        // anchor itself, so damping cannot loop forever.
        let mut cand = full.clone();
        let mut cand_rate = exact_rate(&normalize(&cand))?;
        let mut damping = 1.0f64;
        for _ in 0..MAX_DAMPINGS {
            if cand_rate >= prev_rate - 1e-12 {
                break;
            }
            damping *= 0.5;
            cand = f.iter().zip(&full).map(|(a, c)| *a + (*c - *a) * damping).collect();
            cand_rate = exact_rate(&normalize(&cand))?;
        }

        let obj_cand = qt_objective(&cand, &z)?;
        let rel = (obj_cand - obj_anchor) / obj_anchor.abs().max(1e-12);

        let keeps_rate = cand_rate >= prev_rate - 1e-12;
        if keeps_rate {
            f = cand;
            trace.push(cand_rate);
            if cfg.record_inner {
                inner_traces.push(sub.u_trace);
            }
        }
        if rel < cfg.xi {
            stop = StopReason::Converged;
            break;
        }
        if !keeps_rate {
            stop = StopReason::Stalled;
            break;
        }
    }

    let final_vectors = normalize(&f);
    Ok(OptimizeResult {
        pointing: PointingConfiguration { vectors: final_vectors },
        trace,
        iterations_used,
        stop,
        inner_traces,
    })
}
