//! Tilted sampling intensities derived from Hamilton-Jacobi subsolutions:
//! the exact one-dimensional construction, its homogeneous multi-group
//! reduction, and the majorant policy for unequal group intensities —
//! plus the verification battery (subsolution residuals, conservativity
//! of candidate tilt fields, and the saddle-point identity behind the
//! second-moment bound).

use crate::error::{Error, Result};
use crate::model::{Coupling, ModelSpec};
use crate::numeric::{integrate, QuadratureSettings};

/// Which tilt construction drives the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyVariant {
    /// Plain Monte Carlo: no tilt, unit likelihood ratio.
    None,
    /// Exact single-group construction; requires d = 1.
    Optimal1d,
    /// Multi-group reduction through the total default fraction; requires
    /// equal base intensities.
    Homogeneous,
    /// Majorant construction through a* = max_j a_j; valid for any groups.
    AStarMajorant,
}

impl PolicyVariant {
    pub fn name(self) -> &'static str {
        match self {
            PolicyVariant::None => "none",
            PolicyVariant::Optimal1d => "optimal-1d",
            PolicyVariant::Homogeneous => "homogeneous",
            PolicyVariant::AStarMajorant => "a-star-majorant",
        }
    }
}

/// Effective one-dimensional intensity λ*(s) = a_eff·(1 − s)·e^{b·s}.
fn lambda_star(a_eff: f64, b: f64, s: f64) -> f64 {
    a_eff * (1.0 - s) * (b * s).exp()
}

/// Minimum of λ* over [0, hi]: an endpoint or the stationary point 1 − 1/b.
fn min_lambda_star(a_eff: f64, b: f64, hi: f64) -> f64 {
    let f = |s: f64| lambda_star(a_eff, b, s);
    let mut m = f(0.0).min(f(hi));
    if b > 0.0 {
        let s = 1.0 - 1.0 / b;
        if s > 0.0 && s < hi {
            m = m.min(f(s));
        }
    }
    m
}

/// An immutable tilt rule: multiplicative factor 1 + c/λ*(s) applied
/// uniformly to every group, together with its subsolution metadata.
#[derive(Debug, Clone)]
pub struct ControlPolicy {
    variant: PolicyVariant,
    c: f64,
    a_eff: f64,
    b: f64,
    horizon: f64,
    initial_value: f64,
    potential_at_threshold: f64,
    u0: Option<f64>,
    clamped: bool,
    settings: QuadratureSettings,
}

impl ControlPolicy {
    pub fn variant(&self) -> PolicyVariant {
        self.variant
    }

    /// Energy level actually in use (0 for plain MC or a clamped majorant).
    pub fn c(&self) -> f64 {
        self.c
    }

    /// W̄(0, 0) = 2A(z; c) − 2cT.
    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    /// U(0, 0) when the model admits the one-dimensional reduction.
    pub fn u0(&self) -> Option<f64> {
        self.u0
    }

    /// True when the majorant's solved energy level was non-positive and the
    /// policy degenerated to the untilted dynamics.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    /// Multiplicative tilt applied to every group at total default fraction
    /// `s`. Equals 1 for plain MC; guards the vanishing-intensity corner.
    #[inline]
    pub fn tilt_factor(&self, s: f64) -> f64 {
        if self.c == 0.0 {
            return 1.0;
        }
        let ls = lambda_star(self.a_eff, self.b, s);
        if ls > 0.0 {
            1.0 + self.c / ls
        } else {
            1.0
        }
    }

    /// Tilt exponents α_j(x; c) = log(1 + c/λ*(Σx)); identical components.
    pub fn tilt(&self, x: &[f64]) -> Vec<f64> {
        let s: f64 = x.iter().sum();
        vec![self.tilt_factor(s).ln(); x.len()]
    }

    /// λ̄(x) = λ(x)·e^{α(x;c)} componentwise.
    pub fn tilted_intensity(&self, spec: &ModelSpec, x: &[f64]) -> Result<Vec<f64>> {
        let s: f64 = x.iter().sum();
        let factor = self.tilt_factor(s);
        Ok(spec.intensity(x)?.into_iter().map(|l| l * factor).collect())
    }

    /// Potential A(s; c) = ∫_0^s log(1 + c/λ*(y)) dy along the effective
    /// one-dimensional intensity.
    pub fn potential(&self, s: f64) -> Result<f64> {
        potential_1d(self.a_eff, self.b, s, self.c, self.settings)
    }

    /// Subsolution W̄(t, x) = 2A(z; c) − 2A(Σx; c) − 2c(T − t). The scalar
    /// argument is capped just below full default, where the potential's
    /// integrand is log-singular.
    pub fn subsolution_value(&self, t: f64, x: &[f64]) -> Result<f64> {
        let s: f64 = x.iter().sum();
        let a_s = self.potential(s.min(1.0 - 1e-9))?;
        Ok(2.0 * self.potential_at_threshold - 2.0 * a_s
            - 2.0 * self.c * (self.horizon - t))
    }
}

fn potential_1d(
    a_eff: f64,
    b: f64,
    x: f64,
    c: f64,
    settings: QuadratureSettings,
) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::OutsideDomain(format!(
            "potential argument {x} outside [0, 1)"
        )));
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    let floor = min_lambda_star(a_eff, b, x);
    if c <= -floor {
        return Err(Error::OutsideDomain(format!(
            "energy level {c} at or below the potential singularity {:-e}",
            -floor
        )));
    }
    integrate(|y| (c / lambda_star(a_eff, b, y)).ln_1p(), 0.0, x, settings)
}

/// Potential A(x; c) for the effective one-dimensional intensity with
/// a_eff = max_j a_j (the common a for single-group or homogeneous specs).
pub fn mane_potential_1d(spec: &ModelSpec, x: f64, c: f64) -> Result<f64> {
    let a_eff = spec.a().iter().cloned().fold(0.0, f64::max);
    potential_1d(a_eff, spec.b(), x, c, QuadratureSettings::default())
}

/// Travel time ∫_0^z ω(y)/(λ*(y) + c) dy for a smooth weight ω, evaluated
/// adaptively. ω ≡ 1 recovers the homogeneous time-to-barrier equation.
fn travel_time_uniform(a_eff: f64, b: f64, z: f64, c: f64) -> Result<f64> {
    let settings = QuadratureSettings { abs_tol: 1e-13, max_subdivisions: 60 };
    integrate(|y| 1.0 / (lambda_star(a_eff, b, y) + c), 0.0, z, settings)
}

/// ω sampled on a uniform grid over [0, z].
struct OmegaTable {
    z: f64,
    values: Vec<f64>,
}

const DRAIN_STEPS: usize = 4096;

/// Follows the mean drain path dx/ds = λ(x)/Σλ(x) from the origin to the
/// barrier and tabulates ω(s) = λ*(s)/Σλ(x(s)), the factor by which the
/// majorant's clock overstates the portfolio's actual speed.
fn drain_omega_table(spec: &ModelSpec, a_eff: f64) -> Result<OmegaTable> {
    let z = spec.threshold();
    let d = spec.d();
    let h = z / DRAIN_STEPS as f64;
    let rates = |x: &[f64]| -> Result<Vec<f64>> {
        let clamped: Vec<f64> =
            x.iter().zip(spec.w()).map(|(&xj, &wj)| xj.clamp(0.0, wj)).collect();
        spec.intensity(&clamped)
    };
    let drift = |x: &[f64]| -> Result<Vec<f64>> {
        let lam = rates(x)?;
        let tot: f64 = lam.iter().sum();
        if tot < 1e-300 {
            return Err(Error::Numerical(
                "drain path stalls before the barrier (total intensity vanished)".into(),
            ));
        }
        Ok(lam.into_iter().map(|l| l / tot).collect())
    };
    let mut x = vec![0.0; d];
    let mut values = Vec::with_capacity(DRAIN_STEPS + 1);
    for k in 0..=DRAIN_STEPS {
        let s = k as f64 * h;
        let tot: f64 = rates(&x)?.iter().sum();
        if tot < 1e-300 {
            return Err(Error::Numerical(
                "drain path stalls before the barrier (total intensity vanished)".into(),
            ));
        }
        values.push(lambda_star(a_eff, spec.b(), s) / tot);
        if k == DRAIN_STEPS {
            break;
        }
        let k1 = drift(&x)?;
        let x2: Vec<f64> = x.iter().zip(&k1).map(|(&xi, &ki)| xi + 0.5 * h * ki).collect();
        let k2 = drift(&x2)?;
        let x3: Vec<f64> = x.iter().zip(&k2).map(|(&xi, &ki)| xi + 0.5 * h * ki).collect();
        let k3 = drift(&x3)?;
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(&xi, &ki)| xi + h * ki).collect();
        let k4 = drift(&x4)?;
        for j in 0..d {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    Ok(OmegaTable { z, values })
}

/// Composite Simpson over the ω table's own grid.
fn travel_time_weighted(table: &OmegaTable, a_eff: f64, b: f64, c: f64) -> f64 {
    let m = table.values.len() - 1;
    let h = table.z / m as f64;
    let f = |k: usize| {
        let s = k as f64 * h;
        table.values[k] / (lambda_star(a_eff, b, s) + c)
    };
    let mut acc = f(0) + f(m);
    for k in 1..m {
        acc += if k % 2 == 1 { 4.0 * f(k) } else { 2.0 * f(k) };
    }
    acc * h / 3.0
}

/// Solves travel_time(c) = T for the unique admissible root. The travel
/// time decreases strictly in c and blows up at the singular endpoint
/// c = −min λ*, so the root is bracketed by (singular, hi] once some hi
/// with travel < T is found by doubling.
fn solve_travel_equation<F: Fn(f64) -> Result<f64>>(
    travel: F,
    singular_lo: f64,
    horizon: f64,
) -> Result<f64> {
    let mut hi = singular_lo.max(0.0) + 1.0;
    let mut found = false;
    for _ in 0..80 {
        if travel(hi)? < horizon {
            found = true;
            break;
        }
        hi = singular_lo + 2.0 * (hi - singular_lo);
    }
    if !found {
        return Err(Error::Numerical(format!(
            "no admissible energy level: travel time exceeds the horizon on ({singular_lo:e}, {hi:e}]"
        )));
    }
    let mut lo = singular_lo;
    let (mut t_lo, mut t_hi) = (f64::INFINITY, travel(hi)?);
    for _ in 0..300 {
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let t_mid = travel(mid)?;
        if t_mid > horizon {
            (lo, t_lo) = (mid, t_mid);
        } else {
            (hi, t_hi) = (mid, t_mid);
        }
    }
    let c = 0.5 * (lo + hi);
    let residual = (travel(c)? - horizon).abs();
    // The sign change brackets the root to the width above; the residual can
    // only be driven down to the travel time's variation across that bracket,
    // which dwarfs 1e-10 when c sits near the singular endpoint.
    if residual > 1e-10 && residual > t_lo - t_hi {
        return Err(Error::Numerical(format!(
            "energy-level residual {residual:e} exceeds tolerance at c = {c:e}"
        )));
    }
    Ok(c)
}

/// Energy level c* solving ∫_0^z dy/(λ*(y) + c) = T with
/// a_eff = max_j a_j (the common a for single-group/homogeneous specs).
pub fn solve_energy_level(spec: &ModelSpec) -> Result<f64> {
    let a_eff = spec.a().iter().cloned().fold(0.0, f64::max);
    let (b, z, t) = (spec.b(), spec.threshold(), spec.horizon());
    let singular = -min_lambda_star(a_eff, b, z);
    solve_travel_equation(|c| travel_time_uniform(a_eff, b, z, c), singular, t)
}

/// Fluid travel time ∫_0^z dy/(λ*(y) + c) to the barrier under energy
/// level `c` — the quantity [`solve_energy_level`] drives to the horizon.
pub fn travel_time(spec: &ModelSpec, c: f64) -> Result<f64> {
    let a_eff = spec.a().iter().cloned().fold(0.0, f64::max);
    travel_time_uniform(a_eff, spec.b(), spec.threshold(), c)
}

/// Energy level for the majorant policy. Homogeneous portfolios reduce to
/// the plain equation; otherwise the travel time is reweighted by
/// ω(s) = λ*(s)/Σλ(x(s)) along the mean drain path, so that the tilted
/// mean trajectory — not the majorant's fictitious clock — reaches the
/// barrier at the horizon.
fn solve_energy_level_majorant(spec: &ModelSpec) -> Result<f64> {
    let one_dimensional = spec.d() == 1
        || (spec.homogeneous() && spec.coupling() == Coupling::Portfolio);
    if one_dimensional {
        return solve_energy_level(spec);
    }
    let a_eff = spec.a().iter().cloned().fold(0.0, f64::max);
    let (b, z, t) = (spec.b(), spec.threshold(), spec.horizon());
    let table = drain_omega_table(spec, a_eff)?;
    let singular = -min_lambda_star(a_eff, b, z);
    solve_travel_equation(|c| Ok(travel_time_weighted(&table, a_eff, b, c)), singular, t)
}

fn admits_1d_rate(spec: &ModelSpec) -> bool {
    spec.d() == 1 || (spec.homogeneous() && spec.coupling() == Coupling::Portfolio)
}

/// Large-deviation rate U(0, 0) = A(z; c*) − c*·T for specs that collapse
/// to one dimension (single group, or homogeneous portfolio coupling).
///
/// The travel-equation root is the stationary point of the concave dual
/// c ↦ A(z; c) − cT, but hitting *by* the horizon only constrains from one
/// side: a negative root means the drift alone reaches the barrier in time,
/// the event is not rare, and the rate is zero.
pub fn rate_u0(spec: &ModelSpec) -> Result<f64> {
    if !admits_1d_rate(spec) {
        return Err(Error::Config(
            "rate U(0,0) requires a single group or a homogeneous portfolio".into(),
        ));
    }
    let c = solve_energy_level(spec)?;
    if c <= 0.0 {
        return Ok(0.0);
    }
    Ok(mane_potential_1d(spec, spec.threshold(), c)? - c * spec.horizon())
}

/// Builds a sampling policy. `c` overrides the solved energy level; the
/// majorant solves its own level and degenerates to the untilted dynamics
/// when that level is non-positive (the event is not rare enough for the
/// construction to help).
pub fn build_policy(
    spec: &ModelSpec,
    variant: PolicyVariant,
    c: Option<f64>,
) -> Result<ControlPolicy> {
    let settings = QuadratureSettings::default();
    let a_max = spec.a().iter().cloned().fold(0.0, f64::max);
    let (z, t, b) = (spec.threshold(), spec.horizon(), spec.b());
    let mut clamped = false;

    let (a_eff, level) = match variant {
        PolicyVariant::None => {
            if c.is_some() {
                return Err(Error::Config("plain MC takes no energy level".into()));
            }
            (a_max, 0.0)
        }
        PolicyVariant::Optimal1d => {
            if spec.d() != 1 {
                return Err(Error::Config(format!(
                    "optimal-1d requires a single group, model has {}",
                    spec.d()
                )));
            }
            let level = match c {
                Some(v) => v,
                None => solve_energy_level(spec)?,
            };
            (spec.a()[0], level)
        }
        PolicyVariant::Homogeneous => {
            if !spec.homogeneous() {
                return Err(Error::Config(
                    "homogeneous policy requires equal group intensities".into(),
                ));
            }
            let level = match c {
                Some(v) => v,
                None => solve_energy_level(spec)?,
            };
            (spec.a()[0], level)
        }
        PolicyVariant::AStarMajorant => {
            let level = match c {
                Some(v) => {
                    if v <= 0.0 {
                        return Err(Error::Config(
                            "majorant policy requires a positive energy level".into(),
                        ));
                    }
                    v
                }
                None => {
                    let solved = solve_energy_level_majorant(spec)?;
                    if solved <= 0.0 {
                        clamped = true;
                        0.0
                    } else {
                        solved
                    }
                }
            };
            (a_max, level)
        }
    };

    if level != 0.0 {
        let floor = min_lambda_star(a_eff, b, z);
        if level <= -floor {
            return Err(Error::Config(format!(
                "energy level {level} not above the critical value {:-e}",
                -floor
            )));
        }
    }

    let potential_at_threshold = potential_1d(a_eff, b, z, level, settings)?;
    let initial_value = 2.0 * potential_at_threshold - 2.0 * level * t;
    let u0 = match variant {
        PolicyVariant::None => None,
        _ if admits_1d_rate(spec) => Some(rate_u0(spec)?),
        _ => None,
    };

    Ok(ControlPolicy {
        variant,
        c: level,
        a_eff,
        b,
        horizon: t,
        initial_value,
        potential_at_threshold,
        u0,
        clamped,
        settings,
    })
}

fn grid_points(spec: &ModelSpec, per_axis: usize) -> Result<Vec<Vec<f64>>> {
    let d = spec.d();
    let total = (per_axis + 1).pow(d as u32);
    if total > 2_000_000 {
        return Err(Error::Numerical(format!(
            "verification grid needs {total} points; reduce grid_per_axis"
        )));
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    loop {
        out.push(
            idx.iter()
                .zip(spec.w())
                .map(|(&i, &wj)| wj * i as f64 / per_axis as f64)
                .collect(),
        );
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] <= per_axis {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == d {
                return Ok(out);
            }
        }
    }
}

/// Outcome of the subsolution check on a state grid.
#[derive(Debug, Clone)]
pub struct SubsolutionReport {
    /// min over pre-barrier grid states of 2c − 2H(x, α(x; c)).
    pub min_residual: f64,
    /// max over post-barrier grid states of W̄(T, x).
    pub max_terminal: f64,
    pub grid_points: usize,
    pub pass: bool,
}

/// Verifies the two subsolution inequalities on a grid: the running
/// residual 2c − 2H(x, α(x;c)) ≥ 0 before the barrier, and the terminal
/// value W̄(T, x) ≤ 0 beyond it.
pub fn verify_subsolution(
    policy: &ControlPolicy,
    spec: &ModelSpec,
    grid_per_axis: usize,
) -> Result<SubsolutionReport> {
    if grid_per_axis < 2 {
        return Err(Error::Config("grid_per_axis must be at least 2".into()));
    }
    let z = spec.threshold();
    let mut min_residual = f64::INFINITY;
    let mut max_terminal = f64::NEG_INFINITY;
    let points = grid_points(spec, grid_per_axis)?;
    let count = points.len();
    for x in points {
        let s: f64 = x.iter().sum();
        if s < z {
            let alpha = policy.tilt(&x);
            let h = spec.hamiltonian(&x, &alpha)?;
            min_residual = min_residual.min(2.0 * policy.c() - 2.0 * h);
        } else {
            let w = policy.subsolution_value(spec.horizon(), &x)?;
            max_terminal = max_terminal.max(w);
        }
    }
    let pass = min_residual >= -1e-9 && max_terminal <= 1e-9;
    Ok(SubsolutionReport { min_residual, max_terminal, grid_points: count, pass })
}

/// Outcome of the two-group conservativity check.
#[derive(Debug, Clone)]
pub struct CurlReport {
    /// max |∂α_1/∂x_2 − ∂α_2/∂x_1| for the naive shared tilt
    /// α_j = log(1 + c/Σλ_i(x)).
    pub max_abs_curl_naive: f64,
    /// Same for the majorant tilt α_j = log(1 + c/λ*(Σx)).
    pub max_abs_curl_majorant: f64,
    pub intensities_equal: bool,
    pub pass: bool,
}

/// Central-difference curl of the candidate tilt fields on an interior
/// grid of the pre-barrier region Σx ≤ z (the only region where the
/// subsolution gradient matters; past the barrier the terminal condition
/// takes over, and near full default the fields are singular). A nonzero
/// curl for the naive field means no potential generates it; the majorant
/// field depends on the state only through Σx and must always come out
/// conservative.
pub fn conservativity_check(
    spec: &ModelSpec,
    c: f64,
    grid_per_axis: usize,
) -> Result<CurlReport> {
    if spec.d() != 2 {
        return Err(Error::Config(format!(
            "conservativity check applies to two groups, model has {}",
            spec.d()
        )));
    }
    if grid_per_axis < 2 {
        return Err(Error::Config("grid_per_axis must be at least 2".into()));
    }
    let a_max = spec.a().iter().cloned().fold(0.0, f64::max);
    let naive = |x: &[f64]| -> Option<f64> {
        let tot = spec.total_intensity(x).ok()?;
        if tot <= 0.0 {
            return None;
        }
        let arg = 1.0 + c / tot;
        (arg > 0.0).then(|| arg.ln())
    };
    let majorant = |x: &[f64]| -> Option<f64> {
        let s = x.iter().sum::<f64>();
        let ls = lambda_star(a_max, spec.b(), s);
        if ls <= 0.0 {
            return None;
        }
        let arg = 1.0 + c / ls;
        (arg > 0.0).then(|| arg.ln())
    };
    let h: Vec<f64> = spec.w().iter().map(|&wj| 1e-5 * wj).collect();
    let mut max_naive = 0.0f64;
    let mut max_major = 0.0f64;
    for i in 0..=grid_per_axis {
        for j in 0..=grid_per_axis {
            // Both components of each candidate field are the same scalar
            // function f, so the curl is ∂f/∂x_2 − ∂f/∂x_1.
            let x = [
                2.0 * h[0] + (spec.w()[0] - 4.0 * h[0]) * i as f64 / grid_per_axis as f64,
                2.0 * h[1] + (spec.w()[1] - 4.0 * h[1]) * j as f64 / grid_per_axis as f64,
            ];
            if x[0] + x[1] > spec.threshold() {
                continue;
            }
            for (field, acc) in [
                (&naive as &dyn Fn(&[f64]) -> Option<f64>, &mut max_naive),
                (&majorant as &dyn Fn(&[f64]) -> Option<f64>, &mut max_major),
            ] {
                let vals = (
                    field(&[x[0], x[1] + h[1]]),
                    field(&[x[0], x[1] - h[1]]),
                    field(&[x[0] + h[0], x[1]]),
                    field(&[x[0] - h[0], x[1]]),
                );
                if let (Some(up), Some(dn), Some(rt), Some(lf)) = vals {
                    let curl = (up - dn) / (2.0 * h[1]) - (rt - lf) / (2.0 * h[0]);
                    *acc = acc.max(curl.abs());
                }
            }
        }
    }
    let equal = spec.homogeneous();
    let pass = max_major <= 1e-6 && (!equal || max_naive <= 1e-6);
    Ok(CurlReport {
        max_abs_curl_naive: max_naive,
        max_abs_curl_majorant: max_major,
        intensities_equal: equal,
        pass,
    })
}

/// Outcome of the saddle-point identity check.
#[derive(Debug, Clone)]
pub struct SaddleReport {
    /// Inner objective evaluated at the claimed saddle.
    pub saddle_value: f64,
    /// −2H(x, −α/2), the value the saddle must equal.
    pub hamiltonian_value: f64,
    pub identity_error: f64,
    /// Smallest objective increase over one-sided perturbations of the
    /// minimizing rates (must be positive: the saddle is a strict minimum
    /// in that block).
    pub min_minimizer_rise: f64,
    /// Largest objective change over perturbations of the maximizing rates
    /// (must be non-positive).
    pub max_maximizer_rise: f64,
    pub pass: bool,
}

/// Evaluates the variational objective behind the second-moment bound at
/// its claimed saddle λ̄ = λ̂ = λ·e^{−α/2} and confirms both the value
/// −2H(x, −α/2) and the min/max directions by multiplicative perturbation.
pub fn saddle_identity_check(spec: &ModelSpec, x: &[f64], alpha: &[f64]) -> Result<SaddleReport> {
    if alpha.len() != spec.d() || alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::OutsideDomain("tilt vector must be finite with d components".into()));
    }
    let lam = spec.intensity(x)?;
    if lam.iter().any(|&l| l <= 0.0) {
        return Err(Error::OutsideDomain(
            "saddle check needs an interior state with all groups alive".into(),
        ));
    }
    let ell = |u: f64| u * u.ln() - u + 1.0;
    let objective = |bar: &[f64], hat: &[f64]| -> f64 {
        lam.iter()
            .zip(alpha)
            .zip(bar.iter().zip(hat))
            .map(|((&l, &al), (&lb, &lh))| {
                2.0 * l * ell(lh / l) - lb * ell(lh / lb) + lh * al
            })
            .sum()
    };
    let saddle: Vec<f64> =
        lam.iter().zip(alpha).map(|(&l, &al)| l * (-al / 2.0).exp()).collect();
    let saddle_value = objective(&saddle, &saddle);
    let neg_half: Vec<f64> = alpha.iter().map(|&al| -al / 2.0).collect();
    let hamiltonian_value = -2.0 * spec.hamiltonian(x, &neg_half)?;
    let identity_error = (saddle_value - hamiltonian_value).abs();

    let delta = 0.25;
    let mut min_minimizer_rise = f64::INFINITY;
    let mut max_maximizer_rise = f64::NEG_INFINITY;
    for j in 0..spec.d() {
        for sign in [1.0, -1.0] {
            let mut hat = saddle.clone();
            hat[j] *= 1.0 + sign * delta;
            min_minimizer_rise =
                min_minimizer_rise.min(objective(&saddle, &hat) - saddle_value);
            let mut bar = saddle.clone();
            bar[j] *= 1.0 + sign * delta;
            max_maximizer_rise =
                max_maximizer_rise.max(objective(&bar, &saddle) - saddle_value);
        }
    }
    let scale = hamiltonian_value.abs().max(1.0);
    let pass = identity_error <= 1e-8 * scale
        && min_minimizer_rise > 0.0
        && max_maximizer_rise <= 1e-12 * scale;
    Ok(SaddleReport {
        saddle_value,
        hamiltonian_value,
        identity_error,
        min_minimizer_rise,
        max_maximizer_rise,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Coupling;

    fn table1_spec(z: f64) -> ModelSpec {
        ModelSpec::new(1, vec![1.0], vec![0.01], 0.0, 125, 5.0, z, Coupling::Portfolio).unwrap()
    }

    fn table2_spec(z: f64) -> ModelSpec {
        ModelSpec::new(1, vec![1.0], vec![0.01], 5.0, 125, 5.0, z, Coupling::Portfolio).unwrap()
    }

    fn table3_spec(z: f64, coupling: Coupling) -> ModelSpec {
        ModelSpec::new(2, vec![0.8, 0.2], vec![0.01, 0.05], 5.0, 125, 5.0, z, coupling).unwrap()
    }

    fn homogeneous_2g(b: f64, z: f64) -> ModelSpec {
        ModelSpec::new(2, vec![0.8, 0.2], vec![0.02, 0.02], b, 125, 5.0, z, Coupling::Portfolio)
            .unwrap()
    }

    #[test]
    fn energy_level_matches_closed_form_without_contagion() {
        // (c+a)/(c+a(1−z)) = e^{aT}.
        let expected = [
            (0.10, 1.0504166493e-2),
            (0.15, 2.0756249740e-2),
            (0.20, 3.1008332986e-2),
            (0.25, 4.1260416233e-2),
            (0.30, 5.1512499479e-2),
            (0.35, 6.1764582726e-2),
            (0.40, 7.2016665972e-2),
        ];
        for (z, want) in expected {
            let c = solve_energy_level(&table1_spec(z)).unwrap();
            assert!((c - want).abs() <= 1e-10 * want, "z={z}: c={c:e} want {want:e}");
        }
    }

    #[test]
    fn energy_level_residual_and_monotonicity() {
        let spec = table2_spec(0.2);
        let c = solve_energy_level(&spec).unwrap();
        let travel = travel_time_uniform(0.01, 5.0, 0.2, c).unwrap();
        assert!((travel - 5.0).abs() <= 1e-10);
        let t_lo = travel_time_uniform(0.01, 5.0, 0.2, c - 0.005).unwrap();
        let t_hi = travel_time_uniform(0.01, 5.0, 0.2, c + 0.005).unwrap();
        assert!(t_lo > travel && travel > t_hi);
    }

    #[test]
    fn energy_level_with_contagion_regression() {
        // Independently computed with a separate quadrature/root stack.
        let cases = [(0.10, 7.82457290e-3), (0.20, 2.50968351e-2), (0.40, 5.75915737e-2)];
        for (z, want) in cases {
            let c = solve_energy_level(&table2_spec(z)).unwrap();
            assert!((c - want).abs() <= 1e-8, "z={z}: c={c:e} want {want:e}");
        }
    }

    #[test]
    fn no_energy_level_when_barrier_unreachable() {
        // One group carries no intensity, so only half the mass can ever
        // default; a barrier above that stalls the drain path.
        let spec = ModelSpec::new(
            2,
            vec![0.5, 0.5],
            vec![0.0, 0.02],
            0.0,
            20,
            5.0,
            0.6,
            Coupling::Portfolio,
        )
        .unwrap();
        assert!(solve_energy_level_majorant(&spec).is_err());
    }

    #[test]
    fn potential_closed_form_without_contagion() {
        // ∫_0^x log(1 + c/(a(1−y))) dy has an elementary antiderivative.
        let (a, c, x) = (0.01, 0.03, 0.2);
        let spec = table1_spec(0.2);
        let got = mane_potential_1d(&spec, x, c).unwrap();
        assert!((got - 2.93658549845302e-1).abs() < 1e-10);
        let g1 = |y: f64| -((1.0 - y) + c / a) * (a * (1.0 - y) + c).ln() - y;
        let g2 = |y: f64| -(1.0 - y) * (a * (1.0 - y)).ln() - y;
        for xx in [0.05, 0.1, 0.3, 0.5] {
            let closed = (g1(xx) - g1(0.0)) - (g2(xx) - g2(0.0));
            let quad = mane_potential_1d(&spec, xx, c).unwrap();
            assert!((quad - closed).abs() < 1e-10, "x={xx}");
        }
    }

    #[test]
    fn potential_edge_cases() {
        let spec = table2_spec(0.2);
        assert_eq!(mane_potential_1d(&spec, 0.0, 0.05).unwrap(), 0.0);
        assert_eq!(mane_potential_1d(&spec, 0.3, 0.0).unwrap(), 0.0);
        assert!(mane_potential_1d(&spec, 1.0, 0.05).is_err());
        // Energy at/below the singular floor −min λ* is rejected.
        assert!(mane_potential_1d(&spec, 0.5, -0.01).is_err());
        // Strictly increasing in x for c > 0.
        let lo = mane_potential_1d(&spec, 0.1, 0.02).unwrap();
        let hi = mane_potential_1d(&spec, 0.2, 0.02).unwrap();
        assert!(hi > lo && lo > 0.0);
    }

    #[test]
    fn build_policy_validates_variant_against_spec() {
        let two = table3_spec(0.2, Coupling::Portfolio);
        assert!(matches!(
            build_policy(&two, PolicyVariant::Optimal1d, None),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_policy(&two, PolicyVariant::Homogeneous, None),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_policy(&two, PolicyVariant::AStarMajorant, Some(-0.01)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_policy(&two, PolicyVariant::None, Some(0.01)),
            Err(Error::Config(_))
        ));
        // Supplied level below the critical value is rejected.
        assert!(build_policy(&table1_spec(0.2), PolicyVariant::Optimal1d, Some(-0.009)).is_err());
    }

    #[test]
    fn plain_mc_policy_is_inert() {
        let spec = table1_spec(0.2);
        let p = build_policy(&spec, PolicyVariant::None, None).unwrap();
        assert_eq!(p.c(), 0.0);
        assert_eq!(p.initial_value(), 0.0);
        assert_eq!(p.tilt_factor(0.1), 1.0);
        assert_eq!(p.tilt(&[0.1]), vec![0.0]);
        assert_eq!(p.u0(), None);
        let lam = spec.intensity(&[0.1]).unwrap();
        assert_eq!(p.tilted_intensity(&spec, &[0.1]).unwrap(), lam);
    }

    #[test]
    fn initial_value_is_twice_the_rate() {
        for z in [0.1, 0.2, 0.4] {
            let spec = table1_spec(z);
            let p = build_policy(&spec, PolicyVariant::Optimal1d, None).unwrap();
            let u0 = rate_u0(&spec).unwrap();
            assert!((p.initial_value() - 2.0 * u0).abs() < 1e-9, "z={z}");
            assert!((p.u0().unwrap() - u0).abs() < 1e-14);
            assert!(u0 >= 0.0);
        }
    }

    #[test]
    fn rate_u0_regression_values() {
        // Frozen from an independent quadrature/root stack.
        let cases = [(0.10, 2.19798375e-2), (0.20, 1.43723198e-1), (0.40, 5.65239577e-1)];
        for (z, want) in cases {
            let u0 = rate_u0(&table1_spec(z)).unwrap();
            assert!((u0 - want).abs() < 1e-8, "z={z}: {u0:e} want {want:e}");
        }
        let with_contagion = [(0.20, 7.395374e-2), (0.40, 2.401384e-1)];
        for (z, want) in with_contagion {
            let u0 = rate_u0(&table2_spec(z)).unwrap();
            assert!((u0 - want).abs() < 1e-6, "z={z}: {u0:e} want {want:e}");
        }
        assert!(rate_u0(&table3_spec(0.2, Coupling::Portfolio)).is_err());
    }

    #[test]
    fn rate_vanishes_with_the_barrier() {
        let spec = ModelSpec::new(1, vec![1.0], vec![0.01], 0.0, 125, 5.0, 1e-6, Coupling::Portfolio)
            .unwrap();
        assert!(rate_u0(&spec).unwrap() < 1e-4);
    }

    #[test]
    fn tilt_achieves_energy_identity_on_grid() {
        // 2c − 2H(x, α(x;c)) ≡ 0 for the exact constructions.
        let spec = table2_spec(0.2);
        let p = build_policy(&spec, PolicyVariant::Optimal1d, None).unwrap();
        for i in 0..1000 {
            let x = [0.2 * i as f64 / 1000.0];
            let h = spec.hamiltonian(&x, &p.tilt(&x)).unwrap();
            assert!((h - p.c()).abs() <= 1e-10, "x={:?}", x);
        }
        let hom = homogeneous_2g(4.0, 0.3);
        let ph = build_policy(&hom, PolicyVariant::Homogeneous, None).unwrap();
        for i in 0..=40 {
            for j in 0..=40 {
                let x = [0.8 * i as f64 / 40.0, 0.2 * j as f64 / 40.0];
                if x[0] + x[1] < 0.3 {
                    let h = hom.hamiltonian(&x, &ph.tilt(&x)).unwrap();
                    assert!((h - ph.c()).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn majorant_tilt_stays_below_energy_level() {
        for coupling in [Coupling::Portfolio, Coupling::Group] {
            let spec = table3_spec(0.2, coupling);
            let p = build_policy(&spec, PolicyVariant::AStarMajorant, Some(0.05)).unwrap();
            for i in 0..=40 {
                for j in 0..=40 {
                    let x = [0.8 * i as f64 / 40.0, 0.2 * j as f64 / 40.0];
                    if x[0] + x[1] < 0.2 {
                        let h = spec.hamiltonian(&x, &p.tilt(&x)).unwrap();
                        assert!(h <= p.c() + 1e-12, "{coupling:?} x={x:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn majorant_reduces_to_homogeneous_policy_for_equal_intensities() {
        let spec = homogeneous_2g(5.0, 0.2);
        let hom = build_policy(&spec, PolicyVariant::Homogeneous, None).unwrap();
        let maj = build_policy(&spec, PolicyVariant::AStarMajorant, None).unwrap();
        assert!((hom.c() - maj.c()).abs() <= 1e-12 * hom.c());
        for i in 0..=20 {
            for j in 0..=20 {
                let x = [0.8 * i as f64 / 20.0, 0.2 * j as f64 / 20.0];
                let lh = hom.tilted_intensity(&spec, &x).unwrap();
                let lm = maj.tilted_intensity(&spec, &x).unwrap();
                for (u, v) in lh.iter().zip(&lm) {
                    assert!((u - v).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn tilted_rates_vanish_exactly_with_the_original_rates() {
        let spec = table3_spec(0.2, Coupling::Portfolio);
        let p = build_policy(&spec, PolicyVariant::AStarMajorant, Some(0.05)).unwrap();
        let lam = p.tilted_intensity(&spec, &[0.8, 0.1]).unwrap();
        assert_eq!(lam[0], 0.0);
        assert!(lam[1] > 0.0);
    }

    #[test]
    fn initial_value_peaks_at_the_solved_level() {
        // W̄(0,0)(c) = 2A(z;c) − 2cT is maximized where the travel time
        // equals the horizon; a discrete scan must peak within one step.
        let spec = table2_spec(0.2);
        let c_star = solve_energy_level(&spec).unwrap();
        let mut best = (f64::NEG_INFINITY, 0usize);
        let lo = 0.6 * c_star;
        let step = 0.04 * c_star;
        for k in 0..=20usize {
            let c = lo + step * k as f64;
            let w0 = 2.0 * mane_potential_1d(&spec, 0.2, c).unwrap() - 2.0 * c * 5.0;
            if w0 > best.0 {
                best = (w0, k);
            }
        }
        let c_best = lo + step * best.1 as f64;
        assert!((c_best - c_star).abs() <= step + 1e-12);
    }

    #[test]
    fn majorant_clamps_to_untilted_when_not_rare() {
        // Two-group portfolio coupling at a low barrier: the majorant's
        // clock outruns the portfolio and the solved level is negative.
        let spec = table3_spec(0.10, Coupling::Portfolio);
        let p = build_policy(&spec, PolicyVariant::AStarMajorant, None).unwrap();
        assert!(p.clamped());
        assert_eq!(p.c(), 0.0);
        assert_eq!(p.initial_value(), 0.0);
        assert_eq!(p.tilt_factor(0.05), 1.0);
        let rep = verify_subsolution(&p, &spec, 32).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn majorant_level_positive_for_group_coupled_benchmark() {
        // Regression against the prototype solver for the deep-barrier rows.
        let cases = [(0.10, 4.61152e-3), (0.20, 8.12338e-2), (0.40, 3.30352e-1)];
        for (z, want) in cases {
            let spec = table3_spec(z, Coupling::Group);
            let p = build_policy(&spec, PolicyVariant::AStarMajorant, None).unwrap();
            assert!(!p.clamped());
            assert!((p.c() - want).abs() <= 1e-3 * want.max(1e-2), "z={z}: c={:e}", p.c());
            assert!(p.u0().is_none());
        }
    }

    #[test]
    fn subsolution_reports_pass_for_all_variants() {
        let one = table2_spec(0.2);
        let p1 = build_policy(&one, PolicyVariant::Optimal1d, None).unwrap();
        let r1 = verify_subsolution(&p1, &one, 200).unwrap();
        assert!(r1.pass);
        assert!(r1.min_residual.abs() <= 1e-10);
        assert!(r1.max_terminal <= 1e-12);

        let hom = homogeneous_2g(5.0, 0.2);
        let p2 = build_policy(&hom, PolicyVariant::Homogeneous, None).unwrap();
        let r2 = verify_subsolution(&p2, &hom, 48).unwrap();
        assert!(r2.pass && r2.min_residual.abs() <= 1e-10);

        for coupling in [Coupling::Portfolio, Coupling::Group] {
            let spec = table3_spec(0.2, coupling);
            let p = build_policy(&spec, PolicyVariant::AStarMajorant, Some(0.08)).unwrap();
            let r = verify_subsolution(&p, &spec, 48).unwrap();
            assert!(r.pass, "{coupling:?}: {r:?}");
            assert!(r.min_residual >= 0.0);
        }

        let mc = build_policy(&one, PolicyVariant::None, None).unwrap();
        let r0 = verify_subsolution(&mc, &one, 16).unwrap();
        assert!(r0.pass && r0.min_residual.abs() == 0.0 && r0.max_terminal == 0.0);
    }

    #[test]
    fn terminal_values_decrease_beyond_the_barrier() {
        let spec = table2_spec(0.2);
        let p = build_policy(&spec, PolicyVariant::Optimal1d, None).unwrap();
        let at_barrier = p.subsolution_value(5.0, &[0.2]).unwrap();
        let beyond = p.subsolution_value(5.0, &[0.6]).unwrap();
        let deep = p.subsolution_value(5.0, &[1.0]).unwrap();
        assert!(at_barrier.abs() < 1e-12);
        assert!(beyond < at_barrier && deep < beyond);
    }

    #[test]
    fn curl_vanishes_only_for_symmetric_naive_fields() {
        let sym = homogeneous_2g(5.0, 0.2);
        let r = conservativity_check(&sym, 0.02, 24).unwrap();
        assert!(r.intensities_equal);
        assert!(r.max_abs_curl_naive <= 1e-6, "{:e}", r.max_abs_curl_naive);
        assert!(r.max_abs_curl_majorant <= 1e-6);
        assert!(r.pass);

        let asym = table3_spec(0.2, Coupling::Portfolio);
        let r2 = conservativity_check(&asym, 0.02, 24).unwrap();
        assert!(!r2.intensities_equal);
        assert!(r2.max_abs_curl_naive > 1e-4, "{:e}", r2.max_abs_curl_naive);
        assert!(r2.max_abs_curl_majorant <= 1e-6);
        assert!(r2.pass);

        assert!(conservativity_check(&table1_spec(0.2), 0.02, 8).is_err());
    }

    #[test]
    fn saddle_identity_holds_and_has_correct_curvature() {
        let spec = table3_spec(0.2, Coupling::Portfolio);
        let cases: [(&[f64], &[f64]); 3] = [
            (&[0.05, 0.04], &[0.3, -0.8]),
            (&[0.1, 0.02], &[1.5, 0.7]),
            (&[0.02, 0.1], &[-0.4, 2.0]),
        ];
        for (x, alpha) in cases {
            let r = saddle_identity_check(&spec, x, alpha).unwrap();
            assert!(r.pass, "x={x:?} α={alpha:?}: {r:?}");
            assert!(r.identity_error <= 1e-10);
            assert!(r.min_minimizer_rise > 0.0);
            assert!(r.max_maximizer_rise <= 0.0);
        }
        // Zero tilt degenerates to a zero saddle value.
        let r0 = saddle_identity_check(&spec, &[0.05, 0.04], &[0.0, 0.0]).unwrap();
        assert!(r0.saddle_value.abs() < 1e-14 && r0.hamiltonian_value.abs() < 1e-14);
        // Extinct group is rejected.
        assert!(saddle_identity_check(&spec, &[0.8, 0.05], &[0.1, 0.1]).is_err());
    }
}
