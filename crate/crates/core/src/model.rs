//! The portfolio default model: grouped birth process with contagious
//! intensities, its Hamiltonian/local-rate pair, and the critical energy
//! level below which the potential construction breaks down.

use crate::error::{Error, Result};

/// How the contagion exponent couples groups.
///
/// `Portfolio` drives every group by the total default fraction,
/// λ_j(x) = a_j(w_j − x_j)·e^{b·Σ_i x_i}. `Group` drives each group by its
/// own default fraction only, λ_j(x) = a_j(w_j − x_j)·e^{b·x_j}. The two
/// coincide when d = 1. `Group` exists to reproduce the published
/// two-group benchmark, whose figures match it rather than the portfolio
/// coupling; see the README.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    #[default]
    Portfolio,
    Group,
}

/// Full parameterization of one model instance.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    d: usize,
    w: Vec<f64>,
    a: Vec<f64>,
    b: f64,
    n: u32,
    horizon: f64,
    threshold: f64,
    coupling: Coupling,
    sizes: Vec<u32>,
    hit_count: u32,
}

/// State of the embedded jump chain: integer defaults per group plus the
/// elapsed clock.
#[derive(Debug, Clone)]
pub struct LatticeState {
    pub counts: Vec<u32>,
    pub clock: f64,
}

impl LatticeState {
    pub fn initial(d: usize) -> Self {
        Self { counts: vec![0; d], clock: 0.0 }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }
}

/// Slack accepted on domain checks to absorb lattice rounding.
const DOMAIN_TOL: f64 = 1e-12;

#[allow(clippy::too_many_arguments)]
impl ModelSpec {
    pub fn new(
        d: usize,
        w: Vec<f64>,
        a: Vec<f64>,
        b: f64,
        n: u32,
        horizon: f64,
        threshold: f64,
        coupling: Coupling,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidModel("d must be at least 1".into()));
        }
        if w.len() != d || a.len() != d {
            return Err(Error::InvalidModel(format!(
                "expected {d} weights and {d} intensities, got {} and {}",
                w.len(),
                a.len()
            )));
        }
        if w.iter().any(|&wj| !(wj.is_finite() && wj > 0.0)) {
            return Err(Error::InvalidModel("all weights must be positive".into()));
        }
        let wsum: f64 = w.iter().sum();
        if (wsum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!(
                "weights must sum to 1 (got {wsum})"
            )));
        }
        if a.iter().any(|&aj| aj < 0.0 || !aj.is_finite()) {
            return Err(Error::InvalidModel("intensities must be nonnegative".into()));
        }
        if !a.iter().any(|&aj| aj > 0.0) {
            return Err(Error::InvalidModel("at least one group intensity must be positive".into()));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::InvalidModel("contagion exponent must be nonnegative".into()));
        }
        if n == 0 {
            return Err(Error::InvalidModel("population must be at least 1".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidModel("horizon must be positive".into()));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidModel("threshold must lie in (0, 1)".into()));
        }
        let sizes: Vec<u32> = w.iter().map(|&wj| (f64::from(n) * wj).round() as u32).collect();
        // Smallest integer total that reaches the barrier; the subtraction
        // guards against n·z landing epsilon above an integer.
        let hit_count = (f64::from(n) * threshold - 1e-9).ceil() as u32;
        Ok(Self { d, w, a, b, n, horizon, threshold, coupling, sizes, hit_count })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    /// Individuals per group: round(n·w_j).
    pub fn group_sizes(&self) -> &[u32] {
        &self.sizes
    }

    /// Integer default total at which the target is hit.
    pub fn hit_count(&self) -> u32 {
        self.hit_count
    }

    /// All group base intensities equal (within 1e-12 relative).
    pub fn homogeneous(&self) -> bool {
        let a0 = self.a[0];
        self.a.iter().all(|&aj| (aj - a0).abs() <= 1e-12 * a0.max(1.0))
    }

    fn check_in_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::OutsideDomain(format!(
                "state has {} components, model has {}",
                x.len(),
                self.d
            )));
        }
        for (j, (&xj, &wj)) in x.iter().zip(&self.w).enumerate() {
            if !(xj >= -DOMAIN_TOL && xj <= wj + DOMAIN_TOL) {
                return Err(Error::OutsideDomain(format!(
                    "component {j}: x={xj} outside [0, {wj}]"
                )));
            }
        }
        Ok(())
    }

    /// Group intensity vector λ(x) at a scaled state in Ω = Π[0, w_j].
    pub fn intensity(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_in_domain(x)?;
        let clamped: Vec<f64> =
            x.iter().zip(&self.w).map(|(&xj, &wj)| xj.clamp(0.0, wj)).collect();
        let s: f64 = clamped.iter().sum();
        Ok(self
            .a
            .iter()
            .zip(&self.w)
            .zip(&clamped)
            .map(|((&aj, &wj), &xj)| {
                let expo = match self.coupling {
                    Coupling::Portfolio => s,
                    Coupling::Group => xj,
                };
                aj * (wj - xj) * (self.b * expo).exp()
            })
            .collect())
    }

    /// Scaled intensities at a lattice point, with the structural rule that a
    /// fully defaulted group emits nothing even when rounding makes
    /// counts/n stray from [0, w_j]. The exponent uses the raw default
    /// fractions, matching the finite-population dynamics exactly.
    pub fn intensity_lattice(&self, counts: &[u32]) -> Vec<f64> {
        debug_assert_eq!(counts.len(), self.d);
        let nf = f64::from(self.n);
        let s: f64 = counts.iter().map(|&k| f64::from(k)).sum::<f64>() / nf;
        self.a
            .iter()
            .zip(&self.w)
            .zip(&self.sizes)
            .zip(counts)
            .map(|(((&aj, &wj), &mj), &kj)| {
                if kj >= mj {
                    return 0.0;
                }
                let xj = f64::from(kj) / nf;
                let expo = match self.coupling {
                    Coupling::Portfolio => s,
                    Coupling::Group => xj,
                };
                (aj * (wj - xj)).max(0.0) * (self.b * expo).exp()
            })
            .collect()
    }

    /// Σ_j λ_j(x).
    pub fn total_intensity(&self, x: &[f64]) -> Result<f64> {
        Ok(self.intensity(x)?.iter().sum())
    }

    /// H(x, α) = Σ_j λ_j(x)(e^{α_j} − 1).
    pub fn hamiltonian(&self, x: &[f64], alpha: &[f64]) -> Result<f64> {
        if alpha.len() != self.d || alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutsideDomain("tilt vector must be finite with d components".into()));
        }
        let lam = self.intensity(x)?;
        Ok(lam.iter().zip(alpha).map(|(&l, &aj)| l * (aj.exp() - 1.0)).sum())
    }

    /// Local rate L(x, β) = Σ_j β_j·log(β_j/λ_j) − (β_j − λ_j), with the
    /// 0·log 0 = 0 convention; +∞ when β puts mass on an extinct group.
    pub fn local_rate(&self, x: &[f64], beta: &[f64]) -> Result<f64> {
        if beta.len() != self.d || beta.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::OutsideDomain(
                "jump-rate vector must be nonnegative and finite".into(),
            ));
        }
        let lam = self.intensity(x)?;
        let mut total = 0.0;
        for (&bj, &lj) in beta.iter().zip(&lam) {
            if bj == 0.0 {
                total += lj;
            } else if lj == 0.0 {
                return Ok(f64::INFINITY);
            } else {
                total += bj * (bj / lj).ln() - bj + lj;
            }
        }
        Ok(total)
    }

    /// True once the total default count reaches the integer barrier.
    pub fn target_hit(&self, state: &LatticeState) -> bool {
        state.total() >= self.hit_count
    }

    /// Critical energy level c_H = −inf of the total intensity over the
    /// pre-barrier region {x ∈ Ω : Σx_j < z}. Always ≤ 0 here.
    pub fn mane_critical_value(&self) -> Result<f64> {
        let z = self.threshold;
        let analytic = self.d == 1
            || (self.coupling == Coupling::Portfolio && self.homogeneous());
        if analytic {
            // Total intensity collapses to f(s) = a(1−s)e^{bs} on s ∈ [0, z];
            // minimum over the closure at an endpoint or interior stationary
            // point s = 1 − 1/b.
            let a0 = self.a[0];
            let f = |s: f64| a0 * (1.0 - s) * (self.b * s).exp();
            let mut best = f(0.0).min(f(z));
            if self.b > 0.0 {
                let s_star = 1.0 - 1.0 / self.b;
                if s_star > 0.0 && s_star < z {
                    best = best.min(f(s_star));
                }
            }
            return Ok(-best);
        }
        self.mane_critical_grid()
    }

    fn mane_critical_grid(&self) -> Result<f64> {
        let z = self.threshold;
        // Per-axis step at most 1/(4n).
        let steps: Vec<usize> = self
            .w
            .iter()
            .map(|&wj| ((wj * 4.0 * f64::from(self.n)).ceil() as usize).max(2))
            .collect();
        let total_points: usize = steps.iter().map(|&s| s + 1).product();
        if total_points > 20_000_000 {
            return Err(Error::Numerical(format!(
                "critical-value grid needs {total_points} points; instance too fine"
            )));
        }
        let eval = |x: &[f64]| -> Option<f64> {
            let s: f64 = x.iter().sum();
            if s > z + 1e-15 {
                return None;
            }
            Some(self.intensity(x).expect("grid point inside domain").iter().sum())
        };
        let mut idx = vec![0usize; self.d];
        let mut best = f64::INFINITY;
        let mut best_x = vec![0.0; self.d];
        let mut x = vec![0.0; self.d];
        'outer: loop {
            for j in 0..self.d {
                x[j] = self.w[j] * idx[j] as f64 / steps[j] as f64;
            }
            if let Some(v) = eval(&x) {
                if v < best {
                    best = v;
                    best_x.copy_from_slice(&x);
                }
            }
            let mut j = 0;
            loop {
                idx[j] += 1;
                if idx[j] <= steps[j] {
                    break;
                }
                idx[j] = 0;
                j += 1;
                if j == self.d {
                    break 'outer;
                }
            }
        }
        if !best.is_finite() {
            return Err(Error::Numerical("no grid point below the barrier".into()));
        }
        // Local refinement: shrink a 9-point window per axis around the
        // incumbent until the value stabilizes.
        let mut h: Vec<f64> =
            self.w.iter().zip(&steps).map(|(&wj, &s)| wj / s as f64).collect();
        for _ in 0..200 {
            let prev = best;
            let mut improved_x = best_x.clone();
            let mut local = vec![0i32; self.d];
            'win: loop {
                for j in 0..self.d {
                    x[j] = (best_x[j] + local[j] as f64 * h[j] / 4.0).clamp(0.0, self.w[j]);
                }
                if let Some(v) = eval(&x) {
                    if v < best {
                        best = v;
                        improved_x.copy_from_slice(&x);
                    }
                }
                let mut j = 0;
                loop {
                    local[j] += 1;
                    if local[j] <= 4 {
                        break;
                    }
                    local[j] = -4;
                    j += 1;
                    if j == self.d {
                        break 'win;
                    }
                }
            }
            best_x = improved_x;
            for hj in &mut h {
                *hj *= 0.5;
            }
            if prev - best <= 1e-8 && h.iter().all(|&hj| hj < 1e-6) {
                break;
            }
        }
        Ok(-best)
    }
}
