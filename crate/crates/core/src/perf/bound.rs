//! Upper bounds on the average squared gradient norm of the global model,
//! the channel penalty terms they depend on, and the condition under which
//! trading local iterations for longer global periods tightens the bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `C = (1 + 1/6) · 16 · 6/5`.
pub const BOUND_C: f64 = 112.0 / 5.0;

/// Channel-unreliability penalties `(B₁, B₂, B₃)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BTerms {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

/// `B₁ = Σ_u p̄_u (1/P_u^back − 1)`,
/// `B₂ = Σ_u Σ_{k∈S_u} p_k (1/(P_u^back P_k^edge) − 1)`,
/// `B₃ = Σ_u Σ_{k∈S_u} p_k (1/P_k^edge − 1)`.
pub fn compute_b_terms(
    p_edge: &[f64],
    p_back: &[f64],
    p_k: &[f64],
    p_u: &[f64],
    clusters: &[Vec<usize>],
) -> Result<BTerms> {
    if p_back.len() != clusters.len() || p_u.len() != clusters.len() || p_edge.len() != p_k.len() {
        return Err(Error::invalid("weights and probabilities differ in length"));
    }
    if let Some(p) = p_edge.iter().chain(p_back).find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::invalid(format!("success probability {p} is not in (0, 1]")));
    }
    let mut b = BTerms::default();
    for (u, members) in clusters.iter().enumerate() {
        b.b1 += p_u[u] * (1.0 / p_back[u] - 1.0);
        for &k in members {
            let pe = *p_edge
                .get(k)
                .ok_or_else(|| Error::invalid(format!("cluster member {k} has no edge probability")))?;
            b.b2 += p_k[k] * (1.0 / (p_back[u] * pe) - 1.0);
            b.b3 += p_k[k] * (1.0 / pe - 1.0);
        }
    }
    Ok(b)
}

/// Form of the two channel-penalty terms that do not vanish with the
/// step size: `Squared` is `4B₁²A₁² + 4B₁²A₂²` and `Linear` is
/// `4B₁A₁² + 4B₂A₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantTerms {
    #[default]
    Squared,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub lipschitz: f64,
    /// Upward divergence `ε²` (UAV vs base station gradients).
    pub upward_divergence: f64,
    /// Downward divergence `ε̂²` (device vs UAV gradients).
    pub downward_divergence: f64,
    /// Global divergence `ε̃²` (device vs global gradients).
    pub global_divergence: f64,
    pub grad_bound_uav: f64,
    pub grad_bound_device: f64,
    pub learning_rate: f64,
    pub local_period: usize,
    pub global_period: usize,
    pub horizon: usize,
    pub initial_gap: f64,
    pub b: BTerms,
    /// `Σ_u p̄_u`, which is one for a full partition.
    pub cluster_weight_sum: f64,
    pub total_samples: f64,
    pub n_uavs: usize,
    pub constants: ConstantTerms,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            lipschitz: 1.0,
            upward_divergence: 1.0,
            downward_divergence: 1.0,
            global_divergence: 1.0,
            grad_bound_uav: 1.0,
            grad_bound_device: 1.0,
            learning_rate: 0.01,
            local_period: 2,
            global_period: 2,
            horizon: 1000,
            initial_gap: 1.0,
            b: BTerms::default(),
            cluster_weight_sum: 1.0,
            total_samples: 10_000.0,
            n_uavs: 10,
            constants: ConstantTerms::Squared,
        }
    }
}

/// Largest admissible step size `1/(4√3 G L)` (exclusive).
pub fn max_learning_rate(global_period: usize, lipschitz: f64) -> f64 {
    1.0 / (4.0 * 3f64.sqrt() * global_period as f64 * lipschitz)
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("upward divergence", self.upward_divergence),
            ("downward divergence", self.downward_divergence),
            ("global divergence", self.global_divergence),
            ("UAV gradient bound", self.grad_bound_uav),
            ("device gradient bound", self.grad_bound_device),
            ("initial gap", self.initial_gap),
            ("B1", self.b.b1),
            ("B2", self.b.b2),
            ("B3", self.b.b3),
            ("cluster weight sum", self.cluster_weight_sum),
        ];
        if let Some((name, v)) = nonneg.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("{name} must be finite and non-negative, got {v}")));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::invalid("Lipschitz constant must be positive"));
        }
        if self.local_period == 0 || self.global_period == 0 || self.horizon == 0 {
            return Err(Error::invalid("periods and horizon must be at least 1"));
        }
        let limit = max_learning_rate(self.global_period, self.lipschitz);
        if !(self.learning_rate > 0.0 && self.learning_rate < limit) {
            return Err(Error::invalid(format!(
                "learning rate {} violates 0 < eta < 1/(4 sqrt(3) G L) = {limit}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        BOUND_C * self.learning_rate.powi(2) * self.lipschitz.powi(2)
    }

    fn gap_term(&self) -> f64 {
        2.0 / (self.learning_rate * self.horizon as f64) * self.initial_gap
    }

    fn constant_terms(&self) -> [BoundTerm; 2] {
        let (a1, a2) = (self.grad_bound_uav, self.grad_bound_device);
        let b = &self.b;
        match self.constants {
            ConstantTerms::Squared => [
                BoundTerm::new("4 B1^2 A1^2", 4.0 * b.b1.powi(2) * a1),
                BoundTerm::new("4 B1^2 A2^2", 4.0 * b.b1.powi(2) * a2),
            ],
            ConstantTerms::Linear => [
                BoundTerm::new("4 B1 A1^2", 4.0 * b.b1 * a1),
                BoundTerm::new("4 B2 A2^2", 4.0 * b.b2 * a2),
            ],
        }
    }

    /// `(N_u − 1)/(n̄ − 1)`.
    fn grouping_ratio(&self) -> Result<f64> {
        if !(self.total_samples > 1.0) || self.n_uavs == 0 {
            return Err(Error::invalid("need more than one sample and at least one UAV"));
        }
        Ok((self.n_uavs as f64 - 1.0) / (self.total_samples - 1.0))
    }
}

/// One additive term of a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub name: String,
    pub value: f64,
}

impl BoundTerm {
    fn new(name: &str, value: f64) -> Self {
        Self {
            name: name.to_owned(),
            value,
        }
    }
}

/// All terms of a bound; the bound is their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub terms: Vec<BoundTerm>,
}

impl BoundBreakdown {
    pub fn total(&self) -> f64 {
        self.terms.iter().map(|t| t.value).sum()
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// Bound for a fixed device-to-UAV association.
pub fn convergence_bound_terms(inputs: &BoundInputs) -> Result<BoundBreakdown> {
    inputs.validate()?;
    let s = inputs.scale();
    let g2 = (inputs.global_period as f64).powi(2);
    let e2 = (inputs.local_period as f64).powi(2);
    let a2 = inputs.grad_bound_device;
    let b = &inputs.b;
    let mut terms = vec![BoundTerm::new("gap", inputs.gap_term())];
    terms.extend(inputs.constant_terms());
    terms.extend([
        BoundTerm::new("2C eta^2 G^2 A2^2 L^2 (B3+B2)", 2.0 * s * g2 * a2 * (b.b3 + b.b2)),
        BoundTerm::new("5C eta^2 G^2 eps^2 L^2", 5.0 * s * g2 * inputs.upward_divergence),
        BoundTerm::new("C eta^2 E^2 A2^2 L^2 B3", s * e2 * a2 * b.b3),
        BoundTerm::new(
            "C eta^2 L^2 sum_u p_u E^2 eps_hat^2",
            s * inputs.cluster_weight_sum * e2 * inputs.downward_divergence,
        ),
    ]);
    Ok(BoundBreakdown { terms })
}

pub fn convergence_bound(inputs: &BoundInputs) -> Result<f64> {
    convergence_bound_terms(inputs).map(|b| b.total())
}

/// Bound when devices are grouped into clusters uniformly at random.
pub fn convergence_bound_uniform_terms(inputs: &BoundInputs) -> Result<BoundBreakdown> {
    inputs.validate()?;
    let ratio = inputs.grouping_ratio()?;
    let s = inputs.scale();
    let g2 = (inputs.global_period as f64).powi(2);
    let e2 = (inputs.local_period as f64).powi(2);
    let b = &inputs.b;
    let mut terms = vec![BoundTerm::new("gap", inputs.gap_term())];
    terms.extend(inputs.constant_terms());
    terms.extend([
        BoundTerm::new(
            "5C eta^2 L^2 [r G^2 + (1-r) E^2] eps_tilde^2",
            5.0 * s * (ratio * g2 + (1.0 - ratio) * e2) * inputs.global_divergence,
        ),
        BoundTerm::new(
            "2C eta^2 L^2 A2^2 [(B3+B2) G^2 + B3 E^2]",
            2.0 * s * inputs.grad_bound_device * ((b.b3 + b.b2) * g2 + b.b3 * e2),
        ),
    ]);
    Ok(BoundBreakdown { terms })
}

pub fn convergence_bound_uniform(inputs: &BoundInputs) -> Result<f64> {
    convergence_bound_uniform_terms(inputs).map(|b| b.total())
}

/// Right-hand side of the improvement condition on `B₃`, evaluated as
/// written: `[−(5/2)(N_u ε̃²/A₂²)(1 + (N_u−1)/(n̄−1) − (N_u−1)/N_u) +
/// B₂(n̄−N_u)] / (2N_u − n̄)`.
pub fn improvement_threshold(
    b2: f64,
    global_divergence: f64,
    grad_bound_device: f64,
    n_uavs: usize,
    total_samples: f64,
) -> Result<f64> {
    let nu = n_uavs as f64;
    let n = total_samples;
    if n_uavs == 0 || !(n > nu) {
        return Err(Error::invalid("total samples must exceed the UAV count"));
    }
    let denom = 2.0 * nu - n;
    if denom == 0.0 {
        return Err(Error::invalid("total samples equal twice the UAV count"));
    }
    if !(grad_bound_device > 0.0) {
        return Err(Error::invalid("device gradient bound must be positive"));
    }
    let bracket = 1.0 + (nu - 1.0) / (n - 1.0) - (nu - 1.0) / nu;
    Ok((-2.5 * nu * global_divergence / grad_bound_device * bracket + b2 * (n - nu)) / denom)
}

/// Literal evaluation of `B₃ ≤ threshold`. The ratio `m` of the admissible
/// period scalings is carried for reporting only; the condition as stated
/// does not depend on it.
pub fn improvement_condition(
    b2: f64,
    b3: f64,
    global_divergence: f64,
    grad_bound_device: f64,
    n_uavs: usize,
    total_samples: f64,
    _m: f64,
) -> Result<bool> {
    Ok(b3 <= improvement_threshold(b2, global_divergence, grad_bound_device, n_uavs, total_samples)?)
}

/// Open upper limit on the global-period scaling `l`:
/// `√((n̄ − N_u)/(m² N_u) + 1)`.
pub fn max_global_scaling(m: f64, n_uavs: usize, total_samples: f64) -> Result<f64> {
    let nu = n_uavs as f64;
    if !(m > 0.0) || n_uavs == 0 || !(total_samples > nu) {
        return Err(Error::invalid("need m > 0 and more samples than UAVs"));
    }
    Ok(((total_samples - nu) / (m * m * nu) + 1.0).sqrt())
}

/// Upper limit on the local-period scaling `q` for a given `l`:
/// `√(1 − m²(l² − 1) N_u/(n̄ − N_u))`.
pub fn max_local_scaling(l: f64, m: f64, n_uavs: usize, total_samples: f64) -> Result<f64> {
    let nu = n_uavs as f64;
    let limit = max_global_scaling(m, n_uavs, total_samples)?;
    if !(l > 1.0 && l < limit) {
        return Err(Error::invalid(format!("global scaling {l} outside (1, {limit})")));
    }
    Ok((1.0 - m * m * (l * l - 1.0) * nu / (total_samples - nu)).sqrt())
}

/// Decrease of the uniform-grouping bound when `(G, E)` become
/// `(l G, q E)`; positive values are improvements. The scaled periods may be
/// fractional, so the evaluation works on real periods and bypasses the
/// step-size guard for the scaled pair.
pub fn bound_improvement(inputs: &BoundInputs, l: f64, q: f64) -> Result<f64> {
    inputs.validate()?;
    if !(l > 0.0 && q > 0.0) {
        return Err(Error::invalid("period scalings must be positive"));
    }
    let ratio = inputs.grouping_ratio()?;
    let s = inputs.scale();
    let b = &inputs.b;
    let eta_terms = |g: f64, e: f64| {
        let (g2, e2) = (g * g, e * e);
        5.0 * s * (ratio * g2 + (1.0 - ratio) * e2) * inputs.global_divergence
            + 2.0 * s * inputs.grad_bound_device * ((b.b3 + b.b2) * g2 + b.b3 * e2)
    };
    let (g, e) = (inputs.global_period as f64, inputs.local_period as f64);
    Ok(eta_terms(g, e) - eta_terms(l * g, q * e))
}

/// One point of the improvement surface over `(B₂, B₃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub b2: f64,
    pub b3: f64,
    pub improvement: f64,
    pub condition: bool,
}

/// Evaluates the bound improvement and the literal condition on a grid.
pub fn improvement_surface(
    inputs: &BoundInputs,
    b2_grid: &[f64],
    b3_grid: &[f64],
    l: f64,
    q: f64,
    m: f64,
) -> Result<Vec<SurfacePoint>> {
    let mut out = Vec::with_capacity(b2_grid.len() * b3_grid.len());
    for &b2 in b2_grid {
        for &b3 in b3_grid {
            let at = BoundInputs {
                b: BTerms { b2, b3, ..inputs.b },
                ..*inputs
            };
            out.push(SurfacePoint {
                b2,
                b3,
                improvement: bound_improvement(&at, l, q)?,
                condition: improvement_condition(
                    b2,
                    b3,
                    inputs.global_divergence,
                    inputs.grad_bound_device,
                    inputs.n_uavs,
                    inputs.total_samples,
                    m,
                )?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perfect() -> BoundInputs {
        BoundInputs {
            upward_divergence: 0.0,
            downward_divergence: 0.0,
            global_divergence: 0.0,
            initial_gap: 0.0,
            ..BoundInputs::default()
        }
    }

    #[test]
    fn b_terms_examples() {
        let clusters = vec![vec![0, 1], vec![2]];
        let ones = compute_b_terms(&[1.0; 3], &[1.0; 2], &[0.3, 0.3, 0.4], &[0.6, 0.4], &clusters).unwrap();
        assert_eq!(ones, BTerms::default());
        let b = compute_b_terms(&[1.0; 3], &[0.5; 2], &[0.25, 0.25, 0.5], &[0.5, 0.5], &clusters).unwrap();
        assert_eq!(b.b1, 1.0);
        assert!(compute_b_terms(&[0.0, 1.0, 1.0], &[0.5; 2], &[0.25, 0.25, 0.5], &[0.5, 0.5], &clusters).is_err());
    }

    #[test]
    fn b2_dominates() {
        let clusters = vec![vec![0, 2], vec![1, 3]];
        for (pe, pb) in [([0.9, 0.2, 0.5, 0.7], [0.3, 0.8]), ([1.0, 0.1, 0.99, 0.4], [1.0, 0.05])] {
            let b = compute_b_terms(&pe, &pb, &[0.25; 4], &[0.5, 0.5], &clusters).unwrap();
            assert!(b.b2 >= b.b3 && b.b2 >= b.b1, "{b:?}");
        }
    }

    #[test]
    fn perfect_inputs_give_zero() {
        assert_eq!(convergence_bound(&perfect()).unwrap(), 0.0);
        assert_eq!(convergence_bound_uniform(&perfect()).unwrap(), 0.0);
        let linear = BoundInputs {
            constants: ConstantTerms::Linear,
            ..perfect()
        };
        assert_eq!(convergence_bound(&linear).unwrap(), 0.0);
    }

    #[test]
    fn step_size_guard() {
        let limit = max_learning_rate(2, 1.0);
        for eta in [limit, 2.0 * limit, 0.0, -0.01] {
            let at = BoundInputs {
                learning_rate: eta,
                ..BoundInputs::default()
            };
            assert!(matches!(convergence_bound(&at), Err(Error::InvalidArgument(_))));
        }
        let ok = BoundInputs {
            learning_rate: 0.999 * limit,
            ..BoundInputs::default()
        };
        assert!(convergence_bound(&ok).unwrap() > 0.0);
    }

    #[test]
    fn monotone_on_grid() {
        let grid = [0.0, 0.25, 0.5, 1.0, 2.0];
        let set = |axis: usize, v: f64| {
            let mut x = BoundInputs::default();
            match axis {
                0 => x.b.b1 = v,
                1 => x.b.b2 = v,
                2 => x.b.b3 = v,
                3 => x.upward_divergence = v,
                _ => x.downward_divergence = v,
            }
            x
        };
        for constants in [ConstantTerms::Squared, ConstantTerms::Linear] {
            for axis in 0..5 {
                let values: Vec<f64> = grid
                    .iter()
                    .map(|&v| convergence_bound(&BoundInputs { constants, ..set(axis, v) }).unwrap())
                    .collect();
                assert!(values.windows(2).all(|w| w[1] >= w[0]), "axis {axis}: {values:?}");
            }
        }
    }

    #[test]
    fn doubling_horizon_halves_only_the_gap() {
        let a = convergence_bound_terms(&BoundInputs::default()).unwrap();
        let b = convergence_bound_terms(&BoundInputs {
            horizon: 2000,
            ..BoundInputs::default()
        })
        .unwrap();
        for (x, y) in a.terms.iter().zip(&b.terms) {
            if x.name == "gap" {
                assert!((y.value - x.value / 2.0).abs() < 1e-15);
            } else {
                assert_eq!(x.value, y.value);
            }
        }
        let far = convergence_bound(&BoundInputs {
            horizon: usize::MAX,
            ..BoundInputs::default()
        })
        .unwrap();
        assert!((far - (a.total() - a.term("gap").unwrap())).abs() < 1e-12);
    }

    #[test]
    fn equal_periods_scale_divergences_alike() {
        let x = BoundInputs {
            local_period: 4,
            global_period: 4,
            learning_rate: 0.01,
            upward_divergence: 1.0,
            downward_divergence: 5.0,
            ..BoundInputs::default()
        };
        let t = convergence_bound_terms(&x).unwrap();
        assert!(
            (t.term("5C eta^2 G^2 eps^2 L^2").unwrap()
                - t.term("C eta^2 L^2 sum_u p_u E^2 eps_hat^2").unwrap())
            .abs()
                < 1e-15
        );
    }

    /// With ε² = r ε̃² and ε̂² = 5(1 − r) ε̃², the fixed-grouping bound has
    /// the same divergence terms as the uniform-grouping bound.
    #[test]
    fn uniform_bound_matches_fixed_bound_structure() {
        let base = BoundInputs {
            global_divergence: 0.7,
            local_period: 2,
            global_period: 6,
            ..BoundInputs::default()
        };
        let r = (base.n_uavs as f64 - 1.0) / (base.total_samples - 1.0);
        let fixed = BoundInputs {
            upward_divergence: r * base.global_divergence,
            downward_divergence: 5.0 * (1.0 - r) * base.global_divergence,
            ..base
        };
        let a = convergence_bound(&fixed).unwrap();
        let b = convergence_bound_uniform(&base).unwrap();
        assert!((a - b).abs() < 1e-12 * b, "{a} vs {b}");
    }

    #[test]
    fn uniform_examples() {
        let x = BoundInputs {
            n_uavs: 10,
            total_samples: 10.0,
            global_period: 4,
            local_period: 1,
            ..perfect()
        };
        // r = 1: the ε̃² weight sits entirely on G².
        let with = BoundInputs {
            global_divergence: 1.0,
            ..x
        };
        let s = BOUND_C * 0.01f64.powi(2);
        assert!((convergence_bound_uniform(&with).unwrap() - 5.0 * s * 16.0).abs() < 1e-15);
        let more = BoundInputs {
            global_divergence: 2.0,
            ..x
        };
        assert!(convergence_bound_uniform(&more).unwrap() > convergence_bound_uniform(&with).unwrap());
    }

    #[test]
    fn improvement_condition_examples() {
        assert!(improvement_condition(0.0, 0.0, 0.0, 1.0, 10, 100.0, 1.0).unwrap());
        assert_eq!(improvement_threshold(0.0, 0.0, 1.0, 10, 100.0).unwrap(), 0.0);
        assert!(improvement_condition(0.0, 0.0, 1.0, 1.0, 10, 20.0, 1.0).is_err());
        assert!(improvement_condition(0.0, 0.0, 1.0, 1.0, 10, 10.0, 1.0).is_err());
        // Low penalties satisfy the condition, high ones do not.
        assert!(improvement_condition(0.0, 0.001, 1.0, 1.0, 10, 1000.0, 1.0).unwrap());
        assert!(!improvement_condition(2.0, 1.0, 1.0, 1.0, 10, 1000.0, 1.0).unwrap());
    }

    #[test]
    fn surface_improves_only_for_good_channels() {
        let x = BoundInputs {
            global_divergence: 1.0,
            total_samples: 1000.0,
            ..BoundInputs::default()
        };
        let l = 1.5;
        let q = max_local_scaling(l, 1.0, x.n_uavs, x.total_samples).unwrap();
        let grid = [0.0, 0.5, 1.0, 2.0];
        let s = improvement_surface(&x, &grid, &grid, l, q, 1.0).unwrap();
        assert_eq!(s.len(), 16);
        assert!(s[0].improvement > 0.0);
        assert!(s[15].improvement < 0.0);
        assert!(max_local_scaling(20.0, 1.0, 10, 1000.0).is_err());
    }
}
