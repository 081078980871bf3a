//! Laplace transforms of the aggregate interference seen on each link type.
//!
//! Every transform has the same shape: the interference is a sum of
//! independent contributions from `n` co-channel transmitters whose distances
//! follow a mixture of state-conditioned laws, so the transform is the
//! per-interferer expectation raised to the (real) power `n`.

use crate::analytics::quadrature::{integrate, QuadratureSpec};
use crate::error::{Error, Result};
use crate::geometry::{
    exclusion_region, Area, ChannelParams, DistanceLaw, LinkState, StateDensity,
};

/// Per-interferer transform under Nakagami-`m` fading:
/// `E[exp(-s P g r^-alpha)] = (1 + s P r^-alpha / m)^-m`.
#[inline]
pub fn nakagami_transform(s: f64, power: f64, r: f64, alpha: f64, m: u32) -> f64 {
    let m = f64::from(m);
    (1.0 + s * power * r.powf(-alpha) / m).powf(-m)
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    density: StateDensity,
    alpha: f64,
    m: u32,
}

/// Interference from `exponent` i.i.d. transmitters of power `power` whose
/// distance law is a mixture over LoS states. Construction evaluates the
/// branch masses once so the transform can be queried at many arguments.
#[derive(Debug, Clone)]
pub struct InterferenceField {
    branches: Vec<Branch>,
    power: f64,
    exponent: f64,
    total_mass: f64,
}

impl InterferenceField {
    /// `lowers` gives the truncation point of the LoS and NLoS branch.
    fn new(
        law: DistanceLaw,
        channel: &ChannelParams,
        power: f64,
        lowers: [(LinkState, f64); 2],
        exponent: f64,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        if !(exponent.is_finite()) {
            return Err(Error::invalid("interferer count must be finite"));
        }
        let mut branches = Vec::with_capacity(2);
        if exponent > 0.0 {
            for (state, lower) in lowers {
                match StateDensity::new(law, channel.los_model(), state, lower, spec) {
                    Ok(density) => branches.push(Branch {
                        density,
                        alpha: channel.alpha(state),
                        m: channel.m(state),
                    }),
                    Err(Error::ZeroMass { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        let total_mass = branches.iter().map(|b| b.density.mass()).sum();
        Ok(Self {
            branches,
            power,
            exponent,
            total_mass,
        })
    }

    /// Interferers seen by a device at planar offset `x0` from the centre,
    /// served over a link of length `l_k` in state `serving`. The UAVs
    /// interfere from beyond the serving distance in the same state and
    /// beyond the exclusion region in the other state.
    pub fn edge1(
        l_k: f64,
        x0: f64,
        serving: LinkState,
        n_interferers: f64,
        area: &Area,
        channel: &ChannelParams,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        if l_k < area.uav_height {
            return Err(Error::invalid(format!(
                "serving distance {l_k} is below the UAV height {}",
                area.uav_height
            )));
        }
        let law = DistanceLaw::new(area.radius, area.uav_height, x0)?;
        let other = serving.other();
        let excl = exclusion_region(l_k, channel.alpha(serving), channel.alpha(other))?;
        Self::new(
            law,
            channel,
            channel.p_uav,
            [(serving, l_k), (other, excl)],
            n_interferers,
            spec,
        )
    }

    /// Interfering devices seen by a UAV at planar offset `y0`.
    pub fn edge2(
        y0: f64,
        n_interferers: f64,
        area: &Area,
        channel: &ChannelParams,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        let law = DistanceLaw::new(area.radius, area.uav_height, y0)?;
        let h = area.uav_height;
        Self::new(
            law,
            channel,
            channel.p_device,
            [(LinkState::Los, h), (LinkState::Nlos, h)],
            n_interferers,
            spec,
        )
    }

    /// Interfering UAVs seen by the base station at the disk centre.
    pub fn backhaul(
        n_interferers: f64,
        area: &Area,
        channel: &ChannelParams,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        let law = DistanceLaw::centered(area.radius, area.uav_height)?;
        let h = area.uav_height;
        Self::new(
            law,
            channel,
            channel.p_uav,
            [(LinkState::Los, h), (LinkState::Nlos, h)],
            n_interferers,
            spec,
        )
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// True when no interferer can be present.
    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Expectation of the per-interferer transform over the distance mixture.
    pub fn per_interferer(&self, s: f64, spec: &QuadratureSpec) -> Result<f64> {
        if self.branches.is_empty() || s == 0.0 {
            return Ok(1.0);
        }
        let mut acc = 0.0;
        for b in &self.branches {
            let (power, alpha, m) = (self.power, b.alpha, b.m);
            acc += b
                .density
                .integrate_unnormalized(|r| nakagami_transform(s, power, r, alpha, m), spec)?;
        }
        Ok((acc / self.total_mass).clamp(0.0, 1.0))
    }

    pub fn laplace(&self, s: f64, spec: &QuadratureSpec) -> Result<f64> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::invalid(format!("transform argument must be non-negative, got {s}")));
        }
        if self.exponent <= 0.0 || self.branches.is_empty() {
            return Ok(1.0);
        }
        Ok(self.per_interferer(s, spec)?.powf(self.exponent))
    }
}

/// Transform of the interference on the UAV-to-device leg of the edge link.
#[allow(clippy::too_many_arguments)]
pub fn laplace_edge1(
    s: f64,
    l_k: f64,
    x0: f64,
    serving: LinkState,
    n_interferers: f64,
    area: &Area,
    channel: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    InterferenceField::edge1(l_k, x0, serving, n_interferers, area, channel, spec)?.laplace(s, spec)
}

/// Transform of the interference on the device-to-UAV leg, for a UAV at
/// planar offset `y0`. No exclusion regions apply because the interfering
/// devices are not associated with the receiving UAV by received power.
pub fn laplace_edge2(
    s: f64,
    y0: f64,
    n_interferers: f64,
    area: &Area,
    channel: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    InterferenceField::edge2(y0, n_interferers, area, channel, spec)?.laplace(s, spec)
}

/// Transform of the interference at the base station on the backhaul.
pub fn laplace_back(
    s: f64,
    n_interferers: f64,
    area: &Area,
    channel: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    InterferenceField::backhaul(n_interferers, area, channel, spec)?.laplace(s, spec)
}

/// Transform of the interference at the base station on a direct upload.
/// Interfering devices lie uniformly on the ground disk and share one
/// fading law.
pub fn laplace_direct(
    s: f64,
    n_interferers: f64,
    radius: f64,
    channel: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("transform argument must be non-negative, got {s}")));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    if n_interferers <= 0.0 || s == 0.0 {
        return Ok(1.0);
    }
    let (p, alpha, m) = (channel.p_device, channel.alpha_direct, channel.m_direct);
    let rr = radius * radius;
    let per = integrate(
        |q| {
            if q == 0.0 {
                0.0
            } else {
                nakagami_transform(s, p, q, alpha, m) * 2.0 * q / rr
            }
        },
        0.0,
        radius,
        spec,
    )?;
    Ok(per.clamp(0.0, 1.0).powf(n_interferers))
}
