//! Deployment geometry, line-of-sight model, association and the distance
//! laws of interferers as seen from a receiver inside the deployment disk.
//!
//! Devices sit on the ground, UAVs hover at a common altitude and the base
//! station is at the disk centre. All distances handed to the channel model
//! are 3-D except for the direct device-to-BS link, which lies on the ground.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::quadrature::{integrate_with_breaks, QuadratureSpec};
use crate::error::{Error, Result};
use crate::seeding::{rng_for, Stream};

/// Normalisation masses below this are treated as empty branches.
pub const MIN_BRANCH_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// The deployment disk and the UAV altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub radius: f64,
    pub uav_height: f64,
}

impl Area {
    pub fn new(radius: f64, uav_height: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        if !(uav_height > 0.0 && uav_height.is_finite()) {
            return Err(Error::invalid(format!(
                "UAV height must be positive, got {uav_height}"
            )));
        }
        Ok(Self { radius, uav_height })
    }

    /// Largest UAV-to-disk-centre 3-D distance, `sqrt(R² + h²)`.
    pub fn max_backhaul_distance(&self) -> f64 {
        self.radius.hypot(self.uav_height)
    }

    /// 3-D distance between a ground point and a UAV given their planar separation.
    pub fn slant(&self, planar: f64) -> f64 {
        planar.hypot(self.uav_height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub area: Area,
    pub devices: Vec<Point>,
    pub uavs: Vec<Point>,
}

impl Topology {
    pub fn new(area: Area, devices: Vec<Point>, uavs: Vec<Point>) -> Result<Self> {
        let area = Area::new(area.radius, area.uav_height)?;
        if devices.is_empty() || uavs.is_empty() {
            return Err(Error::invalid("a topology needs at least one device and one UAV"));
        }
        // Tolerate coordinates rounded to a few decimals on the rim.
        let rim = area.radius * (1.0 + 1e-9);
        for p in devices.iter().chain(uavs.iter()) {
            if !(p.x.is_finite() && p.y.is_finite()) || p.norm() > rim {
                return Err(Error::invalid(format!(
                    "point ({}, {}) lies outside the disk of radius {}",
                    p.x, p.y, area.radius
                )));
            }
        }
        Ok(Self { area, devices, uavs })
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    /// 3-D distance between device `k` and UAV `u`.
    pub fn edge_distance(&self, device: usize, uav: usize) -> f64 {
        self.area
            .slant(self.devices[device].distance(&self.uavs[uav]))
    }

    /// 3-D distance between UAV `u` and the base station.
    pub fn backhaul_distance(&self, uav: usize) -> f64 {
        self.area.slant(self.uavs[uav].norm())
    }

    /// Ground distance between device `k` and the base station.
    pub fn direct_distance(&self, device: usize) -> f64 {
        self.devices[device].norm()
    }

    /// Same deployment with the UAVs moved to another altitude.
    pub fn with_height(&self, uav_height: f64) -> Result<Self> {
        Topology::new(
            Area::new(self.area.radius, uav_height)?,
            self.devices.clone(),
            self.uavs.clone(),
        )
    }
}

/// Uniform point on a disk via the polar method with square-root radial correction.
pub fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Point {
    let rho = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    Point::new(rho * phi.cos(), rho * phi.sin())
}

/// Draws two independent binomial point processes on the disk.
pub fn sample_topology(
    n_devices: usize,
    n_uavs: usize,
    radius: f64,
    height: f64,
    seed: u64,
) -> Result<Topology> {
    if n_devices == 0 || n_uavs == 0 {
        return Err(Error::invalid("device and UAV counts must be at least one"));
    }
    let area = Area::new(radius, height)?;
    let mut rng = rng_for(seed, Stream::Topology, 0);
    let devices = (0..n_devices).map(|_| uniform_in_disk(&mut rng, radius)).collect();
    let uavs = (0..n_uavs).map(|_| uniform_in_disk(&mut rng, radius)).collect();
    Topology::new(area, devices, uavs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkState {
    Los,
    Nlos,
}

impl LinkState {
    pub const BOTH: [LinkState; 2] = [LinkState::Los, LinkState::Nlos];

    pub fn other(self) -> Self {
        match self {
            LinkState::Los => LinkState::Nlos,
            LinkState::Nlos => LinkState::Los,
        }
    }
}

/// Elevation-angle line-of-sight model with environment constants `a`, `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosModel {
    pub a: f64,
    pub b: f64,
}

impl LosModel {
    /// LoS probability of a link of 3-D length `r` to a UAV at altitude `h`.
    /// Distances at or below `h` are treated as vertical links.
    pub fn los(&self, r: f64, h: f64) -> f64 {
        let elevation_deg = if r <= h {
            90.0
        } else {
            (h / (r * r - h * h).sqrt()).atan().to_degrees()
        };
        1.0 / (1.0 + self.a * (-self.b * (elevation_deg - self.a)).exp())
    }

    pub fn state(&self, state: LinkState, r: f64, h: f64) -> f64 {
        match state {
            LinkState::Los => self.los(r, h),
            LinkState::Nlos => 1.0 - self.los(r, h),
        }
    }
}

/// LoS probability; fails for `r < h` because no ground point is closer than
/// the UAV altitude.
pub fn los_probability(r: f64, h: f64, a: f64, b: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("height must be positive, got {h}")));
    }
    if !(r >= h) {
        return Err(Error::invalid(format!("distance {r} is below the UAV height {h}")));
    }
    Ok(LosModel { a, b }.los(r, h))
}

/// Distance beyond which an interferer in the opposite LoS state cannot beat a
/// serving link of length `l`: `l^(alpha_from / alpha_to)`.
pub fn exclusion_region(l: f64, alpha_from: f64, alpha_to: f64) -> Result<f64> {
    if !(l > 0.0 && alpha_from > 0.0 && alpha_to > 0.0) {
        return Err(Error::invalid(
            "exclusion region needs a positive distance and positive exponents",
        ));
    }
    Ok(l.powf(alpha_from / alpha_to))
}

/// Path-loss, fading and power parameters of every link type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub m_los: u32,
    pub m_nlos: u32,
    pub env_a: f64,
    pub env_b: f64,
    /// Device transmit power, watts.
    pub p_device: f64,
    /// UAV transmit power, watts.
    pub p_uav: f64,
    /// Noise power, watts.
    pub noise: f64,
    /// Linear SINR threshold.
    pub theta: f64,
    pub m_direct: u32,
    pub alpha_direct: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            alpha_los: 2.0,
            alpha_nlos: 3.5,
            m_los: 4,
            m_nlos: 1,
            env_a: 9.61,
            env_b: 0.16,
            p_device: 0.75,
            p_uav: 1.5,
            noise: 4.14e-6,
            theta: crate::db_to_linear(-5.0),
            m_direct: 2,
            alpha_direct: 2.5,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_los > 0.0 && self.alpha_nlos > 0.0 && self.alpha_direct > 0.0) {
            return Err(Error::invalid("path-loss exponents must be positive"));
        }
        if self.alpha_los > self.alpha_nlos {
            return Err(Error::invalid("the LoS exponent may not exceed the NLoS exponent"));
        }
        if self.m_los == 0 || self.m_nlos == 0 || self.m_direct == 0 {
            return Err(Error::invalid("Nakagami parameters must be at least 1"));
        }
        if self.m_los > 20 || self.m_nlos > 20 || self.m_direct > 20 {
            return Err(Error::invalid("Nakagami parameters above 20 are not supported"));
        }
        if !(self.p_device > 0.0 && self.p_uav > 0.0) {
            return Err(Error::invalid("transmit powers must be positive"));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::invalid("noise power must be non-negative"));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid("SINR threshold must be positive"));
        }
        Ok(())
    }

    pub fn with_theta_db(mut self, theta_db: f64) -> Self {
        self.theta = crate::db_to_linear(theta_db);
        self
    }

    pub fn los_model(&self) -> LosModel {
        LosModel {
            a: self.env_a,
            b: self.env_b,
        }
    }

    pub fn alpha(&self, state: LinkState) -> f64 {
        match state {
            LinkState::Los => self.alpha_los,
            LinkState::Nlos => self.alpha_nlos,
        }
    }

    pub fn m(&self, state: LinkState) -> u32 {
        match state {
            LinkState::Los => self.m_los,
            LinkState::Nlos => self.m_nlos,
        }
    }
}

/// Resource blocks and bandwidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceConfig {
    /// Resource blocks at the base station for the UAV links.
    pub rb_bs: usize,
    /// Resource blocks at each UAV for its devices.
    pub rb_uav: usize,
    /// Resource blocks at the base station for direct device uploads.
    pub rb_direct: usize,
    pub bandwidth_device: f64,
    pub bandwidth_uav: f64,
}

impl Default for ResourceConfig {
    fn default() -> Self {
        Self {
            rb_bs: 5,
            rb_uav: 15,
            rb_direct: 20,
            bandwidth_device: 1e6,
            bandwidth_uav: 1e6,
        }
    }
}

impl ResourceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rb_bs == 0 || self.rb_uav == 0 || self.rb_direct == 0 {
            return Err(Error::invalid("resource block counts must be at least one"));
        }
        if !(self.bandwidth_device > 0.0 && self.bandwidth_uav > 0.0) {
            return Err(Error::invalid("bandwidths must be positive"));
        }
        Ok(())
    }
}

/// Device-to-UAV association and the serving link geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub serving_uav: Vec<usize>,
    /// 3-D length of each device's serving link.
    pub serving_distance: Vec<f64>,
    /// LoS state each serving link had when the association was made.
    pub serving_state: Vec<LinkState>,
    pub backhaul_distance: Vec<f64>,
    pub backhaul_state: Vec<LinkState>,
}

impl ClusterAssignment {
    pub fn n_devices(&self) -> usize {
        self.serving_uav.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.backhaul_distance.len()
    }

    /// Member devices of each UAV, in increasing device index.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut clusters = vec![Vec::new(); self.n_uavs()];
        for (k, &u) in self.serving_uav.iter().enumerate() {
            clusters[u].push(k);
        }
        clusters
    }
}

/// LoS state of every device-UAV link and every backhaul link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStates {
    n_uavs: usize,
    /// Device-major matrix: entry `k * n_uavs + u`.
    edge: Vec<LinkState>,
    backhaul: Vec<LinkState>,
}

impl LinkStates {
    /// Draws each state as Bernoulli(P_L(r)). The draw order is fixed: all
    /// edge links device-major, then the backhaul links.
    pub fn sample<R: Rng + ?Sized>(topology: &Topology, los: &LosModel, rng: &mut R) -> Self {
        let h = topology.area.uav_height;
        let mut draw = |r: f64| {
            if rng.random::<f64>() < los.los(r, h) {
                LinkState::Los
            } else {
                LinkState::Nlos
            }
        };
        let n_uavs = topology.n_uavs();
        let mut edge = Vec::with_capacity(topology.n_devices() * n_uavs);
        for k in 0..topology.n_devices() {
            for u in 0..n_uavs {
                edge.push(draw(topology.edge_distance(k, u)));
            }
        }
        let backhaul = (0..n_uavs)
            .map(|u| draw(topology.backhaul_distance(u)))
            .collect();
        Self {
            n_uavs,
            edge,
            backhaul,
        }
    }

    /// Every link in the same state.
    pub fn uniform(n_devices: usize, n_uavs: usize, state: LinkState) -> Self {
        Self {
            n_uavs,
            edge: vec![state; n_devices * n_uavs],
            backhaul: vec![state; n_uavs],
        }
    }

    pub fn edge(&self, device: usize, uav: usize) -> LinkState {
        self.edge[device * self.n_uavs + uav]
    }

    pub fn backhaul(&self, uav: usize) -> LinkState {
        self.backhaul[uav]
    }

    pub fn matches(&self, topology: &Topology) -> bool {
        self.n_uavs == topology.n_uavs()
            && self.edge.len() == topology.n_devices() * topology.n_uavs()
            && self.backhaul.len() == topology.n_uavs()
    }
}

/// The link states drawn by [`associate`] for a given seed.
pub fn association_states(topology: &Topology, channel: &ChannelParams, seed: u64) -> LinkStates {
    let mut rng = rng_for(seed, Stream::Association, 0);
    LinkStates::sample(topology, &channel.los_model(), &mut rng)
}

/// Maximum average received power association with LoS states sampled from
/// the elevation model.
pub fn associate(topology: &Topology, channel: &ChannelParams, seed: u64) -> ClusterAssignment {
    let states = association_states(topology, channel, seed);
    associate_with_link_states(topology, channel, &states)
}

pub fn associate_with_link_states(
    topology: &Topology,
    channel: &ChannelParams,
    states: &LinkStates,
) -> ClusterAssignment {
    associate_with_states(
        topology,
        channel,
        |k, u, _| states.edge(k, u),
        |u, _| states.backhaul(u),
    )
}

/// Association with caller-supplied link states. `edge_state(k, u, r)` gives
/// the state of the device-`k`/UAV-`u` link of length `r`.
pub fn associate_with_states(
    topology: &Topology,
    channel: &ChannelParams,
    mut edge_state: impl FnMut(usize, usize, f64) -> LinkState,
    mut backhaul_state: impl FnMut(usize, f64) -> LinkState,
) -> ClusterAssignment {
    let n_d = topology.n_devices();
    let mut serving_uav = Vec::with_capacity(n_d);
    let mut serving_distance = Vec::with_capacity(n_d);
    let mut serving_state = Vec::with_capacity(n_d);
    for k in 0..n_d {
        let mut best: Option<(usize, f64, LinkState, f64)> = None;
        for u in 0..topology.n_uavs() {
            let r = topology.edge_distance(k, u);
            let state = edge_state(k, u, r);
            let power = channel.p_uav * r.powf(-channel.alpha(state));
            if best.is_none_or(|(_, _, _, p)| power > p) {
                best = Some((u, r, state, power));
            }
        }
        let (u, r, state, _) = best.expect("topology has at least one UAV");
        serving_uav.push(u);
        serving_distance.push(r);
        serving_state.push(state);
    }
    let (backhaul_distance, backhaul_state) = (0..topology.n_uavs())
        .map(|u| {
            let g = topology.backhaul_distance(u);
            (g, backhaul_state(u, g))
        })
        .unzip();
    ClusterAssignment {
        serving_uav,
        serving_distance,
        serving_state,
        backhaul_distance,
        backhaul_state,
    }
}

/// Law of the 3-D distance from a ground receiver at planar offset `offset`
/// from the disk centre to a transmitter placed uniformly in the disk at
/// altitude `height`.
///
/// The density is `2r/R²` up to `w_m = sqrt((R - x0)² + h²)`, where the circle
/// of radius `sqrt(r² - h²)` around the receiver still lies inside the disk,
/// and decays through an arccos factor up to `w_p = sqrt((R + x0)² + h²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceLaw {
    radius: f64,
    height: f64,
    offset: f64,
}

impl DistanceLaw {
    pub fn new(radius: f64, height: f64, offset: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("radius must be positive"));
        }
        if !(height >= 0.0) {
            return Err(Error::invalid("height must be non-negative"));
        }
        if !(offset >= 0.0) {
            return Err(Error::invalid("receiver offset must be non-negative"));
        }
        if offset > radius {
            return Err(Error::invalid(format!(
                "receiver offset {offset} exceeds the disk radius {radius}"
            )));
        }
        Ok(Self {
            radius,
            height,
            offset,
        })
    }

    pub fn centered(radius: f64, height: f64) -> Result<Self> {
        Self::new(radius, height, 0.0)
    }

    pub fn lower(&self) -> f64 {
        self.height
    }

    /// Kink `w_m`.
    pub fn kink(&self) -> f64 {
        (self.radius - self.offset).hypot(self.height)
    }

    /// Upper end of the support, `w_p`.
    pub fn upper(&self) -> f64 {
        (self.radius + self.offset).hypot(self.height)
    }

    pub fn pdf(&self, r: f64) -> f64 {
        let (h, w_m, w_p) = (self.height, self.kink(), self.upper());
        if r < h || r > w_p {
            return 0.0;
        }
        let rr = self.radius * self.radius;
        if r <= w_m || self.offset == 0.0 {
            return 2.0 * r / rr;
        }
        let d2 = rr + h * h;
        let planar = (r * r - h * h).sqrt();
        let arg = ((r * r + self.offset * self.offset - d2) / (2.0 * self.offset * planar))
            .clamp(-1.0, 1.0);
        2.0 * r / (PI * rr) * arg.acos()
    }

    /// `∫ g(r) pdf(r) dr` over `[lower, upper]` clipped to the support.
    pub fn integrate<F: Fn(f64) -> f64>(
        &self,
        g: F,
        lower: f64,
        upper: f64,
        spec: &QuadratureSpec,
    ) -> Result<f64> {
        let lo = lower.max(self.lower());
        let hi = upper.min(self.upper());
        if lo >= hi {
            return Ok(0.0);
        }
        integrate_with_breaks(|r| g(r) * self.pdf(r), lo, hi, &[self.kink()], spec)
    }
}

/// Density of the distance from a receiver at planar offset `x0` to a UAV
/// placed uniformly in the disk.
pub fn interferer_pdf_offcenter(r: f64, x0: f64, radius: f64, h: f64) -> Result<f64> {
    Ok(DistanceLaw::new(radius, h, x0)?.pdf(r))
}

/// Density of the UAV distance seen from the disk centre: `2r/R²` on `[h, d]`.
pub fn interferer_pdf_center(r: f64, radius: f64, h: f64) -> Result<f64> {
    Ok(DistanceLaw::centered(radius, h)?.pdf(r))
}

/// Distance density of interferers in a given LoS state, truncated below at
/// `lower` and renormalised:
/// `f(r) P_state(r) / ∫_lower^upper f P_state`.
#[derive(Debug, Clone, Copy)]
pub struct StateDensity {
    law: DistanceLaw,
    los: LosModel,
    state: LinkState,
    lower: f64,
    mass: f64,
}

impl StateDensity {
    /// Fails with [`Error::ZeroMass`] when the truncated support is empty or
    /// carries less than [`MIN_BRANCH_MASS`]; callers drop that branch.
    pub fn new(
        law: DistanceLaw,
        los: LosModel,
        state: LinkState,
        lower: f64,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        let lo = lower.max(law.lower());
        let hi = law.upper();
        if lo >= hi {
            return Err(Error::ZeroMass { lower: lo, upper: hi });
        }
        let h = law.height;
        let mass = law.integrate(|r| los.state(state, r, h), lo, hi, spec)?;
        if mass < MIN_BRANCH_MASS {
            return Err(Error::ZeroMass { lower: lo, upper: hi });
        }
        Ok(Self {
            law,
            los,
            state,
            lower: lo,
            mass,
        })
    }

    /// Probability mass of the state branch before renormalisation.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.law.upper()
    }

    pub fn unnormalized(&self, r: f64) -> f64 {
        if r < self.lower {
            return 0.0;
        }
        self.law.pdf(r) * self.los.state(self.state, r, self.law.height)
    }

    pub fn pdf(&self, r: f64) -> f64 {
        self.unnormalized(r) / self.mass
    }

    /// `∫ g(r) · unnormalized(r) dr` over the truncated support.
    pub fn integrate_unnormalized<F: Fn(f64) -> f64>(
        &self,
        g: F,
        spec: &QuadratureSpec,
    ) -> Result<f64> {
        let h = self.law.height;
        let (los, state) = (self.los, self.state);
        self.law
            .integrate(|r| g(r) * los.state(state, r, h), self.lower, self.law.upper(), spec)
    }
}

/// Point evaluation of the truncated state density; see [`StateDensity`].
pub fn conditional_state_pdf(
    r: f64,
    state: LinkState,
    lower: f64,
    receiver_offset: f64,
    area: &Area,
    los: &LosModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let law = DistanceLaw::new(area.radius, area.uav_height, receiver_offset)?;
    Ok(StateDensity::new(law, *los, state, lower, spec)?.pdf(r))
}
