//! Lipschitz contextual bandit over the bid-context hypercube with delayed,
//! batched feedback.
//!
//! The space `[0, 1]^d` is covered adaptively by balls. The first coordinate of
//! every point is the normalized bid, the remaining `d - 1` coordinates are the
//! normalized context. Each ball keeps a sample count and a reward sum; its
//! optimistic index bounds the mean reward of every point inside it.
//!
//! Rounds are grouped into batches of at most `W` selections. During a batch the
//! engine answers [`ZoomingBandit::select`] calls against indices frozen at the
//! batch start; rewards arrive together through [`ZoomingBandit::observe_batch`],
//! which also activates finer balls where the confidence radius has dropped below
//! the ball radius.
//!
//! Distances use the L2 norm scaled by `1/sqrt(d)`, so the hypercube has
//! diameter exactly 1 and the unit-radius root ball covers all of it.

pub mod interval;
mod snapshot;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
pub use interval::IntervalSet;

pub type BallId = usize;

/// Slack used when testing membership of a played point in the ball it was
/// sampled from. The slice endpoints come out of a square root and may land a
/// rounding error outside the closed ball.
const MEMBERSHIP_EPS: f64 = 1e-12;

/// A point of the bid-context hypercube.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("point must have at least one coordinate".into()));
        }
        if let Some((i, v)) = coords
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRange(format!("coordinate {i} = {v} outside [0, 1]")));
        }
        Ok(Self(coords))
    }

    pub fn from_bid_context(bid: f64, context: &[f64]) -> Result<Self> {
        let mut coords = Vec::with_capacity(context.len() + 1);
        coords.push(bid);
        coords.extend_from_slice(context);
        Self::new(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn bid(&self) -> f64 {
        self.0[0]
    }

    pub fn context(&self) -> &[f64] {
        &self.0[1..]
    }
}

fn scaled_distance(a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (sq / a.len() as f64).sqrt()
}

/// `||p - q||_2 / sqrt(d)`.
pub fn metric_distance(p: &Point, q: &Point) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    Ok(scaled_distance(p.coords(), q.coords()))
}

/// `sqrt(ln T / (1 + n))`. The horizon is taken as a real number so that
/// `ln T` can be any positive value.
pub fn confidence_radius(samples: u64, horizon: f64) -> Result<f64> {
    if !(horizon >= 2.0) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be at least 2")));
    }
    Ok((horizon.ln() / (1.0 + samples as f64)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub id: BallId,
    pub parent: Option<BallId>,
    pub center: Point,
    /// Radius is `2^-depth`.
    pub depth: u32,
    pub samples: u64,
    pub reward_sum: f64,
}

impl Ball {
    pub fn radius(&self) -> f64 {
        (-(self.depth as f64)).exp2()
    }

    /// Empirical mean reward; zero before the first sample.
    pub fn mean(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.reward_sum / self.samples as f64
        }
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        scaled_distance(self.center.coords(), point) <= self.radius()
    }

    /// The interval of bids `b` with `(b, context)` inside the ball, clipped to
    /// `[0, 1]`. `None` when the context slice misses the ball.
    fn bid_slice(&self, context: &[f64]) -> Option<(f64, f64)> {
        let c = self.center.coords();
        let d = c.len() as f64;
        let r = self.radius();
        let ctx_sq: f64 = context
            .iter()
            .zip(&c[1..])
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let half_sq = r * r * d - ctx_sq;
        if half_sq < 0.0 {
            return None;
        }
        let half = half_sq.sqrt();
        let lo = (c[0] - half).max(0.0);
        let hi = (c[0] + half).min(1.0);
        (hi >= lo).then_some((lo, hi))
    }
}

/// `nu(B) + r(B) + conf(B)`.
pub fn pre_index(ball: &Ball, horizon: f64) -> Result<f64> {
    Ok(ball.mean() + ball.radius() + confidence_radius(ball.samples, horizon)?)
}

/// All balls activated so far. Ball ids are positions in activation order; balls
/// are never removed.
#[derive(Debug, Clone)]
pub struct ActiveSet {
    balls: Vec<Ball>,
    horizon: f64,
    dim: usize,
}

impl ActiveSet {
    /// A set holding only the unit-radius root ball centered in the hypercube.
    pub fn new(dim: usize, horizon: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        confidence_radius(0, horizon)?;
        let root = Ball {
            id: 0,
            parent: None,
            center: Point(vec![0.5; dim]),
            depth: 0,
            samples: 0,
            reward_sum: 0.0,
        };
        Ok(Self {
            balls: vec![root],
            horizon,
            dim,
        })
    }

    /// Rebuilds a set from explicit balls (snapshots, tests). Ids must equal
    /// positions and the first ball must be the unit-radius root.
    pub fn from_balls(dim: usize, horizon: f64, balls: Vec<Ball>) -> Result<Self> {
        confidence_radius(0, horizon)?;
        match balls.first() {
            Some(b) if b.depth == 0 && b.parent.is_none() => {}
            _ => return Err(Error::InvalidArgument("first ball must be the unit-radius root".into())),
        }
        for (i, b) in balls.iter().enumerate() {
            if b.id != i {
                return Err(Error::InvalidArgument(format!("ball at position {i} has id {}", b.id)));
            }
            if b.center.dim() != dim {
                return Err(Error::InvalidArgument(format!("ball {i} has dimension {}", b.center.dim())));
            }
            if i > 0 && b.depth == 0 {
                return Err(Error::InvalidArgument(format!("ball {i} duplicates the root radius")));
            }
            if let Some(p) = b.parent {
                if p >= i || balls[p].depth + 1 != b.depth {
                    return Err(Error::InvalidArgument(format!("ball {i} has inconsistent parent {p}")));
                }
            } else if i > 0 {
                return Err(Error::InvalidArgument(format!("ball {i} has no parent")));
            }
        }
        Ok(Self { balls, horizon, dim })
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn get(&self, id: BallId) -> Option<&Ball> {
        self.balls.get(id)
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn ball(&self, id: BallId) -> Result<&Ball> {
        self.balls
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ball {id}")))
    }

    pub fn pre_index(&self, id: BallId) -> Result<f64> {
        pre_index(self.ball(id)?, self.horizon)
    }

    /// `r(B) + min_{B'} (pre(B') + D(B, B'))`, evaluated over every active ball.
    pub fn index(&self, id: BallId) -> Result<f64> {
        let ball = self.ball(id)?;
        let mut best = f64::INFINITY;
        for other in &self.balls {
            let cand = pre_index(other, self.horizon)?
                + scaled_distance(ball.center.coords(), other.center.coords());
            best = best.min(cand);
        }
        if !best.is_finite() {
            return Err(Error::Invariant("index over an empty active set".into()));
        }
        Ok(ball.radius() + best)
    }

    fn check_context(&self, context: &[f64]) -> Result<()> {
        if context.len() + 1 != self.dim {
            return Err(Error::InvalidArgument(format!(
                "context has {} coordinates, engine expects {}",
                context.len(),
                self.dim - 1
            )));
        }
        if let Some(v) = context.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("context coordinate {v} outside [0, 1]")));
        }
        Ok(())
    }

    /// Bids `b` with `(b, context)` in the domain of ball `id`: the ball's slice
    /// minus the slices of every strictly smaller active ball.
    pub fn domain_slice(&self, id: BallId, context: &[f64]) -> Result<IntervalSet> {
        self.check_context(context)?;
        let ball = self.ball(id)?;
        let Some((lo, hi)) = ball.bid_slice(context) else {
            return Ok(IntervalSet::empty());
        };
        let mut set = IntervalSet::single(lo, hi);
        for other in &self.balls {
            if other.depth > ball.depth {
                if let Some((a, b)) = other.bid_slice(context) {
                    set.subtract(a, b);
                    if set.is_empty() {
                        break;
                    }
                }
            }
        }
        Ok(set)
    }

    /// Whether `point` lies in `dom(B)`: inside ball `id` and outside every
    /// strictly smaller active ball.
    pub fn in_domain(&self, id: BallId, point: &[f64]) -> Result<bool> {
        let ball = self.ball(id)?;
        if scaled_distance(ball.center.coords(), point) > ball.radius() + MEMBERSHIP_EPS {
            return Ok(false);
        }
        Ok(!self
            .balls
            .iter()
            .any(|other| other.depth > ball.depth && other.contains(point)))
    }

    fn activate(&mut self, parent: BallId, center: Point) -> BallId {
        let id = self.balls.len();
        let depth = self.balls[parent].depth + 1;
        self.balls.push(Ball {
            id,
            parent: Some(parent),
            center,
            depth,
            samples: 0,
            reward_sum: 0.0,
        });
        id
    }

    /// Writes the line-oriented snapshot `id,parent_id,radius,samples,reward_sum,c0..c{d-1}`.
    pub fn write_snapshot<W: std::io::Write>(&self, out: W) -> Result<()> {
        snapshot::write(self, out)
    }

    pub fn read_snapshot<R: std::io::Read>(input: R, horizon: f64) -> Result<Self> {
        snapshot::read(input, horizon)
    }
}

/// Indices of every ball as of the start of a batch, computed on demand and
/// memoized. Valid only while the active set it was built from is unchanged.
#[derive(Debug, Clone)]
pub struct FrozenIndices {
    pre: Vec<f64>,
    // ball positions sorted by ascending pre-index
    by_pre: Vec<usize>,
    memo: Vec<Option<f64>>,
}

impl FrozenIndices {
    pub fn new(active: &ActiveSet) -> Result<Self> {
        let pre = active
            .balls
            .iter()
            .map(|b| pre_index(b, active.horizon))
            .collect::<Result<Vec<_>>>()?;
        let mut by_pre: Vec<usize> = (0..pre.len()).collect();
        by_pre.sort_by(|&a, &b| pre[a].total_cmp(&pre[b]).then(a.cmp(&b)));
        Ok(Self {
            memo: vec![None; pre.len()],
            pre,
            by_pre,
        })
    }

    /// Same value as [`ActiveSet::index`], found by scanning balls in
    /// ascending pre-index order and stopping once no remaining ball can
    /// improve the minimum.
    pub fn get(&mut self, active: &ActiveSet, id: BallId) -> Result<f64> {
        let slot = self
            .memo
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("ball {id} not in frozen snapshot")))?;
        if let Some(v) = *slot {
            return Ok(v);
        }
        let ball = &active.balls[id];
        let center = ball.center.coords();
        let mut best = self.pre[id];
        for &j in &self.by_pre {
            let p = self.pre[j];
            if p >= best {
                break;
            }
            let cand = p + scaled_distance(center, active.balls[j].center.coords());
            if cand < best {
                best = cand;
            }
        }
        let value = ball.radius() + best;
        self.memo[id] = Some(value);
        Ok(value)
    }

    pub fn len(&self) -> usize {
        self.pre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pre.is_empty()
    }
}

/// How a bid is drawn from the domain slice of the selected ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BidSampling {
    #[default]
    Uniform,
    /// The ball center's bid coordinate when it lies in the slice, otherwise
    /// the midpoint of the nearest slice interval.
    CenterProjection,
}

/// Picks the relevant ball with the highest frozen index (lowest id on ties)
/// and draws a bid from its domain slice.
pub fn select_in<R: Rng + ?Sized>(
    active: &ActiveSet,
    frozen: &mut FrozenIndices,
    context: &[f64],
    sampling: BidSampling,
    rng: &mut R,
) -> Result<(BallId, f64)> {
    active.check_context(context)?;
    if frozen.len() != active.len() {
        return Err(Error::Invariant("frozen indices do not match the active set".into()));
    }
    // balls whose closed slice at this context is nonempty
    let mut hits: Vec<(BallId, u32, f64, f64)> = active
        .balls
        .iter()
        .filter_map(|b| b.bid_slice(context).map(|(lo, hi)| (b.id, b.depth, lo, hi)))
        .collect();
    let mut ranked = Vec::with_capacity(hits.len());
    for &(id, ..) in &hits {
        ranked.push((frozen.get(active, id)?, id));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    hits.sort_by_key(|h| h.0);

    for &(_, id) in &ranked {
        let (_, depth, lo, hi) = hits[hits.binary_search_by_key(&id, |h| h.0).expect("hit")];
        let mut dom = IntervalSet::single(lo, hi);
        for &(_, d, a, b) in &hits {
            if d > depth {
                dom.subtract(a, b);
                if dom.is_empty() {
                    break;
                }
            }
        }
        if dom.length() <= 0.0 {
            continue;
        }
        let bid = match sampling {
            BidSampling::Uniform => dom.point_at_fraction(rng.random::<f64>()),
            BidSampling::CenterProjection => dom.project(active.balls[id].center.bid()),
        }
        .ok_or_else(|| Error::Invariant("empty domain after length check".into()))?;
        return Ok((id, bid));
    }
    Err(Error::Invariant(format!("no relevant ball for context {context:?}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditConfig {
    /// Bid-context dimension `d` (one bid coordinate plus `d - 1` context features).
    pub dim: usize,
    /// Planning horizon `T` entering the confidence radius.
    pub horizon: f64,
    /// Maximum number of selections awaiting feedback (`W`).
    pub batch_size: usize,
    /// Rewards must lie in `[0, reward_max]`.
    pub reward_max: f64,
    pub sampling: BidSampling,
    pub seed: u64,
}

impl BanditConfig {
    pub fn new(dim: usize, horizon: f64, batch_size: usize, seed: u64) -> Self {
        Self {
            dim,
            horizon,
            batch_size,
            reward_max: 0.5,
            sampling: BidSampling::Uniform,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingSelection {
    pub round: u64,
    pub ball: BallId,
    pub point: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub round: u64,
    pub ball: BallId,
    pub bid: f64,
}

/// What happened to one payoff during a batch update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateEvent {
    pub round: u64,
    pub ball: BallId,
    /// Confidence radius of the selected ball before this payoff was counted.
    pub confidence: f64,
    pub radius: f64,
    pub in_domain: bool,
    pub child: Option<BallId>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActivationReport {
    pub activated: Vec<BallId>,
    pub events: Vec<UpdateEvent>,
}

/// Single-threaded zooming bandit state machine.
#[derive(Debug, Clone)]
pub struct ZoomingBandit {
    config: BanditConfig,
    active: ActiveSet,
    pending: Vec<PendingSelection>,
    frozen: Option<FrozenIndices>,
    next_round: u64,
    rng: ChaCha8Rng,
}

impl ZoomingBandit {
    pub fn new(config: BanditConfig) -> Result<Self> {
        let active = ActiveSet::new(config.dim, config.horizon)?;
        Self::with_active_set(config, active)
    }

    /// Resumes from an existing covering, e.g. a snapshot.
    pub fn with_active_set(config: BanditConfig, active: ActiveSet) -> Result<Self> {
        if config.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(config.reward_max > 0.0) {
            return Err(Error::InvalidArgument("reward support must be positive".into()));
        }
        if active.dim() != config.dim {
            return Err(Error::InvalidArgument("active set dimension differs from config".into()));
        }
        confidence_radius(0, config.horizon)?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            active,
            pending: Vec::new(),
            frozen: None,
            next_round: 0,
        })
    }

    pub fn config(&self) -> &BanditConfig {
        &self.config
    }

    pub fn active_set(&self) -> &ActiveSet {
        &self.active
    }

    pub fn pending(&self) -> &[PendingSelection] {
        &self.pending
    }

    /// Indices of the current batch, freezing them first if no selection has
    /// been made since the last update.
    pub fn frozen_indices(&mut self) -> Result<&mut FrozenIndices> {
        if self.frozen.is_none() {
            self.frozen = Some(FrozenIndices::new(&self.active)?);
        }
        Ok(self.frozen.as_mut().expect("just set"))
    }

    pub fn select(&mut self, context: &[f64]) -> Result<Selection> {
        if self.pending.len() >= self.config.batch_size {
            return Err(Error::InvalidArgument(format!(
                "batch of {} selections is full; observe it before selecting again",
                self.config.batch_size
            )));
        }
        if self.frozen.is_none() {
            self.frozen = Some(FrozenIndices::new(&self.active)?);
        }
        let frozen = self.frozen.as_mut().expect("just set");
        let (ball, bid) = select_in(&self.active, frozen, context, self.config.sampling, &mut self.rng)?;
        let round = self.next_round;
        self.next_round += 1;
        self.pending.push(PendingSelection {
            round,
            ball,
            point: Point::from_bid_context(bid, context)?,
        });
        Ok(Selection { round, ball, bid })
    }

    /// Folds a batch of `(round, reward)` payoffs into the covering, in round
    /// order. Pending selections without a payoff are discarded with the batch.
    pub fn observe_batch(&mut self, payoffs: &[(u64, f64)]) -> Result<ActivationReport> {
        let mut ordered: Vec<(usize, f64)> = Vec::with_capacity(payoffs.len());
        for &(round, reward) in payoffs {
            let pos = self
                .pending
                .iter()
                .position(|p| p.round == round)
                .ok_or_else(|| Error::InvalidArgument(format!("round {round} has no pending selection")))?;
            if !(0.0..=self.config.reward_max).contains(&reward) {
                return Err(Error::OutOfRange(format!(
                    "reward {reward} for round {round} outside [0, {}]",
                    self.config.reward_max
                )));
            }
            if ordered.iter().any(|&(p, _)| p == pos) {
                return Err(Error::InvalidArgument(format!("duplicate payoff for round {round}")));
            }
            ordered.push((pos, reward));
        }
        ordered.sort_by_key(|&(pos, _)| self.pending[pos].round);

        let mut report = ActivationReport::default();
        let pending = std::mem::take(&mut self.pending);
        for (pos, reward) in ordered {
            let sel = &pending[pos];
            let (confidence, radius) = {
                let b = &self.active.balls[sel.ball];
                (confidence_radius(b.samples, self.config.horizon)?, b.radius())
            };
            let in_domain = self.active.in_domain(sel.ball, sel.point.coords())?;
            let child = (confidence <= radius && in_domain)
                .then(|| self.active.activate(sel.ball, sel.point.clone()));
            let ball = &mut self.active.balls[sel.ball];
            ball.samples += 1;
            ball.reward_sum += reward;
            if let Some(c) = child {
                report.activated.push(c);
            }
            report.events.push(UpdateEvent {
                round: sel.round,
                ball: sel.ball,
                confidence,
                radius,
                in_domain,
                child,
            });
        }
        self.frozen = None;
        Ok(report)
    }
}

/// `C * (T^(-1/(d_c+2)) ln T + W T^(-3/(d_c+2)))`, the shape of the average
/// regret guarantee with an explicit constant.
pub fn theoretical_regret_bound(horizon: f64, batch: u32, zooming_dim: u32, constant: f64) -> Result<f64> {
    if !(horizon >= 2.0) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be at least 2")));
    }
    if batch == 0 || zooming_dim == 0 {
        return Err(Error::InvalidArgument("batch and zooming dimension must be positive".into()));
    }
    if !(constant > 0.0) {
        return Err(Error::InvalidArgument(format!("bound constant {constant} must be positive")));
    }
    let k = zooming_dim as f64 + 2.0;
    Ok(constant * (horizon.powf(-1.0 / k) * horizon.ln() + batch as f64 * horizon.powf(-3.0 / k)))
}
