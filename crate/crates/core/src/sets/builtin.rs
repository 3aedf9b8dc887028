use super::{any_negative, le_tol, FlowSet, GainSpec, SetSpec, Support};
use crate::error::{Error, Result};

/// Concave, nondecreasing gain `h` with `h(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Gain {
    /// `h(w) = w / (1 + w)`.
    Rational,
    Tabulated(PiecewiseLinearGain),
}

impl Gain {
    pub fn eval(&self, w: f64) -> f64 {
        match self {
            Gain::Rational => w / (1.0 + w),
            Gain::Tabulated(pl) => pl.eval(w),
        }
    }
}

/// Piecewise-linear concave gain starting at the origin.
///
/// `slopes[k]` applies on `[knots[k], knots[k+1])` where `knots = [0, breakpoints...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearGain {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseLinearGain {
    /// Slopes must be strictly decreasing and end nonnegative; breakpoints
    /// strictly increasing and positive, one fewer than the slopes.
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if slopes.is_empty() || slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "piecewise-linear gain needs one more slope than breakpoints (got {} slopes, {} breakpoints)",
                slopes.len(),
                breakpoints.len()
            )));
        }
        if slopes.iter().chain(&breakpoints).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "gain table entries must be finite".into(),
            ));
        }
        if slopes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter(
                "gain slopes must be strictly decreasing".into(),
            ));
        }
        if *slopes.last().unwrap() < 0.0 {
            return Err(Error::InvalidParameter(
                "gain slopes must be nonnegative".into(),
            ));
        }
        if breakpoints.first().is_some_and(|b| *b <= 0.0)
            || breakpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidParameter(
                "gain breakpoints must be positive and strictly increasing".into(),
            ));
        }
        let mut knots = Vec::with_capacity(slopes.len());
        let mut values = Vec::with_capacity(slopes.len());
        knots.push(0.0);
        values.push(0.0);
        for (k, b) in breakpoints.iter().enumerate() {
            let v = values[k] + slopes[k] * (b - knots[k]);
            knots.push(*b);
            values.push(v);
        }
        Ok(Self {
            knots,
            values,
            slopes,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.knots[1..]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn eval(&self, w: f64) -> f64 {
        let w = w.max(0.0);
        let k = self.knots.partition_point(|t| *t <= w) - 1;
        self.values[k] + self.slopes[k] * (w - self.knots[k])
    }
}

/// Directed two-node edge: put in `w ∈ [0, capacity]` units at the first node
/// and receive `h(w)` at the second. The flow set is the downward closure of
/// `{(-w, h(w))}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CappedConcaveEdge {
    gain: Gain,
    capacity: f64,
}

impl CappedConcaveEdge {
    pub fn new(gain: Gain, capacity: f64) -> Result<Self> {
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "capacity must be positive, got {capacity}"
            )));
        }
        Ok(Self { gain, capacity })
    }

    pub fn rational(capacity: f64) -> Result<Self> {
        Self::new(Gain::Rational, capacity)
    }

    pub fn gain(&self) -> &Gain {
        &self.gain
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    fn best_input(&self, xi: &[f64]) -> f64 {
        let (a, b) = (xi[0], xi[1]);
        match &self.gain {
            Gain::Rational => {
                if a == 0.0 {
                    if b > 0.0 {
                        self.capacity
                    } else {
                        0.0
                    }
                } else {
                    // stationarity of -a w + b w/(1+w)
                    ((b / a).sqrt() - 1.0).clamp(0.0, self.capacity)
                }
            }
            Gain::Tabulated(pl) => {
                // concave piecewise-linear objective peaks at a knot or an end
                let objective = |w: f64| -a * w + b * pl.eval(w);
                let mut best_w = 0.0;
                let mut best = 0.0;
                let candidates = pl
                    .breakpoints()
                    .iter()
                    .copied()
                    .filter(|w| *w < self.capacity)
                    .chain(std::iter::once(self.capacity));
                for w in candidates {
                    let v = objective(w);
                    if v > best {
                        best = v;
                        best_w = w;
                    }
                }
                best_w
            }
        }
    }
}

impl FlowSet for CappedConcaveEdge {
    fn dim(&self) -> usize {
        2
    }

    fn upper_bound(&self) -> Vec<f64> {
        vec![0.0, self.gain.eval(self.capacity)]
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        if !le_tol(x[0], 0.0, tol) {
            return false;
        }
        let w = (-x[0]).clamp(0.0, self.capacity);
        le_tol(x[1], self.gain.eval(w), tol)
    }

    fn support_of(&self, price: &[f64]) -> Support {
        if any_negative(price) {
            return Support::unbounded();
        }
        let w = self.best_input(price);
        let out = self.gain.eval(w);
        Support::attained(-price[0] * w + price[1] * out, vec![-w, out])
    }

    fn spec(&self) -> Option<SetSpec> {
        let gain = match &self.gain {
            Gain::Rational => GainSpec::Rational,
            Gain::Tabulated(pl) => GainSpec::Tabulated {
                breakpoints: pl.breakpoints().to_vec(),
                slopes: pl.slopes().to_vec(),
            },
        };
        Some(SetSpec::CappedConcave {
            capacity: self.capacity,
            gain,
        })
    }
}

/// One orderbook tick: trade up to `cap` units of the first asset for the
/// second at a fixed `price`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearTickEdge {
    price: f64,
    cap: f64,
}

impl LinearTickEdge {
    pub fn new(price: f64, cap: f64) -> Result<Self> {
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tick price must be positive, got {price}"
            )));
        }
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tick capacity must be positive, got {cap}"
            )));
        }
        Ok(Self { price, cap })
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }
}

impl FlowSet for LinearTickEdge {
    fn dim(&self) -> usize {
        2
    }

    fn upper_bound(&self) -> Vec<f64> {
        vec![0.0, self.price * self.cap]
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        if !le_tol(x[0], 0.0, tol) {
            return false;
        }
        let w = (-x[0]).clamp(0.0, self.cap);
        le_tol(x[1], self.price * w, tol)
    }

    fn support_of(&self, price: &[f64]) -> Support {
        if any_negative(price) {
            return Support::unbounded();
        }
        let margin = self.price * price[1] - price[0];
        if margin > 0.0 {
            Support::attained(self.cap * margin, vec![-self.cap, self.price * self.cap])
        } else {
            Support::attained(0.0, vec![0.0, 0.0])
        }
    }

    fn spec(&self) -> Option<SetSpec> {
        Some(SetSpec::LinearTick {
            price: self.price,
            cap: self.cap,
        })
    }
}

/// Constant-product market with reserves `(R₁, R₂)`:
/// `T = { x : (R₁ - x₁)(R₂ - x₂) >= R₁R₂, x <= R }`, where `x` is the trade
/// received from the pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductMarketEdge {
    reserves: [f64; 2],
}

impl ProductMarketEdge {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        if !(r1.is_finite() && r2.is_finite() && r1 > 0.0 && r2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reserves must be positive, got ({r1}, {r2})"
            )));
        }
        Ok(Self { reserves: [r1, r2] })
    }

    pub fn reserves(&self) -> [f64; 2] {
        self.reserves
    }

    pub fn invariant(&self) -> f64 {
        self.reserves[0] * self.reserves[1]
    }
}

impl FlowSet for ProductMarketEdge {
    fn dim(&self) -> usize {
        2
    }

    fn upper_bound(&self) -> Vec<f64> {
        self.reserves.to_vec()
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        let [r1, r2] = self.reserves;
        if !le_tol(x[0], r1, tol) || !le_tol(x[1], r2, tol) {
            return false;
        }
        let k = self.invariant();
        let lhs = (r1 - x[0]).max(0.0) * (r2 - x[1]).max(0.0);
        // k <= lhs, i.e. -lhs <= -k
        le_tol(-lhs, -k, tol)
    }

    fn support_of(&self, price: &[f64]) -> Support {
        if any_negative(price) {
            return Support::unbounded();
        }
        let [r1, r2] = self.reserves;
        let (a, b) = (price[0], price[1]);
        match (a > 0.0, b > 0.0) {
            (false, false) => Support::attained(0.0, vec![0.0, 0.0]),
            // sup approached by draining the priced reserve with unbounded input
            (false, true) => Support::unattained(b * r2),
            (true, false) => Support::unattained(a * r1),
            (true, true) => {
                let k = self.invariant();
                let left = (k * b / a).sqrt(); // post-trade reserve of asset 1
                let x = vec![r1 - left, r2 - k / left];
                let value = ((a * r1).sqrt() - (b * r2).sqrt()).powi(2);
                Support::attained(value, x)
            }
        }
    }

    fn spec(&self) -> Option<SetSpec> {
        Some(SetSpec::ProductMarket {
            reserves: self.reserves,
        })
    }
}

/// One-dimensional `{ z : z <= cap }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLineEdge {
    cap: f64,
}

impl HalfLineEdge {
    pub fn new(cap: f64) -> Result<Self> {
        if !(cap.is_finite() && cap >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "half-line cap must be nonnegative, got {cap}"
            )));
        }
        Ok(Self { cap })
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }
}

impl FlowSet for HalfLineEdge {
    fn dim(&self) -> usize {
        1
    }

    fn upper_bound(&self) -> Vec<f64> {
        vec![self.cap]
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        le_tol(x[0], self.cap, tol)
    }

    fn support_of(&self, price: &[f64]) -> Support {
        if any_negative(price) {
            return Support::unbounded();
        }
        Support::attained(self.cap * price[0], vec![self.cap])
    }

    fn spec(&self) -> Option<SetSpec> {
        Some(SetSpec::HalfLine { cap: self.cap })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::DEFAULT_TOL;

    fn capped() -> CappedConcaveEdge {
        CappedConcaveEdge::rational(1.0).unwrap()
    }

    /// Dense grid over the input `w ∈ [0, cap]`.
    fn grid_support(h: impl Fn(f64) -> f64, cap: f64, xi: [f64; 2]) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 0..=10_000 {
            let w = cap * k as f64 / 10_000.0;
            let v = -xi[0] * w + xi[1] * h(w);
            if v > best.0 {
                best = (v, w);
            }
        }
        best
    }

    #[test]
    fn capped_membership_examples() {
        let t = capped();
        assert!(t.membership(&[-1.0, 0.5], DEFAULT_TOL).unwrap());
        assert!(t.membership(&[0.0, 0.0], DEFAULT_TOL).unwrap());
        assert!(!t.membership(&[-2.0, 1.0], DEFAULT_TOL).unwrap());
        assert!(!t.membership(&[0.1, 0.0], DEFAULT_TOL).unwrap());
        assert!(t.membership(&[-5.0, -3.0], DEFAULT_TOL).unwrap());
        assert!(matches!(
            t.membership(&[0.0], DEFAULT_TOL),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn capped_membership_matches_grid_definition() {
        // x ∈ T iff some w ∈ [0, 1] has x₁ <= -w and x₂ <= h(w)
        let t = capped();
        for i in 0..40 {
            for j in 0..40 {
                let x = [-2.0 + 2.2 * i as f64 / 39.0, -0.5 + 1.5 * j as f64 / 39.0];
                let grid = (0..=2000).any(|k| {
                    let w = k as f64 / 2000.0;
                    x[0] <= -w && x[1] <= w / (1.0 + w)
                });
                let exact = t.contains(&x, 0.0);
                // the grid can only miss boundary points, by at most one cell
                if grid != exact {
                    assert!(exact && !grid, "grid accepted a non-member {x:?}");
                    assert!(t.contains(&[x[0] - 1e-3, x[1] - 1e-3], 0.0));
                }
            }
        }
    }

    #[test]
    fn capped_support_examples() {
        let t = capped();
        let s = t.support(&[1.0, 4.0]).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        let x = s.maximizer.unwrap();
        assert!((x[0] + 1.0).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);

        let s = t.support(&[1.0, 1.0]).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.maximizer.unwrap(), vec![0.0, 0.0]);

        let s = t.support(&[0.0, 0.0]).unwrap();
        assert_eq!(s.value, 0.0);

        assert!(t.support(&[-1.0, 1.0]).unwrap().value.is_infinite());
    }

    #[test]
    fn capped_support_matches_grid_oracle() {
        let t = CappedConcaveEdge::rational(2.5).unwrap();
        for &(a, b) in &[
            (1.0, 4.0),
            (0.3, 0.9),
            (2.0, 3.0),
            (0.0, 1.0),
            (1.0, 1.5),
            (0.05, 7.0),
        ] {
            let (grid, _) = grid_support(|w| w / (1.0 + w), 2.5, [a, b]);
            let s = t.support_of(&[a, b]);
            assert!(s.value >= grid - 1e-12);
            assert!(
                s.value - grid < 1e-6,
                "({a},{b}): {} vs grid {grid}",
                s.value
            );
        }
    }

    #[test]
    fn tabulated_gain_validation() {
        assert!(PiecewiseLinearGain::new(vec![1.0], vec![2.0, 1.0]).is_ok());
        assert!(PiecewiseLinearGain::new(vec![1.0], vec![1.0, 1.0]).is_err());
        assert!(PiecewiseLinearGain::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(PiecewiseLinearGain::new(vec![1.0], vec![1.0, -0.5]).is_err());
        assert!(PiecewiseLinearGain::new(vec![2.0, 1.0], vec![3.0, 2.0, 1.0]).is_err());
        assert!(PiecewiseLinearGain::new(vec![], vec![]).is_err());
    }

    #[test]
    fn tabulated_support_matches_grid_oracle() {
        let pl = PiecewiseLinearGain::new(vec![0.5, 1.2], vec![1.5, 0.8, 0.1]).unwrap();
        let t = CappedConcaveEdge::new(Gain::Tabulated(pl.clone()), 2.0).unwrap();
        assert!((pl.eval(0.5) - 0.75).abs() < 1e-15);
        assert!((pl.eval(1.2) - (0.75 + 0.56)).abs() < 1e-12);
        for &(a, b) in &[(1.0, 1.0), (1.0, 0.9), (0.5, 1.0), (0.05, 1.0), (1.0, 0.2)] {
            let (grid, _) = grid_support(|w| pl.eval(w), 2.0, [a, b]);
            let v = t.support_of(&[a, b]).value;
            assert!((v - grid).abs() < 1e-9, "({a},{b}): {v} vs {grid}");
        }
    }

    #[test]
    fn linear_tick_support_closed_form() {
        let t = LinearTickEdge::new(0.9, 2.0).unwrap();
        let s = t.support_of(&[1.0, 2.0]);
        assert!((s.value - 2.0 * (1.8 - 1.0)).abs() < 1e-12);
        assert_eq!(t.support_of(&[1.0, 1.0]).value, 0.0);
        assert!(t.contains(&[-2.0, 1.8], DEFAULT_TOL));
        assert!(!t.contains(&[-1.0, 1.0], DEFAULT_TOL));
    }

    #[test]
    fn product_market_support_example() {
        let t = ProductMarketEdge::new(1.0, 1.0).unwrap();
        let s = t.support_of(&[1.0, 4.0]);
        assert!((s.value - 1.0).abs() < 1e-12);
        let x = s.maximizer.unwrap();
        assert!((x[0] + 1.0).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
        assert!(t.contains(&x, DEFAULT_TOL));
    }

    #[test]
    fn product_market_support_matches_boundary_grid() {
        // x₂ = R₂ - k/(R₁ - x₁) parametrised by the post-trade reserve u = R₁ - x₁
        let t = ProductMarketEdge::new(3.0, 50.0).unwrap();
        let k = 150.0;
        for &(a, b) in &[(1.0, 4.0), (2.0, 0.1), (0.7, 0.7), (1.0, 0.06)] {
            let mut grid = f64::NEG_INFINITY;
            for i in 0..=200_000 {
                let u = 1e-3 * 10f64.powf(6.0 * i as f64 / 200_000.0);
                grid = grid.max(a * (3.0 - u) + b * (50.0 - k / u));
            }
            let v = t.support_of(&[a, b]).value;
            let closed = a * 3.0 + b * 50.0 - 2.0 * (k * a * b).sqrt();
            assert!((v - closed).abs() < 1e-9 * (1.0 + closed.abs()));
            assert!(
                v >= grid - 1e-9 && v - grid < 1e-4 * (1.0 + v),
                "({a},{b}): {v} vs {grid}"
            );
        }
    }

    #[test]
    fn product_market_edge_prices() {
        let t = ProductMarketEdge::new(2.0, 5.0).unwrap();
        let s = t.support_of(&[0.0, 1.0]);
        assert_eq!(s.value, 5.0);
        assert!(s.maximizer.is_none());
        assert_eq!(t.support_of(&[0.0, 0.0]).value, 0.0);
        assert!(!t.contains(&[2.5, -100.0], DEFAULT_TOL));
        assert!(t.contains(&[-1.0, -1.0], DEFAULT_TOL));
        assert!(t.contains(&[0.0, 0.0], DEFAULT_TOL));
        assert!(!t.contains(&[0.1, 0.1], DEFAULT_TOL));
    }

    #[test]
    fn gauge_examples() {
        let t = capped();
        let g = t.gauge(&[-1.0, 0.5], 1e-10).unwrap();
        assert!((g - 1.0).abs() <= 1e-10);
        assert_eq!(t.gauge(&[0.0, 0.0], 1e-10).unwrap(), 0.0);
        assert_eq!(t.gauge(&[-1.0, -1.0], 1e-10).unwrap(), 0.0);
        let g = t.gauge(&[-0.5, 0.25], 1e-10).unwrap();
        assert!((g - 0.5).abs() <= 1e-10);
        assert!(t.gauge(&[0.0, 1.0], 1e-10).unwrap().is_infinite());
    }

    #[test]
    fn half_line_basics() {
        let t = HalfLineEdge::new(3.0).unwrap();
        assert_eq!(t.support_of(&[2.0]).value, 6.0);
        assert!(t.contains(&[3.0], 0.0));
        assert!(!t.contains(&[3.1], DEFAULT_TOL));
        assert!(t.support_of(&[-1.0]).value.is_infinite());
        assert!(HalfLineEdge::new(-1.0).is_err());
    }
}
