//! Customer and shop valuations.
//!
//! A customer's valuation of bundle `b` is a cubic polynomial in the bundle's
//! binary vector `x`:
//!
//! ```text
//! v(b) = a0 + Σ a_i x_i + Σ_{i<j} a_ij x_i x_j + Σ_{i<j<k} a_ijk x_i x_j x_k
//! ```
//!
//! Because `x_i ∈ {0, 1}`, `v(b)` is the sum of every coefficient whose index
//! set is a subset of `b`. All bundle valuations are therefore a linear
//! transform `T a` of the coefficient vector, and a multivariate normal
//! population over coefficients induces a multivariate normal over valuations.
//!
//! The shop values a bundle at the sum of its unit costs minus a discount that
//! depends only on bundle size and vanishes above three goods.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{all_bundles, bundle_index, check_catalog, Bundle, Price};
use crate::error::{Error, Result};
use crate::mvn::{psd_factor, repair_correlation, MvnSampler};
use crate::seeds::{self, SimRng};

/// Ordering of polynomial coefficients: constant, linear `i`, quadratic
/// `i<j`, cubic `i<j<k`, each group lexicographic. Every coefficient is
/// identified by the set of goods it multiplies.
#[derive(Clone, Debug)]
pub struct CoefficientLayout {
    n: usize,
    masks: Vec<u32>,
    index_by_mask: Vec<u32>,
}

const NO_INDEX: u32 = u32::MAX;

impl CoefficientLayout {
    pub fn new(n: usize) -> Result<Self> {
        check_catalog(n)?;
        let mut masks = vec![0u32];
        masks.extend((0..n).map(|i| 1 << i));
        for i in 0..n {
            for j in i + 1..n {
                masks.push((1 << i) | (1 << j));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    masks.push((1 << i) | (1 << j) | (1 << k));
                }
            }
        }
        let mut index_by_mask = vec![NO_INDEX; 1 << n];
        for (idx, &m) in masks.iter().enumerate() {
            index_by_mask[m as usize] = idx as u32;
        }
        Ok(Self {
            n,
            masks,
            index_by_mask,
        })
    }

    pub fn catalog_size(&self) -> usize {
        self.n
    }

    /// Number of coefficients: `1 + n + C(n,2) + C(n,3)`.
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Goods multiplied by coefficient `idx`, as a bit mask.
    pub fn mask(&self, idx: usize) -> u32 {
        self.masks[idx]
    }

    pub fn order(&self, idx: usize) -> usize {
        self.masks[idx].count_ones() as usize
    }

    /// Index of the coefficient over `goods` (distinct, at most three).
    pub fn index_of(&self, goods: &[usize]) -> Option<usize> {
        let mut mask = 0u32;
        for &g in goods {
            if g >= self.n || mask & (1 << g) != 0 {
                return None;
            }
            mask |= 1 << g;
        }
        match self.index_by_mask[mask as usize] {
            NO_INDEX => None,
            i => Some(i as usize),
        }
    }
}

/// Coefficients of one customer's valuation polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    n: usize,
    values: Vec<f64>,
}

impl CoefficientVector {
    pub fn zeros(layout: &CoefficientLayout) -> Self {
        Self {
            n: layout.n,
            values: vec![0.0; layout.len()],
        }
    }

    pub fn from_values(layout: &CoefficientLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Usage(format!(
                "expected {} coefficients, got {}",
                layout.len(),
                values.len()
            )));
        }
        Ok(Self {
            n: layout.n,
            values,
        })
    }

    pub fn catalog_size(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, layout: &CoefficientLayout, goods: &[usize]) -> f64 {
        layout.index_of(goods).map_or(0.0, |i| self.values[i])
    }

    pub fn set(&mut self, layout: &CoefficientLayout, goods: &[usize], value: f64) -> Result<()> {
        let i = layout
            .index_of(goods)
            .ok_or_else(|| Error::Usage(format!("no coefficient for goods {goods:?}")))?;
        self.values[i] = value;
        Ok(())
    }
}

/// The 0/1 matrix mapping coefficients to bundle valuations. Row `b` has a one
/// in every column whose goods are a subset of `b`, including the constant.
#[derive(Clone, Debug)]
pub struct Transform {
    layout: CoefficientLayout,
}

pub fn build_transform(n: usize) -> Result<Transform> {
    Ok(Transform {
        layout: CoefficientLayout::new(n)?,
    })
}

impl Transform {
    pub fn layout(&self) -> &CoefficientLayout {
        &self.layout
    }

    pub fn rows(&self) -> usize {
        (1 << self.layout.n) - 1
    }

    pub fn cols(&self) -> usize {
        self.layout.len()
    }

    pub fn entry(&self, b: Bundle, coefficient: usize) -> u8 {
        u8::from(self.layout.mask(coefficient) & !b.bits() == 0)
    }

    pub fn row(&self, b: Bundle) -> Vec<f64> {
        (0..self.cols()).map(|c| f64::from(self.entry(b, c))).collect()
    }

    /// Dense `(2^n - 1) x len` matrix, rows in [`all_bundles`] order.
    pub fn dense(&self) -> DMatrix<f64> {
        let bundles = all_bundles(self.layout.n).expect("layout has a valid catalog");
        DMatrix::from_fn(bundles.len(), self.cols(), |r, c| {
            f64::from(self.entry(bundles[r], c))
        })
    }

    /// `T a` for all bundles, in [`all_bundles`] order.
    ///
    /// Computed as a subset-sum (zeta) transform, `O(n 2^n)`.
    pub fn apply(&self, coefficients: &[f64]) -> Vec<f64> {
        let n = self.layout.n;
        let mut acc = vec![0.0; 1 << n];
        for (idx, &a) in coefficients.iter().enumerate() {
            acc[self.layout.mask(idx) as usize] += a;
        }
        for bit in 0..n {
            let step = 1usize << bit;
            for mask in 0..acc.len() {
                if mask & step != 0 {
                    acc[mask] += acc[mask ^ step];
                }
            }
        }
        acc.remove(0);
        acc
    }

    /// `T_B Σ T_B'` restricted to the rows for `bundles`.
    pub fn covariance_block(&self, sigma: &DMatrix<f64>, bundles: &[Bundle]) -> DMatrix<f64> {
        let t = DMatrix::from_fn(bundles.len(), self.cols(), |r, c| {
            f64::from(self.entry(bundles[r], c))
        });
        &t * sigma * t.transpose()
    }
}

/// Uniform interval `[lo, hi]`.
pub type Interval = [f64; 2];

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: Interval) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn check_interval(name: &str, [lo, hi]: Interval) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo <= hi {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be a finite interval with lo <= hi")))
    }
}

/// Shop cost model parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShopParams {
    /// Range for each good's unit cost.
    pub unit_cost: Interval,
    /// Discount for bundles of size 1, 2 and 3; larger bundles get none.
    pub discount: [f64; 3],
}

impl Default for ShopParams {
    fn default() -> Self {
        Self {
            unit_cost: [200.0, 300.0],
            discount: [0.0, 40.0, 80.0],
        }
    }
}

impl ShopParams {
    pub fn validate(&self) -> Result<()> {
        check_interval("unit_cost", self.unit_cost)?;
        if self.unit_cost[0] <= 0.0 {
            return Err(Error::Config("unit costs must be positive".into()));
        }
        for (k, &d) in self.discount.iter().enumerate() {
            let size = (k + 1) as f64;
            if !(d >= 0.0) || d >= size * self.unit_cost[0] {
                return Err(Error::Config(format!(
                    "discount for size {} must be in [0, {})",
                    k + 1,
                    size * self.unit_cost[0]
                )));
            }
        }
        Ok(())
    }
}

/// The shop's bundle valuation: additive unit costs minus a size discount.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShopValuation {
    unit_costs: Vec<f64>,
    discount: [f64; 3],
}

impl ShopValuation {
    pub fn new(unit_costs: Vec<f64>, discount: [f64; 3]) -> Result<Self> {
        check_catalog(unit_costs.len())?;
        if unit_costs.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::Config("unit costs must be positive and finite".into()));
        }
        let mut sorted = unit_costs.clone();
        sorted.sort_by(f64::total_cmp);
        for (k, &d) in discount.iter().enumerate() {
            let floor: f64 = sorted.iter().take(k + 1).sum();
            if !(d >= 0.0) || (k < sorted.len() && d >= floor) {
                return Err(Error::Config(format!(
                    "discount for size {} must be nonnegative and below {floor}",
                    k + 1
                )));
            }
        }
        Ok(Self {
            unit_costs,
            discount,
        })
    }

    pub fn sample<R: Rng + ?Sized>(n: usize, params: &ShopParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let costs = (0..n).map(|_| uniform(rng, params.unit_cost)).collect();
        Self::new(costs, params.discount)
    }

    pub fn unit_costs(&self) -> &[f64] {
        &self.unit_costs
    }

    pub fn discount(&self, size: usize) -> f64 {
        match size {
            1..=3 => self.discount[size - 1],
            _ => 0.0,
        }
    }

    pub fn value(&self, b: Bundle) -> f64 {
        let sum: f64 = b.goods().map(|g| self.unit_costs[g.index()]).sum();
        sum - self.discount(b.len())
    }
}

pub fn shop_value(sv: &ShopValuation, b: Bundle) -> f64 {
    sv.value(b)
}

/// One customer's valuation of every bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct CustomerValuation {
    n: usize,
    values: Vec<f64>,
}

impl CustomerValuation {
    /// `values` in [`all_bundles`] order.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        check_catalog(n)?;
        if values.len() != (1 << n) - 1 {
            return Err(Error::Usage(format!(
                "expected {} bundle values, got {}",
                (1 << n) - 1,
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn from_coefficients(t: &Transform, a: &CoefficientVector) -> Self {
        Self {
            n: t.layout.n,
            values: t.apply(a.as_slice()),
        }
    }

    pub fn catalog_size(&self) -> usize {
        self.n
    }

    pub fn value(&self, b: Bundle) -> f64 {
        self.values[bundle_index(b)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Gains from trade: customer valuation minus shop valuation.
pub fn gains(cv: &CustomerValuation, sv: &ShopValuation, b: Bundle) -> f64 {
    cv.value(b) - sv.value(b)
}

/// Customer's net monetary value of buying `b` at `p`.
pub fn customer_net(cv: &CustomerValuation, b: Bundle, p: Price) -> f64 {
    cv.value(b) - p
}

/// Shop's net monetary value of selling `b` at `p`.
pub fn shop_net(sv: &ShopValuation, b: Bundle, p: Price) -> f64 {
    p - sv.value(b)
}

/// Bundles with maximal gains from trade, plus the extreme gains.
#[derive(Clone, Debug, PartialEq)]
pub struct BestBundles {
    pub bundles: Vec<Bundle>,
    pub max_gains: f64,
    pub min_gains: f64,
}

impl BestBundles {
    pub fn contains(&self, b: Bundle) -> bool {
        self.bundles.binary_search(&b).is_ok()
    }
}

/// Exhaustive scan over all bundles; every tie for the maximum is kept.
pub fn best_bundles(cv: &CustomerValuation, sv: &ShopValuation) -> BestBundles {
    let mut best = Vec::new();
    let mut max_gains = f64::NEG_INFINITY;
    let mut min_gains = f64::INFINITY;
    for b in all_bundles(cv.n).expect("valuation has a valid catalog") {
        let g = gains(cv, sv, b);
        min_gains = min_gains.min(g);
        if g > max_gains {
            max_gains = g;
            best.clear();
            best.push(b);
        } else if g == max_gains {
            best.push(b);
        }
    }
    BestBundles {
        bundles: best,
        max_gains,
        min_gains,
    }
}

/// Parameters of the coefficient distribution family.
///
/// Goods are partitioned into consecutive blocks. A coefficient is "within" a
/// block when all of its goods belong to that block, and "cross" otherwise.
/// Within-block coefficients are strongly positively correlated with each
/// other; every other pair is weakly correlated. The correlation matrix is
/// fixed by `correlation_seed`; means and standard deviations are redrawn for
/// every population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationParams {
    pub blocks: Vec<usize>,
    /// Magnitude multipliers for linear, quadratic and cubic coefficients.
    pub order_scale: [f64; 3],
    pub constant_mean: f64,
    pub constant_std: f64,
    pub linear_mean: Interval,
    /// Mean range of within-block interaction coefficients, before `order_scale`.
    pub within_mean: Interval,
    /// Mean range of cross-block interaction coefficients, before `order_scale`.
    pub cross_mean: Interval,
    /// Standard deviation range for non-constant coefficients, before `order_scale`.
    pub std_dev: Interval,
    pub within_corr: Interval,
    pub cross_corr: Interval,
    pub correlation_seed: u64,
    pub shop: ShopParams,
}

impl Default for PopulationParams {
    fn default() -> Self {
        Self::for_catalog(6)
    }
}

impl PopulationParams {
    /// Defaults with three blocks as even as possible (`3, 3, 4` for ten goods).
    pub fn for_catalog(n: usize) -> Self {
        let base = n / 3;
        let blocks = if n >= 3 {
            vec![base, base, n - 2 * base]
        } else {
            vec![n]
        };
        Self {
            blocks,
            order_scale: [1.0, 0.3, 0.1],
            constant_mean: 0.0,
            constant_std: 0.0,
            linear_mean: [200.0, 400.0],
            within_mean: [600.0, 1200.0],
            cross_mean: [-900.0, -500.0],
            std_dev: [30.0, 60.0],
            within_corr: [0.5, 0.9],
            cross_corr: [-0.2, 0.2],
            correlation_seed: 0x5EED,
            shop: ShopParams::default(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        check_catalog(n)?;
        if self.blocks.iter().any(|&s| s == 0) || self.blocks.iter().sum::<usize>() != n {
            return Err(Error::Config(format!(
                "blocks {:?} do not partition {n} goods",
                self.blocks
            )));
        }
        for (name, iv) in [
            ("linear_mean", self.linear_mean),
            ("within_mean", self.within_mean),
            ("cross_mean", self.cross_mean),
            ("std_dev", self.std_dev),
            ("within_corr", self.within_corr),
            ("cross_corr", self.cross_corr),
        ] {
            check_interval(name, iv)?;
        }
        if self.std_dev[0] < 0.0 || self.constant_std < 0.0 {
            return Err(Error::Config("standard deviations must be nonnegative".into()));
        }
        for iv in [self.within_corr, self.cross_corr] {
            if iv[0] < -1.0 || iv[1] > 1.0 {
                return Err(Error::Config("correlations must lie in [-1, 1]".into()));
            }
        }
        if self.order_scale.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::Config("order scales must be nonnegative".into()));
        }
        self.shop.validate()
    }

    fn block_masks(&self) -> Vec<u32> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|&len| {
                let m = ((1u32 << len) - 1) << start;
                start += len;
                m
            })
            .collect()
    }

    /// Block owning coefficient `idx`, or `None` for the constant and cross terms.
    fn coefficient_block(&self, layout: &CoefficientLayout, idx: usize) -> Option<usize> {
        let m = layout.mask(idx);
        if m == 0 {
            return None;
        }
        self.block_masks().iter().position(|&bm| m & !bm == 0)
    }

    /// Goods of each block as bundles.
    pub fn block_bundles(&self, n: usize) -> Result<Vec<Bundle>> {
        self.validate(n)?;
        self.block_masks()
            .into_iter()
            .map(|m| Bundle::new(n, m))
            .collect()
    }
}

/// Builds the fixed coefficient correlation matrix for `params`.
pub fn build_correlation(n: usize, params: &PopulationParams) -> Result<DMatrix<f64>> {
    params.validate(n)?;
    let layout = CoefficientLayout::new(n)?;
    let dim = layout.len();
    let groups: Vec<Option<usize>> = (0..dim).map(|i| params.coefficient_block(&layout, i)).collect();
    let mut rng = seeds::rng_from(params.correlation_seed, &[seeds::tag::CORRELATION, n as u64]);
    let mut corr = DMatrix::identity(dim, dim);
    for i in 0..dim {
        for j in i + 1..dim {
            let same = groups[i].is_some() && groups[i] == groups[j];
            let c = uniform(&mut rng, if same { params.within_corr } else { params.cross_corr });
            corr[(i, j)] = c;
            corr[(j, i)] = c;
        }
    }
    repair_correlation(&corr)
}

/// A multivariate normal distribution over valuation coefficients.
#[derive(Clone, Debug)]
pub struct PreferencePopulation {
    transform: Transform,
    mu: Vec<f64>,
    std_devs: Vec<f64>,
    corr: DMatrix<f64>,
    sigma: DMatrix<f64>,
    sampler: MvnSampler,
}

/// Attempts before giving up on a population whose covariance cannot be factored.
const MAX_POPULATION_DRAWS: usize = 8;

impl PreferencePopulation {
    /// Assembles a population; `sigma = D corr D` with `D = diag(std_devs)`.
    pub fn from_parts(
        n: usize,
        mu: Vec<f64>,
        std_devs: Vec<f64>,
        corr: DMatrix<f64>,
    ) -> Result<Self> {
        let transform = build_transform(n)?;
        let dim = transform.cols();
        if mu.len() != dim || std_devs.len() != dim || corr.nrows() != dim || corr.ncols() != dim {
            return Err(Error::Config(format!(
                "population parts do not match {dim} coefficients"
            )));
        }
        let sigma = DMatrix::from_fn(dim, dim, |i, j| std_devs[i] * corr[(i, j)] * std_devs[j]);
        let factor = psd_factor(&sigma)?;
        let sampler = MvnSampler::from_factor(mu.clone(), &factor);
        Ok(Self {
            transform,
            mu,
            std_devs,
            corr,
            sigma,
            sampler,
        })
    }

    pub fn catalog_size(&self) -> usize {
        self.transform.layout.n
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn std_devs(&self) -> &[f64] {
        &self.std_devs
    }

    pub fn corr(&self) -> &DMatrix<f64> {
        &self.corr
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Expected valuation of every bundle, `T mu`.
    pub fn mean_values(&self) -> Vec<f64> {
        self.transform.apply(&self.mu)
    }

    /// Mean and covariance of the valuations of `bundles`.
    pub fn value_marginal(&self, bundles: &[Bundle]) -> (Vec<f64>, DMatrix<f64>) {
        let means = bundles
            .iter()
            .map(|&b| {
                (0..self.transform.cols())
                    .filter(|&c| self.transform.entry(b, c) == 1)
                    .map(|c| self.mu[c])
                    .sum()
            })
            .collect();
        (means, self.transform.covariance_block(&self.sigma, bundles))
    }

    pub fn sample_coefficients<R: Rng + ?Sized>(&self, rng: &mut R) -> CoefficientVector {
        CoefficientVector {
            n: self.catalog_size(),
            values: self.sampler.sample(rng),
        }
    }
}

/// Draws one population: means and standard deviations from `params` around
/// the fixed correlation matrix.
pub fn sample_population(n: usize, seed: u64, params: &PopulationParams) -> Result<PreferencePopulation> {
    let corr = build_correlation(n, params)?;
    let layout = CoefficientLayout::new(n)?;
    let mut rng: SimRng = seeds::rng_from(seed, &[seeds::tag::POPULATION]);
    for _ in 0..MAX_POPULATION_DRAWS {
        let mut mu = Vec::with_capacity(layout.len());
        let mut sd = Vec::with_capacity(layout.len());
        for idx in 0..layout.len() {
            let order = layout.order(idx);
            if order == 0 {
                mu.push(params.constant_mean);
                sd.push(params.constant_std);
                continue;
            }
            let scale = params.order_scale[order - 1];
            let mean_range = if order == 1 {
                params.linear_mean
            } else if params.coefficient_block(&layout, idx).is_some() {
                params.within_mean
            } else {
                params.cross_mean
            };
            mu.push(scale * uniform(&mut rng, mean_range));
            sd.push(scale * uniform(&mut rng, params.std_dev));
        }
        match PreferencePopulation::from_parts(n, mu, sd, corr.clone()) {
            Ok(pop) => return Ok(pop),
            Err(Error::NotPsd) => log::warn!("population covariance not PSD, redrawing"),
            Err(e) => return Err(e),
        }
    }
    Err(Error::NotPsd)
}

/// Draws one customer: `a ~ N(mu, Σ)`, valuations `T a`.
pub fn sample_customer<R: Rng + ?Sized>(pop: &PreferencePopulation, rng: &mut R) -> CustomerValuation {
    let a = pop.sample_coefficients(rng);
    CustomerValuation::from_coefficients(&pop.transform, &a)
}

/// Serializable description of a realized population and shop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationRecord {
    pub n: usize,
    pub seed: u64,
    pub params: PopulationParams,
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    pub unit_costs: Vec<f64>,
}

impl PopulationRecord {
    pub fn new(seed: u64, params: &PopulationParams, pop: &PreferencePopulation, shop: &ShopValuation) -> Self {
        Self {
            n: pop.catalog_size(),
            seed,
            params: params.clone(),
            means: pop.mu.clone(),
            std_devs: pop.std_devs.clone(),
            unit_costs: shop.unit_costs.clone(),
        }
    }

    /// Rebuilds the population and shop this record describes.
    pub fn restore(&self) -> Result<(PreferencePopulation, ShopValuation)> {
        let corr = build_correlation(self.n, &self.params)?;
        let pop = PreferencePopulation::from_parts(self.n, self.means.clone(), self.std_devs.clone(), corr)?;
        let shop = ShopValuation::new(self.unit_costs.clone(), self.params.shop.discount)?;
        Ok((pop, shop))
    }
}
