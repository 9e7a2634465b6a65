//! The two-species small-systems model.
//!
//! A system is built from a fixed total of `N` entities split between two
//! species. Each species' extensive variable has a relative spread that
//! falls as `1/sqrt(count)`, so sharpening one species necessarily blurs the
//! other. The product of spreads is bounded below by `2/N` times the species
//! constants, and the bound on the intensive variables turns into a
//! Heisenberg-like inequality once `(4/N) a b j_a j_b A B` is identified with
//! `hbar`.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::rng::SeedPath;
use crate::stats;

/// Count-independent constants of one species.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeciesShape {
    /// Spread constant `k`.
    pub k: f64,
    /// Linearization coefficient `l` (ratio of state-space derivatives of
    /// the intensive and extensive variables).
    pub l: f64,
    /// Intensive value (`a` or `b`).
    pub intensive: f64,
    /// Extensive value (`A` or `B`).
    pub extensive: f64,
}

impl SpeciesShape {
    pub fn new(k: f64, l: f64, intensive: f64, extensive: f64) -> Result<Self> {
        for (name, v) in [
            ("k", k),
            ("l", l),
            ("intensive_value", intensive),
            ("extensive_value", extensive),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be a positive finite real, got {v}")));
            }
        }
        Ok(SpeciesShape {
            k,
            l,
            intensive,
            extensive,
        })
    }

    /// All constants equal to one.
    pub fn unit() -> Self {
        SpeciesShape {
            k: 1.0,
            l: 1.0,
            intensive: 1.0,
            extensive: 1.0,
        }
    }

    /// `j = l * k`.
    pub fn j(&self) -> f64 {
        self.l * self.k
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelASpecies {
    count: u64,
    shape: SpeciesShape,
}

impl ModelASpecies {
    pub fn new(count: u64, shape: SpeciesShape) -> Result<Self> {
        if count == 0 {
            return Err(invalid("count", "a species needs at least one entity"));
        }
        // Re-validate in case the shape was built by struct literal.
        let shape = SpeciesShape::new(shape.k, shape.l, shape.intensive, shape.extensive)?;
        Ok(ModelASpecies { count, shape })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn shape(&self) -> &SpeciesShape {
        &self.shape
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelAConfig {
    total_n: u64,
    species_a: ModelASpecies,
    species_b: ModelASpecies,
    hbar: f64,
}

impl ModelAConfig {
    pub fn new(
        total_n: u64,
        species_a: ModelASpecies,
        species_b: ModelASpecies,
        hbar: f64,
    ) -> Result<Self> {
        if species_a.count + species_b.count != total_n {
            return Err(invalid(
                "total_n",
                format!(
                    "species counts {} + {} do not add up to {total_n}",
                    species_a.count, species_b.count
                ),
            ));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(invalid("hbar", format!("must be positive, got {hbar}")));
        }
        Ok(ModelAConfig {
            total_n,
            species_a,
            species_b,
            hbar,
        })
    }

    /// Splits `total_n` entities as `n_a` of species A and the rest of B.
    pub fn split(
        total_n: u64,
        n_a: u64,
        shape_a: SpeciesShape,
        shape_b: SpeciesShape,
        hbar: f64,
    ) -> Result<Self> {
        if n_a == 0 || n_a >= total_n {
            return Err(invalid("n_a", format!("must lie in 1..{total_n}, got {n_a}")));
        }
        Self::new(
            total_n,
            ModelASpecies::new(n_a, shape_a)?,
            ModelASpecies::new(total_n - n_a, shape_b)?,
            hbar,
        )
    }

    pub fn total_n(&self) -> u64 {
        self.total_n
    }

    pub fn species_a(&self) -> &ModelASpecies {
        &self.species_a
    }

    pub fn species_b(&self) -> &ModelASpecies {
        &self.species_b
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    fn sqrt_count_product(&self) -> f64 {
        // Exact in f64 for counts below 2^26 each.
        ((self.species_a.count as u128 * self.species_b.count as u128) as f64).sqrt()
    }
}

/// Left-hand side, lower bound, and whether the inequality holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub bound: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, bound: f64) -> Self {
        InequalityCheck {
            lhs,
            bound,
            holds: lhs >= bound,
        }
    }
}

/// `k * a / sqrt(count)`: the relative spread of a species' extensive variable.
pub fn relative_spread(species: &ModelASpecies) -> f64 {
    species.shape.k * species.shape.intensive / (species.count as f64).sqrt()
}

/// Product of the two relative spreads against its `(2/N) k_a k_b a b` floor.
///
/// Both sides share the numerator, so at an even split they are bit-equal.
pub fn uncertainty_product(config: &ModelAConfig) -> InequalityCheck {
    let (a, b) = (&config.species_a.shape, &config.species_b.shape);
    let numerator = a.k * b.k * a.intensive * b.intensive;
    InequalityCheck::new(
        numerator / config.sqrt_count_product(),
        2.0 * numerator / config.total_n as f64,
    )
}

/// The intensive-variable version of [`uncertainty_product`]:
/// `(l_a l_b / (a b)) dA dB >= (2/N) j_a j_b A B`.
///
/// The left side is evaluated in its simplified form `j_a j_b A B / sqrt(N_a N_b)`,
/// which is algebraically identical and keeps equality exact at an even split.
pub fn intensive_product_bound(config: &ModelAConfig) -> InequalityCheck {
    let (a, b) = (&config.species_a.shape, &config.species_b.shape);
    let numerator = a.j() * b.j() * a.extensive * b.extensive;
    InequalityCheck::new(
        numerator / config.sqrt_count_product(),
        2.0 * numerator / config.total_n as f64,
    )
}

fn hbar_numerator(a: &SpeciesShape, b: &SpeciesShape) -> f64 {
    4.0 * a.intensive * b.intensive * a.j() * b.j() * a.extensive * b.extensive
}

/// `(4/N) a b j_a j_b A B`, the scale playing the role of `hbar`.
pub fn effective_hbar(config: &ModelAConfig) -> f64 {
    hbar_numerator(&config.species_a.shape, &config.species_b.shape) / config.total_n as f64
}

/// Entity count at which [`effective_hbar`] equals `hbar`.
pub fn estimate_n(hbar: f64, shape_a: &SpeciesShape, shape_b: &SpeciesShape) -> Result<f64> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(invalid("hbar", format!("must be positive, got {hbar}")));
    }
    Ok(hbar_numerator(shape_a, shape_b) / hbar)
}

/// [`effective_hbar`] at a real-valued entity count.
pub fn effective_hbar_at(total_n: f64, shape_a: &SpeciesShape, shape_b: &SpeciesShape) -> f64 {
    hbar_numerator(shape_a, shape_b) / total_n
}

/// Monte Carlo relative spread of a sum of `count` i.i.d. Gaussian
/// contributions: sample sd of `trials` sums over their sample mean.
///
/// Trial `t` reads its own stream (`seed / "species-spread" / t`), so the
/// result does not depend on how trials are scheduled.
pub fn simulate_species_spread(
    count: u64,
    per_entity_mean: f64,
    per_entity_sd: f64,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    if trials < 2 {
        return Err(invalid("trials", "need at least two trials for a spread"));
    }
    if per_entity_mean == 0.0 || !per_entity_mean.is_finite() {
        return Err(invalid(
            "per_entity_mean",
            "relative spread is undefined for a zero mean",
        ));
    }
    let normal = Normal::new(per_entity_mean, per_entity_sd)
        .map_err(|e| invalid("per_entity_sd", e.to_string()))?;
    let base = SeedPath::root(seed).child("species-spread");
    let sums: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = base.child(t).stream().rng();
            (0..count).map(|_| normal.sample(&mut rng)).sum()
        })
        .collect();
    Ok(stats::sample_sd(&sums) / stats::mean(&sums))
}
