use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{ModelParams, Point, Region, Venue};
use crate::rng::Rng;
use crate::simulate::config::{InfluenceInit, PiInit, SimConfig, ThetaInit, VenueLayout};

/// One `Dirichlet(alpha·1)` draw of length `n` via normalised Gamma variates.
/// If every variate underflows (tiny `alpha`) the draw is the one-hot vector of
/// a uniformly chosen coordinate, which is the `alpha → 0` limit.
pub fn dirichlet(alpha: f64, n: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || n == 0 {
        return Err(Error::config(format!("invalid Dirichlet(alpha={alpha}) of length {n}")));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::config(e.to_string()))?;
    let mut draw: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draw.iter().sum();
    if total > 0.0 && total.is_finite() {
        draw.iter_mut().for_each(|v| *v /= total);
    } else {
        draw = vec![0.0; n];
        draw[rng.random_range(0..n)] = 1.0;
    }
    Ok(draw)
}

/// Community with the largest prior weight; ties to the lowest index.
pub(crate) fn dominant(row: &[f64]) -> usize {
    let mut best = 0;
    for (g, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = g;
        }
    }
    best
}

/// Draws ground-truth parameters. φ is set equal to π, the posterior a perfect
/// fit would recover.
pub fn init_params(config: &SimConfig, rng: &mut Rng) -> Result<ModelParams> {
    config.validate()?;
    let (n_users, m, v) = (config.n_users, config.n_communities, config.n_categories);
    let init = &config.init;

    let mu = (0..n_users)
        .map(|i| init.mu_scale * init.checkins.get(i).copied().unwrap_or(1.0))
        .collect();

    let eta = match init.eta_alpha {
        Some(alpha) => dirichlet(alpha, m, rng)?,
        None => vec![1.0 / m as f64; m],
    };

    let pi = match init.pi {
        PiInit::Dirichlet { alpha } => {
            let rows = (0..n_users).map(|_| dirichlet(alpha, m, rng)).collect::<Result<Vec<_>>>()?;
            Matrix::from_rows(&rows)?
        }
        PiInit::Blocks => Matrix::from_fn(n_users, m, |i, g| f64::from(u8::from(i * m / n_users == g))),
    };

    let theta = match init.theta {
        ThetaInit::Dirichlet { alpha } => {
            let rows = (0..m).map(|_| dirichlet(alpha, v, rng)).collect::<Result<Vec<_>>>()?;
            Matrix::from_rows(&rows)?
        }
        ThetaInit::Disjoint { alpha } => {
            let block = v / m;
            let mut theta = Matrix::zeros(m, v);
            for g in 0..m {
                let draw = dirichlet(alpha, block, rng)?;
                theta.row_mut(g)[g * block..(g + 1) * block].copy_from_slice(&draw);
            }
            theta
        }
    };

    let groups: Vec<usize> = (0..n_users).map(|i| dominant(pi.row(i))).collect();
    let mut a = Matrix::zeros(n_users, n_users);
    match init.influence {
        InfluenceInit::Dense => {
            for j in 0..n_users {
                for i in 0..n_users {
                    if i != j {
                        a[(j, i)] = rng.random::<f64>();
                    }
                }
            }
        }
        InfluenceInit::Sparse { per_column, same_community } => {
            for i in 0..n_users {
                let mut pool: Vec<usize> = (0..n_users)
                    .filter(|&j| j != i && (!same_community || groups[j] == groups[i]))
                    .collect();
                pool.shuffle(rng);
                for &j in pool.iter().take(per_column) {
                    a[(j, i)] = rng.random_range(0.1..1.0);
                }
            }
        }
        InfluenceInit::Ring => {
            for g in 0..m {
                let members: Vec<usize> = (0..n_users).filter(|&i| groups[i] == g).collect();
                if members.len() < 2 {
                    continue;
                }
                for (p, &i) in members.iter().enumerate() {
                    let j = members[(p + members.len() - 1) % members.len()];
                    a[(j, i)] = 1.0;
                }
            }
        }
    }
    // Columns without any influencer stay zero rather than becoming uniform.
    for i in 0..n_users {
        let total: f64 = (0..n_users).map(|j| a[(j, i)]).sum();
        if total > 0.0 {
            for j in 0..n_users {
                a[(j, i)] *= init.column_sum / total;
            }
        }
    }

    let phi = pi.clone();
    let params = ModelParams { mu, eta, a, theta, pi, phi };
    params.validate()?;
    Ok(params)
}

fn uniform_point(region: &Region, margin: f64, rng: &mut Rng) -> Point {
    Point::new(
        rng.random_range(region.x_min + margin..region.x_max - margin),
        rng.random_range(region.y_min + margin..region.y_max - margin),
    )
}

/// Materialises the venue set described by the layout.
pub fn build_venues(config: &SimConfig, rng: &mut Rng) -> Result<Vec<Venue>> {
    let region = &config.region;
    let venues = match &config.venues {
        VenueLayout::Explicit { venues } => venues.clone(),
        VenueLayout::Uniform { count } => (0..*count)
            .map(|id| Venue {
                id,
                coords: uniform_point(region, 0.0, rng),
                category: rng.random_range(0..config.n_categories),
            })
            .collect(),
        VenueLayout::Themed { spots_per_community, spot_radius, min_spacing, margin } => {
            if 2.0 * margin >= region.width().min(region.height()) {
                return Err(Error::config("venue margin leaves no room inside the region"));
            }
            let block = config.n_categories / config.n_communities;
            let mut spots: Vec<Point> = Vec::new();
            let mut venues = Vec::new();
            for g in 0..config.n_communities {
                for _ in 0..*spots_per_community {
                    let mut attempts = 0;
                    let spot = loop {
                        let p = uniform_point(region, *margin, rng);
                        if spots.iter().all(|s| s.distance(p) >= *min_spacing) {
                            break p;
                        }
                        attempts += 1;
                        if attempts > 100_000 {
                            return Err(Error::config("cannot place venue spots with the requested spacing"));
                        }
                    };
                    spots.push(spot);
                    for c in g * block..(g + 1) * block {
                        let r = spot_radius * rng.random::<f64>().sqrt();
                        let angle = std::f64::consts::TAU * rng.random::<f64>();
                        venues.push(Venue {
                            id: venues.len(),
                            coords: Point::new(spot.x + r * angle.cos(), spot.y + r * angle.sin()),
                            category: c,
                        });
                    }
                }
            }
            venues
        }
    };
    if venues.is_empty() {
        return Err(Error::config("venue set is empty"));
    }
    for (id, venue) in venues.iter().enumerate() {
        if venue.id != id || venue.category >= config.n_categories || !region.contains(venue.coords) {
            return Err(Error::config(format!("invalid venue {venue:?}")));
        }
    }
    Ok(venues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn equal_checkins_give_uniform_mu() {
        let config = SimConfig {
            n_users: 5,
            init: crate::simulate::InitScheme { mu_scale: 0.01, checkins: vec![3.0; 5], ..Default::default() },
            ..SimConfig::default()
        };
        let params = init_params(&config, &mut stream(1, &[])).unwrap();
        assert!(params.mu.iter().all(|&m| (m - 0.03).abs() < 1e-15));
    }

    #[test]
    fn columns_of_a_are_normalised() {
        let config = SimConfig { n_users: 3, ..SimConfig::default() };
        let params = init_params(&config, &mut stream(2, &[])).unwrap();
        for i in 0..3 {
            let total: f64 = params.a.column(i).sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert_eq!(params.a[(i, i)], 0.0);
        }
    }

    #[test]
    fn dirichlet_rows_on_simplex() {
        let mut rng = stream(3, &[]);
        for alpha in [1e-3, 0.5, 1.0, 10.0] {
            let d = dirichlet(alpha, 7, &mut rng).unwrap();
            assert!(d.iter().all(|v| *v >= 0.0));
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(dirichlet(0.0, 3, &mut rng).is_err());
    }

    #[test]
    fn ring_gives_one_influencer_per_user() {
        let config = SimConfig {
            n_users: 6,
            n_communities: 2,
            init: crate::simulate::InitScheme {
                pi: PiInit::Blocks,
                influence: InfluenceInit::Ring,
                ..Default::default()
            },
            ..SimConfig::default()
        };
        let params = init_params(&config, &mut stream(4, &[])).unwrap();
        assert_eq!(params.a[(2, 0)], 1.0);
        assert_eq!(params.a[(0, 1)], 1.0);
        assert_eq!(params.a[(5, 3)], 1.0);
        assert_eq!(params.a.as_slice().iter().filter(|v| **v > 0.0).count(), 6);
    }

    #[test]
    fn themed_layout_covers_blocks() {
        let config = SimConfig {
            n_communities: 2,
            n_categories: 4,
            venues: VenueLayout::Themed { spots_per_community: 3, spot_radius: 0.001, min_spacing: 0.1, margin: 0.05 },
            ..SimConfig::default()
        };
        let venues = build_venues(&config, &mut stream(5, &[])).unwrap();
        assert_eq!(venues.len(), 12);
        assert_eq!(venues[0].category, 0);
        assert_eq!(venues[11].category, 3);
    }
}
