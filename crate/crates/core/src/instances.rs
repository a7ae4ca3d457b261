//! Instance constructors: the two-point lower-bound family, seeded random
//! instances, α-close pairs, and random covering schedules.

use num::traits::{One, Zero};
use rand::Rng;

use crate::closeness::{is_alpha_close, random_perturbation};
use crate::distributions::{FiniteDist, Instance};
use crate::error::{Error, Result};
use crate::policies::{PolicyTag, Schedule};
use crate::rational::{self, int, ratio, Rational};

/// `n` i.i.d. jobs each: truth `{1+eps: 1-1/n, n²: 1/n}`, predicted
/// `{1: 1-1/n, n²: 1/n}`. The pair is `(1+eps)`-close job by job.
pub fn lower_bound_pair(n: usize, eps: &Rational) -> Result<(Instance, Instance)> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("need n >= 2, got {n}")));
    }
    if eps <= &Rational::zero() || eps >= &Rational::one() {
        return Err(Error::InvalidParams(format!(
            "need 0 < eps < 1, got {}",
            rational::to_exact_string(eps)
        )));
    }
    let n_i = n as i64;
    let p = ratio(1, n_i);
    let big = int(n_i * n_i);
    let truth = FiniteDist::new([(int(1) + eps, int(1) - &p), (big.clone(), p.clone())])?;
    let predicted = FiniteDist::new([(int(1), int(1) - &p), (big, p)])?;
    assert!(is_alpha_close(&truth, &predicted, &(int(1) + eps))?);
    Ok((
        Instance::new(vec![truth; n])?,
        Instance::new(vec![predicted; n])?,
    ))
}

/// Shape of random instances: sizes are multiples of `1/size_denominator`
/// in `[size_min, size_max]`, probabilities are normalized integer weights
/// in `1..=9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomInstanceParams {
    pub jobs: usize,
    pub max_atoms: usize,
    pub size_min: i64,
    pub size_max: i64,
    pub size_denominator: i64,
}

impl Default for RandomInstanceParams {
    fn default() -> Self {
        Self {
            jobs: 3,
            max_atoms: 3,
            size_min: 1,
            size_max: 10,
            size_denominator: 2,
        }
    }
}

impl RandomInstanceParams {
    fn validate(&self) -> Result<()> {
        if self.jobs == 0
            || self.max_atoms == 0
            || self.size_min <= 0
            || self.size_max < self.size_min
            || self.size_denominator <= 0
        {
            return Err(Error::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }
}

pub fn random_dist<R: Rng + ?Sized>(
    params: &RandomInstanceParams,
    rng: &mut R,
) -> Result<FiniteDist> {
    params.validate()?;
    let den = params.size_denominator;
    let atoms = rng.random_range(1..=params.max_atoms);
    let weights: Vec<i64> = (0..atoms).map(|_| rng.random_range(1..=9)).collect();
    let total: i64 = weights.iter().sum();
    let sizes: Vec<Rational> = (0..atoms)
        .map(|_| {
            ratio(
                rng.random_range(params.size_min * den..=params.size_max * den),
                den,
            )
        })
        .collect();
    FiniteDist::new(
        sizes
            .into_iter()
            .zip(weights.iter().map(|&w| ratio(w, total))),
    )
}

pub fn random_instance<R: Rng + ?Sized>(
    params: &RandomInstanceParams,
    rng: &mut R,
) -> Result<Instance> {
    params.validate()?;
    Instance::new(
        (0..params.jobs)
            .map(|_| random_dist(params, rng))
            .collect::<Result<_>>()?,
    )
}

/// A random truth and a per-job random perturbation of it; α-close by
/// construction and checked again here.
pub fn alpha_close_pair<R: Rng + ?Sized>(
    params: &RandomInstanceParams,
    alpha: &Rational,
    rng: &mut R,
) -> Result<(Instance, Instance)> {
    let truth = random_instance(params, rng)?;
    let predicted = Instance::new(
        truth
            .jobs()
            .iter()
            .map(|d| random_perturbation(d, alpha, rng))
            .collect::<Result<_>>()?,
    )?;
    for (t, p) in truth.jobs().iter().zip(predicted.jobs()) {
        assert!(
            is_alpha_close(t, p, alpha)?,
            "perturbed job is not alpha-close"
        );
    }
    Ok((truth, predicted))
}

/// A random interleaving of random quanta that covers every job of `inst`.
///
/// Each job is cut into 1 to 3 pieces of random rational length whose sum
/// reaches at least its largest size; pieces are then interleaved at random
/// keeping per-job order.
pub fn random_covering_schedule<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<Schedule> {
    let mut pieces: Vec<Vec<Rational>> = Vec::with_capacity(inst.len());
    for d in inst.jobs() {
        let need = d.max_support().clone();
        let count = rng.random_range(1..=3);
        let mut lens: Vec<Rational> = Vec::with_capacity(count);
        let mut used = Rational::zero();
        for k in 0..count {
            let len = if k + 1 == count {
                let rest = &need - &used;
                let extra = ratio(rng.random_range(0..=4), 4);
                if rest > Rational::zero() {
                    rest + extra
                } else {
                    ratio(rng.random_range(1..=4), 4)
                }
            } else {
                &need * ratio(rng.random_range(1..=8), 8) / int(count as i64)
            };
            used += &len;
            lens.push(len);
        }
        pieces.push(lens);
    }
    let mut next = vec![0usize; inst.len()];
    let mut order = Vec::new();
    loop {
        let open: Vec<usize> = (0..inst.len())
            .filter(|&j| next[j] < pieces[j].len())
            .collect();
        if open.is_empty() {
            break;
        }
        let j = open[rng.random_range(0..open.len())];
        order.push((j, pieces[j][next[j]].clone()));
        next[j] += 1;
    }
    Schedule::from_lengths(inst.len(), order, PolicyTag::Custom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gittins::compute_quanta;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lower_bound_examples() {
        let (truth, pred) = lower_bound_pair(2, &ratio(1, 2)).unwrap();
        let t = FiniteDist::new([(ratio(3, 2), ratio(1, 2)), (int(4), ratio(1, 2))]).unwrap();
        let h = FiniteDist::new([(int(1), ratio(1, 2)), (int(4), ratio(1, 2))]).unwrap();
        assert_eq!(truth.jobs(), &[t.clone(), t]);
        assert_eq!(pred.jobs(), &[h.clone(), h]);

        for n in [2usize, 3, 8] {
            let (_, pred) = lower_bound_pair(n, &ratio(1, 10)).unwrap();
            let q = compute_quanta(pred.job(0), 0);
            let got: Vec<_> = q
                .iter()
                .map(|q| (q.offset.clone(), q.length.clone()))
                .collect();
            let nn = (n * n) as i64;
            assert_eq!(got, vec![(int(0), int(1)), (int(1), int(nn - 1))]);
        }
        assert!(lower_bound_pair(1, &ratio(1, 2)).is_err());
        assert!(lower_bound_pair(3, &int(1)).is_err());
        assert!(lower_bound_pair(3, &int(0)).is_err());
    }

    #[test]
    fn random_instances() {
        let params = RandomInstanceParams {
            max_atoms: 1,
            ..Default::default()
        };
        let inst = random_instance(&params, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(inst.jobs().iter().all(|d| d.len() == 1));

        let params = RandomInstanceParams::default();
        let a = random_instance(&params, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = random_instance(&params, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(random_instance(
            &RandomInstanceParams { jobs: 0, ..params },
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
    }

    #[test]
    fn close_pairs() {
        let params = RandomInstanceParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (t, p) = alpha_close_pair(&params, &int(1), &mut rng).unwrap();
        assert_eq!(t, p);
        for _ in 0..20 {
            let alpha = ratio(3, 2);
            let (t, p) = alpha_close_pair(&params, &alpha, &mut rng).unwrap();
            for (a, b) in t.jobs().iter().zip(p.jobs()) {
                assert!(is_alpha_close(a, b, &alpha).unwrap());
                assert!(is_alpha_close(b, a, &alpha).unwrap());
            }
        }
    }

    #[test]
    fn covering_schedules_cover() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let inst = random_instance(&RandomInstanceParams::default(), &mut rng).unwrap();
            let s = random_covering_schedule(&inst, &mut rng).unwrap();
            s.check_covers(&inst).unwrap();
        }
    }
}
