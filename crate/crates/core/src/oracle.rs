//! Exact divergences between small discrete distributions.
//!
//! These are the closed-form counterparts of what the discriminator and the
//! latent abstraction do with samples: the optimal discriminator value is
//! `2 JS - log 4`, and pushing both distributions through any map can only
//! shrink KL and JS.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, compensated_sum};
use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    probs: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Config("distribution needs a non-empty support".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config("probabilities must be finite and non-negative".into()));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Config(alloc::format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteDist { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total = compensated_sum(weights.iter().copied());
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Config("weights must have a positive finite sum".into()));
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let drift = 1.0 - compensated_sum(probs.iter().copied());
        if let Some(max) = probs.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *max += drift;
        }
        Self::new(probs)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn same_support(p: &DiscreteDist, q: &DiscreteDist) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Config("distributions live on different supports".into()));
    }
    Ok(())
}

/// `sum p log(p / q)`; `+inf` when `p` puts mass where `q` has none.
pub fn kl(p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    same_support(p, q)?;
    let mut terms = Vec::with_capacity(p.len());
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        terms.push(pi * math::ln(pi / qi));
    }
    Ok(compensated_sum(terms).max(0.0))
}

pub fn js(p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    same_support(p, q)?;
    let mut terms = Vec::with_capacity(2 * p.len());
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            terms.push(0.5 * pi * math::ln(pi / m));
        }
        if qi > 0.0 {
            terms.push(0.5 * qi * math::ln(qi / m));
        }
    }
    Ok(compensated_sum(terms).clamp(0.0, math::LN_2))
}

/// Pointwise optimal discriminator and the value it attains.
#[derive(Debug, Clone, PartialEq)]
pub struct GanOptimum {
    pub d_star: Vec<f64>,
    pub j_star: f64,
}

pub fn optimal_gan_objective(p_expert: &DiscreteDist, p_agent: &DiscreteDist) -> Result<GanOptimum> {
    same_support(p_expert, p_agent)?;
    let mut d_star = Vec::with_capacity(p_expert.len());
    let mut terms = Vec::with_capacity(2 * p_expert.len());
    for (&pe, &pa) in p_expert.probs.iter().zip(&p_agent.probs) {
        let total = pe + pa;
        // Off both supports the value of D does not enter the objective.
        let d = if total > 0.0 { pe / total } else { 0.5 };
        d_star.push(d);
        if pe > 0.0 {
            terms.push(pe * math::ln(d));
        }
        if pa > 0.0 {
            terms.push(pa * math::ln(pa / total));
        }
    }
    let j_star = compensated_sum(terms);
    let identity = 2.0 * js(p_expert, p_agent)? - 2.0 * math::LN_2;
    if (j_star - identity).abs() > 1e-10 {
        return Err(Error::State(alloc::format!("optimum {j_star} disagrees with 2 JS - log 4 = {identity}")));
    }
    Ok(GanOptimum { d_star, j_star })
}

/// Aggregates `p` along `map`, which sends support point `i` to `map[i]` in
/// an image support of size `image_len`.
pub fn pushforward(p: &DiscreteDist, map: &[usize], image_len: usize) -> Result<DiscreteDist> {
    if map.len() != p.len() {
        return Err(Error::Config("map must be defined on every support point".into()));
    }
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); image_len];
    for (&pi, &j) in p.probs.iter().zip(map) {
        buckets
            .get_mut(j)
            .ok_or_else(|| Error::Config(alloc::format!("map target {j} outside image of size {image_len}")))?
            .push(pi);
    }
    let probs: Vec<f64> = buckets.into_iter().map(compensated_sum).collect();
    DiscreteDist::new(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(v: &[f64]) -> DiscreteDist {
        DiscreteDist::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(DiscreteDist::new(vec![0.5, 0.4]).is_err());
        assert!(DiscreteDist::new(vec![1.5, -0.5]).is_err());
        assert!(DiscreteDist::new(vec![]).is_err());
        assert!(kl(&d(&[1.0]), &d(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = d(&[0.2, 0.3, 0.5]);
        assert_eq!(kl(&p, &p).unwrap(), 0.0);
        assert!((kl(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).unwrap() - math::LN_2).abs() < 1e-15);
        assert_eq!(kl(&d(&[0.5, 0.5]), &d(&[1.0, 0.0])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn js_examples() {
        let p = d(&[0.2, 0.3, 0.5]);
        assert_eq!(js(&p, &p).unwrap(), 0.0);
        assert!((js(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap() - math::LN_2).abs() < 1e-15);
        let v = js(&d(&[0.5, 0.5]), &d(&[0.25, 0.75])).unwrap();
        assert!((v - 0.033_822_075_568_605_23).abs() < 1e-15);
    }

    #[test]
    fn gan_optimum_examples() {
        let p = d(&[0.1, 0.6, 0.3]);
        let same = optimal_gan_objective(&p, &p).unwrap();
        assert!(same.d_star.iter().all(|&x| x == 0.5));
        assert!((same.j_star + libm::log(4.0)).abs() < 1e-15);
        let disjoint = optimal_gan_objective(&d(&[0.5, 0.5, 0.0]), &d(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(disjoint.d_star, vec![1.0, 1.0, 0.0]);
        assert!(disjoint.j_star.abs() < 1e-15);
    }

    #[test]
    fn pushforward_examples() {
        let p = d(&[0.1, 0.2, 0.7]);
        assert_eq!(pushforward(&p, &[0, 1, 2], 3).unwrap(), p);
        assert_eq!(pushforward(&p, &[0, 0, 0], 1).unwrap().probs(), &[1.0]);
        assert!(pushforward(&p, &[0, 1], 2).is_err());
        assert!(pushforward(&p, &[0, 1, 5], 2).is_err());
    }

    fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![1 => Just(0.0), 6 => 1e-6f64..1.0], n)
            .prop_filter("needs mass", |w| w.iter().any(|&x| x > 0.0))
    }

    fn pair_and_map() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<usize>, usize)> {
        (1usize..9).prop_flat_map(|n| {
            (1usize..=n).prop_flat_map(move |m| (weights(n), weights(n), prop::collection::vec(0..m, n), Just(m)))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn kl_is_nonnegative((a, b, _, _) in pair_and_map()) {
            let p = DiscreteDist::from_weights(&a).unwrap();
            let q = DiscreteDist::from_weights(&b).unwrap();
            prop_assert!(kl(&p, &q).unwrap() >= 0.0);
        }

        #[test]
        fn js_bounds_and_gan_identity((a, b, _, _) in pair_and_map()) {
            let p = DiscreteDist::from_weights(&a).unwrap();
            let q = DiscreteDist::from_weights(&b).unwrap();
            let v = js(&p, &q).unwrap();
            prop_assert!((0.0..=math::LN_2).contains(&v));
            prop_assert!((v - js(&q, &p).unwrap()).abs() < 1e-15);
            let opt = optimal_gan_objective(&p, &q).unwrap();
            prop_assert!((opt.j_star - (2.0 * v - libm::log(4.0))).abs() < 1e-10);
        }

        #[test]
        fn processing_never_increases_divergence((a, b, map, m) in pair_and_map()) {
            let p = DiscreteDist::from_weights(&a).unwrap();
            let q = DiscreteDist::from_weights(&b).unwrap();
            let fp = pushforward(&p, &map, m).unwrap();
            let fq = pushforward(&q, &map, m).unwrap();
            prop_assert!(js(&fp, &fq).unwrap() <= js(&p, &q).unwrap() + 1e-12);
            prop_assert!(kl(&fp, &fq).unwrap() <= kl(&p, &q).unwrap() + 1e-12);
        }
    }
}
