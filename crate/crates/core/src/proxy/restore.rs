use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::numeric::round_half_up;
use crate::rng::Stream;

/// Raw per-zone relocation totals as predicted: vehicles leaving and entering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggRelocation {
    pub outbound: Vec<f64>,
    pub inbound: Vec<f64>,
}

impl AggRelocation {
    /// From the learner's zone-major `(out_0, in_0, out_1, in_1, ...)` layout.
    pub fn from_zone_major(values: &[f64]) -> Self {
        Self {
            outbound: values.iter().step_by(2).copied().collect(),
            inbound: values.iter().skip(1).step_by(2).copied().collect(),
        }
    }

    pub fn zones(&self) -> usize {
        self.outbound.len()
    }
}

/// Integral totals that a transport plan can realise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestoredRelocation {
    pub outbound: Vec<u64>,
    pub inbound: Vec<u64>,
}

impl RestoredRelocation {
    pub fn is_valid(&self, idle_now: &[u32]) -> bool {
        self.outbound.len() == idle_now.len()
            && self.inbound.len() == idle_now.len()
            && self.outbound.iter().sum::<u64>() == self.inbound.iter().sum::<u64>()
            && self.outbound.iter().zip(idle_now).all(|(&o, &v)| o <= v as u64)
    }
}

/// Round half-up and clamp at zero, cap outbound by the idle vehicles in
/// each zone, then take random units off the larger side until both sides
/// agree. Each unit comes off a uniformly chosen non-zero entry.
pub fn restore_feasibility(raw: &AggRelocation, idle_now: &[u32], rng: &mut Stream) -> RestoredRelocation {
    let mut outbound: Vec<u64> = raw.outbound.iter().map(|&x| round_half_up(x)).collect();
    let mut inbound: Vec<u64> = raw.inbound.iter().map(|&x| round_half_up(x)).collect();
    for (o, &v) in outbound.iter_mut().zip(idle_now) {
        *o = (*o).min(v as u64);
    }
    let (so, si) = (outbound.iter().sum::<u64>(), inbound.iter().sum::<u64>());
    if so > si {
        trim(&mut outbound, so - si, rng);
    } else if si > so {
        trim(&mut inbound, si - so, rng);
    }
    RestoredRelocation { outbound, inbound }
}

/// Remove `excess` units one at a time from uniformly chosen non-zero
/// entries. Units are drawn in batches no larger than the smallest non-zero
/// entry, during which the set of non-zero entries cannot change, so a batch
/// is one multinomial draw with the same law as that many single steps.
fn trim(side: &mut [u64], mut excess: u64, rng: &mut Stream) {
    while excess > 0 {
        let live: Vec<usize> = (0..side.len()).filter(|&i| side[i] > 0).collect();
        let smallest = live.iter().map(|&i| side[i]).min().expect("excess implies a non-zero entry");
        let batch = excess.min(smallest);
        if batch == 1 {
            let pick = live[rng.random_range(0..live.len())];
            side[pick] -= 1;
        } else {
            let mut left = batch;
            for (k, &i) in live.iter().enumerate() {
                let take = if k + 1 == live.len() {
                    left
                } else {
                    let p = 1.0 / (live.len() - k) as f64;
                    Binomial::new(left, p).expect("valid binomial").sample(rng)
                };
                side[i] -= take;
                left -= take;
                if left == 0 {
                    break;
                }
            }
        }
        excess -= batch;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn raw(o: &[f64], d: &[f64]) -> AggRelocation {
        AggRelocation { outbound: o.to_vec(), inbound: d.to_vec() }
    }

    #[test]
    fn zeros_stay_zero() {
        let mut rng = Rng::new(0).substream("r");
        let r = restore_feasibility(&raw(&[0.0; 3], &[0.0; 3]), &[1, 1, 1], &mut rng);
        assert_eq!(r.outbound, vec![0; 3]);
        assert_eq!(r.inbound, vec![0; 3]);
    }

    #[test]
    fn rounding_alone_balances() {
        let mut rng = Rng::new(0).substream("r");
        let r = restore_feasibility(&raw(&[2.4, -0.3], &[1.6, 0.2]), &[5, 5], &mut rng);
        assert_eq!(r.outbound, vec![2, 0]);
        assert_eq!(r.inbound, vec![2, 0]);
    }

    #[test]
    fn cap_then_trim_over_seeds() {
        for seed in 0..1000 {
            let mut rng = Rng::new(seed).substream("r");
            let r = restore_feasibility(&raw(&[3.0, 3.0], &[2.0, 0.0]), &[2, 3], &mut rng);
            assert!(r.is_valid(&[2, 3]));
            assert_eq!(r.inbound, vec![2, 0]);
            assert_eq!(r.outbound.iter().sum::<u64>(), 2);
            assert!(r.outbound[0] <= 2 && r.outbound[1] <= 3);
        }
    }

    #[test]
    fn trim_is_uniform_over_non_zero_entries() {
        // Removing one unit from [1, 5]: each entry is hit half the time.
        let mut first = 0;
        for seed in 0..4000 {
            let mut side = vec![1, 5];
            trim(&mut side, 1, &mut Rng::new(seed).substream("r"));
            if side[0] == 0 {
                first += 1;
            }
        }
        assert!((first as f64 / 4000.0 - 0.5).abs() < 0.03);
    }

    #[test]
    fn huge_values_are_fast() {
        let mut rng = Rng::new(9).substream("r");
        let r = restore_feasibility(&raw(&[1e9, 1e9, 0.0], &[1.0, 0.0, 2.0]), &[u32::MAX, 7, 0], &mut rng);
        assert!(r.is_valid(&[u32::MAX, 7, 0]));
        assert_eq!(r.outbound.iter().sum::<u64>(), 3);
    }

    proptest! {
        #[test]
        fn always_valid(
            o in prop::collection::vec(-1e9f64..1e9, 1..8),
            seed in 0u64..1000,
        ) {
            let n = o.len();
            let d: Vec<f64> = o.iter().rev().map(|x| x * 0.7 - 3.0).collect();
            let idle: Vec<u32> = (0..n).map(|i| (i as u32 * 37 + seed as u32) % 50).collect();
            let r = restore_feasibility(&raw(&o, &d), &idle, &mut Rng::new(seed).substream("r"));
            prop_assert!(r.is_valid(&idle));
        }
    }
}
