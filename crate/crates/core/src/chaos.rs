//! Logistic-map orbits and the argsort permutation used to scramble pixels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::PlaneImage;

/// Lower edge of the chaotic band of the logistic parameter.
pub const CHAOS_ONSET: f64 = 3.5699456;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    x0: f64,
    rho: f64,
}

impl LogisticParams {
    pub fn new(x0: f64, rho: f64) -> Result<Self> {
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(Error::ParamOutOfRange(format!(
                "x0 = {x0} must lie in (0, 1)"
            )));
        }
        if !(rho > 0.0 && rho < 4.0) {
            return Err(Error::ParamOutOfRange(format!(
                "rho = {rho} must lie in (0, 4)"
            )));
        }
        Ok(Self { x0, rho })
    }

    /// x0 = 0.1775727, rho = 3.5725212.
    pub fn reference() -> Self {
        Self::new(0.1775727, 3.5725212).expect("reference parameters are valid")
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn is_chaotic(&self) -> bool {
        self.rho > CHAOS_ONSET
    }
}

/// `x_1 .. x_n` of `x_{i+1} = rho * x_i * (1 - x_i)`, no transient discarded.
pub fn logistic_sequence(params: &LogisticParams, n: usize) -> Vec<f64> {
    let mut x = params.x0;
    let rho = params.rho;
    (0..n)
        .map(|_| {
            x = rho * x * (1.0 - x);
            x
        })
        .collect()
}

/// Target position -> source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Validates that `indices` is a bijection on `0..len`.
    pub fn from_indices(indices: Vec<usize>) -> Result<Self> {
        let n = indices.len();
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::NotABijection(n));
            }
        }
        Ok(Self(indices))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0usize; self.0.len()];
        for (t, &s) in self.0.iter().enumerate() {
            inv[s] = t;
        }
        Permutation(inv)
    }
}

/// Stable ascending argsort of a logistic orbit of length `n`.
pub fn build_permutation(params: &LogisticParams, n: usize) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::ParamOutOfRange(
            "permutation length must be at least 1".into(),
        ));
    }
    Ok(argsort(&logistic_sequence(params, n)))
}

/// Ties keep their original order.
pub fn argsort(values: &[f64]) -> Permutation {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.par_sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Permutation(idx)
}

pub fn invert_permutation(perm: &[usize]) -> Result<Permutation> {
    Ok(Permutation::from_indices(perm.to_vec())?.inverse())
}

fn check_len(img: &PlaneImage, perm: &Permutation) -> Result<()> {
    if img.len() != perm.len() {
        return Err(Error::LengthMismatch {
            expected: perm.len(),
            actual: img.len(),
        });
    }
    Ok(())
}

/// `out[t] = in[perm[t]]` over the row-major flattening.
pub fn scramble(img: &PlaneImage, perm: &Permutation) -> Result<PlaneImage> {
    check_len(img, perm)?;
    let src = img.as_slice();
    let data = perm.0.iter().map(|&s| src[s]).collect();
    PlaneImage::new(img.width(), img.height(), data)
}

/// `out[perm[t]] = in[t]`.
pub fn unscramble(img: &PlaneImage, perm: &Permutation) -> Result<PlaneImage> {
    check_len(img, perm)?;
    let mut data = vec![0u8; img.len()];
    for (&s, &v) in perm.0.iter().zip(img.as_slice()) {
        data[s] = v;
    }
    PlaneImage::new(img.width(), img.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_point_at_half() {
        let p = LogisticParams::new(0.5, 2.0).unwrap();
        assert_eq!(logistic_sequence(&p, 3), vec![0.5, 0.5, 0.5]);
        assert!(!p.is_chaotic());
        assert!(LogisticParams::reference().is_chaotic());
    }

    #[test]
    fn first_reference_iterate() {
        // One evaluation of rho * x * (1 - x) in binary64.
        let x1 = logistic_sequence(&LogisticParams::reference(), 1)[0];
        assert_eq!(x1, 0.5217332689385392);
        assert!((x1 - 0.5217333).abs() < 1e-7);
    }

    #[test]
    fn orbit_stays_in_unit_interval() {
        for (x0, rho) in [(0.1775727, 3.5725212), (0.3, 3.99), (0.9, 3.7), (0.01, 1.5)] {
            let p = LogisticParams::new(x0, rho).unwrap();
            assert!(logistic_sequence(&p, 1_000_000)
                .iter()
                .all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn param_validation() {
        assert!(LogisticParams::new(0.0, 3.7).is_err());
        assert!(LogisticParams::new(1.0, 3.7).is_err());
        assert!(LogisticParams::new(0.5, 4.0).is_err());
        assert!(LogisticParams::new(0.5, 0.0).is_err());
        assert!(LogisticParams::new(f64::NAN, 3.7).is_err());
        assert!(build_permutation(&LogisticParams::reference(), 0).is_err());
    }

    #[test]
    fn argsort_small_example() {
        assert_eq!(argsort(&[0.3, 0.1, 0.2]).as_slice(), &[1, 2, 0]);
        assert_eq!(argsort(&[0.2, 0.1, 0.2, 0.1]).as_slice(), &[1, 3, 0, 2]);
    }

    #[test]
    fn constant_orbit_gives_identity() {
        let p = LogisticParams::new(0.5, 2.0).unwrap();
        assert_eq!(
            build_permutation(&p, 50).unwrap(),
            Permutation::identity(50)
        );
    }

    #[test]
    fn reference_permutation_is_bijection() {
        let perm = build_permutation(&LogisticParams::reference(), 810_000).unwrap();
        let mut sorted = perm.as_slice().to_vec();
        sorted.sort_unstable();
        assert!(sorted.iter().enumerate().all(|(i, &v)| i == v));
    }

    #[test]
    fn tiny_seed_change_decorrelates_permutation() {
        let n = 810_000;
        let a = build_permutation(&LogisticParams::reference(), n).unwrap();
        let b = build_permutation(
            &LogisticParams::new(0.1775727 + 1e-7, 3.5725212).unwrap(),
            n,
        )
        .unwrap();
        let agree = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .filter(|(x, y)| x == y)
            .count();
        assert!((agree as f64) < 0.01 * n as f64, "{agree} positions agree");
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(
            invert_permutation(&[0, 1, 2]).unwrap().as_slice(),
            &[0, 1, 2]
        );
        assert_eq!(
            invert_permutation(&[1, 2, 0]).unwrap().as_slice(),
            &[2, 0, 1]
        );
        assert_eq!(invert_permutation(&[0, 0, 2]), Err(Error::NotABijection(3)));
        assert_eq!(invert_permutation(&[0, 3, 1]), Err(Error::NotABijection(3)));
    }

    #[test]
    fn scramble_edge_cases() {
        let img = PlaneImage::from_fn(4, 3, |x, y| (x + 4 * y) as u8).unwrap();
        let id = Permutation::identity(12);
        assert_eq!(scramble(&img, &id).unwrap(), img);
        assert_eq!(unscramble(&img, &id).unwrap(), img);

        let mut swap: Vec<usize> = (0..12).collect();
        swap.swap(2, 9);
        let swap = Permutation::from_indices(swap).unwrap();
        let s = scramble(&img, &swap).unwrap();
        let diffs = s
            .as_slice()
            .iter()
            .zip(img.as_slice())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(diffs, 2);
        assert_eq!(unscramble(&s, &swap).unwrap(), img);

        assert!(matches!(
            scramble(&img, &Permutation::identity(11)),
            Err(Error::LengthMismatch {
                expected: 11,
                actual: 12
            })
        ));
        assert!(unscramble(&img, &Permutation::identity(13)).is_err());
    }

    fn perm_strategy(max: usize) -> impl Strategy<Value = Vec<usize>> {
        (1..max).prop_flat_map(|n| Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn scramble_round_trips(perm in perm_strategy(300), seed in any::<u64>()) {
            let n = perm.len();
            let mut s = seed | 1;
            let img = PlaneImage::from_fn(n, 1, |_, _| { s ^= s << 13; s ^= s >> 7; s ^= s << 17; s as u8 }).unwrap();
            let p = Permutation::from_indices(perm).unwrap();
            let fwd = scramble(&img, &p).unwrap();
            prop_assert_eq!(&unscramble(&fwd, &p).unwrap(), &img);
            prop_assert_eq!(&scramble(&unscramble(&img, &p).unwrap(), &p).unwrap(), &img);
            let mut h1 = fwd.as_slice().to_vec();
            let mut h2 = img.as_slice().to_vec();
            h1.sort_unstable();
            h2.sort_unstable();
            prop_assert_eq!(h1, h2);
        }

        #[test]
        fn inverse_composes_to_identity(perm in perm_strategy(500)) {
            let p = Permutation::from_indices(perm).unwrap();
            let inv = invert_permutation(p.as_slice()).unwrap();
            for k in 0..p.len() {
                prop_assert_eq!(inv.as_slice()[p.as_slice()[k]], k);
                prop_assert_eq!(p.as_slice()[inv.as_slice()[k]], k);
            }
        }
    }
}
