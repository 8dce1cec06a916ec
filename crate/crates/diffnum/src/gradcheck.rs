use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::params::ParamStore;
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Coordinates checked per slot; slots with fewer values are checked fully.
    pub max_coords_per_slot: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            max_coords_per_slot: 32,
            seed: 0,
        }
    }
}

/// Compares tape gradients against central differences.
///
/// `model` records a scalar loss on the given tape. Returns the maximum over
/// the sampled coordinates of `|analytic − numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(mut model: F, store: &ParamStore, opts: GradCheckOptions) -> Result<f64>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = model(&mut tape, store)?;
    let analytic = tape.backward(loss, store)?;

    let mut eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let l = model(&mut t, s)?;
        Ok(t.value(l).item())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = store.clone();
    let mut worst: f64 = 0.0;
    for (name, grad) in &analytic {
        let n = grad.len();
        let coords: Vec<usize> = if n <= opts.max_coords_per_slot {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, opts.max_coords_per_slot).into_vec();
            c.sort_unstable();
            c
        };
        for i in coords {
            let orig = store.get(name)?.data()[i];
            probe.slot_mut(name).unwrap().value.data_mut()[i] = orig + opts.h;
            let up = eval(&probe)?;
            probe.slot_mut(name).unwrap().value.data_mut()[i] = orig - opts.h;
            let down = eval(&probe)?;
            probe.slot_mut(name).unwrap().value.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * opts.h);
            let a = grad.data()[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}
