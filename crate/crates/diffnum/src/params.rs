use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::array::Array;
use crate::error::{DiffError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub value: Array,
    pub trainable: bool,
}

/// Named parameter slots. Iteration order is the sorted slot name.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    seed: u64,
    slots: BTreeMap<String, Slot>,
}

/// Gradient per trainable slot, keyed like the store.
pub type Gradients = BTreeMap<String, Array>;

/// FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
fn name_hash(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            slots: BTreeMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Adds a trainable slot drawn uniformly from `[-1/√fan_in, 1/√fan_in]`.
    ///
    /// The stream depends only on the master seed and the slot name, so the
    /// values do not change with construction order.
    pub fn add_uniform(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<()> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ name_hash(name));
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
        self.insert(name, Array::new(shape.to_vec(), data)?, true)
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> Result<()> {
        self.insert(name, Array::zeros(shape), true)
    }

    pub fn insert(&mut self, name: &str, value: Array, trainable: bool) -> Result<()> {
        if self.slots.contains_key(name) {
            return Err(DiffError::DuplicateSlot(name.to_string()));
        }
        self.slots
            .insert(name.to_string(), Slot { value, trainable });
        Ok(())
    }

    /// Replaces the value of an existing slot, keeping its flag.
    pub fn set(&mut self, name: &str, value: Array) -> Result<()> {
        let slot = self
            .slots
            .get_mut(name)
            .ok_or_else(|| DiffError::UnknownSlot(name.to_string()))?;
        if slot.value.shape() != value.shape() {
            return Err(DiffError::Shape {
                op: "ParamStore::set",
                lhs: slot.value.shape().to_vec(),
                rhs: value.shape().to_vec(),
            });
        }
        slot.value = value;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Array> {
        self.slots
            .get(name)
            .map(|s| &s.value)
            .ok_or_else(|| DiffError::UnknownSlot(name.to_string()))
    }

    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.slots.get(name)
    }

    pub fn slot_mut(&mut self, name: &str) -> Option<&mut Slot> {
        self.slots.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.slots.contains_key(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Slot> {
        self.slots.remove(name)
    }

    /// Marks every slot whose name starts with `prefix`; returns how many matched.
    pub fn set_trainable(&mut self, prefix: &str, trainable: bool) -> usize {
        let mut n = 0;
        for (name, slot) in self.slots.iter_mut() {
            if name.starts_with(prefix) {
                slot.trainable = trainable;
                n += 1;
            }
        }
        n
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Slot)> {
        self.slots.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Slot)> {
        self.slots.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn trainable_names(&self) -> impl Iterator<Item = &str> {
        self.slots
            .iter()
            .filter(|(_, s)| s.trainable)
            .map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.slots.values().map(|s| s.value.len()).sum()
    }

    /// Copies every slot of `other` whose name starts with `prefix`,
    /// overwriting existing slots of the same name.
    pub fn copy_prefix_from(&mut self, other: &ParamStore, prefix: &str) -> usize {
        let mut n = 0;
        for (name, slot) in other.slots.iter() {
            if name.starts_with(prefix) {
                self.slots.insert(name.clone(), slot.clone());
                n += 1;
            }
        }
        n
    }
}
