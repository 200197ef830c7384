use std::collections::BTreeMap;

use super::{BanditLearner, DelayLearner, LearnerSpec, NewtonLearner, SphericalLearner};
use crate::error::{Error, Result};

pub type LearnerFactory = fn(&LearnerSpec) -> Result<Box<dyn BanditLearner>>;

/// Name → constructor table for learners.
#[derive(Clone)]
pub struct LearnerRegistry {
    factories: BTreeMap<&'static str, LearnerFactory>,
}

impl Default for LearnerRegistry {
    fn default() -> Self {
        let mut r = LearnerRegistry { factories: BTreeMap::new() };
        r.register("newton", |s| Ok(Box::new(NewtonLearner::new(s)?)));
        r.register("delay", |s| Ok(Box::new(DelayLearner::new(s)?)));
        r.register("spherical", |s| Ok(Box::new(SphericalLearner::new(s)?)));
        r
    }
}

impl LearnerRegistry {
    pub fn empty() -> Self {
        LearnerRegistry { factories: BTreeMap::new() }
    }

    /// Registers or replaces a learner.
    pub fn register(&mut self, name: &'static str, factory: LearnerFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, name: &str, spec: &LearnerSpec) -> Result<Box<dyn BanditLearner>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: "learner",
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        factory(spec)
    }
}
