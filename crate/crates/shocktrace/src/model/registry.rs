//! Name-keyed registry of flux/entropy models.  Each model variant sits
//! behind the [`Model`](super::Model) trait and is selected at runtime from
//! the experiment config (`model = burgers`, or `model = poly` together with
//! coefficient lists).

use super::{Burgers, Polynomial, SharedModel};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Parameters forwarded to a model factory from the config.
#[derive(Debug, Clone, Default)]
pub struct ModelParams {
    /// Ascending-power coefficients of the flux polynomial.
    pub flux_coeffs: Option<Vec<f64>>,
    /// Ascending-power coefficients of the entropy polynomial; defaults to
    /// `u^2/2` when absent.
    pub entropy_coeffs: Option<Vec<f64>>,
}

type Factory = Box<dyn Fn(&ModelParams) -> Result<SharedModel> + Send + Sync>;

pub struct ModelRegistry {
    factories: BTreeMap<String, Factory>,
}

impl ModelRegistry {
    /// Registry with the built-in models ("burgers", "poly").
    pub fn with_builtins() -> Self {
        let mut reg = ModelRegistry {
            factories: BTreeMap::new(),
        };
        reg.register("burgers", |_params| Ok(Arc::new(Burgers) as SharedModel));
        reg.register("poly", |params| {
            let flux = params.flux_coeffs.clone().ok_or_else(|| {
                Error::Config("model 'poly' requires flux_coeffs in the config".into())
            })?;
            let entropy = params
                .entropy_coeffs
                .clone()
                .unwrap_or_else(|| vec![0.0, 0.0, 0.5]);
            Ok(Arc::new(Polynomial::new(flux, entropy)?) as SharedModel)
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&ModelParams) -> Result<SharedModel> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, name: &str, params: &ModelParams) -> Result<SharedModel> {
        match self.factories.get(name) {
            Some(f) => f(params),
            None => Err(Error::Config(format!(
                "unknown model '{name}' (available: {})",
                self.names().join(", ")
            ))),
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }
}
