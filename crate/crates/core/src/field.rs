//! Evaluable real-valued functions on the plane.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

/// A real function of one complex variable. `-∞` is an allowed value
/// (logarithmic singularities of subharmonic functions).
pub trait ScalarField: Send + Sync {
    fn eval(&self, z: Complex64) -> f64;
}

impl<F> ScalarField for F
where
    F: Fn(Complex64) -> f64 + Send + Sync,
{
    fn eval(&self, z: Complex64) -> f64 {
        self(z)
    }
}

/// Shared, cheaply clonable handle to a [`ScalarField`].
#[derive(Clone)]
pub struct FieldRef(Arc<dyn ScalarField>);

impl FieldRef {
    pub fn new(f: impl ScalarField + 'static) -> Self {
        FieldRef(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        FieldRef::new(move |_: Complex64| c)
    }

    #[inline]
    pub fn eval(&self, z: Complex64) -> f64 {
        self.0.eval(z)
    }

    pub fn add(&self, other: &FieldRef) -> FieldRef {
        let (a, b) = (self.clone(), other.clone());
        FieldRef::new(move |z: Complex64| a.eval(z) + b.eval(z))
    }

    pub fn sub(&self, other: &FieldRef) -> FieldRef {
        let (a, b) = (self.clone(), other.clone());
        FieldRef::new(move |z: Complex64| a.eval(z) - b.eval(z))
    }

    pub fn scale(&self, s: f64) -> FieldRef {
        let a = self.clone();
        FieldRef::new(move |z: Complex64| s * a.eval(z))
    }

    pub fn shift(&self, c: f64) -> FieldRef {
        let a = self.clone();
        FieldRef::new(move |z: Complex64| a.eval(z) + c)
    }
}

impl ScalarField for FieldRef {
    fn eval(&self, z: Complex64) -> f64 {
        self.0.eval(z)
    }
}

impl fmt::Debug for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FieldRef(..)")
    }
}
