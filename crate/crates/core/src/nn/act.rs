//! Element-wise activations shared by dense and convolutional layers.

use serde::{Deserialize, Serialize};

use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    None,
    Relu,
    Tanh,
    Sigmoid,
    /// Leaky ReLU with the given negative slope (discriminator stack).
    LeakyRelu(f64),
}

impl Activation {
    pub fn apply<S: Real>(&self, data: &mut [S]) {
        match self {
            Activation::None => {}
            Activation::Relu => {
                for v in data {
                    if *v < S::zero() {
                        *v = S::zero();
                    }
                }
            }
            Activation::Tanh => {
                for v in data {
                    *v = v.tanh();
                }
            }
            Activation::Sigmoid => {
                for v in data {
                    *v = sigmoid(*v);
                }
            }
            Activation::LeakyRelu(slope) => {
                let a: S = real(*slope);
                for v in data {
                    if *v < S::zero() {
                        *v = *v * a;
                    }
                }
            }
        }
    }

    /// In-place chain rule: `dy` becomes the gradient w.r.t. the
    /// pre-activation, given post-activation outputs `y`.
    pub fn backprop<S: Real>(&self, y: &[S], dy: &mut [S]) {
        match self {
            Activation::None => {}
            Activation::Relu => {
                for (d, &o) in dy.iter_mut().zip(y.iter()) {
                    if o <= S::zero() {
                        *d = S::zero();
                    }
                }
            }
            Activation::Tanh => {
                for (d, &o) in dy.iter_mut().zip(y.iter()) {
                    *d = *d * (S::one() - o * o);
                }
            }
            Activation::Sigmoid => {
                for (d, &o) in dy.iter_mut().zip(y.iter()) {
                    *d = *d * o * (S::one() - o);
                }
            }
            Activation::LeakyRelu(slope) => {
                let a: S = real(*slope);
                for (d, &o) in dy.iter_mut().zip(y.iter()) {
                    if o < S::zero() {
                        *d = *d * a;
                    }
                }
            }
        }
    }
}

#[inline]
pub fn sigmoid<S: Real>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}
