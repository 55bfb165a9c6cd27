//! Named parameter enumeration shared by optimizers, checkpoints and the
//! gradient checker.
//!
//! Every parameter container implements [`ParamSet`]. Gradients are returned
//! in a container of the same type, so walking the parameters and the
//! gradients with the same method yields aligned lists.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::layers::{BatchNormParams, ConvParams, DenseParams};
use crate::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Updated by the optimizer.
    Trainable,
    /// Learned values that are never updated (e.g. the static embedding channel).
    Frozen,
    /// Non-learned state such as running statistics.
    Buffer,
}

#[derive(Debug, Clone)]
pub struct NamedParam<'a> {
    pub name: String,
    pub tensor: &'a Tensor,
    pub role: Role,
}

pub trait ParamSet {
    /// Appends `(name, tensor, role)` in a fixed order.
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>);
    /// Appends mutable references in the same order as [`ParamSet::collect`].
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>);

    fn named(&self) -> Vec<NamedParam<'_>> {
        let mut out = Vec::new();
        self.collect("", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        self.collect_mut(&mut out);
        out
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        String::from(name)
    } else {
        format!("{prefix}.{name}")
    }
}

pub(crate) fn push<'a>(out: &mut Vec<NamedParam<'a>>, prefix: &str, name: &str, tensor: &'a Tensor, role: Role) {
    out.push(NamedParam { name: join(prefix, name), tensor, role });
}

impl ParamSet for DenseParams {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        push(out, prefix, "weight", &self.weight, Role::Trainable);
        push(out, prefix, "bias", &self.bias, Role::Trainable);
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }
}

impl ParamSet for BatchNormParams {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        push(out, prefix, "gamma", &self.gamma, Role::Trainable);
        push(out, prefix, "beta", &self.beta, Role::Trainable);
        push(out, prefix, "running_mean", &self.running_mean, Role::Buffer);
        push(out, prefix, "running_var", &self.running_var, Role::Buffer);
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.gamma);
        out.push(&mut self.beta);
        out.push(&mut self.running_mean);
        out.push(&mut self.running_var);
    }
}

impl ParamSet for ConvParams {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedParam<'a>>) {
        push(out, prefix, "weight", &self.weight, Role::Trainable);
        if let Some(b) = &self.bias {
            push(out, prefix, "bias", b, Role::Trainable);
        }
    }

    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.weight);
        if let Some(b) = &mut self.bias {
            out.push(b);
        }
    }
}
