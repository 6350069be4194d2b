use serde::Serialize;

/// Gradient of one named parameter tensor, flattened.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamGrad {
    pub name: String,
    pub values: Vec<f64>,
}

impl ParamGrad {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        ParamGrad {
            name: name.into(),
            values,
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum()
    }
}

/// Parameter gradients after one backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GradSnapshot {
    pub groups: Vec<ParamGrad>,
    pub global_norm: f64,
}

impl GradSnapshot {
    pub fn new(groups: Vec<ParamGrad>) -> Self {
        let global_norm = global_grad_norm(&groups);
        GradSnapshot { groups, global_norm }
    }

    /// Appends a group (e.g. loss-internal parameters) and refreshes the norm.
    pub fn push(&mut self, group: ParamGrad) {
        self.groups.push(group);
        self.global_norm = global_grad_norm(&self.groups);
    }

    pub fn group(&self, name: &str) -> Option<&ParamGrad> {
        self.groups.iter().find(|g| g.name == name)
    }
}

/// `sqrt(Σ_j ‖∇θ_j‖²)` over all parameter groups.
pub fn global_grad_norm(groups: &[ParamGrad]) -> f64 {
    groups.iter().map(ParamGrad::squared_norm).sum::<f64>().sqrt()
}
