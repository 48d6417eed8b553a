use flexfit_autodiff::{kernels, Tape, Var};
use rand::{Rng, RngExt};

/// Fully connected layer `y = x·W + b` with `W` stored `input × output`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            input,
            output,
            weight: vec![0.0; input * output],
            bias: vec![0.0; output],
        }
    }

    /// Uniform `±sqrt(6 / (in + out))` weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let mut layer = Self::zeros(input, output);
        for w in &mut layer.weight {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let mut y = kernels::matmul(x, &self.weight, rows, self.input, self.output);
        kernels::add_row(&mut y, &self.bias);
        y
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundDense {
        BoundDense {
            weight: tape.param(self.weight.clone(), self.input, self.output),
            bias: tape.param(self.bias.clone(), 1, self.output),
        }
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundDense {
    pub weight: Var,
    pub bias: Var,
}

impl BoundDense {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        let y = tape.matmul(x, self.weight);
        tape.add(y, self.bias)
    }
}

pub(crate) fn softplus_in_place(x: &mut [f64]) {
    for v in x {
        *v = kernels::softplus(*v);
    }
}

/// Two softplus hidden layers with the input re-injected before the second:
/// `h₁ = σ(x W₁ + b₁)`, `h₂ = σ([h₁ ⧺ x] W₂ + b₂)`, `y = h₂ W₃ + b₃`.
#[derive(Clone, Debug, PartialEq)]
pub struct SkipMlp {
    pub layers: [Dense; 3],
}

impl SkipMlp {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        Self {
            layers: [
                Dense::glorot(input, hidden, rng),
                Dense::glorot(hidden + input, hidden, rng),
                Dense::glorot(hidden, output, rng),
            ],
        }
    }

    pub fn input(&self) -> usize {
        self.layers[0].input
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].output
    }

    pub fn output(&self) -> usize {
        self.layers[2].output
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let mut h = self.layers[0].forward(x, rows);
        softplus_in_place(&mut h);
        let cat = kernels::concat_cols(&h, self.hidden(), x, self.input(), rows);
        let mut h = self.layers[1].forward(&cat, rows);
        softplus_in_place(&mut h);
        self.layers[2].forward(&h, rows)
    }

    pub fn bind(&self, tape: &mut Tape) -> [BoundDense; 3] {
        [
            self.layers[0].bind(tape),
            self.layers[1].bind(tape),
            self.layers[2].bind(tape),
        ]
    }

    pub fn forward_tape(bound: &[BoundDense; 3], tape: &mut Tape, x: Var) -> Var {
        let h = bound[0].forward(tape, x);
        let h = tape.softplus(h);
        let cat = tape.concat(h, x);
        let h = bound[1].forward(tape, cat);
        let h = tape.softplus(h);
        bound[2].forward(tape, h)
    }
}

/// Plain feed-forward network with softplus between layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `sizes = [in, h₁, …, out]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect(),
        }
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let mut h = x.to_vec();
        for (n, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h, rows);
            if n + 1 < self.layers.len() {
                softplus_in_place(&mut h);
            }
        }
        h
    }

    pub fn bind(&self, tape: &mut Tape) -> Vec<BoundDense> {
        self.layers.iter().map(|l| l.bind(tape)).collect()
    }

    pub fn forward_tape(bound: &[BoundDense], tape: &mut Tape, x: Var) -> Var {
        let mut h = x;
        for (n, layer) in bound.iter().enumerate() {
            h = layer.forward(tape, h);
            if n + 1 < bound.len() {
                h = tape.softplus(h);
            }
        }
        h
    }
}
