use crate::error::Result;
use crate::params::{Bound, ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Lstm,
    Gru,
}

/// Gated recurrent cell. Gate weights are stacked row-wise: LSTM rows are
/// `[forget; input; output; candidate]`, GRU rows `[update; reset; candidate]`.
#[derive(Clone, Debug)]
pub struct RecurrentCell {
    pub kind: CellKind,
    pub inputs: usize,
    pub hidden: usize,
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

/// Hidden output `y` and (LSTM only) cell memory `c`, both `[K, B]`.
#[derive(Clone, Copy, Debug)]
pub struct CellState {
    pub y: Var,
    pub c: Option<Var>,
}

impl RecurrentCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        kind: CellKind,
        inputs: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let gates = match kind {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        };
        let std = (1.0 / (inputs + hidden) as f64).sqrt();
        let w = store.add("rnn.w", Tensor::randn(vec![gates * hidden, inputs], std, rng));
        let u = store.add("rnn.u", Tensor::randn(vec![gates * hidden, hidden], std, rng));
        let b = store.add("rnn.b", Tensor::zeros(vec![gates * hidden, 1]));
        Self {
            kind,
            inputs,
            hidden,
            w,
            u,
            b,
        }
    }

    /// Zero state for a batch of `batch` columns.
    pub fn zero_state(&self, tape: &mut Tape, batch: usize) -> Result<CellState> {
        let y = tape.leaf(Tensor::zeros(vec![self.hidden, batch]))?;
        let c = match self.kind {
            CellKind::Lstm => Some(tape.leaf(Tensor::zeros(vec![self.hidden, batch]))?),
            CellKind::Gru => None,
        };
        Ok(CellState { y, c })
    }

    fn gate(&self, tape: &mut Tape, stacked: Var, idx: usize) -> Result<Var> {
        tape.slice(stacked, 0, idx * self.hidden, self.hidden)
    }

    /// One time step for input columns `x: [M, B]`.
    pub fn step(&self, tape: &mut Tape, p: &Bound, x: Var, state: CellState) -> Result<CellState> {
        let k = self.hidden;
        let wx = tape.matmul(p.var(self.w), x)?;
        let wx = tape.add(wx, p.var(self.b))?;
        match self.kind {
            CellKind::Lstm => {
                let uy = tape.matmul(p.var(self.u), state.y)?;
                let z = tape.add(wx, uy)?;
                let gates = tape.slice(z, 0, 0, 3 * k)?;
                let gates = tape.sigmoid(gates)?;
                let f = self.gate(tape, gates, 0)?;
                let i = self.gate(tape, gates, 1)?;
                let o = self.gate(tape, gates, 2)?;
                let cand = self.gate(tape, z, 3)?;
                let cand = tape.tanh(cand)?;
                let c_prev = state.c.expect("lstm state carries memory");
                let keep = tape.mul(f, c_prev)?;
                let write = tape.mul(i, cand)?;
                let c = tape.add(keep, write)?;
                let oc = tape.mul(o, c)?;
                let y = tape.tanh(oc)?;
                Ok(CellState { y, c: Some(c) })
            }
            CellKind::Gru => {
                let u_gates = tape.slice(p.var(self.u), 0, 0, 2 * k)?;
                let u_cand = tape.slice(p.var(self.u), 0, 2 * k, k)?;
                let uy = tape.matmul(u_gates, state.y)?;
                let wx_gates = tape.slice(wx, 0, 0, 2 * k)?;
                let gates = tape.add(wx_gates, uy)?;
                let gates = tape.sigmoid(gates)?;
                let zeta = self.gate(tape, gates, 0)?;
                let r = self.gate(tape, gates, 1)?;
                let ry = tape.mul(r, state.y)?;
                let ury = tape.matmul(u_cand, ry)?;
                let wx_cand = self.gate(tape, wx, 2)?;
                let cand = tape.add(wx_cand, ury)?;
                let cand = tape.tanh(cand)?;
                let carry = tape.mul(zeta, state.y)?;
                let one_minus = tape.neg(zeta)?;
                let one_minus = tape.add_scalar(one_minus, 1.0)?;
                let fresh = tape.mul(one_minus, cand)?;
                let y = tape.add(carry, fresh)?;
                Ok(CellState { y, c: None })
            }
        }
    }

    /// Left-to-right fold of [`step`](Self::step) from the zero state.
    pub fn unroll(&self, tape: &mut Tape, p: &Bound, xs: &[Var]) -> Result<Vec<Var>> {
        let batch = match xs.first() {
            Some(&x) => tape.value(x).shape()[1],
            None => return Ok(Vec::new()),
        };
        let mut state = self.zero_state(tape, batch)?;
        let mut outs = Vec::with_capacity(xs.len());
        for &x in xs {
            state = self.step(tape, p, x, state)?;
            outs.push(state.y);
        }
        Ok(outs)
    }

    /// Run over the columns of a single `[M, T]` sequence, returning `[K, T]`.
    pub fn forward_sequence(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let t = tape.value(x).shape()[1];
        let cols = (0..t)
            .map(|i| tape.slice(x, 1, i, 1))
            .collect::<Result<Vec<_>>>()?;
        let outs = self.unroll(tape, p, &cols)?;
        tape.concat(&outs, 1)
    }
}
