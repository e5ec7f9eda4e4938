//! Compilation of a chain configuration into a Monte Carlo trajectory
//! specification. The event stream mirrors the dense pipeline step for step;
//! outcome-conditioned corrections become record-driven frame XORs under the
//! outcome-difference convention (see the `pauli` module docs).

use crate::error::Result;
use crate::noise::{self, PauliWeights};
use crate::pauli::{CliffordGate, Event, FrameAxis, ReadoutSpec, TrajectorySpec};
use crate::qstate::Basis;
use crate::scalar::Scalar;

use super::ChainModel;

struct Builder<T: Scalar> {
    events: Vec<Event<T>>,
    slots: u32,
    records: u32,
}

#[derive(Clone)]
struct Segment {
    left: Vec<u32>,
    right: Vec<u32>,
}

impl<T: Scalar> Builder<T> {
    fn slot(&mut self) -> u32 {
        self.slots += 1;
        self.slots - 1
    }

    fn record(&mut self) -> u32 {
        self.records += 1;
        self.records - 1
    }

    fn cnot_noisy(&mut self, control: u32, target: u32, beta: T) {
        self.events.push(Event::Gate { gate: CliffordGate::Cnot, targets: [control, target] });
        if beta > T::zero() {
            self.events.push(Event::DrawCnot { slots: [control, target], p: beta });
        }
    }

    fn decay(&mut self, slot: u32, weights: PauliWeights<T>) {
        if weights.w_i < T::one() {
            self.events.push(Event::Draw1 { slot, weights });
        }
    }

    fn measure(&mut self, slot: u32, basis: Basis, flip: T) -> u32 {
        let record = self.record();
        self.events.push(Event::Measure { slot, basis, flip, record });
        record
    }

    fn group_depol(&mut self, slots: Vec<u32>, keep: T) {
        if keep < T::one() {
            self.events.push(Event::DrawGroup { slots, keep });
        }
    }

    /// One heralded nuclear pair: Werner electron pair (qubit-wise draws at
    /// λ₂ᵉ(T₀)) stored into nuclear spins via noisy CNOTs and X reads with
    /// Z-kickback corrections.
    fn link_pair(&mut self, model: &ChainModel<T>, w_t0: PauliWeights<T>) -> (u32, u32) {
        let (e_l, e_r) = (self.slot(), self.slot());
        let (n_l, n_r) = (self.slot(), self.slot());
        self.decay(e_l, w_t0);
        self.decay(e_r, w_t0);
        for (e, n) in [(e_l, n_l), (e_r, n_r)] {
            self.cnot_noisy(e, n, model.beta);
            let r = self.measure(e, Basis::X, model.electron_flip);
            self.events.push(Event::FrameXor { slot: n, axis: FrameAxis::Z, sources: vec![r] });
        }
        (n_l, n_r)
    }

    /// One chain segment: m heralded pairs, T₁ pair decoherence, the remote
    /// CNOT fusion for encoded protocols, then pre-swap decoherence.
    fn segment(&mut self, model: &ChainModel<T>, w_t0: PauliWeights<T>, keep_t1: T, keep_t2: T) -> Segment {
        let m = model.code_size;
        let pairs: Vec<(u32, u32)> = (0..m).map(|_| self.link_pair(model, w_t0)).collect();
        for &(n_l, n_r) in &pairs {
            self.group_depol(vec![n_l, n_r], keep_t1);
        }

        if m == 3 {
            // A side: GHZ electron bank (error-free), CNOT(nuclear->electron),
            // Z reads; outcome differences drive pairwise X corrections.
            let a: Vec<u32> = (0..3).map(|_| self.slot()).collect();
            let mut m_rec = Vec::with_capacity(3);
            for i in 0..3 {
                self.cnot_noisy(pairs[i].0, a[i], model.beta);
                m_rec.push(self.measure(a[i], Basis::Z, model.electron_flip));
            }
            for i in 1..3 {
                let sources = vec![m_rec[i], m_rec[0]];
                self.events.push(Event::FrameXor {
                    slot: pairs[i].0,
                    axis: FrameAxis::X,
                    sources: sources.clone(),
                });
                self.events.push(Event::FrameXor {
                    slot: pairs[i].1,
                    axis: FrameAxis::X,
                    sources,
                });
            }
            // B side: |0⟩ electrons, CNOT(nuclear->electron), X reads with
            // Z kickback onto the nuclear spin.
            for pair in pairs.iter() {
                let b = self.slot();
                self.cnot_noisy(pair.1, b, model.beta);
                let w = self.measure(b, Basis::X, model.electron_flip);
                self.events.push(Event::FrameXor {
                    slot: pair.1,
                    axis: FrameAxis::Z,
                    sources: vec![w],
                });
            }
        }

        let all: Vec<u32> =
            pairs.iter().flat_map(|&(l, r)| [l, r]).collect();
        self.group_depol(all, keep_t2);
        Segment {
            left: pairs.iter().map(|&(l, _)| l).collect(),
            right: pairs.iter().map(|&(_, r)| r).collect(),
        }
    }

    /// Transversal mediated BSMs joining two segments; parity agreement is
    /// the swap-stage check, Bell-class differences drive the downstream
    /// frame corrections.
    fn merge(
        &mut self,
        model: &ChainModel<T>,
        w_t0: PauliWeights<T>,
        left: Segment,
        right: Segment,
    ) -> Segment {
        let m = model.code_size;
        let remote = model.protocol.remote_mediator();
        let mut p_rec = Vec::with_capacity(m);
        let mut q_rec = Vec::with_capacity(m);
        for i in 0..m {
            let (n_l, n_r) = (left.right[i], right.left[i]);
            let (e1, e2) = (self.slot(), self.slot());
            if remote {
                self.decay(e1, w_t0);
                self.decay(e2, w_t0);
            }
            // CNOT(electron -> nuclear); the electron X read (δ) carries the
            // phase bit, the effective nuclear Z read (β+δ) the parity bit.
            self.cnot_noisy(e1, n_l, model.beta);
            self.cnot_noisy(e2, n_r, model.beta);
            let x1 = self.measure(e1, Basis::X, model.electron_flip);
            let x2 = self.measure(e2, Basis::X, model.electron_flip);
            let z1 = self.measure(n_l, Basis::Z, model.nuclear_flip);
            let z2 = self.measure(n_r, Basis::Z, model.nuclear_flip);
            let p = self.record();
            self.events.push(Event::DeriveXor { record: p, sources: vec![z1, z2] });
            let q = self.record();
            self.events.push(Event::DeriveXor { record: q, sources: vec![x1, x2] });
            p_rec.push(p);
            q_rec.push(q);
        }
        if m == 3 {
            self.events.push(Event::CheckAgree { sources: p_rec.clone() });
        }
        for i in 0..m {
            self.events.push(Event::FrameXor {
                slot: right.right[i],
                axis: FrameAxis::X,
                sources: vec![p_rec[0]],
            });
        }
        self.events.push(Event::FrameXor {
            slot: right.right[0],
            axis: FrameAxis::Z,
            sources: q_rec,
        });
        Segment { left: left.left, right: right.right }
    }

    /// Final mediator link for P2/P4: left NV does its BSM half, the right NV
    /// stores the surviving mediator half into a fresh nuclear spin.
    fn end_teleport(&mut self, model: &ChainModel<T>, w_t0: PauliWeights<T>, seg: Segment) -> Segment {
        let m = model.code_size;
        let mut new_right = Vec::with_capacity(m);
        for i in 0..m {
            let n_old = seg.right[i];
            let (e, ep) = (self.slot(), self.slot());
            let n_new = self.slot();
            self.decay(e, w_t0);
            self.decay(ep, w_t0);
            self.cnot_noisy(e, n_old, model.beta);
            let x = self.measure(e, Basis::X, model.electron_flip);
            let z = self.measure(n_old, Basis::Z, model.nuclear_flip);
            self.cnot_noisy(ep, n_new, model.beta);
            let xp = self.measure(ep, Basis::X, model.electron_flip);
            self.events.push(Event::FrameXor {
                slot: n_new,
                axis: FrameAxis::X,
                sources: vec![z],
            });
            self.events.push(Event::FrameXor {
                slot: n_new,
                axis: FrameAxis::Z,
                sources: vec![x, xp],
            });
            new_right.push(n_new);
        }
        Segment { left: seg.left, right: new_right }
    }
}

/// Compile the full chain into a trajectory specification.
pub fn build_trajectory<T: Scalar>(model: &ChainModel<T>) -> Result<TrajectorySpec<T>> {
    let w_t0 = noise::pauli_weights(model.lam2_e_t0)?;
    let keep_t1 = noise::pair_keep_prob(model.lam4_t1)?;
    let keep_t2 = if model.code_size == 3 {
        noise::encoded_keep_prob(model.pre_swap_fidelity)?
    } else {
        noise::pair_keep_prob(model.pre_swap_fidelity)?
    };

    let mut b = Builder { events: Vec::new(), slots: 0, records: 0 };
    let mut segments: Vec<Segment> = (0..model.num_segments)
        .map(|_| b.segment(model, w_t0, keep_t1, keep_t2))
        .collect();
    while segments.len() > 1 {
        let mut next = Vec::with_capacity(segments.len() / 2);
        let mut iter = segments.into_iter();
        while let (Some(l), Some(r)) = (iter.next(), iter.next()) {
            next.push(b.merge(model, w_t0, l, r));
        }
        segments = next;
    }
    let mut chain = segments.pop().expect("at least one segment");
    if model.has_end_teleport {
        chain = b.end_teleport(model, w_t0, chain);
    }

    Ok(TrajectorySpec {
        num_slots: b.slots as usize,
        num_records: b.records as usize,
        events: b.events,
        readout: ReadoutSpec {
            bank_a: chain.left,
            bank_b: chain.right,
            flip: model.nuclear_flip,
        },
    })
}
