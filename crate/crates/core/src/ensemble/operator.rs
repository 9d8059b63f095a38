use rayon::prelude::*;

use crate::algebra::{
    left_super, right_super, sigma, sigma_dag, u0_propagator, unitary_super, FlattenedState,
    Superop4, C64,
};
use crate::error::{Error, Result};
use crate::kernels::KernelSamples;

use super::label::label_count;

/// Role of a stored block. Blocks are shared between all rows that use them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// Every pending slot moves one step closer; carries the `Δt²F₀` self-interaction.
    Advance,
    /// Unprimed emission into a pending slot, `Δt·F_s·σ`.
    EmitUnprimed(usize),
    /// Primed emission into a pending slot, `Δt·F_s*·σ′†`.
    EmitPrimed(usize),
    /// The unprimed photon due now is reabsorbed, `Δt(σ′† − σ†)`.
    AbsorbUnprimed,
    /// The primed photon due now is reabsorbed, `Δt(σ − σ′)`.
    AbsorbPrimed,
}

/// Whether the `Δt²F₀` self-interaction factor also multiplies the blocks that
/// retire a photon falling due. Both choices agree to first order in `Δt`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FreshCorrection {
    #[default]
    Omitted,
    Included,
}

/// Nonzero entries of a 4×4 block.
#[derive(Clone, Copy, Debug)]
struct SparseBlock {
    len: usize,
    entries: [(u8, u8, C64); 16],
}

impl SparseBlock {
    fn new(m: &Superop4) -> Self {
        let mut entries = [(0u8, 0u8, C64::new(0.0, 0.0)); 16];
        let mut len = 0;
        for c in 0..4 {
            for r in 0..4 {
                if m[(r, c)] != C64::new(0.0, 0.0) {
                    entries[len] = (r as u8, c as u8, m[(r, c)]);
                    len += 1;
                }
            }
        }
        Self { len, entries }
    }

    #[inline]
    fn accumulate(&self, x: &FlattenedState, acc: &mut FlattenedState) {
        for &(r, c, v) in &self.entries[..self.len] {
            acc[r as usize] += v * x[c as usize];
        }
    }
}

/// One-step propagator of the virtual ensemble in the Schrödinger picture,
/// stored block-sparse: row `k` lists `(source label, block)` pairs and
/// `ρᵏ(t + Δt) = Σ_j D_kj ρʲ(t)`. Every block ends with the free rotation
/// `ρ ↦ U₀(Δt) ρ U₀†(Δt)`, which is applied once per source before the
/// bare blocks are summed.
#[derive(Clone, Debug)]
pub struct EvolutionOperator {
    slots: usize,
    dt: f64,
    rabi: f64,
    free: Superop4,
    blocks: Vec<Superop4>,
    sparse: Vec<SparseBlock>,
    kinds: Vec<BlockKind>,
    row_start: Vec<usize>,
    sources: Vec<u32>,
    block_ids: Vec<u16>,
}

impl EvolutionOperator {
    pub fn build(samples: &KernelSamples, rabi: f64, dt: f64, slots: usize) -> Result<Self> {
        Self::build_with(samples, rabi, dt, slots, FreshCorrection::Omitted)
    }

    pub fn build_with(
        samples: &KernelSamples,
        rabi: f64,
        dt: f64,
        slots: usize,
        fresh: FreshCorrection,
    ) -> Result<Self> {
        if samples.len() != slots {
            return Err(Error::Dimension { expected: slots, got: samples.len() });
        }
        if (samples.dt - dt).abs() > 1e-12 * dt.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel sampled at Δt = {} but operator built for Δt = {dt}",
                samples.dt
            )));
        }
        if slots == 0 || slots > 19 {
            return Err(Error::InvalidParameter(format!("window of {slots} slots unsupported")));
        }
        if !(dt > 0.0) || !rabi.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid Δt = {dt} or Ω = {rabi}")));
        }

        let dtc = C64::new(dt, 0.0);
        let free = unitary_super(&u0_propagator(rabi, dt));
        let (s, sd) = (sigma(), sigma_dag());
        let (l_s, l_sd) = (left_super(&s), left_super(&sd));
        let (r_s, r_sd) = (right_super(&s), right_super(&sd));
        let f0 = samples.coeffs[0];

        let advance = Superop4::identity()
            + ((r_sd - l_sd) * l_s * f0 + (l_s - r_s) * r_sd * f0.conj()) * (dtc * dtc);

        let retire = match fresh {
            FreshCorrection::Omitted => Superop4::identity(),
            FreshCorrection::Included => advance,
        };
        let mut blocks = vec![advance, retire * (r_sd - l_sd) * dtc, retire * (l_s - r_s) * dtc];
        let mut kinds = vec![BlockKind::Advance, BlockKind::AbsorbUnprimed, BlockKind::AbsorbPrimed];
        // Slot s ∈ 1..M−1 uses F_s; slot M would need F_M, which lies outside the window.
        let mut emit_y = vec![None; slots];
        let mut emit_z = vec![None; slots];
        for slot in 1..slots {
            let f = samples.coeffs[slot];
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            emit_y[slot] = Some(blocks.len() as u16);
            blocks.push(l_s * (dtc * f));
            kinds.push(BlockKind::EmitUnprimed(slot));
            emit_z[slot] = Some(blocks.len() as u16);
            blocks.push(r_sd * (dtc * f.conj()));
            kinds.push(BlockKind::EmitPrimed(slot));
        }

        let total = label_count(slots);
        // Targets with a non-X trit in slot M have no sources: ageing would push
        // that trit past the window, and emission into slot M has zero weight.
        let live = label_count(slots - 1);
        let mut row_start = Vec::with_capacity(total + 1);
        let mut sources = Vec::with_capacity(live * (slots + 3));
        let mut block_ids = Vec::with_capacity(live * (slots + 3));
        row_start.push(0);
        for target in 0..total {
            if target < live {
                let aged = 3 * target;
                sources.push(aged as u32);
                block_ids.push(0);
                let mut rest = target;
                let mut place = 1usize;
                for slot in 1..slots {
                    let digit = rest % 3;
                    rest /= 3;
                    let id = match digit {
                        1 => emit_y[slot],
                        2 => emit_z[slot],
                        _ => None,
                    };
                    if let Some(id) = id {
                        sources.push((3 * (target - digit * place)) as u32);
                        block_ids.push(id);
                    }
                    place *= 3;
                }
                sources.push((aged + 1) as u32);
                block_ids.push(1);
                sources.push((aged + 2) as u32);
                block_ids.push(2);
            }
            row_start.push(sources.len());
        }

        let sparse = blocks.iter().map(SparseBlock::new).collect();
        Ok(Self { slots, dt, rabi, free, blocks, sparse, kinds, row_start, sources, block_ids })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn rabi(&self) -> f64 {
        self.rabi
    }

    /// Number of 4-vector blocks in the state this operator acts on.
    pub fn dimension_blocks(&self) -> usize {
        self.row_start.len() - 1
    }

    /// Number of stored block entries (row, source) pairs.
    pub fn block_entries(&self) -> usize {
        self.sources.len()
    }

    /// Scalar nonzeros of the equivalent `(4·3^M) × (4·3^M)` matrix.
    pub fn nonzeros(&self) -> usize {
        let per_block: Vec<usize> = self
            .blocks
            .iter()
            .map(|b| (b * self.free).iter().filter(|z| **z != C64::new(0.0, 0.0)).count())
            .collect();
        self.block_ids.iter().map(|id| per_block[*id as usize]).sum()
    }

    /// The free rotation every block ends with.
    pub fn free_rotation(&self) -> &Superop4 {
        &self.free
    }

    /// `(source, kind, bare block)` entries of one row, in accumulation order.
    /// The full block is the bare block times `free_rotation()`.
    pub fn row(&self, target: usize) -> impl Iterator<Item = (usize, BlockKind, &Superop4)> + '_ {
        let range = self.row_start[target]..self.row_start[target + 1];
        range.map(move |e| {
            let id = self.block_ids[e] as usize;
            (self.sources[e] as usize, self.kinds[id], &self.blocks[id])
        })
    }

    /// Dense 4×4 block `D_{target, source}` including the free rotation, zero when absent.
    pub fn block(&self, target: usize, source: usize) -> Superop4 {
        self.row(target)
            .filter(|(src, _, _)| *src == source)
            .fold(Superop4::zeros(), |acc, (_, _, b)| acc + b * self.free)
    }

    fn apply_row(&self, target: usize, rotated: &[FlattenedState]) -> FlattenedState {
        let mut acc = FlattenedState::zeros();
        for e in self.row_start[target]..self.row_start[target + 1] {
            self.sparse[self.block_ids[e] as usize].accumulate(&rotated[self.sources[e] as usize], &mut acc);
        }
        acc
    }

    /// `output = D · input`.
    pub fn apply(&self, input: &[FlattenedState], output: &mut [FlattenedState]) {
        let mut rotated = vec![FlattenedState::zeros(); input.len()];
        self.apply_with(input, &mut rotated, output);
    }

    /// `output = D · input` using caller-provided scratch for the rotated input.
    /// Rows are independent and each row sums its entries in a fixed order, so
    /// the result does not depend on thread scheduling.
    pub fn apply_with(
        &self,
        input: &[FlattenedState],
        rotated: &mut [FlattenedState],
        output: &mut [FlattenedState],
    ) {
        let n = self.dimension_blocks();
        assert_eq!(input.len(), n);
        assert_eq!(rotated.len(), n);
        assert_eq!(output.len(), n);
        if n < 4096 {
            for (r, x) in rotated.iter_mut().zip(input) {
                *r = self.free * x;
            }
            for (target, out) in output.iter_mut().enumerate() {
                *out = self.apply_row(target, rotated);
            }
        } else {
            rotated
                .par_iter_mut()
                .with_min_len(4096)
                .zip(input.par_iter())
                .for_each(|(r, x)| *r = self.free * x);
            let rotated = &*rotated;
            output
                .par_iter_mut()
                .with_min_len(1024)
                .enumerate()
                .for_each(|(target, out)| *out = self.apply_row(target, rotated));
        }
    }
}
