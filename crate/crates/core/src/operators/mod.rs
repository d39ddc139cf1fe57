//! Black-box operators and matvec accounting.

mod laplace;
mod slab;
mod synthetic;

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::linalg::{tr_mul, Matrix};

pub use laplace::laplace2d_operator;
pub use slab::{slab_points, SlabSchur};
pub use synthetic::{synthetic_ublr, SyntheticSpec, SyntheticUblr};

/// A linear map known only through its action on blocks of vectors.
pub trait LinearOperator: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A X`.
    fn apply(&self, x: &Matrix) -> Matrix;
    /// `A* Y`.
    fn apply_adjoint(&self, y: &Matrix) -> Matrix;
}

/// Explicit dense matrix.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    a: Matrix,
}

impl DenseOperator {
    pub fn new(a: Matrix) -> Self {
        Self { a }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }
}

impl LinearOperator for DenseOperator {
    fn nrows(&self) -> usize {
        self.a.nrows()
    }

    fn ncols(&self) -> usize {
        self.a.ncols()
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        &self.a * x
    }

    fn apply_adjoint(&self, y: &Matrix) -> Matrix {
        tr_mul(&self.a, y)
    }
}

/// Compression step a matvec is charged to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Basis construction.
    I,
    /// Recovery of the core `Ã`.
    II,
    /// Recovery of the near-field discrepancy `B`.
    III,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::I, Phase::II, Phase::III];

    fn index(self) -> usize {
        self as usize
    }
}

/// Columns pushed through `A` and `A*` during one phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCount {
    pub a: u64,
    pub a_star: u64,
}

impl PhaseCount {
    pub fn total(&self) -> u64 {
        self.a + self.a_star
    }
}

/// Snapshot of a [`CountingOperator`]'s ledger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub phase_i: PhaseCount,
    pub phase_ii: PhaseCount,
    pub phase_iii: PhaseCount,
}

impl Ledger {
    pub fn phase(&self, p: Phase) -> PhaseCount {
        match p {
            Phase::I => self.phase_i,
            Phase::II => self.phase_ii,
            Phase::III => self.phase_iii,
        }
    }

    pub fn total(&self) -> u64 {
        Phase::ALL.iter().map(|&p| self.phase(p).total()).sum()
    }
}

/// Pass-through wrapper that counts columns per phase.
pub struct CountingOperator<'a> {
    inner: &'a dyn LinearOperator,
    phase: AtomicUsize,
    counts: [[AtomicU64; 2]; 3],
}

impl<'a> CountingOperator<'a> {
    pub fn new(inner: &'a dyn LinearOperator) -> Self {
        Self { inner, phase: AtomicUsize::new(0), counts: Default::default() }
    }

    pub fn set_phase(&self, phase: Phase) {
        self.phase.store(phase.index(), Ordering::SeqCst);
    }

    pub fn phase(&self) -> Phase {
        Phase::ALL[self.phase.load(Ordering::SeqCst)]
    }

    pub fn ledger(&self) -> Ledger {
        let read = |p: usize| PhaseCount {
            a: self.counts[p][0].load(Ordering::SeqCst),
            a_star: self.counts[p][1].load(Ordering::SeqCst),
        };
        Ledger { phase_i: read(0), phase_ii: read(1), phase_iii: read(2) }
    }

    fn charge(&self, side: usize, cols: usize) {
        let p = self.phase.load(Ordering::SeqCst);
        self.counts[p][side].fetch_add(cols as u64, Ordering::SeqCst);
    }
}

impl LinearOperator for CountingOperator<'_> {
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        self.charge(0, x.ncols());
        self.inner.apply(x)
    }

    fn apply_adjoint(&self, y: &Matrix) -> Matrix {
        self.charge(1, y.ncols());
        self.inner.apply_adjoint(y)
    }
}
