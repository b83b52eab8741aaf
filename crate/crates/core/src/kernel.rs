//! One-step transition kernel of the tandem chain.
//!
//! The chain is a finite quasi-birth-death process in the queue-1 level:
//! in one slot the level moves by at most one, so the full transition
//! matrix is block tridiagonal,
//!
//! ```text
//!         ⎛ E   U0              ⎞        E  = empty_hold   (0 → 0)
//!         ⎜ C   H   U           ⎟        U0 = empty_up     (0 → 1)
//!     P = ⎜     D   H   U       ⎟        C  = drain        (1 → 0)
//!         ⎜         …  …  …     ⎟        H  = hold         (i → i)
//!         ⎝             D   H'  ⎠        H' = hold_full    (cap1 → cap1)
//!                                        U  = up, D = down
//! ```
//!
//! and each level block is itself block tri- or bidiagonal in the queue-2
//! level. Every sub-block is a short sum of Kronecker products of the
//! per-slot factor matrices — arrival `(d0 | d1 | d0+d1)`, vacation
//! `(V, V⁰, v)`, transmission `(S1, S1⁰, β1)` and computation
//! `(S2, S2⁰, β2)` — with the arrival factor always outermost, matching the
//! state ordering of [`PhaseLayout`].
//!
//! Three kernel variants share the same block formulas and differ only in
//! the matrices substituted for the arrival factors:
//!
//! * [`KernelVariant::Plain`] — the chain itself: `(d0, d1, d0+d1)`.
//! * [`KernelVariant::Hat`] — keeps exactly the transitions in which a task
//!   *enters* queue 1: `(0, d1, 0)`. At the full level the bundled
//!   `d0+d1` transitions are rejections, so they are zeroed wholesale; the
//!   standalone `d1` terms there pair an arrival with a same-slot departure
//!   and count as admissions.
//! * [`KernelVariant::Tilde`] — the arrival-censored absorbing chain that
//!   carries a tagged task to departure: `(I, 0, I)`. Arrivals are
//!   suppressed, phase dynamics keep running, and level `(0,0)` becomes
//!   absorbing (its diagonal block degenerates to the identity).

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::layout::PhaseLayout;
use crate::linalg::{identity, kron};
use crate::model::Model;

/// Which arrival substitution a kernel was built with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelVariant {
    Plain,
    Hat,
    Tilde,
}

/// The seven level-transition blocks of the chain.
#[derive(Debug, Clone)]
pub struct LevelKernel {
    pub variant: KernelVariant,
    /// Level 0 → 0.
    pub empty_hold: Array2<f64>,
    /// Level 0 → 1.
    pub empty_up: Array2<f64>,
    /// Level 1 → 0.
    pub drain: Array2<f64>,
    /// Level i → i for 1 ≤ i < cap1.
    pub hold: Array2<f64>,
    /// Level cap1 → cap1; bundles rejected arrivals with the held state.
    pub hold_full: Array2<f64>,
    /// Level i → i+1.
    pub up: Array2<f64>,
    /// Level i → i−1 for i ≥ 2.
    pub down: Array2<f64>,
}

/// Per-slot factor matrices with the variant's arrival substitution applied.
struct Factors {
    /// Arrival factor for no-arrival terms.
    a0: Array2<f64>,
    /// Arrival factor for arrival terms.
    a1: Array2<f64>,
    /// Arrival factor for arrival-indifferent terms (only at the full level).
    asum: Array2<f64>,
    vmat: Array2<f64>,
    vexit: Array2<f64>,
    vrow: Array2<f64>,
    /// `V⁰ v`: vacation expires and immediately restarts.
    vexit_restart: Array2<f64>,
    s1: Array2<f64>,
    s1exit: Array2<f64>,
    b1: Array2<f64>,
    /// `S1⁰ β1`: transmission completes and the next task starts.
    s1_restart: Array2<f64>,
    s2: Array2<f64>,
    s2exit: Array2<f64>,
    b2: Array2<f64>,
    /// `S2⁰ β2`: computation completes and the next task starts.
    s2_restart: Array2<f64>,
}

impl Factors {
    fn new(model: &Model, variant: KernelVariant) -> Self {
        let m = model.arrival.phases();
        let (a0, a1, asum) = match variant {
            KernelVariant::Plain => (
                model.arrival.d0().clone(),
                model.arrival.d1().clone(),
                model.arrival.d_sum(),
            ),
            KernelVariant::Hat => (
                Array2::zeros((m, m)),
                model.arrival.d1().clone(),
                Array2::zeros((m, m)),
            ),
            KernelVariant::Tilde => (identity(m), Array2::zeros((m, m)), identity(m)),
        };
        let col = |v: &Array1<f64>| {
            Array2::from_shape_vec((v.len(), 1), v.to_vec()).expect("column shape")
        };
        let rowv =
            |v: &Array1<f64>| Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row shape");
        let vmat = model.vacation.t().clone();
        let vexit = col(model.vacation.exit());
        let vrow = rowv(model.vacation.alpha());
        let s1 = model.transmission.t().clone();
        let s1exit = col(model.transmission.exit());
        let b1 = rowv(model.transmission.alpha());
        let s2 = model.computation.t().clone();
        let s2exit = col(model.computation.exit());
        let b2 = rowv(model.computation.alpha());
        Factors {
            vexit_restart: vexit.dot(&vrow),
            s1_restart: s1exit.dot(&b1),
            s2_restart: s2exit.dot(&b2),
            a0,
            a1,
            asum,
            vmat,
            vexit,
            vrow,
            s1,
            s1exit,
            b1,
            s2,
            s2exit,
            b2,
        }
    }
}

/// `dst[r0.., c0..] += arr ⊗ rest`.
fn add_kron(dst: &mut Array2<f64>, r0: usize, c0: usize, arr: &Array2<f64>, rest: &Array2<f64>) {
    if arr.iter().all(|&v| v == 0.0) {
        return;
    }
    let (rr, rc) = rest.dim();
    for i in 0..arr.nrows() {
        for j in 0..arr.ncols() {
            let a = arr[[i, j]];
            if a == 0.0 {
                continue;
            }
            let mut block = dst.slice_mut(s![
                r0 + i * rr..r0 + (i + 1) * rr,
                c0 + j * rc..c0 + (j + 1) * rc
            ]);
            block.scaled_add(a, rest);
        }
    }
}

struct Builder<'a> {
    f: Factors,
    l: &'a PhaseLayout,
}

impl<'a> Builder<'a> {
    /// Offset of the transmitting sub-block inside an `(i1 ≥ 1, i2)` block.
    fn tx_off(&self, i2: usize) -> usize {
        if i2 == 0 {
            self.l.dim_vac_only
        } else {
            self.l.dim_vac_comp
        }
    }

    fn off0(&self, i2: usize) -> usize {
        self.l.block_offset_in_level(0, i2)
    }

    fn off1(&self, i2: usize) -> usize {
        self.l.block_offset_in_level(1, i2)
    }

    /// Level 0 → 0: only arrival-free computation progress.
    fn empty_hold(&self) -> Array2<f64> {
        let f = &self.f;
        let d = self.l.level0_dim;
        let mut out = Array2::zeros((d, d));
        let one = Array2::from_elem((1, 1), 1.0);
        add_kron(&mut out, self.off0(0), self.off0(0), &f.a0, &one);
        add_kron(&mut out, self.off0(1), self.off0(0), &f.a0, &f.s2exit);
        for i2 in 1..self.l.cap2 {
            add_kron(&mut out, self.off0(i2), self.off0(i2), &f.a0, &f.s2);
        }
        for i2 in 2..=self.l.cap2 {
            add_kron(&mut out, self.off0(i2), self.off0(i2 - 1), &f.a0, &f.s2_restart);
        }
        let c2 = self.l.cap2;
        add_kron(&mut out, self.off0(c2), self.off0(c2), &f.a0, &f.s2);
        out
    }

    /// Level 0 → 1: an arrival into the empty transmission buffer. The
    /// transmitter starts from `β1`, except when queue 2 is already full,
    /// where the newly backlogged transmitter goes straight on vacation.
    fn empty_up(&self) -> Array2<f64> {
        let f = &self.f;
        let mut out = Array2::zeros((self.l.level0_dim, self.l.level_dim));
        add_kron(&mut out, self.off0(0), self.off1(0) + self.tx_off(0), &f.a1, &f.b1);
        add_kron(
            &mut out,
            self.off0(1),
            self.off1(0) + self.tx_off(0),
            &f.a1,
            &kron(&f.b1, &f.s2exit),
        );
        for i2 in 1..self.l.cap2 {
            add_kron(
                &mut out,
                self.off0(i2),
                self.off1(i2) + self.tx_off(i2),
                &f.a1,
                &kron(&f.b1, &f.s2),
            );
        }
        for i2 in 2..=self.l.cap2 {
            add_kron(
                &mut out,
                self.off0(i2),
                self.off1(i2 - 1) + self.tx_off(i2 - 1),
                &f.a1,
                &kron(&f.b1, &f.s2_restart),
            );
        }
        let c2 = self.l.cap2;
        add_kron(&mut out, self.off0(c2), self.off1(c2), &f.a1, &kron(&f.vrow, &f.s2));
        out
    }

    /// Level 1 → 0: the transmission completes with no arrival, so queue 1
    /// empties and the finished task joins queue 2.
    fn drain(&self) -> Array2<f64> {
        let f = &self.f;
        let mut out = Array2::zeros((self.l.level_dim, self.l.level0_dim));
        add_kron(
            &mut out,
            self.off1(0) + self.tx_off(0),
            self.off0(1),
            &f.a0,
            &kron(&f.s1exit, &f.b2),
        );
        for i2 in 1..self.l.cap2 {
            add_kron(
                &mut out,
                self.off1(i2) + self.tx_off(i2),
                self.off0(i2),
                &f.a0,
                &kron(&f.s1exit, &f.s2_restart),
            );
            add_kron(
                &mut out,
                self.off1(i2) + self.tx_off(i2),
                self.off0(i2 + 1),
                &f.a0,
                &kron(&f.s1exit, &f.s2),
            );
        }
        out
    }

    /// Diagonal block for levels 1..cap1 (`held = a0`) or for the full level
    /// (`held = a0 + a1`, since arrivals bounce off a full queue 1 unless a
    /// same-slot transmission completion makes room).
    fn hold_block(&self, full_level: bool) -> Array2<f64> {
        let f = &self.f;
        let held = if full_level { &f.asum } else { &f.a0 };
        let d = self.l.level_dim;
        let c2 = self.l.cap2;
        let mut out = Array2::zeros((d, d));

        // queue 2 empty, nothing moves between the queues
        add_kron(&mut out, self.off1(0), self.off1(0), held, &f.vmat);
        add_kron(
            &mut out,
            self.off1(0),
            self.off1(0) + self.tx_off(0),
            held,
            &kron(&f.vexit, &f.b1),
        );
        add_kron(
            &mut out,
            self.off1(0) + self.tx_off(0),
            self.off1(0) + self.tx_off(0),
            held,
            &f.s1,
        );
        // admitted arrival + completed transmission from (i1, 0): the next
        // transmission starts and the finished task opens queue 2
        add_kron(
            &mut out,
            self.off1(0) + self.tx_off(0),
            self.off1(1) + self.tx_off(1),
            &f.a1,
            &kron(&f.s1_restart, &f.b2),
        );
        // queue 2 empties
        add_kron(
            &mut out,
            self.off1(1),
            self.off1(0),
            held,
            &kron(&f.vmat, &f.s2exit),
        );
        add_kron(
            &mut out,
            self.off1(1),
            self.off1(0) + self.tx_off(0),
            held,
            &kron(&kron(&f.vexit, &f.s2exit), &f.b1),
        );
        add_kron(
            &mut out,
            self.off1(1) + self.tx_off(1),
            self.off1(0) + self.tx_off(0),
            held,
            &kron(&f.s1, &f.s2exit),
        );
        for i2 in 1..c2 {
            let (r, c) = (self.off1(i2), self.off1(i2));
            // both stages keep running
            add_kron(&mut out, r, c, held, &kron(&f.vmat, &f.s2));
            add_kron(
                &mut out,
                r,
                c + self.tx_off(i2),
                held,
                &kron(&kron(&f.vexit, &f.b1), &f.s2),
            );
            add_kron(
                &mut out,
                r + self.tx_off(i2),
                c + self.tx_off(i2),
                held,
                &kron(&f.s1, &f.s2),
            );
            // arrival + transmission completion + computation completion
            add_kron(
                &mut out,
                r + self.tx_off(i2),
                c + self.tx_off(i2),
                &f.a1,
                &kron(&f.s1_restart, &f.s2_restart),
            );
        }
        // arrival + transmission completion, computation keeps running:
        // queue 2 grows by one
        for i2 in 1..=c2.saturating_sub(2) {
            add_kron(
                &mut out,
                self.off1(i2) + self.tx_off(i2),
                self.off1(i2 + 1) + self.tx_off(i2 + 1),
                &f.a1,
                &kron(&f.s1_restart, &f.s2),
            );
        }
        // ... and when that growth fills queue 2, the transmitter goes on
        // vacation with a fresh vacation phase
        add_kron(
            &mut out,
            self.off1(c2 - 1) + self.tx_off(c2 - 1),
            self.off1(c2),
            &f.a1,
            &kron(&kron(&f.vrow, &f.s1exit), &f.s2),
        );
        // computation completes with a successor task: queue 2 shrinks
        for i2 in 2..c2 {
            let (r, c) = (self.off1(i2), self.off1(i2 - 1));
            add_kron(&mut out, r, c, held, &kron(&f.vmat, &f.s2_restart));
            add_kron(
                &mut out,
                r,
                c + self.tx_off(i2 - 1),
                held,
                &kron(&kron(&f.vexit, &f.b1), &f.s2_restart),
            );
            add_kron(
                &mut out,
                r + self.tx_off(i2),
                c + self.tx_off(i2 - 1),
                held,
                &kron(&f.s1, &f.s2_restart),
            );
        }
        // leaving the full-queue-2 column: the vacationing transmitter
        // either keeps resting or resumes service
        add_kron(
            &mut out,
            self.off1(c2),
            self.off1(c2 - 1),
            held,
            &kron(&f.vmat, &f.s2_restart),
        );
        add_kron(
            &mut out,
            self.off1(c2),
            self.off1(c2 - 1) + self.tx_off(c2 - 1),
            held,
            &kron(&kron(&f.vexit, &f.b1), &f.s2_restart),
        );
        // queue 2 stays full: vacations run on, expiring ones restart
        add_kron(&mut out, self.off1(c2), self.off1(c2), held, &kron(&f.vmat, &f.s2));
        add_kron(
            &mut out,
            self.off1(c2),
            self.off1(c2),
            held,
            &kron(&f.vexit_restart, &f.s2),
        );
        out
    }

    /// Level i → i+1: an admitted arrival with no transmission completion.
    fn up(&self) -> Array2<f64> {
        let f = &self.f;
        let d = self.l.level_dim;
        let c2 = self.l.cap2;
        let mut out = Array2::zeros((d, d));
        add_kron(&mut out, self.off1(0), self.off1(0), &f.a1, &f.vmat);
        add_kron(
            &mut out,
            self.off1(0),
            self.off1(0) + self.tx_off(0),
            &f.a1,
            &kron(&f.vexit, &f.b1),
        );
        add_kron(
            &mut out,
            self.off1(0) + self.tx_off(0),
            self.off1(0) + self.tx_off(0),
            &f.a1,
            &f.s1,
        );
        add_kron(
            &mut out,
            self.off1(1),
            self.off1(0),
            &f.a1,
            &kron(&f.vmat, &f.s2exit),
        );
        add_kron(
            &mut out,
            self.off1(1),
            self.off1(0) + self.tx_off(0),
            &f.a1,
            &kron(&kron(&f.vexit, &f.s2exit), &f.b1),
        );
        add_kron(
            &mut out,
            self.off1(1) + self.tx_off(1),
            self.off1(0) + self.tx_off(0),
            &f.a1,
            &kron(&f.s1, &f.s2exit),
        );
        for i2 in 1..c2 {
            let (r, c) = (self.off1(i2), self.off1(i2));
            add_kron(&mut out, r, c, &f.a1, &kron(&f.vmat, &f.s2));
            add_kron(
                &mut out,
                r,
                c + self.tx_off(i2),
                &f.a1,
                &kron(&kron(&f.vexit, &f.b1), &f.s2),
            );
            add_kron(
                &mut out,
                r + self.tx_off(i2),
                c + self.tx_off(i2),
                &f.a1,
                &kron(&f.s1, &f.s2),
            );
        }
        for i2 in 2..c2 {
            let (r, c) = (self.off1(i2), self.off1(i2 - 1));
            add_kron(&mut out, r, c, &f.a1, &kron(&f.vmat, &f.s2_restart));
            add_kron(
                &mut out,
                r,
                c + self.tx_off(i2 - 1),
                &f.a1,
                &kron(&kron(&f.vexit, &f.b1), &f.s2_restart),
            );
            add_kron(
                &mut out,
                r + self.tx_off(i2),
                c + self.tx_off(i2 - 1),
                &f.a1,
                &kron(&f.s1, &f.s2_restart),
            );
        }
        add_kron(
            &mut out,
            self.off1(c2),
            self.off1(c2 - 1),
            &f.a1,
            &kron(&f.vmat, &f.s2_restart),
        );
        add_kron(
            &mut out,
            self.off1(c2),
            self.off1(c2 - 1) + self.tx_off(c2 - 1),
            &f.a1,
            &kron(&kron(&f.vexit, &f.b1), &f.s2_restart),
        );
        add_kron(&mut out, self.off1(c2), self.off1(c2), &f.a1, &kron(&f.vmat, &f.s2));
        add_kron(
            &mut out,
            self.off1(c2),
            self.off1(c2),
            &f.a1,
            &kron(&f.vexit_restart, &f.s2),
        );
        out
    }

    /// Level i → i−1 (i ≥ 2): transmission completes with no arrival. The
    /// finished task joins queue 2 and the next transmission starts; if that
    /// fills queue 2, the transmitter goes on vacation instead.
    fn down(&self) -> Array2<f64> {
        let f = &self.f;
        let d = self.l.level_dim;
        let c2 = self.l.cap2;
        let mut out = Array2::zeros((d, d));
        add_kron(
            &mut out,
            self.off1(0) + self.tx_off(0),
            self.off1(1) + self.tx_off(1),
            &f.a0,
            &kron(&f.s1_restart, &f.b2),
        );
        for i2 in 1..c2 {
            add_kron(
                &mut out,
                self.off1(i2) + self.tx_off(i2),
                self.off1(i2) + self.tx_off(i2),
                &f.a0,
                &kron(&f.s1_restart, &f.s2_restart),
            );
        }
        for i2 in 1..=c2.saturating_sub(2) {
            add_kron(
                &mut out,
                self.off1(i2) + self.tx_off(i2),
                self.off1(i2 + 1) + self.tx_off(i2 + 1),
                &f.a0,
                &kron(&f.s1_restart, &f.s2),
            );
        }
        add_kron(
            &mut out,
            self.off1(c2 - 1) + self.tx_off(c2 - 1),
            self.off1(c2),
            &f.a0,
            &kron(&kron(&f.vrow, &f.s1exit), &f.s2),
        );
        out
    }
}

/// Build the level blocks of the requested kernel variant.
pub fn build(model: &Model, variant: KernelVariant) -> Result<LevelKernel> {
    let b = Builder {
        f: Factors::new(model, variant),
        l: model.layout(),
    };
    let kernel = LevelKernel {
        variant,
        empty_hold: b.empty_hold(),
        empty_up: b.empty_up(),
        drain: b.drain(),
        hold: b.hold_block(false),
        hold_full: b.hold_block(true),
        up: b.up(),
        down: b.down(),
    };
    match variant {
        KernelVariant::Plain => kernel.check_row_sums(model.layout(), 1e-12)?,
        KernelVariant::Tilde => kernel.check_row_sums(model.layout(), 1e-10)?,
        KernelVariant::Hat => {}
    }
    Ok(kernel)
}

impl LevelKernel {
    /// Row sums of the assembled matrix, computed level by level without
    /// forming it.
    pub fn assembled_row_sums(&self, layout: &PhaseLayout) -> Vec<f64> {
        let cap1 = layout.cap1;
        let mut sums = Vec::with_capacity(layout.total_dim);
        let row_sum = |m: &Array2<f64>, i: usize| -> f64 { m.row(i).sum() };
        for i in 0..layout.level0_dim {
            sums.push(row_sum(&self.empty_hold, i) + row_sum(&self.empty_up, i));
        }
        for i1 in 1..=cap1 {
            for i in 0..layout.level_dim {
                let mut s = 0.0;
                s += if i1 == 1 {
                    row_sum(&self.drain, i)
                } else {
                    row_sum(&self.down, i)
                };
                s += if i1 == cap1 {
                    row_sum(&self.hold_full, i)
                } else {
                    row_sum(&self.hold, i)
                };
                if i1 < cap1 {
                    s += row_sum(&self.up, i);
                }
                sums.push(s);
            }
        }
        sums
    }

    fn check_row_sums(&self, layout: &PhaseLayout, tol: f64) -> Result<()> {
        for (i, s) in self.assembled_row_sums(layout).iter().enumerate() {
            if (s - 1.0).abs() > tol {
                return Err(Error::Consistency(format!(
                    "{:?} kernel row {i} sums to {s}, expected 1",
                    self.variant
                )));
            }
        }
        Ok(())
    }

    /// Assemble the full transition matrix over the state space.
    pub fn assemble(&self, layout: &PhaseLayout) -> Array2<f64> {
        let n = layout.total_dim;
        let cap1 = layout.cap1;
        let mut p = Array2::zeros((n, n));
        let mut place = |r0: usize, c0: usize, blk: &Array2<f64>| {
            let (h, w) = blk.dim();
            p.slice_mut(s![r0..r0 + h, c0..c0 + w]).assign(blk);
        };
        place(0, 0, &self.empty_hold);
        place(0, layout.level_offset(1), &self.empty_up);
        for i1 in 1..=cap1 {
            let r = layout.level_offset(i1);
            if i1 == 1 {
                place(r, 0, &self.drain);
            } else {
                place(r, layout.level_offset(i1 - 1), &self.down);
            }
            let diag = if i1 == cap1 { &self.hold_full } else { &self.hold };
            place(r, r, diag);
            if i1 < cap1 {
                place(r, layout.level_offset(i1 + 1), &self.up);
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::stochastic::{DMap, DPh};
    use ndarray::array;

    fn toy_model(p: f64, s1: f64, s2: f64, vv: f64) -> Model {
        Model::new(
            DMap::new(
                Array2::from_elem((1, 1), 1.0 - p),
                Array2::from_elem((1, 1), p),
            )
            .unwrap(),
            DPh::scalar(s1).unwrap(),
            DPh::scalar(s2).unwrap(),
            DPh::scalar(vv).unwrap(),
            1,
            2,
        )
        .unwrap()
    }

    pub(crate) fn case1_model() -> Model {
        Model::new(
            DMap::new(
                array![[0.2359, 0.1938], [0.2792, 0.2805]],
                array![[0.1236, 0.4467], [0.2644, 0.1759]],
            )
            .unwrap(),
            DPh::scalar(0.6429).unwrap(),
            DPh::scalar(0.5455).unwrap(),
            DPh::new(
                array![0.6545, 0.3455],
                array![[0.3035, 0.0617], [0.6738, 0.1916]],
            )
            .unwrap(),
            10,
            15,
        )
        .unwrap()
    }

    #[test]
    fn case1_rows_are_stochastic() {
        let model = case1_model();
        let k = build(&model, KernelVariant::Plain).unwrap();
        let p = k.assemble(model.layout());
        assert_eq!(p.nrows(), 972);
        for (i, row) in p.rows().into_iter().enumerate() {
            let s: f64 = row.sum();
            assert!((s - 1.0).abs() < 1e-12, "row {i} sums to {s}");
        }
    }

    #[test]
    fn saturated_arrivals_deterministic_service_from_empty() {
        // arrival every slot, one-slot services: the empty state jumps to
        // (1, 0) transmitting with probability 1
        let model = toy_model(1.0, 0.0, 0.0, 0.0);
        let k = build(&model, KernelVariant::Plain).unwrap();
        let p = k.assemble(model.layout());
        let l = model.layout();
        let from = l.index(0, 0, &crate::layout::Phase::Idle { arr: 0 }).unwrap();
        let to = l
            .index(1, 0, &crate::layout::Phase::TransmitEmpty { arr: 0, tx: 0 })
            .unwrap();
        assert!((p[[from, to]] - 1.0).abs() < 1e-15);
        let others: f64 = p.row(from).sum() - p[[from, to]];
        assert!(others.abs() < 1e-15);
    }

    #[test]
    fn hat_is_dominated_and_complements_plain() {
        let model = case1_model();
        let plain = build(&model, KernelVariant::Plain).unwrap();
        let hat = build(&model, KernelVariant::Hat).unwrap();
        let l = model.layout();
        let p = plain.assemble(l);
        let h = hat.assemble(l);
        for (a, b) in p.iter().zip(h.iter()) {
            assert!(*b <= *a + 1e-15, "hat exceeds plain: {b} > {a}");
        }
        // the no-admission remainder: substitute (d0, 0, d0 + d1)
        let m = model.arrival.phases();
        let rest_factors = Factors {
            a1: Array2::zeros((m, m)),
            ..Factors::new(&model, KernelVariant::Plain)
        };
        let b = Builder {
            f: rest_factors,
            l,
        };
        let rest = LevelKernel {
            variant: KernelVariant::Plain,
            empty_hold: b.empty_hold(),
            empty_up: b.empty_up(),
            drain: b.drain(),
            hold: b.hold_block(false),
            hold_full: b.hold_block(true),
            up: b.up(),
            down: b.down(),
        };
        let r = rest.assemble(l);
        let recomposed = &h + &r;
        assert!(crate::linalg::max_abs_diff(&p, &recomposed) < 1e-14);
    }

    #[test]
    fn tilde_suppresses_arrivals_and_absorbs() {
        let model = case1_model();
        let tilde = build(&model, KernelVariant::Tilde).unwrap();
        let l = model.layout();
        // all-arrival blocks vanish
        assert_eq!(max_abs(&tilde.up), 0.0);
        assert_eq!(max_abs(&tilde.empty_up), 0.0);
        // the (0,0) corner is the identity on the arrival phases
        for i in 0..l.m {
            for j in 0..l.m {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(tilde.empty_hold[[i, j]], expect);
            }
            // and the rest of those rows is empty
            let s: f64 = tilde.empty_hold.row(i).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
        // every row (absorbing ones included) sums to 1
        for (i, s) in tilde.assembled_row_sums(l).iter().enumerate() {
            assert!((s - 1.0).abs() < 1e-10, "tilde row {i} sums to {s}");
        }
    }

    #[test]
    fn block_shapes_match_layout_on_varied_dims() {
        for (m, n1, n2, l2, c1, c2) in [
            (1, 1, 1, 1, 1, 2),
            (2, 1, 1, 2, 3, 4),
            (2, 2, 3, 2, 2, 4),
            (3, 2, 2, 3, 4, 6),
        ] {
            let model = Model::new(
                DMap::new(
                    Array2::from_elem((m, m), 0.6 / m as f64),
                    Array2::from_elem((m, m), 0.4 / m as f64),
                )
                .unwrap(),
                DPh::new(
                    Array1::from_elem(n1, 1.0 / n1 as f64),
                    Array2::from_elem((n1, n1), 0.5 / n1 as f64),
                )
                .unwrap(),
                DPh::new(
                    Array1::from_elem(n2, 1.0 / n2 as f64),
                    Array2::from_elem((n2, n2), 0.4 / n2 as f64),
                )
                .unwrap(),
                DPh::new(
                    Array1::from_elem(l2, 1.0 / l2 as f64),
                    Array2::from_elem((l2, l2), 0.3 / l2 as f64),
                )
                .unwrap(),
                c1,
                c2,
            )
            .unwrap();
            let l = model.layout();
            let k = build(&model, KernelVariant::Plain).unwrap();
            assert_eq!(k.empty_hold.dim(), (l.level0_dim, l.level0_dim));
            assert_eq!(k.empty_up.dim(), (l.level0_dim, l.level_dim));
            assert_eq!(k.drain.dim(), (l.level_dim, l.level0_dim));
            assert_eq!(k.hold.dim(), (l.level_dim, l.level_dim));
            let p = k.assemble(l);
            for (i, row) in p.rows().into_iter().enumerate() {
                let s: f64 = row.sum();
                assert!((s - 1.0).abs() < 1e-12, "row {i} sums to {s}");
            }
        }
    }

    #[test]
    fn tilde_mid_level_mass_splits_to_one() {
        // symbolic check (S1 e + S1⁰)(S2 e + S2⁰) = 1 realized numerically:
        // a transmitting mid-level row of the censored chain splits its mass
        // over {both complete, tx completes, comp completes, neither}
        let model = case1_model();
        let tilde = build(&model, KernelVariant::Tilde).unwrap();
        let l = model.layout();
        let row = l.block_offset_in_level(1, 3) + l.dim_vac_comp; // (i1, 3) transmitting
        let hold_mass: f64 = tilde.hold.row(row).sum();
        let down_mass: f64 = tilde.down.row(row).sum();
        assert!((hold_mass + down_mass - 1.0).abs() < 1e-12);
        assert!(hold_mass > 0.0 && down_mass > 0.0);
    }
}
