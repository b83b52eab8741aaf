//! State space of the tandem chain and its flat indexing.
//!
//! A state is `(i1, i2, phase)`: `i1` tasks in the transmission buffer
//! (queue 1, capacity `cap1`), `i2` tasks in the computation buffer
//! (queue 2, capacity `cap2`), plus the auxiliary phase. Which phase
//! components exist depends on the level pair:
//!
//! | level                  | phase components                      | block dim        |
//! |------------------------|---------------------------------------|------------------|
//! | `(0, 0)`               | arrival                               | `m`              |
//! | `(0, i2)`, `i2 ≥ 1`    | arrival, computation                  | `m·n2`           |
//! | `(i1, 0)`, `i1 ≥ 1`    | arrival, vacation **or** transmission | `m·l2 + m·n1`    |
//! | `(i1, i2)`, `0<i2<cap2`| arrival, vac-or-tx, computation       | `m·l2·n2 + m·n1·n2` |
//! | `(i1, cap2)`, `i1 ≥ 1` | arrival, vacation, computation        | `m·l2·n2`        |
//!
//! A full queue 2 forces the transmitter on vacation, which is why the
//! `(i1, cap2)` blocks carry no transmission phase, and an empty queue 1
//! leaves the transmitter without a phase at all.
//!
//! Flat indices run level-by-level (`i1` outer, `i2` inner). Inside a block
//! the vacation sub-block precedes the transmitting sub-block, and within a
//! sub-block the arrival phase varies slowest and the computation phase
//! fastest — exactly the row ordering of a Kronecker product
//! `arrival ⊗ (vacation | transmission) ⊗ computation`, so kernel blocks
//! can be assembled without permutations.

use crate::error::{Error, Result};

/// Block dimensions and flat-index arithmetic for the state space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseLayout {
    /// Arrival phases.
    pub m: usize,
    /// Transmission-duration phases.
    pub n1: usize,
    /// Computation-duration phases.
    pub n2: usize,
    /// Vacation-duration phases.
    pub l2: usize,
    /// Queue-1 capacity (tasks, including the one in service).
    pub cap1: usize,
    /// Queue-2 capacity.
    pub cap2: usize,
    /// `m(l2 + n1)`: dimension of an `(i1 ≥ 1, 0)` block.
    pub dim_q2_empty: usize,
    /// `m·l2·n2`: vacation sub-block with computation running.
    pub dim_vac_comp: usize,
    /// `m·l2`: vacation sub-block with queue 2 empty.
    pub dim_vac_only: usize,
    /// `m·n2`: queue 1 empty, computation running.
    pub dim_idle_comp: usize,
    /// `m·n1·n2`: transmitting with computation running.
    pub dim_tx_comp: usize,
    /// Dimension of level 0.
    pub level0_dim: usize,
    /// Dimension of each level `i1 ≥ 1`.
    pub level_dim: usize,
    /// Total state count.
    pub total_dim: usize,
}

/// Auxiliary phase of a state. Component ranges: `arr < m`, `vac < l2`,
/// `tx < n1`, `comp < n2`; all zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Empty system: only the arrival phase runs.
    Idle { arr: usize },
    /// Queue 1 empty, queue 2 computing.
    Computing { arr: usize, comp: usize },
    /// Transmitter on vacation, queue 2 empty.
    VacationEmpty { arr: usize, vac: usize },
    /// Transmitting, queue 2 empty.
    TransmitEmpty { arr: usize, tx: usize },
    /// Transmitter on vacation while queue 2 computes.
    VacationComputing { arr: usize, vac: usize, comp: usize },
    /// Transmitting while queue 2 computes.
    TransmitComputing { arr: usize, tx: usize, comp: usize },
}

impl PhaseLayout {
    pub fn new(
        m: usize,
        n1: usize,
        n2: usize,
        l2: usize,
        cap1: usize,
        cap2: usize,
    ) -> Result<Self> {
        if m == 0 || n1 == 0 || n2 == 0 || l2 == 0 {
            return Err(Error::Config {
                field: "phases".into(),
                message: "all phase-set cardinalities must be at least 1".into(),
            });
        }
        if !(1 <= cap1 && cap1 < cap2) {
            return Err(Error::Config {
                field: "buffers".into(),
                message: format!(
                    "buffer sizes must satisfy 1 <= cap1 < cap2, got cap1={cap1}, cap2={cap2}"
                ),
            });
        }
        let dim_vac_only = m * l2;
        let dim_q2_empty = m * l2 + m * n1;
        let dim_vac_comp = m * l2 * n2;
        let dim_idle_comp = m * n2;
        let dim_tx_comp = m * n1 * n2;
        let level0_dim = m + cap2 * dim_idle_comp;
        let level_dim = dim_q2_empty + (cap2 - 1) * (dim_vac_comp + dim_tx_comp) + dim_vac_comp;
        let total_dim = level0_dim + cap1 * level_dim;
        Ok(PhaseLayout {
            m,
            n1,
            n2,
            l2,
            cap1,
            cap2,
            dim_q2_empty,
            dim_vac_comp,
            dim_vac_only,
            dim_idle_comp,
            dim_tx_comp,
            level0_dim,
            level_dim,
            total_dim,
        })
    }

    pub fn level_dim(&self, i1: usize) -> usize {
        if i1 == 0 {
            self.level0_dim
        } else {
            self.level_dim
        }
    }

    pub fn level_offset(&self, i1: usize) -> usize {
        if i1 == 0 {
            0
        } else {
            self.level0_dim + (i1 - 1) * self.level_dim
        }
    }

    /// Dimension of the `(i1, i2)` block.
    pub fn block_dim(&self, i1: usize, i2: usize) -> usize {
        match (i1, i2) {
            (0, 0) => self.m,
            (0, _) => self.dim_idle_comp,
            (_, 0) => self.dim_q2_empty,
            (_, i2) if i2 == self.cap2 => self.dim_vac_comp,
            _ => self.dim_vac_comp + self.dim_tx_comp,
        }
    }

    /// Offset of the `(i1, i2)` block inside its level vector.
    pub fn block_offset_in_level(&self, i1: usize, i2: usize) -> usize {
        if i1 == 0 {
            if i2 == 0 {
                0
            } else {
                self.m + (i2 - 1) * self.dim_idle_comp
            }
        } else if i2 == 0 {
            0
        } else {
            self.dim_q2_empty + (i2 - 1) * (self.dim_vac_comp + self.dim_tx_comp)
        }
    }

    /// Global offset of the `(i1, i2)` block in the flat state vector.
    pub fn block_offset(&self, i1: usize, i2: usize) -> usize {
        self.level_offset(i1) + self.block_offset_in_level(i1, i2)
    }

    fn phase_offset(&self, i1: usize, i2: usize, phase: &Phase) -> Result<usize> {
        let bad = |why: &str| {
            Err(Error::Argument(format!(
                "state ({i1},{i2},{phase:?}) invalid: {why}"
            )))
        };
        let check = |v: usize, lim: usize, name: &str| {
            if v < lim {
                Ok(())
            } else {
                Err(Error::Argument(format!(
                    "state ({i1},{i2},{phase:?}): {name} phase {v} out of range {lim}"
                )))
            }
        };
        match (*phase, i1, i2) {
            (Phase::Idle { arr }, 0, 0) => {
                check(arr, self.m, "arrival")?;
                Ok(arr)
            }
            (Phase::Computing { arr, comp }, 0, i2) if i2 >= 1 => {
                check(arr, self.m, "arrival")?;
                check(comp, self.n2, "computation")?;
                Ok(arr * self.n2 + comp)
            }
            (Phase::VacationEmpty { arr, vac }, i1, 0) if i1 >= 1 => {
                check(arr, self.m, "arrival")?;
                check(vac, self.l2, "vacation")?;
                Ok(arr * self.l2 + vac)
            }
            (Phase::TransmitEmpty { arr, tx }, i1, 0) if i1 >= 1 => {
                check(arr, self.m, "arrival")?;
                check(tx, self.n1, "transmission")?;
                Ok(self.dim_vac_only + arr * self.n1 + tx)
            }
            (Phase::VacationComputing { arr, vac, comp }, i1, i2) if i1 >= 1 && i2 >= 1 => {
                check(arr, self.m, "arrival")?;
                check(vac, self.l2, "vacation")?;
                check(comp, self.n2, "computation")?;
                Ok(arr * self.l2 * self.n2 + vac * self.n2 + comp)
            }
            (Phase::TransmitComputing { arr, tx, comp }, i1, i2)
                if i1 >= 1 && i2 >= 1 && i2 < self.cap2 =>
            {
                check(arr, self.m, "arrival")?;
                check(tx, self.n1, "transmission")?;
                check(comp, self.n2, "computation")?;
                Ok(self.dim_vac_comp + arr * self.n1 * self.n2 + tx * self.n2 + comp)
            }
            _ => bad("phase kind does not belong to this level pair"),
        }
    }

    /// Flat index of a state; inverse of [`PhaseLayout::state`].
    pub fn index(&self, i1: usize, i2: usize, phase: &Phase) -> Result<usize> {
        if i1 > self.cap1 || i2 > self.cap2 {
            return Err(Error::Argument(format!(
                "level ({i1},{i2}) outside ({}, {})",
                self.cap1, self.cap2
            )));
        }
        Ok(self.block_offset(i1, i2) + self.phase_offset(i1, i2, phase)?)
    }

    /// Decode a flat index into `(i1, i2, phase)`.
    pub fn state(&self, index: usize) -> Result<(usize, usize, Phase)> {
        if index >= self.total_dim {
            return Err(Error::Argument(format!(
                "flat index {index} out of range {}",
                self.total_dim
            )));
        }
        let (i1, mut rest) = if index < self.level0_dim {
            (0, index)
        } else {
            let k = index - self.level0_dim;
            (1 + k / self.level_dim, k % self.level_dim)
        };
        let mut i2 = 0;
        loop {
            let d = self.block_dim(i1, i2);
            if rest < d {
                break;
            }
            rest -= d;
            i2 += 1;
        }
        let phase = match (i1, i2) {
            (0, 0) => Phase::Idle { arr: rest },
            (0, _) => Phase::Computing {
                arr: rest / self.n2,
                comp: rest % self.n2,
            },
            (_, 0) => {
                if rest < self.dim_vac_only {
                    Phase::VacationEmpty {
                        arr: rest / self.l2,
                        vac: rest % self.l2,
                    }
                } else {
                    let r = rest - self.dim_vac_only;
                    Phase::TransmitEmpty {
                        arr: r / self.n1,
                        tx: r % self.n1,
                    }
                }
            }
            (_, i2) => {
                if i2 == self.cap2 || rest < self.dim_vac_comp {
                    Phase::VacationComputing {
                        arr: rest / (self.l2 * self.n2),
                        vac: (rest / self.n2) % self.l2,
                        comp: rest % self.n2,
                    }
                } else {
                    let r = rest - self.dim_vac_comp;
                    Phase::TransmitComputing {
                        arr: r / (self.n1 * self.n2),
                        tx: (r / self.n2) % self.n1,
                        comp: r % self.n2,
                    }
                }
            }
        };
        Ok((i1, i2, phase))
    }

    /// Enumerate all states in flat-index order.
    pub fn states(&self) -> impl Iterator<Item = (usize, usize, Phase)> + '_ {
        (0..self.total_dim).map(|i| self.state(i).expect("index in range"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> PhaseLayout {
        PhaseLayout::new(1, 1, 1, 1, 1, 2).unwrap()
    }

    #[test]
    fn toy_dims_enumerate_to_eight() {
        let l = toy();
        assert_eq!(l.block_dim(0, 0), 1);
        assert_eq!(l.block_dim(0, 1), 1);
        assert_eq!(l.block_dim(0, 2), 1);
        assert_eq!(l.block_dim(1, 0), 2);
        assert_eq!(l.block_dim(1, 1), 2);
        assert_eq!(l.block_dim(1, 2), 1);
        assert_eq!(l.total_dim, 8);
        assert_eq!(l.states().count(), 8);
    }

    #[test]
    fn case1_dimension_is_972() {
        let l = PhaseLayout::new(2, 1, 1, 2, 10, 15).unwrap();
        assert_eq!(l.dim_q2_empty, 6);
        assert_eq!(l.dim_vac_comp, 4);
        assert_eq!(l.dim_tx_comp, 2);
        assert_eq!(l.dim_idle_comp, 2);
        assert_eq!(l.level0_dim, 2 + 15 * 2);
        assert_eq!(l.level_dim, 6 + 14 * 6 + 4);
        assert_eq!(l.total_dim, 972);
    }

    #[test]
    fn full_queue2_block_has_vacation_dimension() {
        let l = PhaseLayout::new(2, 3, 2, 2, 3, 5).unwrap();
        for i1 in 1..=l.cap1 {
            assert_eq!(l.block_dim(i1, l.cap2), l.dim_vac_comp);
        }
    }

    #[test]
    fn first_state_and_level_offsets() {
        let l = PhaseLayout::new(2, 1, 1, 2, 10, 15).unwrap();
        assert_eq!(l.index(0, 0, &Phase::Idle { arr: 0 }).unwrap(), 0);
        // first state of level 1 sits right after level 0
        assert_eq!(
            l.index(1, 0, &Phase::VacationEmpty { arr: 0, vac: 0 })
                .unwrap(),
            l.level0_dim
        );
        assert_eq!(l.level0_dim, l.m + l.cap2 * l.dim_idle_comp);
    }

    #[test]
    fn round_trip_exhaustive_case1() {
        let l = PhaseLayout::new(2, 1, 1, 2, 10, 15).unwrap();
        for idx in 0..l.total_dim {
            let (i1, i2, phase) = l.state(idx).unwrap();
            assert_eq!(l.index(i1, i2, &phase).unwrap(), idx);
        }
    }

    #[test]
    fn closed_form_total_matches_enumeration() {
        for (m, n1, n2, l2, c1, c2) in [
            (1, 1, 1, 1, 1, 2),
            (2, 1, 1, 2, 10, 15),
            (2, 2, 3, 2, 2, 4),
            (3, 2, 2, 3, 4, 6),
        ] {
            let l = PhaseLayout::new(m, n1, n2, l2, c1, c2).unwrap();
            let mut count = 0usize;
            for i1 in 0..=c1 {
                for i2 in 0..=c2 {
                    count += l.block_dim(i1, i2);
                }
            }
            assert_eq!(count, l.total_dim);
        }
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(PhaseLayout::new(1, 1, 1, 1, 2, 2).is_err());
        assert!(PhaseLayout::new(1, 1, 1, 1, 3, 2).is_err());
        assert!(PhaseLayout::new(1, 0, 1, 1, 1, 2).is_err());
        assert!(PhaseLayout::new(1, 1, 1, 1, 0, 2).is_err());
    }

    #[test]
    fn rejects_foreign_phase() {
        let l = toy();
        assert!(l.index(0, 0, &Phase::Computing { arr: 0, comp: 0 }).is_err());
        assert!(l
            .index(1, 2, &Phase::TransmitComputing {
                arr: 0,
                tx: 0,
                comp: 0
            })
            .is_err());
        assert!(l.index(0, 0, &Phase::Idle { arr: 1 }).is_err());
    }
}
