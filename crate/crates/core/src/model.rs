//! The validated tandem-system model: arrival process, three duration
//! distributions and the two buffer capacities.

use crate::error::Result;
use crate::layout::PhaseLayout;
use crate::stochastic::{DMap, DPh};

/// A two-stage tandem system: D-MAP arrivals into a finite transmission
/// buffer served by a transmitter whose service pauses (goes on vacation)
/// whenever the downstream finite computation buffer is full.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arrival: DMap,
    pub transmission: DPh,
    pub computation: DPh,
    pub vacation: DPh,
    /// Transmission-buffer capacity (queue 1).
    pub cap1: usize,
    /// Computation-buffer capacity (queue 2).
    pub cap2: usize,
    layout: PhaseLayout,
}

impl Model {
    pub fn new(
        arrival: DMap,
        transmission: DPh,
        computation: DPh,
        vacation: DPh,
        cap1: usize,
        cap2: usize,
    ) -> Result<Self> {
        let layout = PhaseLayout::new(
            arrival.phases(),
            transmission.order(),
            computation.order(),
            vacation.order(),
            cap1,
            cap2,
        )?;
        Ok(Model {
            arrival,
            transmission,
            computation,
            vacation,
            cap1,
            cap2,
            layout,
        })
    }

    pub fn layout(&self) -> &PhaseLayout {
        &self.layout
    }

    /// Mean arrivals per slot.
    pub fn arrival_rate(&self) -> Result<f64> {
        self.arrival.arrival_rate()
    }
}
