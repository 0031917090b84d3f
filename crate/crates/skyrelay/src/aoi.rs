//! Per-waypoint age-of-information bookkeeping at the ground station.
//!
//! A waypoint's age is the current slot minus the generation slot of the
//! freshest packet the ground station holds for it. Undelivered waypoints
//! age from slot zero. The table also accumulates the running sum needed
//! for the episode-average age.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Age table for a fixed set of waypoints, driven one slot at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiTable {
    /// Generation slot of the freshest delivered packet per waypoint;
    /// zero until the first delivery, which matches the all-zero ages at
    /// the start of an episode.
    last_origin: Vec<u32>,
    /// Current age per waypoint, in slots.
    ages: Vec<u32>,
    /// Current slot.
    slot: u32,
    /// Sum over finalized slots of the per-slot total age.
    age_sum: f64,
    /// Number of finalized slots.
    finalized_slots: u32,
}

impl AoiTable {
    /// A table at slot zero with every age zero.
    pub fn new(waypoint_count: usize) -> Self {
        Self {
            last_origin: vec![0; waypoint_count],
            ages: vec![0; waypoint_count],
            slot: 0,
            age_sum: 0.0,
            finalized_slots: 0,
        }
    }

    pub fn waypoint_count(&self) -> usize {
        self.ages.len()
    }

    pub fn slot(&self) -> u32 {
        self.slot
    }

    pub fn age(&self, waypoint: usize) -> u32 {
        self.ages[waypoint]
    }

    pub fn ages(&self) -> &[u32] {
        &self.ages
    }

    /// Advances the clock to `t` (must be exactly the next slot) and
    /// recomputes every age against the stored origins.
    pub fn tick(&mut self, t: u32) -> Result<()> {
        if t != self.slot + 1 {
            return Err(Error::OutOfOrder {
                got: t,
                clock: self.slot,
            });
        }
        self.slot = t;
        for (age, origin) in self.ages.iter_mut().zip(&self.last_origin) {
            *age = t - origin;
        }
        Ok(())
    }

    /// Records a just-in-time delivery: a packet generated at `t` arrives
    /// at `t`, resetting the waypoint's age to zero. Accepts `t` at or
    /// ahead of the clock (the clock catches up); earlier stamps are
    /// rejected.
    pub fn record_delivery(&mut self, waypoint: usize, t: u32) -> Result<()> {
        if t < self.slot {
            return Err(Error::OutOfOrder {
                got: t,
                clock: self.slot,
            });
        }
        if t > self.slot {
            self.slot = t;
            for (age, origin) in self.ages.iter_mut().zip(&self.last_origin) {
                *age = t - origin;
            }
        }
        self.record_delivery_from(waypoint, t)
    }

    /// Records a delivery of data generated at `origin` (at or before the
    /// current slot). The station keeps the freshest packet per waypoint,
    /// so a staler origin than what is already held leaves the age alone.
    pub fn record_delivery_from(&mut self, waypoint: usize, origin: u32) -> Result<()> {
        if origin > self.slot {
            return Err(Error::OutOfOrder {
                got: origin,
                clock: self.slot,
            });
        }
        if origin > self.last_origin[waypoint] {
            self.last_origin[waypoint] = origin;
        }
        self.ages[waypoint] = self.slot - self.last_origin[waypoint];
        Ok(())
    }

    /// Folds the current slot's ages into the running average. Call once
    /// per slot after all deliveries for that slot are recorded.
    pub fn finalize_slot(&mut self) {
        self.age_sum += self.ages.iter().map(|&a| a as f64).sum::<f64>();
        self.finalized_slots += 1;
    }

    /// Average age over all finalized slots and waypoints.
    pub fn average_aoi(&self) -> Result<f64> {
        if self.waypoint_count() == 0 {
            return Err(Error::DegenerateInput("no waypoints to average over"));
        }
        if self.finalized_slots == 0 {
            return Err(Error::DegenerateInput("no finalized slots to average over"));
        }
        Ok(self.age_sum / (self.finalized_slots as f64 * self.waypoint_count() as f64))
    }

    /// Average age normalized by an episode horizon, the form the
    /// freshness constraint is stated in.
    pub fn normalized_average_aoi(&self, horizon: u32) -> Result<f64> {
        if horizon == 0 {
            return Err(Error::DegenerateInput("zero horizon"));
        }
        Ok(self.average_aoi()? / horizon as f64)
    }

    /// Rows of `(slot, waypoint, age)` for trace export; the current
    /// slot's snapshot.
    pub fn snapshot(&self) -> impl Iterator<Item = (u32, usize, u32)> + '_ {
        self.ages
            .iter()
            .enumerate()
            .map(move |(p, &age)| (self.slot, p, age))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_state_all_zero() {
        let table = AoiTable::new(5);
        assert!(table.ages().iter().all(|&a| a == 0));
        assert_eq!(table.slot(), 0);
    }

    #[test]
    fn delivery_then_later_query_ages_from_origin() {
        // Delivery at t=3, queried at t=5 with nothing since: age 2.
        let mut table = AoiTable::new(1);
        for t in 1..=3 {
            table.tick(t).unwrap();
        }
        table.record_delivery(0, 3).unwrap();
        assert_eq!(table.age(0), 0);
        table.tick(4).unwrap();
        table.tick(5).unwrap();
        assert_eq!(table.age(0), 2);
    }

    #[test]
    fn undelivered_waypoints_age_from_zero() {
        let mut table = AoiTable::new(3);
        for t in 1..=4 {
            table.tick(t).unwrap();
        }
        assert!(table.ages().iter().all(|&a| a == 4));
    }

    #[test]
    fn ages_increment_by_one_absent_delivery() {
        let mut table = AoiTable::new(2);
        table.tick(1).unwrap();
        table.record_delivery(0, 1).unwrap();
        let before = [table.age(0), table.age(1)];
        table.tick(2).unwrap();
        assert_eq!(table.age(0), before[0] + 1);
        assert_eq!(table.age(1), before[1] + 1);
    }

    #[test]
    fn per_slot_delivery_keeps_age_zero() {
        let mut table = AoiTable::new(1);
        for t in 1..=6 {
            table.tick(t).unwrap();
            table.record_delivery(0, t).unwrap();
            assert_eq!(table.age(0), 0);
        }
    }

    #[test]
    fn out_of_order_rejected() {
        let mut table = AoiTable::new(1);
        for t in 1..=5 {
            table.tick(t).unwrap();
        }
        assert!(table.record_delivery(0, 4).is_err());
        assert!(table.tick(7).is_err());
        assert!(table.record_delivery_from(0, 9).is_err());
    }

    #[test]
    fn stale_origin_does_not_regress_freshness() {
        let mut table = AoiTable::new(1);
        for t in 1..=5 {
            table.tick(t).unwrap();
        }
        table.record_delivery_from(0, 4).unwrap();
        assert_eq!(table.age(0), 1);
        table.record_delivery_from(0, 2).unwrap();
        assert_eq!(table.age(0), 1);
    }

    #[test]
    fn origin_aware_delivery_sets_transit_age() {
        let mut table = AoiTable::new(2);
        for t in 1..=7 {
            table.tick(t).unwrap();
        }
        // Data collected at slot 3, handed over at slot 7.
        table.record_delivery_from(1, 3).unwrap();
        assert_eq!(table.age(1), 4);
    }

    #[test]
    fn average_matches_direct_mean() {
        // T=2, one waypoint, ages {1,2}: average 1.5.
        let mut table = AoiTable::new(1);
        table.tick(1).unwrap();
        table.finalize_slot();
        table.tick(2).unwrap();
        table.finalize_slot();
        assert!((table.average_aoi().unwrap() - 1.5).abs() < 1e-12);
        assert!((table.normalized_average_aoi(2).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn all_slot_deliveries_average_zero() {
        let mut table = AoiTable::new(2);
        for t in 1..=5 {
            table.tick(t).unwrap();
            table.record_delivery(0, t).unwrap();
            table.record_delivery(1, t).unwrap();
            table.finalize_slot();
        }
        assert_eq!(table.average_aoi().unwrap(), 0.0);
    }

    #[test]
    fn average_rejects_empty_window() {
        let table = AoiTable::new(0);
        assert!(table.average_aoi().is_err());
        let fresh = AoiTable::new(3);
        assert!(fresh.average_aoi().is_err());
    }

    /// Brute-force recomputation of the average from a delivery log.
    #[test]
    fn average_matches_delivery_log_oracle() {
        let deliveries: [(u32, usize, u32); 5] =
            [(2, 0, 2), (4, 1, 3), (6, 0, 6), (9, 2, 5), (9, 1, 9)];
        let waypoints = 3;
        let horizon = 10u32;

        let mut table = AoiTable::new(waypoints);
        for t in 1..=horizon {
            table.tick(t).unwrap();
            for &(slot, p, origin) in &deliveries {
                if slot == t {
                    table.record_delivery_from(p, origin).unwrap();
                }
            }
            table.finalize_slot();
        }

        // Independent oracle: replay the log per waypoint and slot.
        let mut total = 0u64;
        for p in 0..waypoints {
            let mut origin = 0u32;
            for t in 1..=horizon {
                for &(slot, wp, o) in &deliveries {
                    if slot == t && wp == p && o > origin {
                        origin = o;
                    }
                }
                total += (t - origin) as u64;
            }
        }
        let expected = total as f64 / (horizon as f64 * waypoints as f64);
        assert!((table.average_aoi().unwrap() - expected).abs() < 1e-12);
    }

    /// Inserting an extra delivery never increases the average.
    #[test]
    fn extra_delivery_is_monotone_improvement() {
        let base: [(u32, usize, u32); 2] = [(3, 0, 3), (8, 1, 6)];
        let extra: [(u32, usize, u32); 3] = [(3, 0, 3), (5, 1, 5), (8, 1, 6)];
        let run = |log: &[(u32, usize, u32)]| {
            let mut table = AoiTable::new(2);
            for t in 1..=10 {
                table.tick(t).unwrap();
                for &(slot, p, origin) in log {
                    if slot == t {
                        table.record_delivery_from(p, origin).unwrap();
                    }
                }
                table.finalize_slot();
            }
            table.average_aoi().unwrap()
        };
        assert!(run(&extra) <= run(&base));
    }
}
