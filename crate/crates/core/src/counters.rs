use std::ops::AddAssign;

/// Machine-independent work counters.
///
/// Merges, curve evaluations and transcendental function calls stand in for
/// floating point operation counts, which depend on compiler and ISA.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CounterSet {
    /// Records removed by the merge cascade or by a null-drop.
    pub merges: u64,
    /// Sum over steps of the number of retained records.
    pub curves_stored_sum: u64,
    /// Sum over steps of the curves evaluated by the adaptive check.
    pub curves_evaluated_sum: u64,
    /// Curves evaluated by forced full maximisations (statistic requests).
    pub full_evaluations: u64,
    /// Logarithms and other transcendental calls made by curve evaluations
    /// and root finding.
    pub transcendental_calls: u64,
    pub steps: u64,
}

impl CounterSet {
    pub fn mean_stored(&self) -> f64 {
        self.curves_stored_sum as f64 / self.steps.max(1) as f64
    }

    pub fn mean_evaluated(&self) -> f64 {
        self.curves_evaluated_sum as f64 / self.steps.max(1) as f64
    }
}

impl AddAssign for CounterSet {
    fn add_assign(&mut self, rhs: Self) {
        self.merges += rhs.merges;
        self.curves_stored_sum += rhs.curves_stored_sum;
        self.curves_evaluated_sum += rhs.curves_evaluated_sum;
        self.full_evaluations += rhs.full_evaluations;
        self.transcendental_calls += rhs.transcendental_calls;
        self.steps += rhs.steps;
    }
}
