//! Direction tables: share of fall / no change / rise per cell.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Variable;
use crate::profiles::PopulationKind;
use crate::runner::{Effect, Pct};
use crate::VignetteId;

pub type Cell = (PopulationKind, VignetteId, Variable);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectionCounts {
    pub fall: usize,
    pub no_change: usize,
    pub rise: usize,
}

impl DirectionCounts {
    pub fn n(&self) -> usize {
        self.fall + self.no_change + self.rise
    }

    /// Shares of (fall, no change, rise); they sum to 1 up to float error.
    pub fn shares(&self) -> (f64, f64, f64) {
        let n = self.n() as f64;
        (self.fall as f64 / n, self.no_change as f64 / n, self.rise as f64 / n)
    }

    pub fn classify(&mut self, delta: Pct, tolerance: Pct) {
        if delta > tolerance {
            self.rise += 1;
        } else if delta < -tolerance {
            self.fall += 1;
        } else {
            self.no_change += 1;
        }
    }
}

/// Counts per (population, vignette, variable). Cells without effects are
/// absent rather than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionTable {
    pub tolerance: Pct,
    #[serde(with = "super::pairs")]
    pub cells: BTreeMap<Cell, DirectionCounts>,
}

/// Classifies merged effects: Δ > tol is a rise, Δ < −tol a fall, anything
/// else no change.
pub fn direction_table(merged: &[Effect], tolerance: Pct) -> DirectionTable {
    let mut cells: BTreeMap<Cell, DirectionCounts> = BTreeMap::new();
    for e in merged {
        for var in Variable::ALL {
            cells.entry((e.kind, e.vignette.clone(), var)).or_default().classify(var.delta(e), tolerance);
        }
    }
    DirectionTable { tolerance, cells }
}

/// A share as a whole percent, "<1%" for a nonzero share that rounds to zero.
/// Shares are rounded independently, so a row may sum to 99 or 101.
pub fn display_percent(share: f64) -> String {
    let pct = (share * 100.0).round();
    if pct == 0.0 && share > 0.0 {
        "<1%".to_string()
    } else {
        format!("{pct:.0}%")
    }
}

impl DirectionTable {
    pub fn get(&self, kind: PopulationKind, vignette: &VignetteId, var: Variable) -> Option<&DirectionCounts> {
        self.cells.get(&(kind, vignette.clone(), var))
    }

    /// Plain-text table, one panel per population, rows per vignette.
    pub fn render(&self, vignettes: &[VignetteId]) -> String {
        let mut out = String::new();
        let kinds: Vec<PopulationKind> = {
            let mut k: Vec<_> = self.cells.keys().map(|c| c.0).collect();
            k.dedup();
            k
        };
        for kind in kinds {
            let _ = writeln!(out, "{}", kind.plural_label());
            let _ = writeln!(
                out,
                "{:<22} {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9}",
                "vignette", "π fall", "π same", "π rise", "u fall", "u same", "u rise"
            );
            for v in vignettes {
                let mut line = format!("{:<22}", v.display_name());
                for (i, var) in Variable::ALL.iter().enumerate() {
                    if i == 1 {
                        line.push_str(" |");
                    }
                    match self.get(kind, v, *var) {
                        Some(c) => {
                            let (f, s, r) = c.shares();
                            for share in [f, s, r] {
                                let _ = write!(line, " {:>9}", display_percent(share));
                            }
                        }
                        None => line.push_str(&format!(" {:>9} {:>9} {:>9}", "n/a", "n/a", "n/a")),
                    }
                }
                let _ = writeln!(out, "{}", line.trim_end());
            }
            out.push('\n');
        }
        out
    }

    /// CSV rows: population, vignette, variable, n, counts and shares.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("population,vignette,variable,n,fall,no_change,rise,share_fall,share_no_change,share_rise\n");
        for ((kind, v, var), c) in &self.cells {
            let (f, s, r) = c.shares();
            let _ = writeln!(out, "{kind},{v},{},{},{},{},{},{f},{s},{r}", var.as_str(), c.n(), c.fall, c.no_change, c.rise);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Scenario;

    fn effect(pi: i64) -> Effect {
        Effect {
            repeat: 0,
            kind: PopulationKind::Household,
            agent_id: "a".into(),
            vignette: VignetteId::new(VignetteId::OIL_PRICE),
            scenario: Scenario::Rise,
            d_inflation: Pct(pi),
            d_unemployment: Pct(0),
        }
    }

    #[test]
    fn counting_example() {
        let t = direction_table(&[effect(30), effect(0), effect(-10), effect(50)], Pct(0));
        let oil = VignetteId::new(VignetteId::OIL_PRICE);
        let c = t.get(PopulationKind::Household, &oil, Variable::Inflation).unwrap();
        assert_eq!(c.shares(), (0.25, 0.25, 0.5));
        let u = t.get(PopulationKind::Household, &oil, Variable::Unemployment).unwrap();
        assert_eq!(u.shares(), (0.0, 1.0, 0.0));
        assert!(t.get(PopulationKind::Expert, &oil, Variable::Inflation).is_none());
    }

    #[test]
    fn tolerance_widens_no_change() {
        let t = direction_table(&[effect(5), effect(-5), effect(6)], Pct(5));
        let c = t.cells.values().next().unwrap();
        assert_eq!((c.fall, c.no_change, c.rise), (0, 2, 1));
    }

    #[test]
    fn display_rounding() {
        assert_eq!(display_percent(0.004), "<1%");
        assert_eq!(display_percent(0.0), "0%");
        assert_eq!(display_percent(0.785), "79%");
        assert_eq!(display_percent(1.0), "100%");
    }

    #[test]
    fn render_marks_absent_cells() {
        let t = direction_table(&[effect(30)], Pct(0));
        let text = t.render(&[VignetteId::new(VignetteId::OIL_PRICE), VignetteId::new(VignetteId::INCOME_TAXES)]);
        assert!(text.contains("100%"));
        assert!(text.contains("n/a"));
    }
}
