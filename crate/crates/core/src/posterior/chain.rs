use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ess_of, PosteriorError};
use crate::stats::{dual_cell_counts, dual_cell_widths, GridDensity};

/// A Markov chain trace: post-burn-in states with their log-target values.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    dim: usize,
    states: Vec<f64>,
    log_values: Vec<f64>,
    accepted: usize,
    proposed: usize,
    proposal_scale_history: Vec<f64>,
}

/// JSON diagnostics summary for a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub ess: Vec<f64>,
    pub accept_rate: f64,
}

impl Chain {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            states: Vec::new(),
            log_values: Vec::new(),
            accepted: 0,
            proposed: 0,
            proposal_scale_history: Vec::new(),
        }
    }

    /// Appends a state. `accepted` records whether the transition into it was
    /// an accepted proposal.
    pub fn push(&mut self, state: &[f64], log_value: f64, accepted: bool) {
        debug_assert_eq!(state.len(), self.dim);
        debug_assert!(log_value.is_finite());
        self.states.extend_from_slice(state);
        self.log_values.push(log_value);
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
        }
    }

    /// Records acceptance bookkeeping for sub-steps that do not store a state.
    pub fn record_transition(&mut self, accepted: bool) {
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
        }
    }

    pub fn push_scale(&mut self, scale: f64) {
        self.proposal_scale_history.push(scale);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.log_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_values.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.states.chunks_exact(self.dim)
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.states().map(|s| s[j]).collect()
    }

    pub fn accept_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn proposal_scale_history(&self) -> &[f64] {
        &self.proposal_scale_history
    }

    pub fn diagnostics(&self) -> Result<ChainDiagnostics, PosteriorError> {
        let ess = (0..self.dim)
            .map(|j| ess_of(&self.coordinate(j)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ChainDiagnostics {
            ess,
            accept_rate: self.accept_rate(),
        })
    }

    /// Writes CSV `step,coord0,...,coordD,logp`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PosteriorError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["step".to_string()];
        header.extend((0..self.dim).map(|j| format!("coord{j}")));
        header.push("logp".into());
        w.write_record(&header)?;
        for (i, (state, lp)) in self.states().zip(&self.log_values).enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(state.iter().map(|x| x.to_string()));
            rec.push(lp.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

const ESS_SOFT_FLOOR: f64 = 100.0;
const ESS_HARD_FLOOR: f64 = 20.0;

/// Density of one chain coordinate on `grid`.
///
/// Draws are binned into the dual cells of `grid`, smoothed once with the
/// (¼, ½, ¼) kernel and renormalized. Below an effective sample size of 100 a
/// warning is printed to stderr; below 20 the call fails.
pub fn chain_to_density(chain: &Chain, coordinate: usize, grid: &[f64]) -> Result<GridDensity, PosteriorError> {
    if coordinate >= chain.dim() {
        return Err(PosteriorError::NoSuchCoordinate { coordinate, dim: chain.dim() });
    }
    let draws = chain.coordinate(coordinate);
    let ess = ess_of(&draws)?;
    let distinct = draws.iter().any(|&d| d != draws[0]);
    if distinct && ess < ESS_HARD_FLOOR {
        return Err(PosteriorError::InsufficientEss { ess, floor: ESS_HARD_FLOOR });
    }
    if distinct && ess < ESS_SOFT_FLOOR {
        eprintln!("warning: effective sample size {ess:.1} below {ESS_SOFT_FLOOR} for coordinate {coordinate}");
    }
    draws_to_density(&draws, grid)
}

/// Histogram-plus-smoothing density estimate of arbitrary draws on `grid`.
pub fn draws_to_density(draws: &[f64], grid: &[f64]) -> Result<GridDensity, PosteriorError> {
    // validates the grid before counting
    GridDensity::new(grid.to_vec(), vec![1.0; grid.len()])?;
    let counts = dual_cell_counts(draws, grid);
    if counts.iter().all(|&c| c == 0.0) {
        return Err(PosteriorError::MassOutsideGrid);
    }
    let widths = dual_cell_widths(grid);
    let hist: Vec<f64> = counts.iter().zip(&widths).map(|(c, w)| c / w).collect();
    let m = hist.len();
    let smoothed: Vec<f64> = (0..m)
        .map(|i| {
            let (mut acc, mut wsum) = (0.5 * hist[i], 0.5);
            if i > 0 {
                acc += 0.25 * hist[i - 1];
                wsum += 0.25;
            }
            if i + 1 < m {
                acc += 0.25 * hist[i + 1];
                wsum += 0.25;
            }
            acc / wsum
        })
        .collect();
    Ok(GridDensity::new(grid.to_vec(), smoothed)?)
}
