//! Validation-accuracy-driven learning-rate plateau scheduling and early
//! stopping with best-checkpoint capture. Both monitor in maximize mode and
//! count an epoch as improving only on a strict increase.

/// Multiply the learning rate by `factor` once the metric has failed to
/// improve for more than `patience` consecutive epochs (the reduction fires
/// on the `patience + 1`-th stale epoch).
#[derive(Debug, Clone)]
pub struct SchedulerState {
    pub patience: usize,
    pub factor: f64,
    best_metric: f64,
    stale: usize,
}

impl SchedulerState {
    pub fn new(patience: usize, factor: f64) -> Self {
        SchedulerState { patience, factor, best_metric: f64::NEG_INFINITY, stale: 0 }
    }

    pub fn step(&mut self, metric: f64, lr: f64) -> f64 {
        if metric > self.best_metric {
            self.best_metric = metric;
            self.stale = 0;
            lr
        } else {
            self.stale += 1;
            if self.stale > self.patience {
                self.stale = 0;
                lr * self.factor
            } else {
                lr
            }
        }
    }
}

/// Stop after `window` consecutive epochs without improvement, keeping a
/// snapshot of the best-scoring parameters.
#[derive(Debug, Clone)]
pub struct EarlyStopState {
    pub window: usize,
    pub best_metric: f64,
    pub best_epoch: usize,
    pub best_params: Vec<f32>,
    stale: usize,
}

impl EarlyStopState {
    pub fn new(window: usize) -> Self {
        EarlyStopState {
            window,
            best_metric: f64::NEG_INFINITY,
            best_epoch: 0,
            best_params: Vec::new(),
            stale: 0,
        }
    }

    /// Record this epoch's metric; returns true when training should halt.
    pub fn observe(&mut self, epoch: usize, metric: f64, params: &[f32]) -> bool {
        if metric > self.best_metric {
            self.best_metric = metric;
            self.best_epoch = epoch;
            self.best_params = params.to_vec();
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.window
    }
}
