/// Hard cap on training epochs regardless of patience.
pub const MAX_EPOCHS: usize = 100;

/// Outcome of replaying a validation-loss history through early stopping.
/// Epochs are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    /// Epoch after which training halts, if the rule fired within the history.
    pub stop_epoch: Option<usize>,
    pub best_epoch: usize,
}

/// Incremental early-stopping monitor: stop once the best validation loss has
/// not strictly improved for `patience` consecutive epochs, or at `max_epochs`.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    max_epochs: usize,
    best_loss: f64,
    best_epoch: usize,
    epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, max_epochs: usize) -> Self {
        Self {
            patience: patience.max(1),
            max_epochs,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            epoch: 0,
            stale: 0,
        }
    }

    /// Records one epoch's validation loss. Returns `true` if it is a new best.
    pub fn observe(&mut self, loss: f64) -> bool {
        self.epoch += 1;
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = self.epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience || self.epoch >= self.max_epochs
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }
}

pub fn early_stopping(history: &[f64], patience: usize, max_epochs: usize) -> StopDecision {
    let mut monitor = EarlyStopping::new(patience, max_epochs);
    for &loss in history {
        monitor.observe(loss);
        if monitor.should_stop() {
            return StopDecision {
                stop_epoch: Some(monitor.epoch()),
                best_epoch: monitor.best_epoch(),
            };
        }
    }
    StopDecision {
        stop_epoch: None,
        best_epoch: monitor.best_epoch(),
    }
}
