//! Early stopping on validation loss.
//!
//! Training halts once the validation loss has risen for `patience`
//! consecutive epochs; the epoch with the lowest loss is the one to keep.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    rises: usize,
    last: Option<f64>,
    best: Option<(usize, f64)>,
    epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, rises: 0, last: None, best: None, epochs: 0 }
    }

    /// Records the validation loss of the next epoch (epochs count from 1).
    pub fn observe(&mut self, loss: f64) -> StopDecision {
        self.epochs += 1;
        if self.best.is_none_or(|(_, b)| loss < b) {
            self.best = Some((self.epochs, loss));
        }
        match self.last {
            Some(prev) if loss > prev => self.rises += 1,
            _ => self.rises = 0,
        }
        self.last = Some(loss);
        if self.patience > 0 && self.rises >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    /// `true` when the most recent observation is the best so far.
    pub fn improved(&self) -> bool {
        self.best.is_some_and(|(e, _)| e == self.epochs)
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best.map(|(_, l)| l)
    }

    pub fn epochs_seen(&self) -> usize {
        self.epochs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rises_stop_and_keep_first() {
        let mut es = EarlyStopping::new(3);
        let decisions: Vec<_> = [3.0, 4.0, 5.0, 6.0].iter().map(|&l| es.observe(l)).collect();
        assert_eq!(decisions, vec![StopDecision::Continue, StopDecision::Continue, StopDecision::Continue, StopDecision::Stop]);
        assert_eq!(es.best_epoch(), Some(1));
    }

    #[test]
    fn a_dip_resets_the_count() {
        let mut es = EarlyStopping::new(3);
        for l in [5.0, 6.0, 7.0, 6.5, 7.0, 8.0] {
            assert_eq!(es.observe(l), StopDecision::Continue);
        }
        assert_eq!(es.observe(9.0), StopDecision::Stop);
        assert_eq!(es.best_epoch(), Some(1));
    }

    #[test]
    fn improvement_tracking() {
        let mut es = EarlyStopping::new(3);
        es.observe(2.0);
        assert!(es.improved());
        es.observe(1.0);
        assert!(es.improved());
        es.observe(1.5);
        assert!(!es.improved());
        assert_eq!(es.best_loss(), Some(1.0));
    }
}
