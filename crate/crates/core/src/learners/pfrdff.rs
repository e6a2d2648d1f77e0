use std::collections::VecDeque;

use crate::model::{Label, Representation};
use crate::world::{Feedback, Instance, StreamEvent, Transcript};

use super::session::{run_session, SessionError};
use super::{ub, Learner, LearnerError, Move, Prediction, Rule, SrDff, Update};

/// The nested doubling order over `(m~, k~)`: for `v = 1, 2, 4, ...`,
/// every pair with `v/2 < UB(m~, k~) <= v`, `m~` a power of two and
/// `k~ + 1` a power of two.
#[derive(Clone, Debug)]
pub struct PhaseSchedule {
    v: u64,
    pending: VecDeque<(u64, u64)>,
}

impl PhaseSchedule {
    pub fn new() -> Self {
        PhaseSchedule {
            v: 1,
            pending: Self::pairs_for(1).into(),
        }
    }

    pub fn pairs_for(v: u64) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        let mut m = 1u64;
        while ub(m, 0) <= v {
            let mut k = 0u64;
            while ub(m, k) <= v {
                if 2 * ub(m, k) > v {
                    out.push((m, k));
                }
                k = 2 * k + 1;
            }
            m *= 2;
        }
        out
    }

    /// Current value of the outer budget `v`.
    pub fn v(&self) -> u64 {
        self.v
    }
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for PhaseSchedule {
    type Item = (u64, u64);

    fn next(&mut self) -> Option<(u64, u64)> {
        while self.pending.is_empty() {
            self.v = self.v.checked_mul(2)?;
            self.pending = Self::pairs_for(self.v).into();
        }
        self.pending.pop_front()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseRecord {
    pub m: u64,
    pub k: u64,
    pub v: u64,
    pub budget: u64,
    /// First round handled by this phase.
    pub start: usize,
    /// Mistakes of the inner learner, excluding the anchoring round.
    pub mistakes: u64,
    pub anchor_mistake: bool,
    pub broke: bool,
}

/// Parameter-free wrapper: runs fresh SR-DFF instances with growing
/// `(m~, k~)` and abandons each one once it exceeds `UB(m~, k~)` mistakes.
#[derive(Clone, Debug)]
pub struct PfrDff {
    schedule: PhaseSchedule,
    inner: SrDff,
    phases: Vec<PhaseRecord>,
    last: Option<(usize, Label)>,
    anchoring: bool,
}

impl PfrDff {
    pub fn new() -> Self {
        let mut schedule = PhaseSchedule::new();
        let (m, k) = schedule.next().expect("schedule is infinite");
        let v = schedule.v();
        PfrDff {
            schedule,
            inner: SrDff::new(m as usize).expect("m~ >= 1"),
            phases: vec![PhaseRecord {
                m,
                k,
                v,
                budget: ub(m, k),
                start: 0,
                mistakes: 0,
                anchor_mistake: false,
                broke: false,
            }],
            last: None,
            anchoring: false,
        }
    }

    pub fn phases(&self) -> &[PhaseRecord] {
        &self.phases
    }

    pub fn terminal(&self) -> &PhaseRecord {
        self.phases.last().expect("at least one phase")
    }

    fn next_phase(&mut self, start: usize) -> Result<(), LearnerError> {
        let (m, k) = self
            .schedule
            .next()
            .ok_or_else(|| LearnerError::Other("phase schedule overflowed".into()))?;
        let m_usize = usize::try_from(m)
            .map_err(|_| LearnerError::Other(format!("m~ = {m} does not fit in memory")))?;
        self.inner = SrDff::new(m_usize)?;
        self.phases.push(PhaseRecord {
            m,
            k,
            v: self.schedule.v(),
            budget: ub(m, k),
            start,
            mistakes: 0,
            anchor_mistake: false,
            broke: false,
        });
        Ok(())
    }
}

impl Default for PfrDff {
    fn default() -> Self {
        Self::new()
    }
}

impl Learner for PfrDff {
    fn name(&self) -> &'static str {
        "pfrdff"
    }

    fn predict(&mut self, x: &Instance) -> Result<Move, LearnerError> {
        if self.inner.is_anchored() {
            return self.inner.predict(x);
        }
        match &self.last {
            None => Ok(Move::Query),
            Some((t, label)) => {
                self.anchoring = true;
                Ok(Move::Predict(Prediction {
                    label: label.clone(),
                    explanation: *t,
                }))
            }
        }
    }

    fn absorb(
        &mut self,
        x: &Instance,
        mv: &Move,
        feedback: Option<&Feedback>,
    ) -> Result<Update, LearnerError> {
        let observed = match (feedback, mv) {
            (Some(fb), _) => fb.label.clone(),
            (None, Move::Predict(p)) => p.label.clone(),
            (None, Move::Query) => return Err(LearnerError::MissingLabel { t: x.t }),
        };

        if std::mem::take(&mut self.anchoring) {
            if let (Some(fb), Some(p)) = (feedback, mv.predicted()) {
                if &fb.label == p {
                    return Err(LearnerError::FeedbackOnCorrect { t: x.t });
                }
            }
            self.inner.set_anchor(x.t, observed.clone());
            self.phases
                .last_mut()
                .expect("at least one phase")
                .anchor_mistake = feedback.is_some();
            self.last = Some((x.t, observed));
            return Ok(Update::Anchored);
        }

        let update = self.inner.absorb(x, mv, feedback)?;
        self.last = Some((x.t, observed));
        if matches!(mv, Move::Predict(_)) && feedback.is_some() {
            let phase = self.phases.last_mut().expect("at least one phase");
            phase.mistakes += 1;
            if phase.mistakes > phase.budget {
                phase.broke = true;
                self.next_phase(x.t + 1)?;
                return Ok(Update::Restarted);
            }
        }
        Ok(update)
    }

    fn rules(&self) -> &[Rule] {
        self.inner.rules()
    }
}

/// Runs the wrapper over a stream and returns its phase log with the
/// transcript.
pub fn pfrdff_run(
    stream: &[StreamEvent],
    world: &Representation,
) -> Result<(Transcript, Vec<PhaseRecord>), SessionError> {
    let mut learner = PfrDff::new();
    let transcript = run_session(&mut learner, stream, world)?;
    Ok((transcript, learner.phases))
}
