/// Heterodyne record samples. Sample `i` is the average of `V_I`, `V_Q` over
/// `[times[i], times[i] + durations[i])`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementRecord {
    pub times: Vec<f64>,
    pub durations: Vec<f64>,
    pub v_i: Vec<f64>,
    pub v_q: Vec<f64>,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        match (self.times.last(), self.durations.last()) {
            (Some(t), Some(d)) => t + d,
            _ => 0.0,
        }
    }
}

/// Block-averages raw record samples into groups of `block` steps.
#[derive(Debug, Clone)]
pub struct RecordThinner {
    block: usize,
    count: usize,
    start: f64,
    span: f64,
    acc: [f64; 2],
    pub record: MeasurementRecord,
}

impl RecordThinner {
    pub fn new(block: usize) -> Self {
        RecordThinner {
            block: block.max(1),
            count: 0,
            start: 0.0,
            span: 0.0,
            acc: [0.0; 2],
            record: MeasurementRecord::default(),
        }
    }

    pub fn push(&mut self, t: f64, dt: f64, v: [f64; 2]) {
        if self.count == 0 {
            self.start = t;
            self.span = 0.0;
            self.acc = [0.0; 2];
        }
        self.acc[0] += v[0] * dt;
        self.acc[1] += v[1] * dt;
        self.span += dt;
        self.count += 1;
        if self.count == self.block {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.count == 0 {
            return;
        }
        self.record.times.push(self.start);
        self.record.durations.push(self.span);
        self.record.v_i.push(self.acc[0] / self.span);
        self.record.v_q.push(self.acc[1] / self.span);
        self.count = 0;
    }

    pub fn finish(mut self) -> MeasurementRecord {
        self.flush();
        self.record
    }
}
