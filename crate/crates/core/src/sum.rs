//! Compensated (Neumaier) summation.

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn sum_squares(xs: &[f64]) -> f64 {
    let mut acc = Neumaier::default();
    for &x in xs {
        acc.add(x * x);
    }
    acc.value()
}

pub(crate) fn dot(xs: &[f64], ys: &[f64]) -> f64 {
    let mut acc = Neumaier::default();
    for (&x, &y) in xs.iter().zip(ys) {
        acc.add(x * y);
    }
    acc.value()
}
