use crate::Tensor2;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Component-wise compensated sum of tensors.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct TensorSum {
    xx: Compensated,
    xy: Compensated,
    yx: Compensated,
    yy: Compensated,
}

impl TensorSum {
    #[inline]
    pub fn add(&mut self, t: Tensor2) {
        self.xx.add(t.xx);
        self.xy.add(t.xy);
        self.yx.add(t.yx);
        self.yy.add(t.yy);
    }

    pub fn value(&self) -> Tensor2 {
        Tensor2::new(self.xx.value(), self.xy.value(), self.yx.value(), self.yy.value())
    }
}
