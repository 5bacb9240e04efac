use super::features::Features;

/// One product's transition in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub product: usize,
    pub period: usize,
    pub state: Features,
    pub action: usize,
    pub reward: f64,
    pub next: Features,
    pub terminal: bool,
}

/// Per-product transitions accumulated between training sweeps.
#[derive(Debug, Clone)]
pub struct ExperienceBuffer {
    products: usize,
    sweep_periods: usize,
    samples: Vec<Sample>,
    periods: usize,
}

impl ExperienceBuffer {
    pub fn new(products: usize, sweep_periods: usize) -> Self {
        ExperienceBuffer {
            products,
            sweep_periods,
            samples: Vec::with_capacity(products * sweep_periods),
            periods: 0,
        }
    }

    /// Records one period: exactly one sample per product.
    pub fn push_period(&mut self, samples: Vec<Sample>) {
        debug_assert_eq!(samples.len(), self.products);
        self.samples.extend(samples);
        self.periods += 1;
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// True once the buffer holds a full sweep's worth of periods.
    pub fn is_full(&self) -> bool {
        self.periods >= self.sweep_periods
    }

    pub fn drain(&mut self) -> Vec<Sample> {
        self.periods = 0;
        std::mem::take(&mut self.samples)
    }

    pub fn clear(&mut self) {
        self.periods = 0;
        self.samples.clear();
    }
}
