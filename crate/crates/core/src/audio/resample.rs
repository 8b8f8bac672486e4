/// Rational-ratio windowed-sinc resampler.
///
/// The ratio `to / from` is reduced to `up / down`; one Kaiser-windowed sinc
/// phase is tabulated for each of the `up` fractional offsets. Each phase is
/// normalized to unit DC gain. Equal rates bypass filtering entirely.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    half_width: usize,
    phases: Vec<Vec<f64>>,
}

const ZERO_CROSSINGS: f64 = 24.0;
const KAISER_BETA: f64 = 8.6;
const ROLLOFF: f64 = 0.95;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= half / k as f64;
        let t2 = term * term;
        sum += t2;
        if t2 < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

impl Resampler {
    pub fn new(from_rate: u32, to_rate: u32) -> Self {
        let g = gcd(from_rate as u64, to_rate as u64).max(1);
        let up = (to_rate as u64 / g) as usize;
        let down = (from_rate as u64 / g) as usize;
        if up == down {
            return Self {
                up: 1,
                down: 1,
                half_width: 0,
                phases: Vec::new(),
            };
        }
        // cutoff relative to the input Nyquist frequency
        let cutoff = ROLLOFF * (up as f64 / down as f64).min(1.0);
        let half_width = (ZERO_CROSSINGS / cutoff).ceil() as usize;
        let norm = bessel_i0(KAISER_BETA);
        let phases = (0..up)
            .map(|phase| {
                let frac = phase as f64 / up as f64;
                let mut taps: Vec<f64> = (0..=2 * half_width)
                    .map(|j| {
                        let tau = j as f64 - half_width as f64 - frac;
                        let x = tau / (half_width as f64 + 1.0);
                        if x.abs() >= 1.0 {
                            return 0.0;
                        }
                        let window = bessel_i0(KAISER_BETA * (1.0 - x * x).sqrt()) / norm;
                        cutoff * sinc(cutoff * tau) * window
                    })
                    .collect();
                let dc: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= dc);
                taps
            })
            .collect();
        Self {
            up,
            down,
            half_width,
            phases,
        }
    }

    pub fn is_passthrough(&self) -> bool {
        self.up == self.down
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, input: &[f32]) -> Vec<f32> {
        if self.is_passthrough() {
            return input.to_vec();
        }
        let hw = self.half_width as isize;
        (0..self.output_len(input.len()))
            .map(|n| {
                let pos = n * self.down;
                let base = (pos / self.up) as isize;
                let taps = &self.phases[pos % self.up];
                let mut acc = 0.0;
                for (j, &h) in taps.iter().enumerate() {
                    let k = base + j as isize - hw;
                    if k >= 0 && (k as usize) < input.len() {
                        acc += h * input[k as usize] as f64;
                    }
                }
                acc.clamp(-1.0, 1.0) as f32
            })
            .collect()
    }
}
