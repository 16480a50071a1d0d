/// Classical fixed-step fourth-order Runge-Kutta for autonomous systems.
/// Stage buffers are kept between steps.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], stage: vec![0.0; n] }
    }

    pub fn step<E, F>(&mut self, y: &mut [f64], dt: f64, mut f: F) -> Result<(), E>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<(), E>,
    {
        debug_assert_eq!(y.len(), self.k1.len());
        f(y, &mut self.k1)?;
        for ((s, y), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k1) {
            *s = y + 0.5 * dt * k;
        }
        f(&self.stage, &mut self.k2)?;
        for ((s, y), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k2) {
            *s = y + 0.5 * dt * k;
        }
        f(&self.stage, &mut self.k3)?;
        for ((s, y), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k3) {
            *s = y + dt * k;
        }
        f(&self.stage, &mut self.k4)?;
        for (i, y) in y.iter_mut().enumerate() {
            *y += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn exact_on_constant_rate() {
        let omega0 = 2.0 * std::f64::consts::PI * 60.0;
        let mut rk = Rk4::new(1);
        let mut y = [0.25];
        rk.step(&mut y, 1e-3, |_, dy| {
            dy[0] = omega0;
            Ok::<_, Infallible>(())
        })
        .unwrap();
        assert!((y[0] - (0.25 + omega0 * 1e-3)).abs() < 1e-14);
    }

    #[test]
    fn exponential_decay_single_step() {
        let mut rk = Rk4::new(1);
        let mut y = [1.0];
        rk.step(&mut y, 0.01, |y, dy| {
            dy[0] = -y[0];
            Ok::<_, Infallible>(())
        })
        .unwrap();
        assert!((y[0] - (-0.01f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn fixed_point_is_preserved() {
        let mut rk = Rk4::new(2);
        let mut y = [3.0, -1.0];
        rk.step(&mut y, 0.1, |y, dy| {
            dy[0] = y[1] + 1.0;
            dy[1] = 3.0 - y[0];
            Ok::<_, Infallible>(())
        })
        .unwrap();
        assert_eq!(y, [3.0, -1.0]);
    }
}
