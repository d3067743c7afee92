//! Exact solution of the Euler Riemann problem for an ideal gas, following
//! the classical pressure-function iteration.

#[derive(Debug, Clone, Copy)]
pub struct Primitive {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

pub struct ExactRiemann {
    gamma: f64,
    left: Primitive,
    right: Primitive,
    p_star: f64,
    u_star: f64,
}

impl ExactRiemann {
    pub fn new(left: Primitive, right: Primitive, gamma: f64) -> Self {
        let mut s = Self { gamma, left, right, p_star: 0.0, u_star: 0.0 };
        s.solve_star();
        s
    }

    fn sound(&self, w: &Primitive) -> f64 {
        (self.gamma * w.p / w.rho).sqrt()
    }

    /// Pressure function of one side and its derivative.
    fn side(&self, p: f64, w: &Primitive) -> (f64, f64) {
        let g = self.gamma;
        let c = self.sound(w);
        if p > w.p {
            let a = 2.0 / ((g + 1.0) * w.rho);
            let b = (g - 1.0) / (g + 1.0) * w.p;
            let q = (a / (p + b)).sqrt();
            ((p - w.p) * q, q * (1.0 - 0.5 * (p - w.p) / (b + p)))
        } else {
            let e = (g - 1.0) / (2.0 * g);
            let r = p / w.p;
            (2.0 * c / (g - 1.0) * (r.powf(e) - 1.0), r.powf(-(g + 1.0) / (2.0 * g)) / (w.rho * c))
        }
    }

    fn solve_star(&mut self) {
        let (l, r) = (self.left, self.right);
        let du = r.u - l.u;
        let mut p = (0.5 * (l.p + r.p)).max(1e-8);
        for _ in 0..100 {
            let (fl, dl) = self.side(p, &l);
            let (fr, dr) = self.side(p, &r);
            let next = (p - (fl + fr + du) / (dl + dr)).max(1e-10);
            let done = 2.0 * (next - p).abs() / (next + p) < 1e-14;
            p = next;
            if done {
                break;
            }
        }
        let (fl, _) = self.side(p, &l);
        let (fr, _) = self.side(p, &r);
        self.p_star = p;
        self.u_star = 0.5 * (l.u + r.u) + 0.5 * (fr - fl);
    }

    pub fn star(&self) -> (f64, f64) {
        (self.p_star, self.u_star)
    }

    /// Self-similar solution at `s = (x - x0) / t`.
    pub fn sample(&self, s: f64) -> Primitive {
        let g = self.gamma;
        let (ps, us) = (self.p_star, self.u_star);
        if s <= us {
            let w = self.left;
            let c = self.sound(&w);
            if ps > w.p {
                let ratio = ps / w.p;
                let speed = w.u
                    - c * ((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)).sqrt();
                if s <= speed {
                    w
                } else {
                    let rho = w.rho * (ratio + (g - 1.0) / (g + 1.0))
                        / ((g - 1.0) / (g + 1.0) * ratio + 1.0);
                    Primitive { rho, u: us, p: ps }
                }
            } else {
                let head = w.u - c;
                let cs = c * (ps / w.p).powf((g - 1.0) / (2.0 * g));
                let tail = us - cs;
                if s <= head {
                    w
                } else if s >= tail {
                    Primitive { rho: w.rho * (ps / w.p).powf(1.0 / g), u: us, p: ps }
                } else {
                    let k = 2.0 / (g + 1.0) + (g - 1.0) / ((g + 1.0) * c) * (w.u - s);
                    Primitive {
                        rho: w.rho * k.powf(2.0 / (g - 1.0)),
                        u: 2.0 / (g + 1.0) * (c + (g - 1.0) / 2.0 * w.u + s),
                        p: w.p * k.powf(2.0 * g / (g - 1.0)),
                    }
                }
            }
        } else {
            let w = self.right;
            let c = self.sound(&w);
            if ps > w.p {
                let ratio = ps / w.p;
                let speed = w.u
                    + c * ((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)).sqrt();
                if s >= speed {
                    w
                } else {
                    let rho = w.rho * (ratio + (g - 1.0) / (g + 1.0))
                        / ((g - 1.0) / (g + 1.0) * ratio + 1.0);
                    Primitive { rho, u: us, p: ps }
                }
            } else {
                let head = w.u + c;
                let cs = c * (ps / w.p).powf((g - 1.0) / (2.0 * g));
                let tail = us + cs;
                if s >= head {
                    w
                } else if s <= tail {
                    Primitive { rho: w.rho * (ps / w.p).powf(1.0 / g), u: us, p: ps }
                } else {
                    let k = 2.0 / (g + 1.0) - (g - 1.0) / ((g + 1.0) * c) * (w.u - s);
                    Primitive {
                        rho: w.rho * k.powf(2.0 / (g - 1.0)),
                        u: 2.0 / (g + 1.0) * (-c + (g - 1.0) / 2.0 * w.u + s),
                        p: w.p * k.powf(2.0 * g / (g - 1.0)),
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sod_star_state() {
        // published star values for the Sod problem
        let r = ExactRiemann::new(
            Primitive { rho: 1.0, u: 0.0, p: 1.0 },
            Primitive { rho: 0.125, u: 0.0, p: 0.1 },
            1.4,
        );
        let (p, u) = r.star();
        assert!((p - 0.30313).abs() < 1e-5, "p* = {p}");
        assert!((u - 0.92745).abs() < 1e-5, "u* = {u}");
    }
}
