use std::fmt::Write as _;

use super::{MpcInstance, ServiceGuarantee};

struct Expr(Vec<(f64, String)>);

impl Expr {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn add(&mut self, coef: f64, var: String) {
        if coef != 0.0 {
            self.0.push((coef, var));
        }
    }

    fn write(&self, out: &mut String) {
        for (n, (c, v)) in self.0.iter().enumerate() {
            let sign = if *c < 0.0 { "-" } else { "+" };
            if n > 0 && n % 6 == 0 {
                out.push_str("\n  ");
            }
            let _ = write!(out, " {sign} {} {v}", c.abs());
        }
    }
}

fn xp(i: usize, j: usize, t0: usize, rho: usize) -> String {
    format!("xp_{i}_{j}_{t0}_{rho}")
}

fn xr(i: usize, j: usize, t: usize) -> String {
    format!("xr_{i}_{j}_{t}")
}

/// The full program, including the big-M relocation gate and an explicit
/// carry-over variable per `(zone, epoch)`, in CPLEX LP text format.
pub fn export_lp(inst: &MpcInstance) -> String {
    let (z, t_len, k_len) = (inst.zones, inst.horizon, inst.multiplier_count());
    let m = inst.big_m as f64;
    let mut out = String::from("\\ ride-hailing pricing and relocation program\nMaximize\n obj:");
    let mut obj = Expr::new();
    for i in 0..z {
        for j in 0..z {
            for t0 in 0..t_len {
                for rho in t0..=inst.window_last(t0) {
                    obj.add(inst.service_gain(i, j, t0, rho), xp(i, j, t0, rho));
                }
            }
            if i != j {
                for t in 0..t_len {
                    obj.add(-inst.relocation_cost(i, j, t), xr(i, j, t));
                }
            }
        }
    }
    obj.write(&mut out);
    out.push_str("\nSubject To\n");

    let mut row = |name: String, e: Expr, rel: &str, rhs: f64| {
        if e.0.is_empty() {
            return;
        }
        let _ = write!(out, " {name}:");
        e.write(&mut out);
        let _ = writeln!(out, " {rel} {rhs}");
    };

    for i in 0..z {
        for t in 0..t_len {
            let mut e = Expr::new();
            for k in 0..k_len {
                e.add(1.0, format!("p_{i}_{t}_{k}"));
            }
            row(format!("choice_{i}_{t}"), e, "=", 1.0);
            for j in 0..z {
                let mut e = Expr::new();
                e.add(1.0, format!("v_{i}_{j}_{t}"));
                for k in 0..k_len {
                    e.add(-(inst.demand_options[[k, i, j, t]] as f64), format!("p_{i}_{t}_{k}"));
                }
                row(format!("link_{i}_{j}_{t}"), e, "=", 0.0);

                let mut e = Expr::new();
                for rho in t..=inst.window_last(t) {
                    e.add(1.0, xp(i, j, t, rho));
                }
                e.add(-1.0, format!("v_{i}_{j}_{t}"));
                let rel = if inst.is_hard(t) && inst.service == ServiceGuarantee::Hard { "=" } else { "<=" };
                row(format!("serve_{i}_{j}_{t}"), e, rel, 0.0);
            }

            // out + carry_t - carry_{t-1} - arrivals = V
            let mut e = Expr::new();
            for j in 0..z {
                for t0 in inst.window_first_origin(t)..=t {
                    e.add(1.0, xp(i, j, t0, t));
                }
                if j != i {
                    e.add(1.0, xr(i, j, t));
                }
                let lambda = inst.lambda(j, i);
                if t >= lambda {
                    let tau = t - lambda;
                    for t0 in inst.window_first_origin(tau)..=tau {
                        e.add(-1.0, xp(j, i, t0, tau));
                    }
                    if j != i {
                        e.add(-1.0, xr(j, i, tau));
                    }
                }
            }
            e.add(1.0, format!("c_{i}_{t}"));
            if t > 0 {
                e.add(-1.0, format!("c_{i}_{}", t - 1));
            }
            row(format!("flow_{i}_{t}"), e, "=", inst.idle[[i, t]] as f64);

            let mut e = Expr::new();
            for j in (0..z).filter(|&j| j != i) {
                e.add(1.0, xr(i, j, t));
            }
            e.add(-m, format!("l_{i}_{t}"));
            row(format!("gate_{i}_{t}"), e, "<=", 0.0);

            // backlog + M l <= M
            let mut e = Expr::new();
            for t0 in inst.window_first_origin(t)..=t {
                for j in 0..z {
                    e.add(1.0, format!("v_{i}_{j}_{t0}"));
                    for rho in t0..=t {
                        e.add(-1.0, xp(i, j, t0, rho));
                    }
                }
            }
            e.add(m, format!("l_{i}_{t}"));
            row(format!("backlog_{i}_{t}"), e, "<=", m);
        }
    }

    out.push_str("Binaries\n");
    for i in 0..z {
        for t in 0..t_len {
            for k in 0..k_len {
                let _ = writeln!(out, " p_{i}_{t}_{k}");
            }
            let _ = writeln!(out, " l_{i}_{t}");
        }
    }
    out.push_str("General\n");
    for i in 0..z {
        for t in 0..t_len {
            let _ = writeln!(out, " c_{i}_{t}");
            for j in 0..z {
                let _ = writeln!(out, " v_{i}_{j}_{t}");
                if j != i {
                    let _ = writeln!(out, " {}", xr(i, j, t));
                }
                for rho in t..=inst.window_last(t) {
                    let _ = writeln!(out, " {}", xp(i, j, t, rho));
                }
            }
        }
    }
    out.push_str("End\n");
    out
}
