//! Independent numerical oracles used only by the test suites (enabled by
//! the `test-oracles` feature).  Nothing here is allowed to share code with
//! the implementation it checks: matrix elements come from Gauss–Legendre
//! quadrature over the sphere instead of closed forms, and thermal weights
//! from a direct partition sum.

use crate::rotor::Parity;

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P_n'(x) by upward recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Normalized associated Legendre function P̄_l^m(x) with
/// ∫_{-1}^{1} [P̄_l^m]² dx = 1, by the standard stable recurrence.
pub fn assoc_legendre_norm(l: u32, m: u32, x: f64) -> f64 {
    assert!(l >= m);
    // P̄_m^m = (-1)^m sqrt((2m+1)!!/((2m)!!·2)) (1-x²)^{m/2}
    let mut pmm = (0.5_f64).sqrt();
    if m > 0 {
        let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
        let mut ratio = 0.5;
        for k in 1..=m {
            ratio *= (2.0 * k as f64 + 1.0) / (2.0 * k as f64);
        }
        pmm = ratio.sqrt() * somx2.powi(m as i32);
        if m % 2 == 1 {
            pmm = -pmm;
        }
    }
    if l == m {
        return pmm;
    }
    // P̄_{m+1}^m = x sqrt(2m+3) P̄_m^m
    let mut p_prev = pmm;
    let mut p_curr = x * ((2 * m + 3) as f64).sqrt() * pmm;
    if l == m + 1 {
        return p_curr;
    }
    for ll in (m + 2)..=l {
        let lf = ll as f64;
        let mf = m as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b =
            (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
        let p_next = a * (x * p_curr - b * p_prev);
        p_prev = p_curr;
        p_curr = p_next;
    }
    p_curr
}

/// ⟨J', M | cos²θ | J, M⟩ by Gauss–Legendre quadrature over x = cosθ.
pub fn cos2_element_quadrature(j1: u32, j2: u32, m: i32, order: usize) -> f64 {
    let ma = m.unsigned_abs();
    let (nodes, weights) = gauss_legendre(order);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * assoc_legendre_norm(j1, ma, x) * x * x * assoc_legendre_norm(j2, ma, x))
        .sum()
}

/// Reference propagation of one finite pulse by brute-force RK4 integration
/// of the Schrödinger equation over the truncated envelope window, in the
/// frame of the pulse center.  Independent of the split-step path: the
/// Hamiltonian `H(t) = H_rot - P·g(t)·C` is integrated directly on a fine
/// time grid.
///
/// `rot_phases` holds the diagonal rotational frequencies (π·J(J+1) in
/// 1/T_rev units), `coupling` the cos² matrix of the block.
pub fn finite_pulse_reference(
    rot_phases: &[f64],
    coupling: &[Vec<f64>],
    amplitudes: &mut [num_complex::Complex64],
    p: f64,
    fwhm: f64,
    truncation_fwhm: f64,
    n_steps: usize,
) {
    use num_complex::Complex64 as C64;
    let n = rot_phases.len();
    let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
    let half = truncation_fwhm * fwhm;
    // normalize the truncated envelope so the kick integrates to exactly P
    let area = libm::erf(half / (std::f64::consts::SQRT_2 * sigma));
    let envelope = |t: f64| {
        (-t * t / (2.0 * sigma * sigma)).exp()
            / ((2.0 * std::f64::consts::PI).sqrt() * sigma * area)
    };
    let rhs = |t: f64, psi: &[C64], out: &mut [C64]| {
        let g = p * envelope(t);
        for i in 0..n {
            let mut h_psi = rot_phases[i] * psi[i];
            for k in 0..n {
                h_psi -= g * coupling[i][k] * psi[k];
            }
            out[i] = -C64::i() * h_psi;
        }
    };
    let dt = 2.0 * half / n_steps as f64;
    // enter the pulse-center frame: free evolution from the center back to
    // the window start
    for i in 0..n {
        let phase = rot_phases[i] * half;
        amplitudes[i] *= C64::new(phase.cos(), phase.sin());
    }
    let mut k1 = vec![C64::default(); n];
    let mut k2 = vec![C64::default(); n];
    let mut k3 = vec![C64::default(); n];
    let mut k4 = vec![C64::default(); n];
    let mut tmp = vec![C64::default(); n];
    let mut t = -half;
    for _ in 0..n_steps {
        rhs(t, amplitudes, &mut k1);
        for i in 0..n {
            tmp[i] = amplitudes[i] + 0.5 * dt * k1[i];
        }
        rhs(t + 0.5 * dt, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = amplitudes[i] + 0.5 * dt * k2[i];
        }
        rhs(t + 0.5 * dt, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = amplitudes[i] + dt * k3[i];
        }
        rhs(t + dt, &tmp, &mut k4);
        for i in 0..n {
            amplitudes[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += dt;
    }
    // leave the window back at the pulse center
    for i in 0..n {
        let phase = rot_phases[i] * half;
        amplitudes[i] *= C64::new(phase.cos(), phase.sin());
    }
}

/// Boltzmann weights (J, M, weight) by direct partition-sum enumeration.
pub fn boltzmann_enumeration(kt_over_hcb: f64, parity: Parity, j_max: u32) -> Vec<(u32, i32, f64)> {
    let mut out = Vec::new();
    let mut z = 0.0;
    let start = parity.first_allowed_at_or_above(0);
    let step = if parity == Parity::Both { 1 } else { 2 };
    let mut j = start;
    while j <= j_max {
        let e = (j as f64) * (j as f64 + 1.0);
        let w = (-e / kt_over_hcb).exp();
        z += (2 * j + 1) as f64 * w;
        for m in -(j as i32)..=(j as i32) {
            out.push((j, m, w));
        }
        j += step;
    }
    for item in &mut out {
        item.2 /= z;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(16);
        let int_x2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((int_x2 - 2.0 / 3.0).abs() < 1e-14);
        let int_x8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((int_x8 - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_normalization() {
        let (x, w) = gauss_legendre(64);
        for (l, m) in [(0u32, 0u32), (3, 0), (5, 2), (12, 6), (20, 6)] {
            let norm: f64 = x
                .iter()
                .zip(&w)
                .map(|(&x, &w)| {
                    let p = assoc_legendre_norm(l, m, x);
                    w * p * p
                })
                .sum();
            assert!((norm - 1.0).abs() < 1e-12, "l={l} m={m}: {norm}");
        }
    }

    #[test]
    fn orthogonality() {
        let (x, w) = gauss_legendre(64);
        let dot: f64 = x
            .iter()
            .zip(&w)
            .map(|(&x, &w)| w * assoc_legendre_norm(4, 2, x) * assoc_legendre_norm(6, 2, x))
            .sum();
        assert!(dot.abs() < 1e-13);
    }
}
