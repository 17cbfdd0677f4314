//! Quadrature rules: adaptive Gauss–Kronrod (21 points) for smooth
//! integrands, plus fixed Gauss–Legendre and Gauss–Hermite rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_287_779_270,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the abscissae XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// One 21-point Kronrod panel; returns (kronrod estimate, |kronrod - gauss|).
fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Panels are bisected in order of decreasing error estimate until the
/// summed estimate drops below `abs_tol` or `max_panels` is reached.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (value, error) = gk21(&mut f, a, b);
    let mut evaluations = 21;
    let mut total_value = value;
    let mut total_error = error;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });

    while total_error > abs_tol {
        if heap.len() >= max_panels {
            return Err(Error::Numerical {
                what: format!("adaptive quadrature hit the {max_panels}-panel cap"),
                estimate: total_value,
                error_bound: total_error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel can no longer be split in double precision.
            return Err(Error::Numerical {
                what: "quadrature panel collapsed below machine resolution".into(),
                estimate: total_value,
                error_bound: total_error,
            });
        }
        let (lv, le) = gk21(&mut f, worst.a, mid);
        let (rv, re) = gk21(&mut f, mid, worst.b);
        evaluations += 42;
        total_value += lv + rv - worst.value;
        total_error += le + re - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
        if !total_value.is_finite() {
            return Err(Error::Numerical {
                what: "non-finite integrand".into(),
                estimate: total_value,
                error_bound: f64::INFINITY,
            });
        }
    }
    // Re-sum to remove drift from the incremental updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

/// Adaptive Gauss–Kronrod for a vector-valued integrand sharing one panel
/// partition. `f(x, out)` writes all `dim` components at `x`; a panel's
/// error is the largest component error, so every component meets
/// `abs_tol`.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(
    f: F,
    dim: usize,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<Vec<f64>> {
    integrate_vec_from(f, dim, &[a, b], abs_tol, max_panels)
}

/// [`integrate_vec`] starting from the partition given by the increasing
/// `breaks` rather than a single panel.
pub fn integrate_vec_from<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    dim: usize,
    breaks: &[f64],
    abs_tol: f64,
    max_panels: usize,
) -> Result<Vec<f64>> {
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain(
            "quadrature breakpoints must be strictly increasing",
        ));
    }
    // Flat per-panel storage: values then errors, `dim` each.
    let mut store: Vec<f64> = Vec::with_capacity(2 * dim * 4 * breaks.len());
    let mut bounds: Vec<(f64, f64)> = Vec::with_capacity(4 * breaks.len());
    let mut lo = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut total_err = vec![0.0; dim];
    let mut total_val = vec![0.0; dim];

    let mut eval_panel = |a: f64, b: f64, store: &mut Vec<f64>| -> f64 {
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        f(center, &mut buf);
        for d in 0..dim {
            kron[d] = WGK[10] * buf[d];
            gauss[d] = 0.0;
        }
        for j in 0..10 {
            let dx = half * XGK[j];
            f(center - dx, &mut lo);
            f(center + dx, &mut buf);
            for d in 0..dim {
                let s = lo[d] + buf[d];
                kron[d] += WGK[j] * s;
                if j % 2 == 1 {
                    gauss[d] += WG[j / 2] * s;
                }
            }
        }
        let mut worst: f64 = 0.0;
        store.extend(kron.iter().map(|k| k * half));
        for d in 0..dim {
            let e = ((kron[d] - gauss[d]) * half).abs();
            worst = worst.max(e);
            store.push(e);
        }
        worst
    };

    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        let worst = eval_panel(w[0], w[1], &mut store);
        heap.push(VecPanel {
            worst,
            id: bounds.len(),
        });
        bounds.push((w[0], w[1]));
    }
    let sum_live =
        |heap: &BinaryHeap<VecPanel>, store: &[f64], val: &mut [f64], err: &mut [f64]| {
            val.iter_mut().for_each(|v| *v = 0.0);
            err.iter_mut().for_each(|v| *v = 0.0);
            for p in heap.iter() {
                let base = 2 * dim * p.id;
                for d in 0..dim {
                    val[d] += store[base + d];
                    err[d] += store[base + dim + d];
                }
            }
        };
    sum_live(&heap, &store, &mut total_val, &mut total_err);

    loop {
        let max_total = total_err.iter().cloned().fold(0.0, f64::max);
        if max_total <= abs_tol {
            break;
        }
        if total_val.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                what: "non-finite integrand".into(),
                estimate: total_val[0],
                error_bound: f64::INFINITY,
            });
        }
        if heap.len() >= max_panels {
            return Err(Error::Numerical {
                what: format!("vector quadrature hit the {max_panels}-panel cap"),
                estimate: total_val[0],
                error_bound: max_total,
            });
        }
        let p = heap.pop().expect("heap is never empty");
        let (a, b) = bounds[p.id];
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return Err(Error::Numerical {
                what: "quadrature panel collapsed below machine resolution".into(),
                estimate: total_val[0],
                error_bound: max_total,
            });
        }
        let base = 2 * dim * p.id;
        for d in 0..dim {
            total_val[d] -= store[base + d];
            total_err[d] -= store[base + dim + d];
        }
        for (x0, x1) in [(a, mid), (mid, b)] {
            let id = bounds.len();
            let worst = eval_panel(x0, x1, &mut store);
            bounds.push((x0, x1));
            let base = 2 * dim * id;
            for d in 0..dim {
                total_val[d] += store[base + d];
                total_err[d] += store[base + dim + d];
            }
            heap.push(VecPanel { worst, id });
        }
    }
    // Sum in position order for a partition-determined result.
    let mut live: Vec<usize> = heap.iter().map(|p| p.id).collect();
    live.sort_by(|x, y| bounds[*x].0.total_cmp(&bounds[*y].0));
    let mut out = vec![0.0; dim];
    for id in live {
        let base = 2 * dim * id;
        for d in 0..dim {
            out[d] += store[base + d];
        }
    }
    Ok(out)
}

struct VecPanel {
    worst: f64,
    id: usize,
}

impl PartialEq for VecPanel {
    fn eq(&self, other: &Self) -> bool {
        self.worst == other.worst && self.id == other.id
    }
}
impl Eq for VecPanel {}
impl PartialOrd for VecPanel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for VecPanel {
    // Ties go to the lower id so the refinement order is deterministic.
    fn cmp(&self, other: &Self) -> Ordering {
        self.worst
            .total_cmp(&other.worst)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Hermite rule for expectations under a standard normal:
/// `E[g(Z)] ≈ Σ w_i g(x_i)` (weights sum to one).
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // Physicists' rule via Newton iteration on the orthonormal recursion.
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // Map exp(-x^2) weight to the standard normal.
    let norm = std::f64::consts::PI.sqrt();
    let nodes = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let weights = w.iter().map(|v| v / norm).collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_exact_on_polynomials() {
        let r = integrate(|x| x.powi(20) - 3.0 * x.powi(7), 0.0, 1.0, 1e-14, 10).unwrap();
        assert!((r.value - (1.0 / 21.0 - 3.0 / 8.0)).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let f = |x: f64| 1.0 / (1e-4 + (x - 0.3) * (x - 0.3));
        let exact = 100.0 * ((0.7f64 / 0.01).atan() + (0.3f64 / 0.01).atan());
        let r = integrate(f, 0.0, 1.0, 1e-9, 1000).unwrap();
        assert!((r.value - exact).abs() < 1e-8, "{} vs {}", r.value, exact);
    }

    #[test]
    fn panel_cap_is_reported() {
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-9, 1.0, 1e-15, 4).unwrap_err();
        match err {
            Error::Numerical {
                estimate,
                error_bound,
                ..
            } => {
                assert!(estimate.is_finite());
                assert!(error_bound > 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vector_rule_matches_scalar() {
        let v = integrate_vec(
            |x, out| {
                out[0] = x.sin();
                out[1] = (-3.0 * x).exp();
            },
            2,
            0.0,
            4.0,
            1e-13,
            100,
        )
        .unwrap();
        assert!((v[0] - (1.0 - 4f64.cos())).abs() < 1e-13);
        assert!((v[1] - (1.0 - (-12f64).exp()) / 3.0).abs() < 1e-13);
    }

    #[test]
    fn legendre_rule_integrates_exp() {
        let (x, w) = gauss_legendre(12);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((s - (1f64.exp() - (-1f64).exp())).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_rule_matches_normal_moments() {
        let (x, w) = gauss_hermite_normal(20);
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        let mgf: f64 = x.iter().zip(&w).map(|(x, w)| w * (0.3 * x).exp()).sum();
        assert!((m0 - 1.0).abs() < 1e-13);
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
        assert!((mgf - (0.045f64).exp()).abs() < 1e-14);
    }
}
