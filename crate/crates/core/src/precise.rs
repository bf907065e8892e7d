//! Multiprecision fallback for back-solving ill-conditioned states.
//!
//! Peeling a walk layer by layer divides by the edge vectors, which shrink
//! geometrically with the number of steps. A double-precision state is only
//! reachable up to round-off, and that defect is amplified by the product
//! of the inverse edge norms, which can exceed 1e20 at fifteen steps. Here
//! the state is first projected onto the reachable set (min-norm Newton on
//! the residual vector) and then peeled, both in `bits`-bit arithmetic; the
//! recovered coins are rounded back to `f64`.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_complex::Complex64;

use crate::state::{DOWN, UP};

type F = FBig<HalfEven, 2>;

#[derive(Clone, Debug)]
struct Cx {
    re: F,
    im: F,
}

struct Ctx {
    bits: usize,
}

impl Ctx {
    fn real(&self, x: f64) -> F {
        F::try_from(x).expect("finite value").with_precision(self.bits).value()
    }

    fn cx(&self, z: Complex64) -> Cx {
        Cx {
            re: self.real(z.re),
            im: self.real(z.im),
        }
    }

    fn zero(&self) -> Cx {
        self.cx(Complex64::new(0.0, 0.0))
    }
}

impl Cx {
    fn add(&self, o: &Cx) -> Cx {
        Cx {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    fn mul(&self, o: &Cx) -> Cx {
        Cx {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    fn conj(&self) -> Cx {
        Cx {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    fn neg(&self) -> Cx {
        Cx {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }

    fn norm_sqr(&self) -> F {
        &self.re * &self.re + &self.im * &self.im
    }

    fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64().value(), self.im.to_f64().value())
    }
}

type Pair = [Cx; 2];
/// Row-major 2x2 matrix.
type M2 = [[Cx; 2]; 2];

fn dot(a: &Pair, b: &Pair) -> Cx {
    a[0].conj().mul(&b[0]).add(&a[1].conj().mul(&b[1]))
}

fn pair_norm(p: &Pair) -> F {
    (p[0].norm_sqr() + p[1].norm_sqr()).sqrt()
}

fn normalized(p: &Pair) -> Option<Pair> {
    let n = pair_norm(p);
    if n == F::ZERO {
        return None;
    }
    Some([
        Cx {
            re: &p[0].re / &n,
            im: &p[0].im / &n,
        },
        Cx {
            re: &p[1].re / &n,
            im: &p[1].im / &n,
        },
    ])
}

fn perp(p: &Pair) -> Pair {
    [p[1].conj().neg(), p[0].conj()]
}

fn from_columns(a: &Pair, b: &Pair) -> M2 {
    [[a[0].clone(), b[0].clone()], [a[1].clone(), b[1].clone()]]
}

fn adjoint(m: &M2) -> M2 {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

fn apply(m: &M2, v: &Pair) -> Pair {
    [
        m[0][0].mul(&v[0]).add(&m[0][1].mul(&v[1])),
        m[1][0].mul(&v[0]).add(&m[1][1].mul(&v[1])),
    ]
}

fn mat_mul(a: &M2, b: &M2) -> M2 {
    let e = |i: usize, j: usize| a[i][0].mul(&b[0][j]).add(&a[i][1].mul(&b[1][j]));
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

/// Coin with first column along `col` and second column
/// `phase * (-c_1^*, c_0^*)`.
fn from_first_column(col: &Pair, phase: &Cx) -> Option<M2> {
    let c = normalized(col)?;
    let p = perp(&c);
    Some(from_columns(&c, &[phase.mul(&p[0]), phase.mul(&p[1])]))
}

fn v(amps: &[Pair], i: usize) -> Pair {
    [amps[i - 1][UP].clone(), amps[i][DOWN].clone()]
}

/// `[u_{1,down}, u_{m+1,up}, r_1, ..., r_{m-1}]` for a state on `m + 1` sites.
fn residuals(amps: &[Pair]) -> Vec<Cx> {
    let m = amps.len() - 1;
    let mut out = vec![amps[0][DOWN].clone(), amps[m][UP].clone()];
    for s in 1..m {
        let mut acc = dot(&v(amps, 1), &v(amps, m - s + 1));
        for i in 2..=s {
            acc = acc.add(&dot(&v(amps, i), &v(amps, m - s + i)));
        }
        out.push(acc);
    }
    out
}

/// Real Jacobian of the residuals with respect to `(re, im)` of every
/// amplitude; variable `4 i + 2 s + part`.
fn jacobian(ctx: &Ctx, amps: &[Pair]) -> Vec<Vec<F>> {
    let m = amps.len() - 1;
    let rows = 2 * (m + 1);
    let cols = 4 * (m + 1);
    let mut jac = vec![vec![ctx.real(0.0); cols]; rows];
    let one = ctx.real(1.0);
    jac[0][2 * DOWN] = one.clone();
    jac[1][2 * DOWN + 1] = one.clone();
    jac[2][4 * m + 2 * UP] = one.clone();
    jac[3][4 * m + 2 * UP + 1] = one;
    // index of the amplitude behind component c of v_i
    let var = |i: usize, c: usize| if c == 0 { 4 * (i - 1) + 2 * UP } else { 4 * i + 2 * DOWN };
    for s in 1..m {
        let (re_row, im_row) = (2 * (s + 1), 2 * (s + 1) + 1);
        for i in 1..=s {
            let j = m - s + i;
            let (x, y) = (v(amps, i), v(amps, j));
            for c in 0..2 {
                let (xv, yv) = (var(i, c), var(j, c));
                // d conj(x) y
                jac[re_row][xv] = &jac[re_row][xv] + &y[c].re;
                jac[im_row][xv] = &jac[im_row][xv] + &y[c].im;
                jac[re_row][xv + 1] = &jac[re_row][xv + 1] + &y[c].im;
                jac[im_row][xv + 1] = &jac[im_row][xv + 1] - &y[c].re;
                jac[re_row][yv] = &jac[re_row][yv] + &x[c].re;
                jac[im_row][yv] = &jac[im_row][yv] - &x[c].im;
                jac[re_row][yv + 1] = &jac[re_row][yv + 1] + &x[c].im;
                jac[im_row][yv + 1] = &jac[im_row][yv + 1] + &x[c].re;
            }
        }
    }
    jac
}

fn abs(x: &F) -> F {
    if *x < F::ZERO {
        -x.clone()
    } else {
        x.clone()
    }
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` for a singular matrix.
fn solve(mut a: Vec<Vec<F>>, mut b: Vec<F>) -> Option<Vec<F>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| abs(&a[i][col]).partial_cmp(&abs(&a[j][col])).unwrap_or(std::cmp::Ordering::Equal))?;
        if a[piv][col] == F::ZERO {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = &a[row][col] / &a[col][col];
            if f == F::ZERO {
                continue;
            }
            for k in col..n {
                let t = &f * &a[col][k];
                a[row][k] = &a[row][k] - &t;
            }
            let t = &f * &b[col];
            b[row] = &b[row] - &t;
        }
    }
    let mut x = vec![F::ZERO; n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc = &acc - &(&a[row][k] * &x[k]);
        }
        x[row] = &acc / &a[row][row];
    }
    Some(x)
}

fn max_abs(r: &[Cx]) -> f64 {
    r.iter().map(|z| z.to_c64().norm()).fold(0.0, f64::max)
}

/// Min-norm Newton projection onto the zero set of the residuals.
fn project(ctx: &Ctx, mut amps: Vec<Pair>) -> Option<Vec<Pair>> {
    let target = 2f64.powi(-(ctx.bits as i32) + 16);
    for _ in 0..16 {
        let res = residuals(&amps);
        if max_abs(&res) <= target {
            return Some(amps);
        }
        let jac = jacobian(ctx, &amps);
        let rhs: Vec<F> = res.iter().flat_map(|z| [z.re.clone(), z.im.clone()]).collect();
        let rows = rhs.len();
        let cols = jac[0].len();
        let mut jjt = vec![vec![ctx.real(0.0); rows]; rows];
        for i in 0..rows {
            for j in i..rows {
                let mut acc = ctx.real(0.0);
                for k in 0..cols {
                    if jac[i][k] != F::ZERO && jac[j][k] != F::ZERO {
                        acc = &acc + &(&jac[i][k] * &jac[j][k]);
                    }
                }
                jjt[j][i] = acc.clone();
                jjt[i][j] = acc;
            }
        }
        let y = solve(jjt, rhs)?;
        for (k, chunk) in (0..cols).collect::<Vec<_>>().chunks(2).enumerate() {
            let mut d = [ctx.real(0.0), ctx.real(0.0)];
            for (part, &col) in chunk.iter().enumerate() {
                for (row, yr) in y.iter().enumerate() {
                    if jac[row][col] != F::ZERO {
                        d[part] = &d[part] + &(&jac[row][col] * yr);
                    }
                }
            }
            let (site, coin) = (k / 2, k % 2);
            let z = &amps[site][coin];
            amps[site][coin] = Cx {
                re: &z.re - &d[0],
                im: &z.im - &d[1],
            };
        }
    }
    (max_abs(&residuals(&amps)) <= target.sqrt()).then_some(amps)
}

/// Coins `C_1..C_n` (as row-major `f64` matrices) for a state on `n + 1`
/// sites starting at site 1. `phases[k]` is `e^{i alpha}` for the coin
/// undone at peel `k` (`C_n` first).
pub(crate) fn backsolve_precise(
    state: &[[Complex64; 2]],
    initial: [Complex64; 2],
    phases: &[Complex64],
    bits: usize,
) -> Option<Vec<[[Complex64; 2]; 2]>> {
    let ctx = Ctx { bits };
    let amps: Vec<Pair> = state.iter().map(|p| [ctx.cx(p[0]), ctx.cx(p[1])]).collect();
    let mut amps = project(&ctx, amps)?;
    let mut coins: Vec<M2> = Vec::new();
    let mut k = 0;
    while amps.len() > 2 {
        let last = amps.len() - 1;
        let (first, end) = (v(&amps, 1), v(&amps, last));
        let ph = phases
            .get(k)
            .map(|&z| ctx.cx(z))
            .unwrap_or_else(|| ctx.cx(Complex64::new(1.0, 0.0)));
        let coin = if pair_norm(&first) >= pair_norm(&end) {
            from_first_column(&first, &ph)
        } else {
            let w = normalized(&end)?;
            from_first_column(&[w[1].conj(), w[0].conj().neg()], &ph)
        };
        let coin = match coin {
            Some(c) => c,
            None => [[ctx.cx(1.0.into()), ctx.zero()], [ctx.zero(), ctx.cx(1.0.into())]],
        };
        let inv = adjoint(&coin);
        let mut pre: Vec<Pair> = (0..last)
            .map(|i| apply(&inv, &[amps[i][UP].clone(), amps[i + 1][DOWN].clone()]))
            .collect();
        pre[0][DOWN] = ctx.zero();
        pre[last - 1][UP] = ctx.zero();
        amps = pre;
        coins.push(coin);
        k += 1;
    }
    let layer = normalized(&[amps[0][UP].clone(), amps[1][DOWN].clone()])?;
    let init = normalized(&[ctx.cx(initial[0]), ctx.cx(initial[1])])?;
    let out = from_columns(&layer, &perp(&layer));
    let inp = from_columns(&init, &perp(&init));
    coins.push(mat_mul(&out, &adjoint(&inp)));
    coins.reverse();
    Some(
        coins
            .iter()
            .map(|m| [[m[0][0].to_c64(), m[0][1].to_c64()], [m[1][0].to_c64(), m[1][1].to_c64()]])
            .collect(),
    )
}
