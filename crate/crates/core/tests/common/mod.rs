//! Probability oracle that contracts Choi matrices instead of propagating
//! intermediate states.

use combtomo_core::Cis;
use num_complex::Complex64 as C;

fn digits(mut k: usize, radix: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radix.len()];
    for t in (0..radix.len()).rev() {
        out[t] = k % radix[t];
        k /= radix[t];
    }
    out
}

/// Amplitudes of the composite comb isometry, rows `(o_0…o_{L-1}, a_L)`,
/// columns `(i_0…i_{L-1})`.
fn comb_amplitudes(cis: &Cis, l: usize) -> Vec<Vec<C>> {
    let p = cis.profile();
    let mut u = vec![vec![C::new(1.0, 0.0)]];
    let (mut big_o, mut big_i) = (1, 1);
    for t in 0..l {
        let v = cis.comb().isometry(t).matrix();
        let (di, dout, da, da2) = (p.d_in()[t], p.d_out()[t], p.d_anc()[t], p.d_anc()[t + 1]);
        let mut next = vec![vec![C::new(0.0, 0.0); big_i * di]; big_o * dout * da2];
        for o_prev in 0..big_o {
            for o in 0..dout {
                for a2 in 0..da2 {
                    for i_prev in 0..big_i {
                        for i in 0..di {
                            let mut s = C::new(0.0, 0.0);
                            for a in 0..da {
                                s += v[(o * da2 + a2, i * da + a)] * u[o_prev * da + a][i_prev];
                            }
                            next[(o_prev * dout + o) * da2 + a2][i_prev * di + i] = s;
                        }
                    }
                }
            }
        }
        u = next;
        big_o *= dout;
        big_i *= di;
    }
    u
}

/// `p = Σ Υ[(O,I),(O',I')] · ρ[i_0,i_0'] · Π_t A_t[(i_{t+1},o_t),(i'_{t+1},o'_t)]`
/// with the last instrument output traced.
pub fn choi_probability(cis: &Cis, u: usize, v: &[usize], x: &[usize]) -> f64 {
    let p = cis.profile();
    let l = v.len();
    let amp = comb_amplitudes(cis, l);
    let o_radix: Vec<usize> = p.d_out()[..l].to_vec();
    let i_radix: Vec<usize> = p.d_in()[..l].to_vec();
    let big_o: usize = o_radix.iter().product();
    let big_i: usize = i_radix.iter().product();
    let da = p.d_anc()[l];

    let upsilon = |o: usize, i: usize, o2: usize, i2: usize| -> C {
        (0..da).map(|a| amp[o * da + a][i] * amp[o2 * da + a][i2].conj()).sum()
    };

    let state = cis.state(u).unwrap();
    let s = state.purification().matrix();
    let dr = state.ref_dim();
    let rho = |i: usize, i2: usize| -> C { (0..dr).map(|r| s[(i * dr + r, 0)] * s[(i2 * dr + r, 0)].conj()).sum() };

    let branches: Vec<(combtomo_core::CMatrix, usize)> = (0..l)
        .map(|t| {
            let ins = cis.instrument(t, v[t]).unwrap();
            (ins.branch(x[t]), ins.env_dims()[x[t]])
        })
        .collect();
    let choi = |t: usize, out: usize, inp: usize, out2: usize, inp2: usize| -> C {
        let (w, env) = &branches[t];
        (0..*env).map(|e| w[(out * env + e, inp)] * w[(out2 * env + e, inp2)].conj()).sum()
    };

    let mut total = C::new(0.0, 0.0);
    for oi in 0..big_o {
        let od = digits(oi, &o_radix);
        for ii in 0..big_i {
            let id = digits(ii, &i_radix);
            for oj in 0..big_o {
                let od2 = digits(oj, &o_radix);
                for ij in 0..big_i {
                    let id2 = digits(ij, &i_radix);
                    let mut tester = rho(id[0], id2[0]);
                    for t in 0..l - 1 {
                        tester *= choi(t, id[t + 1], od[t], id2[t + 1], od2[t]);
                    }
                    let last: C = (0..p.d_in()[l]).map(|k| choi(l - 1, k, od[l - 1], k, od2[l - 1])).sum();
                    tester *= last;
                    if tester.norm() == 0.0 {
                        continue;
                    }
                    total += upsilon(oi, ii, oj, ij) * tester;
                }
            }
        }
    }
    total.re
}
