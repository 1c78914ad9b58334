//! Reverse-mode differentiation over channel-major feature maps.
//!
//! Every operation appends a node holding its value; `backward` walks the
//! nodes once in reverse order. Convolutions lower to im2col + GEMM.

use crate::real::Real;

/// Channels, height, width. Parameters and scalars use `(n, 1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Shape { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub cin: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub ph: usize,
    pub pw: usize,
}

impl ConvSpec {
    /// Zero padding that keeps the size at stride 1 (odd kernels).
    pub fn same(cin: usize, cout: usize, kh: usize, kw: usize, stride: usize) -> Self {
        ConvSpec {
            cin,
            cout,
            kh,
            kw,
            stride,
            ph: kh / 2,
            pw: kw / 2,
        }
    }

    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.kh * self.kw
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.ph - self.kh) / self.stride + 1,
            (w + 2 * self.pw - self.kw) / self.stride + 1,
        )
    }
}

enum Op<T> {
    Input,
    Param(usize),
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        spec: ConvSpec,
        cols: Vec<T>,
    },
    Relu(Var),
    Lincomb {
        a: Var,
        ca: T,
        b: Var,
        cb: T,
    },
    MulMap {
        x: Var,
        map: Vec<T>,
    },
    Transpose(Var),
    Upsample2(Var),
    Concat(Vec<Var>),
    L1(Var, Var),
    Scalars(Vec<(Var, T)>),
}

struct Node<T> {
    shape: Shape,
    value: Vec<T>,
    op: Op<T>,
}

/// One forward pass worth of recorded operations.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn im2col<T: Real>(x: &[T], h: usize, w: usize, s: &ConvSpec, ho: usize, wo: usize) -> Vec<T> {
    let n = ho * wo;
    let mut cols = vec![T::ZERO; s.cin * s.kh * s.kw * n];
    let mut row = 0;
    for c in 0..s.cin {
        let plane = &x[c * h * w..(c + 1) * h * w];
        for ky in 0..s.kh {
            for kx in 0..s.kw {
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..ho {
                    let iy = (oy * s.stride + ky) as isize - s.ph as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    let out = &mut dst[oy * wo..(oy + 1) * wo];
                    for (ox, o) in out.iter_mut().enumerate() {
                        let ix = (ox * s.stride + kx) as isize - s.pw as isize;
                        if ix >= 0 && ix < w as isize {
                            *o = src[ix as usize];
                        }
                    }
                }
                row += 1;
            }
        }
    }
    cols
}

fn col2im<T: Real>(cols: &[T], dx: &mut [T], h: usize, w: usize, s: &ConvSpec, ho: usize, wo: usize) {
    let n = ho * wo;
    let mut row = 0;
    for c in 0..s.cin {
        let plane = &mut dx[c * h * w..(c + 1) * h * w];
        for ky in 0..s.kh {
            for kx in 0..s.kw {
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..ho {
                    let iy = (oy * s.stride + ky) as isize - s.ph as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, g) in src[oy * wo..(oy + 1) * wo].iter().enumerate() {
                        let ix = (ox * s.stride + kx) as isize - s.pw as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += *g;
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

fn transpose_hw<T: Real>(x: &[T], s: Shape) -> Vec<T> {
    let mut out = vec![T::ZERO; x.len()];
    for c in 0..s.c {
        let base = c * s.h * s.w;
        for y in 0..s.h {
            for xx in 0..s.w {
                out[base + xx * s.h + y] = x[base + y * s.w + xx];
            }
        }
    }
    out
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Shape, value: Vec<T>, op: Op<T>) -> Var {
        debug_assert_eq!(shape.len(), value.len());
        self.nodes.push(Node { shape, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].shape
    }

    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[0]
    }

    /// A constant with no gradient of interest.
    pub fn input(&mut self, shape: Shape, value: Vec<T>) -> Var {
        assert_eq!(shape.len(), value.len(), "input shape does not match data");
        self.push(shape, value, Op::Input)
    }

    /// A parameter block; its gradient is reported under `index`.
    pub fn param(&mut self, index: usize, value: &[T]) -> Var {
        self.push(Shape::new(value.len(), 1, 1), value.to_vec(), Op::Param(index))
    }

    pub fn conv(&mut self, x: Var, w: Var, b: Option<Var>, spec: ConvSpec) -> Var {
        let xs = self.shape(x);
        assert_eq!(xs.c, spec.cin, "conv input channels");
        assert_eq!(self.shape(w).len(), spec.weight_len(), "conv weight size");
        if let Some(b) = b {
            assert_eq!(self.shape(b).len(), spec.cout, "conv bias size");
        }
        let (ho, wo) = spec.out_dims(xs.h, xs.w);
        let n = ho * wo;
        let k = spec.cin * spec.kh * spec.kw;
        let cols = im2col(self.value(x), xs.h, xs.w, &spec, ho, wo);
        let mut out = vec![T::ZERO; spec.cout * n];
        T::gemm(
            spec.cout,
            k,
            n,
            T::ONE,
            self.value(w),
            k as isize,
            1,
            &cols,
            n as isize,
            1,
            T::ZERO,
            &mut out,
            n as isize,
            1,
        );
        if let Some(b) = b {
            let bias = self.value(b);
            for (co, row) in out.chunks_exact_mut(n).enumerate() {
                let bv = bias[co];
                row.iter_mut().for_each(|v| *v += bv);
            }
        }
        self.push(Shape::new(spec.cout, ho, wo), out, Op::Conv { x, w, b, spec, cols })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|&v| if v > T::ZERO { v } else { T::ZERO }).collect();
        self.push(self.shape(x), out, Op::Relu(x))
    }

    /// `ca·a + cb·b`.
    pub fn lincomb(&mut self, a: Var, ca: T, b: Var, cb: T) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "lincomb shapes");
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| ca * x + cb * y)
            .collect();
        self.push(self.shape(a), out, Op::Lincomb { a, ca, b, cb })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.lincomb(a, T::ONE, b, T::ONE)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.lincomb(a, T::ONE, b, -T::ONE)
    }

    /// Multiply every channel by a per-pixel map.
    pub fn mul_map(&mut self, x: Var, map: Vec<T>) -> Var {
        let s = self.shape(x);
        assert_eq!(map.len(), s.h * s.w, "map size");
        let hw = s.h * s.w;
        let out = self
            .value(x)
            .iter()
            .enumerate()
            .map(|(i, &v)| v * map[i % hw])
            .collect();
        self.push(s, out, Op::MulMap { x, map })
    }

    /// Swap the two spatial axes.
    pub fn transpose(&mut self, x: Var) -> Var {
        let s = self.shape(x);
        let out = transpose_hw(self.value(x), s);
        self.push(Shape::new(s.c, s.w, s.h), out, Op::Transpose(x))
    }

    /// Nearest-neighbour ×2 upsampling.
    pub fn upsample2(&mut self, x: Var) -> Var {
        let s = self.shape(x);
        let (h2, w2) = (2 * s.h, 2 * s.w);
        let v = self.value(x);
        let mut out = vec![T::ZERO; s.c * h2 * w2];
        for c in 0..s.c {
            for y in 0..h2 {
                for xx in 0..w2 {
                    out[(c * h2 + y) * w2 + xx] = v[(c * s.h + y / 2) * s.w + xx / 2];
                }
            }
        }
        self.push(Shape::new(s.c, h2, w2), out, Op::Upsample2(x))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let first = self.shape(parts[0]);
        let mut c = 0;
        let mut out = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            assert_eq!((s.h, s.w), (first.h, first.w), "concat spatial dims");
            c += s.c;
            out.extend_from_slice(self.value(p));
        }
        self.push(Shape::new(c, first.h, first.w), out, Op::Concat(parts.to_vec()))
    }

    /// Mean absolute difference, as a scalar.
    pub fn l1(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "l1 shapes");
        let n = self.shape(a).len();
        let sum: f64 = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| (x - y).abs().to_f64())
            .sum();
        self.push(Shape::new(1, 1, 1), vec![T::from_f64(sum / n as f64)], Op::L1(a, b))
    }

    /// Weighted sum of scalars.
    pub fn scalars(&mut self, terms: &[(Var, T)]) -> Var {
        let v = terms.iter().map(|&(s, c)| c * self.scalar(s)).sum();
        self.push(Shape::new(1, 1, 1), vec![v], Op::Scalars(terms.to_vec()))
    }

    /// Activation pattern of every kink (ReLU gates and L1 signs). Two
    /// evaluations with equal signatures lie on the same smooth piece.
    pub fn kink_signature(&self) -> Vec<i8> {
        let sign = |v: T| {
            if v > T::ZERO {
                1
            } else if v < T::ZERO {
                -1
            } else {
                0
            }
        };
        let mut sig = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => sig.extend(self.value(*x).iter().map(|&v| sign(v))),
                Op::L1(a, b) => sig.extend(self.value(*a).iter().zip(self.value(*b)).map(|(&x, &y)| sign(x - y))),
                _ => {}
            }
        }
        sig
    }

    /// Gradients of a scalar `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Gradients<T> {
        assert_eq!(self.shape(root).len(), 1, "backward needs a scalar root");
        let mut grads: Vec<Vec<T>> = (0..self.nodes.len()).map(|_| Vec::new()).collect();
        grads[root.0] = vec![T::ONE];
        for i in (0..=root.0).rev() {
            let g = std::mem::take(&mut grads[i]);
            if g.is_empty() {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(_) => {
                    grads[i] = g;
                }
                Op::Conv { x, w, b, spec, cols } => {
                    let xs = self.shape(*x);
                    let (ho, wo) = (node.shape.h, node.shape.w);
                    let n = ho * wo;
                    let k = spec.cin * spec.kh * spec.kw;
                    {
                        let dw = slot(&mut grads, *w, spec.weight_len());
                        T::gemm(
                            spec.cout, n, k, T::ONE, &g, n as isize, 1, cols, 1, n as isize, T::ONE, dw,
                            k as isize, 1,
                        );
                    }
                    if let Some(b) = b {
                        let db = slot(&mut grads, *b, spec.cout);
                        for (co, row) in g.chunks_exact(n).enumerate() {
                            db[co] += row.iter().copied().sum::<T>();
                        }
                    }
                    if needs_grad(&self.nodes, *x) {
                        let mut dcols = vec![T::ZERO; k * n];
                        T::gemm(
                            k,
                            spec.cout,
                            n,
                            T::ONE,
                            self.value(*w),
                            1,
                            k as isize,
                            &g,
                            n as isize,
                            1,
                            T::ZERO,
                            &mut dcols,
                            n as isize,
                            1,
                        );
                        let dx = slot(&mut grads, *x, xs.len());
                        col2im(&dcols, dx, xs.h, xs.w, spec, ho, wo);
                    }
                }
                Op::Relu(x) => {
                    let dx = slot(&mut grads, *x, node.shape.len());
                    for ((d, gv), out) in dx.iter_mut().zip(&g).zip(&node.value) {
                        if *out > T::ZERO {
                            *d += *gv;
                        }
                    }
                }
                Op::Lincomb { a, ca, b, cb } => {
                    let n = node.shape.len();
                    let da = slot(&mut grads, *a, n);
                    da.iter_mut().zip(&g).for_each(|(d, gv)| *d += *ca * *gv);
                    let db = slot(&mut grads, *b, n);
                    db.iter_mut().zip(&g).for_each(|(d, gv)| *d += *cb * *gv);
                }
                Op::MulMap { x, map } => {
                    let hw = node.shape.h * node.shape.w;
                    let dx = slot(&mut grads, *x, node.shape.len());
                    for (j, (d, gv)) in dx.iter_mut().zip(&g).enumerate() {
                        *d += *gv * map[j % hw];
                    }
                }
                Op::Transpose(x) => {
                    let back = transpose_hw(&g, node.shape);
                    let dx = slot(&mut grads, *x, back.len());
                    dx.iter_mut().zip(&back).for_each(|(d, v)| *d += *v);
                }
                Op::Upsample2(x) => {
                    let s = self.shape(*x);
                    let (h2, w2) = (node.shape.h, node.shape.w);
                    let dx = slot(&mut grads, *x, s.len());
                    for c in 0..s.c {
                        for y in 0..h2 {
                            for xx in 0..w2 {
                                dx[(c * s.h + y / 2) * s.w + xx / 2] += g[(c * h2 + y) * w2 + xx];
                            }
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.shape(p).len();
                        let dp = slot(&mut grads, p, n);
                        dp.iter_mut().zip(&g[off..off + n]).for_each(|(d, v)| *d += *v);
                        off += n;
                    }
                }
                Op::L1(a, b) => {
                    let n = self.shape(*a).len();
                    let scale = g[0] / T::from_f64(n as f64);
                    let signs: Vec<T> = self
                        .value(*a)
                        .iter()
                        .zip(self.value(*b))
                        .map(|(&x, &y)| {
                            if x > y {
                                scale
                            } else if x < y {
                                -scale
                            } else {
                                T::ZERO
                            }
                        })
                        .collect();
                    let da = slot(&mut grads, *a, n);
                    da.iter_mut().zip(&signs).for_each(|(d, s)| *d += *s);
                    let db = slot(&mut grads, *b, n);
                    db.iter_mut().zip(&signs).for_each(|(d, s)| *d -= *s);
                }
                Op::Scalars(terms) => {
                    for &(s, c) in terms {
                        slot(&mut grads, s, 1)[0] += c * g[0];
                    }
                }
            }
        }
        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(p) => Some((p, std::mem::take(&mut grads[i]))),
                _ => None,
            })
            .collect();
        Gradients { params }
    }
}

fn slot<T: Real>(grads: &mut [Vec<T>], v: Var, len: usize) -> &mut [T] {
    let g = &mut grads[v.0];
    if g.is_empty() {
        *g = vec![T::ZERO; len];
    }
    g
}

/// Inputs never need gradients; skip the data-gradient GEMM for them.
fn needs_grad<T>(nodes: &[Node<T>], v: Var) -> bool {
    !matches!(nodes[v.0].op, Op::Input)
}

/// Parameter gradients of one backward pass, keyed by parameter index.
pub struct Gradients<T> {
    /// (parameter index, gradient); empty when the parameter did not
    /// influence the root.
    pub params: Vec<(usize, Vec<T>)>,
}

impl<T: Real> Gradients<T> {
    /// Add into per-parameter accumulators.
    pub fn accumulate(&self, into: &mut [Vec<T>]) {
        for (p, g) in &self.params {
            if g.is_empty() {
                continue;
            }
            into[*p].iter_mut().zip(g).for_each(|(a, b)| *a += *b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize) -> f64 {
        let h = 1e-6;
        let mut p = x.to_vec();
        p[i] += h;
        let up = f(&p);
        p[i] -= 2.0 * h;
        let down = f(&p);
        (up - down) / (2.0 * h)
    }

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn conv_matches_direct_loop() {
        let spec = ConvSpec::same(2, 3, 3, 3, 2);
        let (h, w) = (7, 6);
        let x = pseudo(2 * h * w, 1);
        let wt = pseudo(spec.weight_len(), 2);
        let b = pseudo(3, 3);
        let mut t = Tape::<f64>::new();
        let xv = t.input(Shape::new(2, h, w), x.clone());
        let wv = t.param(0, &wt);
        let bv = t.param(1, &b);
        let y = t.conv(xv, wv, Some(bv), spec);
        let (ho, wo) = spec.out_dims(h, w);
        assert_eq!((ho, wo), (4, 3));
        for co in 0..3 {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = b[co];
                    for ci in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (oy * 2 + ky) as isize - 1;
                                let ix = (ox * 2 + kx) as isize - 1;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    acc += wt[((co * 2 + ci) * 3 + ky) * 3 + kx]
                                        * x[(ci * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                    }
                    assert!((t.value(y)[(co * ho + oy) * wo + ox] - acc).abs() < 1e-12);
                }
            }
        }
    }

    /// A small graph touching every op; returns the loss for given params.
    fn graph(t: &mut Tape<f64>, p: &[f64]) -> Var {
        let spec = ConvSpec::same(2, 2, 1, 3, 1);
        let x = t.input(Shape::new(2, 4, 6), pseudo(48, 7));
        let target = t.input(Shape::new(2, 8, 12), pseudo(192, 8));
        let w = t.param(0, &p[..12]);
        let b = t.param(1, &p[12..14]);
        let a = t.conv(x, w, Some(b), spec);
        let a = t.relu(a);
        let xt = t.transpose(x);
        let c = t.conv(xt, w, None, spec);
        let c = t.transpose(c);
        let d = t.lincomb(a, 0.7, c, -1.3);
        let d = t.mul_map(d, pseudo(24, 9));
        let cat = t.concat(&[d, x]);
        let down = ConvSpec::same(4, 2, 3, 3, 1);
        let w2 = t.param(2, &p[14..14 + down.weight_len()]);
        let e = t.conv(cat, w2, None, down);
        let e = t.upsample2(e);
        let l1 = t.l1(e, target);
        let l2 = t.l1(a, c);
        t.scalars(&[(l1, 1.0), (l2, 0.5)])
    }

    #[test]
    fn gradients_match_central_differences() {
        let n = 14 + 4 * 2 * 9;
        let p = pseudo(n, 11);
        let mut t = Tape::new();
        let root = graph(&mut t, &p);
        let grads = t.backward(root);
        let mut acc = vec![vec![0.0; 12], vec![0.0; 2], vec![0.0; 72]];
        grads.accumulate(&mut acc);
        let flat: Vec<f64> = acc.concat();
        let f = |q: &[f64]| {
            let mut t = Tape::new();
            let r = graph(&mut t, q);
            t.scalar(r)
        };
        for i in 0..n {
            let num = numeric(f, &p, i);
            let err = (num - flat[i]).abs() / num.abs().max(flat[i].abs()).max(1e-8);
            assert!(err < 1e-5, "param {i}: analytic {} numeric {num}", flat[i]);
        }
    }

    #[test]
    fn transpose_round_trips() {
        let mut t = Tape::<f32>::new();
        let x = t.input(Shape::new(2, 3, 5), (0..30).map(|v| v as f32).collect());
        let y = t.transpose(x);
        assert_eq!(t.shape(y), Shape::new(2, 5, 3));
        let z = t.transpose(y);
        assert_eq!(t.value(z), t.value(x));
    }
}
