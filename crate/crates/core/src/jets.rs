//! Truncated multivariate Taylor arithmetic over base coordinates `x` and
//! fiber coordinates `y`.
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar field around a point,
//! truncated to a downward-closed set of monomials. The set is described by a
//! staircase of caps: `caps[d]` is the largest `y`-degree kept among monomials
//! of `x`-degree `d`. Derivatives are read off exactly from the coefficients,
//! so there is no finite-difference error anywhere in the propagation.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Largest supported `x`-order of [`jet_eval`].
pub const MAX_ORDER_X: usize = 2;
/// Largest supported `y`-order of [`jet_eval`].
pub const MAX_ORDER_Y: usize = 6;

type LayoutKey = (usize, usize, Vec<usize>);

fn layout_cache() -> &'static Mutex<HashMap<LayoutKey, Arc<Layout>>> {
    static CACHE: OnceLock<Mutex<HashMap<LayoutKey, Arc<Layout>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Monomial set of a jet. Shared between all jets with the same shape.
#[derive(Debug)]
pub struct Layout {
    nx: usize,
    ny: usize,
    caps: Vec<usize>,
    monos: Vec<Vec<u8>>,
    degree: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    max_degree: usize,
    mul_table: OnceLock<Vec<Vec<(u32, u32)>>>,
    derivs: Mutex<HashMap<usize, Arc<(Arc<Layout>, Vec<(u32, f64)>)>>>,
    projections: Mutex<HashMap<Vec<usize>, Arc<Vec<Option<u32>>>>>,
}

impl Layout {
    /// Returns the shared layout for `nx` base and `ny` fiber variables with
    /// the given staircase of `y`-caps.
    pub fn get(nx: usize, ny: usize, caps: &[usize]) -> Arc<Layout> {
        assert!(!caps.is_empty(), "jet layout needs at least one cap");
        let mut caps: Vec<usize> = caps.to_vec();
        for d in 1..caps.len() {
            caps[d] = caps[d].min(caps[d - 1]);
        }
        if nx == 0 {
            caps.truncate(1);
        }
        if ny == 0 {
            caps.iter_mut().for_each(|c| *c = 0);
        }
        let key = (nx, ny, caps.clone());
        let mut cache = layout_cache().lock().unwrap();
        if let Some(l) = cache.get(&key) {
            return l.clone();
        }
        let layout = Arc::new(Layout::build(nx, ny, caps));
        cache.insert(key, layout.clone());
        layout
    }

    fn build(nx: usize, ny: usize, caps: Vec<usize>) -> Layout {
        let mut monos = Vec::new();
        for dx in 0..caps.len() {
            for dy in 0..=caps[dx] {
                let mut xs = Vec::new();
                compositions(nx, dx, &mut Vec::new(), &mut xs);
                let mut ys = Vec::new();
                compositions(ny, dy, &mut Vec::new(), &mut ys);
                for a in &xs {
                    for b in &ys {
                        let mut m = a.clone();
                        m.extend_from_slice(b);
                        monos.push(m);
                    }
                }
            }
        }
        monos.sort_by_key(|m| (m.iter().map(|&e| e as usize).sum::<usize>(), std::cmp::Reverse(m.clone())));
        let degree: Vec<usize> = monos
            .iter()
            .map(|m| m.iter().map(|&e| e as usize).sum())
            .collect();
        let index = monos.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let max_degree = degree.iter().copied().max().unwrap_or(0);
        Layout {
            nx,
            ny,
            caps,
            monos,
            degree,
            index,
            max_degree,
            mul_table: OnceLock::new(),
            derivs: Mutex::new(HashMap::new()),
            projections: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn caps(&self) -> &[usize] {
        &self.caps
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Exponent vector of monomial `i` (base variables first).
    pub fn monomial(&self, i: usize) -> &[u8] {
        &self.monos[i]
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    fn mul_table(&self) -> &[Vec<(u32, u32)>] {
        self.mul_table.get_or_init(|| {
            let mut table = vec![Vec::new(); self.monos.len()];
            let mut buf = vec![0u8; self.nx + self.ny];
            for (a, ma) in self.monos.iter().enumerate() {
                for (b, mb) in self.monos.iter().enumerate() {
                    if self.degree[a] + self.degree[b] > self.max_degree {
                        break;
                    }
                    for k in 0..buf.len() {
                        buf[k] = ma[k] + mb[k];
                    }
                    if let Some(&o) = self.index.get(&buf) {
                        table[a].push((b as u32, o as u32));
                    }
                }
            }
            table
        })
    }

    fn derivative_map(&self, var: usize) -> Arc<(Arc<Layout>, Vec<(u32, f64)>)> {
        if let Some(m) = self.derivs.lock().unwrap().get(&var) {
            return m.clone();
        }
        let caps: Vec<usize> = if var < self.nx {
            assert!(self.caps.len() >= 2, "no base-coordinate order left to differentiate");
            self.caps[1..].to_vec()
        } else {
            assert!(self.caps[0] >= 1, "no fiber order left to differentiate");
            self.caps
                .iter()
                .take_while(|&&c| c >= 1)
                .map(|&c| c - 1)
                .collect()
        };
        let target = Layout::get(self.nx, self.ny, &caps);
        let mut map = Vec::with_capacity(target.len());
        let mut buf = vec![0u8; self.nx + self.ny];
        for m in &target.monos {
            buf.copy_from_slice(m);
            buf[var] += 1;
            let src = self.index[&buf];
            map.push((src as u32, buf[var] as f64));
        }
        let entry = Arc::new((target, map));
        self.derivs.lock().unwrap().insert(var, entry.clone());
        entry
    }

    fn projection_to(&self, target: &Layout) -> Arc<Vec<Option<u32>>> {
        if let Some(p) = self.projections.lock().unwrap().get(&target.caps) {
            return p.clone();
        }
        let map: Vec<Option<u32>> = target
            .monos
            .iter()
            .map(|m| self.index.get(m).map(|&i| i as u32))
            .collect();
        let map = Arc::new(map);
        self.projections
            .lock()
            .unwrap()
            .insert(target.caps.clone(), map.clone());
        map
    }

    fn intersect(a: &Arc<Layout>, b: &Arc<Layout>) -> Arc<Layout> {
        assert!(
            a.nx == b.nx && a.ny == b.ny,
            "jets over different variable sets cannot be combined"
        );
        let len = a.caps.len().min(b.caps.len());
        let caps: Vec<usize> = (0..len).map(|d| a.caps[d].min(b.caps[d])).collect();
        Layout::get(a.nx, a.ny, &caps)
    }
}

fn compositions(parts: usize, total: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if parts == 0 {
        if total == 0 {
            out.push(prefix.clone());
        }
        return;
    }
    if parts == 1 {
        prefix.push(total as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first as u8);
        compositions(parts - 1, total - first, prefix, out);
        prefix.pop();
    }
}

/// Truncated Taylor expansion of a scalar field.
///
/// Coefficients are stored per monomial, so the value of a mixed partial is
/// independent of the order in which the derivatives are taken.
#[derive(Debug, Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(layout: &Arc<Layout>, value: f64) -> Jet {
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet {
            layout: layout.clone(),
            coeffs,
        }
    }

    /// The coordinate function `var` expanded around `value`.
    /// Variables `0..nx` are base coordinates, `nx..nx+ny` fiber coordinates.
    pub fn variable(layout: &Arc<Layout>, var: usize, value: f64) -> Jet {
        let mut jet = Jet::constant(layout, value);
        let mut e = vec![0u8; layout.nx + layout.ny];
        e[var] = 1;
        if let Some(i) = layout.index_of(&e) {
            jet.coeffs[i] = 1.0;
        }
        jet
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Mixed partial derivative for an exponent vector (derivative counts per
    /// variable). Returns `None` when the monomial was truncated away.
    pub fn partial(&self, exps: &[u8]) -> Option<f64> {
        let i = self.layout.index_of(exps)?;
        let fact: f64 = exps.iter().map(|&e| factorial(e as usize)).product();
        Some(self.coeffs[i] * fact)
    }

    /// Mixed partial named by lists of base and fiber variable indices, e.g.
    /// `partial_xy(&[0], &[1, 1])` is ∂³f/∂x¹∂y²∂y². Panics if truncated.
    pub fn partial_xy(&self, xs: &[usize], ys: &[usize]) -> f64 {
        let mut e = vec![0u8; self.layout.nx + self.layout.ny];
        for &i in xs {
            e[i] += 1;
        }
        for &j in ys {
            e[self.layout.nx + j] += 1;
        }
        self.partial(&e)
            .unwrap_or_else(|| panic!("partial {e:?} is beyond the jet's order"))
    }

    /// Exact derivative jet with respect to variable `var`; its order drops by one.
    pub fn d(&self, var: usize) -> Jet {
        let map = self.layout.derivative_map(var);
        let (target, pairs) = &*map;
        let coeffs = pairs
            .iter()
            .map(|&(src, f)| self.coeffs[src as usize] * f)
            .collect();
        Jet {
            layout: target.clone(),
            coeffs,
        }
    }

    /// ∂/∂x^i
    pub fn dx(&self, i: usize) -> Jet {
        self.d(i)
    }

    /// ∂/∂y^i
    pub fn dy(&self, i: usize) -> Jet {
        self.d(self.layout.nx + i)
    }

    /// Drops all monomials outside `target`.
    pub fn truncate(&self, target: &Arc<Layout>) -> Jet {
        if Arc::ptr_eq(&self.layout, target) {
            return self.clone();
        }
        let proj = self.layout.projection_to(target);
        let coeffs = proj
            .iter()
            .map(|p| p.map_or(0.0, |i| self.coeffs[i as usize]))
            .collect();
        Jet {
            layout: target.clone(),
            coeffs,
        }
    }

    fn aligned(&self, other: &Jet) -> (Jet, Jet) {
        let l = Layout::intersect(&self.layout, &other.layout);
        (self.truncate(&l), other.truncate(&l))
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        if Arc::ptr_eq(&self.layout, &other.layout) {
            let coeffs = self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect();
            return Jet {
                layout: self.layout.clone(),
                coeffs,
            };
        }
        let (a, b) = self.aligned(other);
        a.zip(&b, f)
    }

    fn product(&self, other: &Jet) -> Jet {
        if !Arc::ptr_eq(&self.layout, &other.layout) {
            let (a, b) = self.aligned(other);
            return a.product(&b);
        }
        let table = self.layout.mul_table();
        let mut out = vec![0.0; self.coeffs.len()];
        for (a, row) in table.iter().enumerate() {
            let ca = self.coeffs[a];
            if ca == 0.0 {
                continue;
            }
            for &(b, o) in row {
                out[o as usize] += ca * other.coeffs[b as usize];
            }
        }
        Jet {
            layout: self.layout.clone(),
            coeffs: out,
        }
    }

    pub fn scale(&self, k: f64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn add_scalar(&self, k: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += k;
        out
    }

    /// Evaluates `f(self)` from the Taylor coefficients `f^(k)(u0)/k!` of `f`
    /// at the jet's value.
    pub fn compose(&self, taylor: &[f64]) -> Result<Jet> {
        if let Some(k) = taylor.iter().position(|t| !t.is_finite()) {
            return Err(Error::eval(format!(
                "derivative {k} of an elementary function is not finite at {}",
                self.value()
            )));
        }
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let top = self.layout.max_degree.min(taylor.len() - 1);
        let mut acc = Jet::constant(&self.layout, taylor[top]);
        for k in (0..top).rev() {
            acc = acc.product(&delta).add_scalar(taylor[k]);
        }
        Ok(acc)
    }

    fn degree(&self) -> usize {
        self.layout.max_degree
    }

    pub fn recip(&self) -> Result<Jet> {
        let u = self.value();
        if u == 0.0 {
            return Err(Error::eval("division by zero"));
        }
        let t: Vec<f64> = (0..=self.degree())
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / u.powi(k as i32 + 1))
            .collect();
        self.compose(&t)
    }

    pub fn checked_div(&self, other: &Jet) -> Result<Jet> {
        Ok(self.product(&other.recip()?))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let u = self.value();
        if u <= 0.0 {
            return Err(Error::eval(format!("square root of non-positive value {u}")));
        }
        self.powf(0.5)
    }

    /// Real power with a non-integer exponent; requires a positive value.
    pub fn powf(&self, p: f64) -> Result<Jet> {
        let u = self.value();
        if p.fract() == 0.0 && p.abs() < 64.0 {
            return self.powi(p as i32);
        }
        if u <= 0.0 {
            return Err(Error::eval(format!("power {p} of non-positive value {u}")));
        }
        let mut t = Vec::with_capacity(self.degree() + 1);
        let mut binom = 1.0;
        for k in 0..=self.degree() {
            t.push(binom * u.powf(p - k as f64));
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&t)
    }

    pub fn powi(&self, n: i32) -> Result<Jet> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut base = self.clone();
        let mut acc = Jet::constant(&self.layout, 1.0);
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.product(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.product(&base);
            }
        }
        Ok(acc)
    }

    pub fn exp(&self) -> Result<Jet> {
        let e = self.value().exp();
        let t: Vec<f64> = (0..=self.degree()).map(|k| e / factorial(k)).collect();
        self.compose(&t)
    }

    pub fn ln(&self) -> Result<Jet> {
        let u = self.value();
        if u <= 0.0 {
            return Err(Error::eval(format!("logarithm of non-positive value {u}")));
        }
        let t: Vec<f64> = (0..=self.degree())
            .map(|k| match k {
                0 => u.ln(),
                _ => {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * u.powi(k as i32))
                }
            })
            .collect();
        self.compose(&t)
    }

    pub fn sin(&self) -> Result<Jet> {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let t: Vec<f64> = (0..=self.degree())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose(&t)
    }

    pub fn cos(&self) -> Result<Jet> {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let t: Vec<f64> = (0..=self.degree())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose(&t)
    }

    /// First non-finite coefficient, as an exponent vector.
    pub fn first_non_finite(&self) -> Option<Vec<usize>> {
        self.coeffs
            .iter()
            .position(|c| !c.is_finite())
            .map(|i| self.layout.monos[i].iter().map(|&e| e as usize).collect())
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Arithmetic shared by plain floats and jets, so that metric functions and
/// coordinate expressions are written once and evaluated either way.
pub trait Scalar: Clone {
    fn value(&self) -> f64;
    /// A constant living in the same space as `self`.
    fn lift(&self, v: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, k: f64) -> Self;
    fn try_div(&self, o: &Self) -> Result<Self>;
    fn try_sqrt(&self) -> Result<Self>;
    fn try_powf(&self, p: f64) -> Result<Self>;
    fn try_powi(&self, n: i32) -> Result<Self>;
    fn try_exp(&self) -> Result<Self>;
    fn try_ln(&self) -> Result<Self>;
    fn try_sin(&self) -> Result<Self>;
    fn try_cos(&self) -> Result<Self>;
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::eval(format!("{what} produced a non-finite value")))
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, v: f64) -> f64 {
        v
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn sub(&self, o: &f64) -> f64 {
        self - o
    }
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn scale(&self, k: f64) -> f64 {
        self * k
    }
    fn try_div(&self, o: &f64) -> Result<f64> {
        if *o == 0.0 {
            return Err(Error::eval("division by zero"));
        }
        finite(self / o, "division")
    }
    fn try_sqrt(&self) -> Result<f64> {
        if *self < 0.0 {
            return Err(Error::eval(format!("square root of negative value {self}")));
        }
        Ok(self.sqrt())
    }
    fn try_powf(&self, p: f64) -> Result<f64> {
        finite(self.powf(p), "power")
    }
    fn try_powi(&self, n: i32) -> Result<f64> {
        if n < 0 && *self == 0.0 {
            return Err(Error::eval("division by zero"));
        }
        finite(self.powi(n), "power")
    }
    fn try_exp(&self) -> Result<f64> {
        finite(self.exp(), "exp")
    }
    fn try_ln(&self) -> Result<f64> {
        if *self <= 0.0 {
            return Err(Error::eval(format!("logarithm of non-positive value {self}")));
        }
        Ok(self.ln())
    }
    fn try_sin(&self) -> Result<f64> {
        finite(self.sin(), "sin")
    }
    fn try_cos(&self) -> Result<f64> {
        finite(self.cos(), "cos")
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn lift(&self, v: f64) -> Jet {
        Jet::constant(&self.layout, v)
    }
    fn add(&self, o: &Jet) -> Jet {
        self + o
    }
    fn sub(&self, o: &Jet) -> Jet {
        self - o
    }
    fn mul(&self, o: &Jet) -> Jet {
        self * o
    }
    fn neg(&self) -> Jet {
        -self
    }
    fn scale(&self, k: f64) -> Jet {
        Jet::scale(self, k)
    }
    fn try_div(&self, o: &Jet) -> Result<Jet> {
        self.checked_div(o)
    }
    fn try_sqrt(&self) -> Result<Jet> {
        self.sqrt()
    }
    fn try_powf(&self, p: f64) -> Result<Jet> {
        self.powf(p)
    }
    fn try_powi(&self, n: i32) -> Result<Jet> {
        self.powi(n)
    }
    fn try_exp(&self) -> Result<Jet> {
        self.exp()
    }
    fn try_ln(&self) -> Result<Jet> {
        self.ln()
    }
    fn try_sin(&self) -> Result<Jet> {
        self.sin()
    }
    fn try_cos(&self) -> Result<Jet> {
        self.cos()
    }
}

/// A jet of a field `f(x, y)` together with the point it was expanded at.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub jet: Jet,
}

impl FieldJet {
    pub fn value(&self) -> f64 {
        self.jet.value()
    }

    /// Partial derivative named by derivative counts per variable
    /// (`x` counts first, then `y` counts).
    pub fn partial(&self, counts: &[usize]) -> Option<f64> {
        let e: Vec<u8> = counts.iter().map(|&c| c as u8).collect();
        self.jet.partial(&e)
    }
}

/// Builds the coordinate jets `x^i + dx^i`, `y^i + dy^i` for a layout.
pub fn coordinate_jets(layout: &Arc<Layout>, x: &[f64], y: &[f64]) -> (Vec<Jet>, Vec<Jet>) {
    let xs = x
        .iter()
        .enumerate()
        .map(|(i, &v)| Jet::variable(layout, i, v))
        .collect();
    let ys = y
        .iter()
        .enumerate()
        .map(|(i, &v)| Jet::variable(layout, x.len() + i, v))
        .collect();
    (xs, ys)
}

/// Evaluates `f` on coordinate jets over an arbitrary staircase layout.
pub fn jet_eval_caps<F>(f: F, x: &[f64], y: &[f64], caps: &[usize]) -> Result<Jet>
where
    F: Fn(&[Jet], &[Jet]) -> Result<Jet>,
{
    let layout = Layout::get(x.len(), y.len(), caps);
    let (xs, ys) = coordinate_jets(&layout, x, y);
    let jet = f(&xs, &ys)?;
    if let Some(index) = jet.first_non_finite() {
        return Err(Error::Evaluation {
            index,
            message: "non-finite Taylor coefficient".into(),
        });
    }
    Ok(jet)
}

/// Exact partials of `f` at `(x, y)` up to `order_x` in the base and
/// `order_y` in the fiber coordinates.
pub fn jet_eval<F>(f: F, x: &[f64], y: &[f64], order_x: usize, order_y: usize) -> Result<FieldJet>
where
    F: Fn(&[Jet], &[Jet]) -> Result<Jet>,
{
    if order_x > MAX_ORDER_X || order_y > MAX_ORDER_Y {
        return Err(Error::Argument(format!(
            "jet orders ({order_x}, {order_y}) exceed the supported ({MAX_ORDER_X}, {MAX_ORDER_Y})"
        )));
    }
    let jet = jet_eval_caps(f, x, y, &vec![order_y; order_x + 1])?;
    Ok(FieldJet {
        x: x.to_vec(),
        y: y.to_vec(),
        jet,
    })
}

/// |jet partial − Richardson-extrapolated central difference| for the
/// derivative counts `counts` (`x` first, then `y`).
pub fn fd_cross_check<F>(f: F, x: &[f64], y: &[f64], counts: &[usize], h: f64) -> Result<f64>
where
    F: Fn(&[Jet], &[Jet]) -> Result<Jet>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Argument(format!("finite-difference step must be positive, got {h}")));
    }
    let nx = x.len();
    if counts.len() != nx + y.len() {
        return Err(Error::Argument("multi-index length must equal dim(x) + dim(y)".into()));
    }
    let ox: usize = counts[..nx].iter().sum();
    let oy: usize = counts[nx..].iter().sum();
    let exact = jet_eval(&f, x, y, ox, oy)?
        .partial(counts)
        .ok_or_else(|| Error::Argument("multi-index beyond the jet order".into()))?;

    let point = Layout::get(nx, y.len(), &[0]);
    let eval_at = |z: &[f64]| -> Result<f64> {
        let (xs, ys) = coordinate_jets(&point, &z[..nx], &z[nx..]);
        Ok(f(&xs, &ys)?.value())
    };
    let base: Vec<f64> = x.iter().chain(y).copied().collect();
    let stencil = |h: f64| -> Result<f64> {
        // tensor product of k-th order central differences
        let mut terms: Vec<(Vec<f64>, f64)> = vec![(base.clone(), 1.0)];
        for (v, &k) in counts.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let mut next = Vec::new();
            for (z, w) in &terms {
                for j in 0..=k {
                    let mut zz = z.clone();
                    zz[v] += (k as f64 / 2.0 - j as f64) * h;
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    next.push((zz, w * sign * binomial(k, j) / h.powi(k as i32)));
                }
            }
            terms = next;
        }
        terms.iter().try_fold(0.0, |acc, (z, w)| Ok(acc + w * eval_at(z)?))
    };
    let coarse = stencil(h)?;
    let fine = stencil(h / 2.0)?;
    let estimate = (4.0 * fine - coarse) / 3.0;
    Ok((exact - estimate).abs())
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_sq(_x: &[Jet], y: &[Jet]) -> Result<Jet> {
        Ok(y.iter().fold(y[0].lift(0.0), |acc, v| &acc + &(v * v)))
    }

    #[test]
    fn sum_of_squares_has_unit_hessian() {
        let j = jet_eval(sum_sq, &[0.3, -1.0], &[0.7, 2.0], 0, 4).unwrap();
        assert_eq!(j.partial(&[0, 0, 2, 0]), Some(2.0));
        assert_eq!(j.partial(&[0, 0, 1, 1]), Some(0.0));
        assert_eq!(j.partial(&[0, 0, 3, 0]), Some(0.0));
    }

    #[test]
    fn constant_field_has_no_derivatives() {
        let j = jet_eval(|x, _y| Ok(x[0].lift(7.0)), &[1.0, 2.0], &[3.0, 4.0], 2, 4).unwrap();
        assert_eq!(j.value(), 7.0);
        let layout = j.jet.layout();
        for i in 1..layout.len() {
            assert_eq!(j.jet.coeffs()[i], 0.0);
        }
    }

    #[test]
    fn mixed_third_partial() {
        let f = |x: &[Jet], y: &[Jet]| Ok(&(&x[0] * &y[0]) * &y[1]);
        let j = jet_eval(f, &[0.4, 0.1], &[-0.2, 0.9], 1, 2).unwrap();
        assert_eq!(j.jet.partial_xy(&[0], &[0, 1]), 1.0);
        assert_eq!(j.jet.partial_xy(&[0], &[1, 0]), 1.0);
    }

    #[test]
    fn orders_beyond_limit_are_rejected() {
        assert!(matches!(
            jet_eval(sum_sq, &[0.0], &[1.0], 3, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn division_by_zero_is_an_error_not_nan() {
        let f = |_x: &[Jet], y: &[Jet]| y[0].checked_div(&y[1]);
        let err = jet_eval(f, &[0.0], &[1.0, 0.0], 0, 2).unwrap_err();
        assert!(matches!(err, Error::Evaluation { .. }));
        let f = |_x: &[Jet], y: &[Jet]| y[1].sqrt();
        assert!(jet_eval(f, &[0.0], &[1.0, -1.0], 0, 2).is_err());
    }

    #[test]
    fn sin_derivative_matches_fd() {
        let f = |_x: &[Jet], y: &[Jet]| y[0].sin();
        let j = jet_eval(f, &[0.0], &[0.0], 0, 1).unwrap();
        assert_eq!(j.partial(&[0, 1]), Some(1.0));
        let r = fd_cross_check(f, &[0.0], &[0.0], &[0, 1], 1e-3).unwrap();
        assert!(r <= 1e-8, "residual {r}");
    }

    #[test]
    fn fd_rejects_zero_step() {
        let r = fd_cross_check(sum_sq, &[0.0], &[1.0], &[0, 1], 0.0);
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn polynomial_first_and_second_partials_match_fd() {
        let f = |x: &[Jet], y: &[Jet]| {
            let a = &(&x[0] * &x[0]) * &y[0];
            let b = &(&y[1] * &y[1]) * &x[1];
            Ok(&(&a + &b) + &x[0].scale(3.0))
        };
        let x = [0.3, -0.4];
        let y = [1.1, 0.5];
        for counts in [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]] {
            let r = fd_cross_check(f, &x, &y, &counts, 1e-3).unwrap();
            assert!(r <= 1e-10, "{counts:?}: residual {r}");
        }
        // second differences carry roundoff of order eps/h^2
        for counts in [[1, 0, 1, 0], [2, 0, 0, 0]] {
            let r = fd_cross_check(f, &x, &y, &counts, 1e-3).unwrap();
            assert!(r <= 1e-8, "{counts:?}: residual {r}");
        }
        let r = fd_cross_check(f, &x, &y, &[0, 1, 0, 2], 1e-2).unwrap();
        assert!(r <= 1e-8, "third order: residual {r}");
    }

    #[test]
    fn staircase_truncation_and_derivative_shapes() {
        let l = Layout::get(2, 2, &[6, 5, 3]);
        assert_eq!(l.caps(), &[6, 5, 3]);
        let (xs, ys) = coordinate_jets(&l, &[0.1, 0.2], &[1.0, 0.5]);
        let f = &(&xs[0] * &xs[0]) * &(&ys[0] * &ys[0]);
        let dx = f.dx(0);
        assert_eq!(dx.layout().caps(), &[5, 3]);
        let dy = f.dy(1);
        assert_eq!(dy.layout().caps(), &[5, 4, 2]);
        // mixing layouts intersects them
        let g = &dx + &dy;
        assert_eq!(g.layout().caps(), &[5, 3]);
        assert!((f.partial_xy(&[0, 0], &[0, 0]) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn powers_and_roots() {
        let f = |_x: &[Jet], y: &[Jet]| y[0].powf(1.5);
        let j = jet_eval(f, &[0.0], &[4.0], 0, 3).unwrap();
        assert!((j.value() - 8.0).abs() < 1e-14);
        assert!((j.partial(&[0, 1]).unwrap() - 3.0).abs() < 1e-14);
        assert!((j.partial(&[0, 2]).unwrap() - 0.375).abs() < 1e-14);
        let f = |_x: &[Jet], y: &[Jet]| y[0].powi(-2);
        let j = jet_eval(f, &[0.0], &[2.0], 0, 2).unwrap();
        assert!((j.partial(&[0, 2]).unwrap() - 6.0 / 16.0).abs() < 1e-14);
    }
}
