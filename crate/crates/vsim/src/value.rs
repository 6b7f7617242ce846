//! Four-state bit vectors up to [`MAX_WIDTH`] bits.
//!
//! A bit is encoded by two planes: `val` and `unk`. When the `unk` bit is
//! clear the bit is `val`; when set, the bit is `z` if `val` is set and `x`
//! otherwise. Bits above `width` are always zero in both planes.

use std::fmt;

pub const MAX_WIDTH: u32 = 128;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Value {
    width: u32,
    signed: bool,
    val: u128,
    unk: u128,
}

pub fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

impl Value {
    pub fn new(width: u32, val: u128) -> Self {
        debug_assert!((1..=MAX_WIDTH).contains(&width));
        Value { width, signed: false, val: val & mask(width), unk: 0 }
    }

    pub fn from_planes(width: u32, val: u128, unk: u128) -> Self {
        Value { width, signed: false, val: val & mask(width), unk: unk & mask(width) }
    }

    pub fn x(width: u32) -> Self {
        Value { width, signed: false, val: 0, unk: mask(width) }
    }

    pub fn z(width: u32) -> Self {
        Value { width, signed: false, val: mask(width), unk: mask(width) }
    }

    pub fn bit(b: bool) -> Self {
        Value::new(1, b as u128)
    }

    pub fn x_bit() -> Self {
        Value::x(1)
    }

    pub fn from_i64(width: u32, v: i64) -> Self {
        let mut out = Value::new(width, v as i128 as u128);
        out.signed = true;
        out
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn with_signed(mut self, signed: bool) -> Self {
        self.signed = signed;
        self
    }

    pub fn val_plane(&self) -> u128 {
        self.val
    }

    pub fn unk_plane(&self) -> u128 {
        self.unk
    }

    pub fn is_known(&self) -> bool {
        self.unk == 0
    }

    /// Known unsigned value, `None` if any bit is x/z.
    pub fn to_u128(&self) -> Option<u128> {
        self.is_known().then_some(self.val)
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.to_u128().map(|v| v as u64)
    }

    /// Known value interpreted per this value's signedness.
    pub fn to_i128(&self) -> Option<i128> {
        let v = self.to_u128()?;
        if self.signed && self.width < 128 && (v >> (self.width - 1)) & 1 == 1 {
            Some((v | !mask(self.width)) as i128)
        } else {
            Some(v as i128)
        }
    }

    /// Truth value: `Some(true)` if any bit is a known 1, `Some(false)` if
    /// all bits are known 0, `None` otherwise.
    pub fn truth(&self) -> Option<bool> {
        if self.val & !self.unk != 0 {
            Some(true)
        } else if self.unk == 0 {
            Some(false)
        } else {
            None
        }
    }

    pub fn lsb(&self) -> Value {
        Value::from_planes(1, self.val & 1, self.unk & 1)
    }

    /// Bit `i` as (known, value). Unknown bits report `z` through the val plane.
    pub fn get_bit(&self, i: u32) -> (bool, bool) {
        let known = (self.unk >> i) & 1 == 0;
        (known, (self.val >> i) & 1 == 1)
    }

    /// Resize to `width`; sign-extends when `sign_extend` is set.
    pub fn resize(&self, width: u32, sign_extend: bool) -> Value {
        let mut out = if width <= self.width {
            Value::from_planes(width, self.val, self.unk)
        } else {
            let mut v = self.val;
            let mut u = self.unk;
            if sign_extend {
                let top = self.width - 1;
                let ext = mask(width) & !mask(self.width);
                if (v >> top) & 1 == 1 {
                    v |= ext;
                }
                if (u >> top) & 1 == 1 {
                    u |= ext;
                }
            }
            Value::from_planes(width, v, u)
        };
        out.signed = self.signed;
        out
    }

    pub fn extract(&self, offset: u32, width: u32) -> Value {
        if offset >= self.width {
            return Value::x(width);
        }
        let v = self.val >> offset;
        let u = self.unk >> offset;
        let avail = self.width - offset;
        if avail >= width {
            Value::from_planes(width, v, u)
        } else {
            // bits past the top read as x
            let missing = mask(width) & !mask(avail);
            Value::from_planes(width, v & mask(avail), (u & mask(avail)) | missing)
        }
    }

    pub fn insert(&self, offset: u32, part: &Value) -> Value {
        if offset >= self.width {
            return *self;
        }
        let w = part.width.min(self.width - offset);
        let m = mask(w) << offset;
        let val = (self.val & !m) | ((part.val << offset) & m);
        let unk = (self.unk & !m) | ((part.unk << offset) & m);
        let mut out = Value::from_planes(self.width, val, unk);
        out.signed = self.signed;
        out
    }

    pub fn concat(parts: &[Value]) -> Value {
        let mut width = 0u32;
        let mut val = 0u128;
        let mut unk = 0u128;
        for p in parts {
            let w = p.width;
            if width + w > MAX_WIDTH {
                // silently truncated on the left; elaboration rejects wider concatenations
                width = MAX_WIDTH;
                continue;
            }
            val = if w >= 128 { p.val } else { (val << w) | p.val };
            unk = if w >= 128 { p.unk } else { (unk << w) | p.unk };
            width += w;
        }
        Value::from_planes(width.max(1), val, unk)
    }

    pub fn not(&self) -> Value {
        // ~x = x, ~z = x
        let m = mask(self.width);
        Value::from_planes(self.width, !self.val & !self.unk & m, self.unk).with_signed(self.signed)
    }

    pub fn and(&self, o: &Value) -> Value {
        let zero_a = !self.val & !self.unk;
        let zero_b = !o.val & !o.unk;
        let one = self.val & !self.unk & o.val & !o.unk;
        let zero = zero_a | zero_b;
        let m = mask(self.width);
        Value::from_planes(self.width, one, !(zero | one) & m)
    }

    pub fn or(&self, o: &Value) -> Value {
        let one = (self.val & !self.unk) | (o.val & !o.unk);
        let zero = !self.val & !self.unk & !o.val & !o.unk;
        let m = mask(self.width);
        Value::from_planes(self.width, one, !(zero | one) & m)
    }

    pub fn xor(&self, o: &Value) -> Value {
        let unk = self.unk | o.unk;
        Value::from_planes(self.width, (self.val ^ o.val) & !unk, unk)
    }

    pub fn reduce_and(&self) -> Value {
        let m = mask(self.width);
        if (!self.val & !self.unk) & m != 0 {
            Value::bit(false)
        } else if self.unk != 0 {
            Value::x_bit()
        } else {
            Value::bit(true)
        }
    }

    pub fn reduce_or(&self) -> Value {
        if self.val & !self.unk != 0 {
            Value::bit(true)
        } else if self.unk != 0 {
            Value::x_bit()
        } else {
            Value::bit(false)
        }
    }

    pub fn reduce_xor(&self) -> Value {
        if self.unk != 0 {
            Value::x_bit()
        } else {
            Value::bit(self.val.count_ones() % 2 == 1)
        }
    }

    fn arith(&self, o: &Value, f: impl Fn(u128, u128) -> Option<u128>) -> Value {
        if !self.is_known() || !o.is_known() {
            return Value::x(self.width).with_signed(self.signed);
        }
        match f(self.val, o.val) {
            Some(r) => Value::new(self.width, r).with_signed(self.signed),
            None => Value::x(self.width).with_signed(self.signed),
        }
    }

    pub fn add(&self, o: &Value) -> Value {
        self.arith(o, |a, b| Some(a.wrapping_add(b)))
    }

    pub fn sub(&self, o: &Value) -> Value {
        self.arith(o, |a, b| Some(a.wrapping_sub(b)))
    }

    pub fn mul(&self, o: &Value) -> Value {
        self.arith(o, |a, b| Some(a.wrapping_mul(b)))
    }

    pub fn div(&self, o: &Value) -> Value {
        if self.signed && o.signed {
            match (self.to_i128(), o.to_i128()) {
                (Some(a), Some(b)) if b != 0 => Value::new(self.width, a.wrapping_div(b) as u128).with_signed(true),
                _ => Value::x(self.width).with_signed(true),
            }
        } else {
            self.arith(o, |a, b| a.checked_div(b))
        }
    }

    pub fn rem(&self, o: &Value) -> Value {
        if self.signed && o.signed {
            match (self.to_i128(), o.to_i128()) {
                (Some(a), Some(b)) if b != 0 => Value::new(self.width, a.wrapping_rem(b) as u128).with_signed(true),
                _ => Value::x(self.width).with_signed(true),
            }
        } else {
            self.arith(o, |a, b| a.checked_rem(b))
        }
    }

    pub fn pow(&self, o: &Value) -> Value {
        self.arith(o, |a, b| {
            let mut r: u128 = 1;
            let mut base = a;
            let mut e = b;
            while e > 0 {
                if e & 1 == 1 {
                    r = r.wrapping_mul(base);
                }
                base = base.wrapping_mul(base);
                e >>= 1;
            }
            Some(r)
        })
    }

    pub fn neg(&self) -> Value {
        Value::new(self.width, 0).with_signed(self.signed).sub(self)
    }

    pub fn shl(&self, amount: &Value) -> Value {
        match amount.to_u128() {
            None => Value::x(self.width).with_signed(self.signed),
            Some(n) if n >= self.width as u128 => Value::new(self.width, 0).with_signed(self.signed),
            Some(n) => Value::from_planes(self.width, self.val << n, self.unk << n).with_signed(self.signed),
        }
    }

    pub fn shr(&self, amount: &Value, arithmetic: bool) -> Value {
        let fill = arithmetic && self.signed && (self.val >> (self.width - 1)) & 1 == 1;
        let fill_unk = arithmetic && self.signed && (self.unk >> (self.width - 1)) & 1 == 1;
        match amount.to_u128() {
            None => Value::x(self.width).with_signed(self.signed),
            Some(n) => {
                let n = n.min(self.width as u128) as u32;
                let (mut v, mut u) = if n >= 128 { (0, 0) } else { (self.val >> n, self.unk >> n) };
                let ext = mask(self.width) & !mask(self.width - n);
                if fill {
                    v |= ext;
                }
                if fill_unk {
                    u |= ext;
                }
                Value::from_planes(self.width, v, u).with_signed(self.signed)
            }
        }
    }

    /// `==` semantics: x if either side has unknown bits.
    pub fn logic_eq(&self, o: &Value) -> Value {
        let diff_known = (self.val ^ o.val) & !self.unk & !o.unk;
        if diff_known != 0 {
            Value::bit(false)
        } else if self.unk != 0 || o.unk != 0 {
            Value::x_bit()
        } else {
            Value::bit(true)
        }
    }

    /// `===` semantics: exact four-state match.
    pub fn case_eq(&self, o: &Value) -> bool {
        self.val == o.val && self.unk == o.unk
    }

    pub fn compare(&self, o: &Value, signed: bool) -> Option<std::cmp::Ordering> {
        if signed {
            Some(self.to_i128()?.cmp(&o.to_i128()?))
        } else {
            Some(self.to_u128()?.cmp(&o.to_u128()?))
        }
    }

    /// Mask of bits that are z.
    pub fn z_mask(&self) -> u128 {
        self.unk & self.val
    }

    /// Mask of bits that are x.
    pub fn x_mask(&self) -> u128 {
        self.unk & !self.val
    }

    pub fn bin_string(&self) -> String {
        (0..self.width).rev().map(|i| self.bit_char(i)).collect()
    }

    pub fn bit_char(&self, i: u32) -> char {
        match self.get_bit(i) {
            (true, false) => '0',
            (true, true) => '1',
            (false, true) => 'z',
            (false, false) => 'x',
        }
    }

    /// Digits in base 2^bits_per_digit, MSB first, with x/z per digit.
    pub fn radix_string(&self, bits_per_digit: u32) -> String {
        let digits = self.width.div_ceil(bits_per_digit);
        let mut s = String::with_capacity(digits as usize);
        for d in (0..digits).rev() {
            let lo = d * bits_per_digit;
            let w = bits_per_digit.min(self.width - lo);
            let part = self.extract(lo, w);
            if part.unk == 0 {
                s.push(std::char::from_digit(part.val as u32, 16).unwrap());
            } else if part.unk == mask(w) && part.val == mask(w) {
                s.push('z');
            } else if part.unk == mask(w) && part.val == 0 {
                s.push('x');
            } else if part.z_mask() != 0 && part.x_mask() == 0 {
                s.push('Z');
            } else {
                s.push('X');
            }
        }
        s
    }

    pub fn dec_string(&self) -> String {
        if self.unk == 0 {
            match self.to_i128() {
                Some(v) if self.signed => v.to_string(),
                _ => self.val.to_string(),
            }
        } else if self.unk == mask(self.width) {
            if self.val == mask(self.width) {
                "z".into()
            } else {
                "x".into()
            }
        } else if self.x_mask() != 0 {
            "X".into()
        } else {
            "Z".into()
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'b{}", self.width, self.bin_string())
    }
}
