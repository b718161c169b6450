//! Parameter values and their canonical byte form.

use std::collections::BTreeMap;

use rayfleet_core::Vec3;

pub type Handle = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementType {
    Float32,
    Float32x2,
    Float32x3,
    Float32x4,
    UInt32,
    UInt32x3,
    Object,
}

impl ElementType {
    pub fn size(self) -> usize {
        match self {
            ElementType::Float32 | ElementType::UInt32 => 4,
            ElementType::Float32x2 => 8,
            ElementType::Float32x3 | ElementType::UInt32x3 => 12,
            ElementType::Float32x4 => 16,
            ElementType::Object => 8,
        }
    }

    fn code(self) -> u8 {
        self as u8
    }
}

/// A typed, little-endian array payload.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayData {
    element: ElementType,
    count: usize,
    bytes: Vec<u8>,
}

impl ArrayData {
    /// `None` unless `bytes.len() == element.size() * count`.
    pub fn new(element: ElementType, count: usize, bytes: Vec<u8>) -> Option<ArrayData> {
        (bytes.len() == element.size() * count).then_some(ArrayData { element, count, bytes })
    }

    pub fn element(&self) -> ElementType {
        self.element
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    fn from_words<W: Copy>(element: ElementType, items: &[W], words: impl Fn(&W) -> Vec<[u8; 4]>) -> ArrayData {
        let mut bytes = Vec::with_capacity(items.len() * element.size());
        for it in items {
            for w in words(it) {
                bytes.extend_from_slice(&w);
            }
        }
        ArrayData { element, count: items.len(), bytes }
    }

    pub fn from_f32(v: &[f32]) -> ArrayData {
        Self::from_words(ElementType::Float32, v, |x| vec![x.to_le_bytes()])
    }

    pub fn from_vec3(v: &[Vec3]) -> ArrayData {
        Self::from_words(ElementType::Float32x3, v, |p| p.to_array().iter().map(|c| c.to_le_bytes()).collect())
    }

    pub fn from_f32x4(v: &[[f32; 4]]) -> ArrayData {
        Self::from_words(ElementType::Float32x4, v, |p| p.iter().map(|c| c.to_le_bytes()).collect())
    }

    pub fn from_u32x3(v: &[[u32; 3]]) -> ArrayData {
        Self::from_words(ElementType::UInt32x3, v, |p| p.iter().map(|c| c.to_le_bytes()).collect())
    }

    pub fn from_handles(v: &[Handle]) -> ArrayData {
        let mut bytes = Vec::with_capacity(v.len() * 8);
        for h in v {
            bytes.extend_from_slice(&h.to_le_bytes());
        }
        ArrayData { element: ElementType::Object, count: v.len(), bytes }
    }

    fn words(&self) -> impl Iterator<Item = [u8; 4]> + '_ {
        self.bytes.chunks_exact(4).map(|c| c.try_into().unwrap())
    }

    pub fn as_f32(&self) -> Option<Vec<f32>> {
        (self.element == ElementType::Float32).then(|| self.words().map(f32::from_le_bytes).collect())
    }

    pub fn as_vec3(&self) -> Option<Vec<Vec3>> {
        (self.element == ElementType::Float32x3).then(|| {
            let f: Vec<f32> = self.words().map(f32::from_le_bytes).collect();
            f.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
        })
    }

    pub fn as_f32x4(&self) -> Option<Vec<[f32; 4]>> {
        (self.element == ElementType::Float32x4).then(|| {
            let f: Vec<f32> = self.words().map(f32::from_le_bytes).collect();
            f.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect()
        })
    }

    pub fn as_u32x3(&self) -> Option<Vec<[u32; 3]>> {
        (self.element == ElementType::UInt32x3).then(|| {
            let u: Vec<u32> = self.words().map(u32::from_le_bytes).collect();
            u.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
        })
    }

    pub fn as_handles(&self) -> Option<Vec<Handle>> {
        (self.element == ElementType::Object)
            .then(|| self.bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamValue {
    Float(f32),
    Float2([f32; 2]),
    Float3([f32; 3]),
    Float4([f32; 4]),
    Int(i64),
    Int2([i64; 2]),
    Int3([i64; 3]),
    /// Row-major 4×4.
    Mat4([f32; 16]),
    String(String),
    Object(Handle),
    Array(ArrayData),
    /// Axis-aligned box as `[min.x, min.y, min.z, max.x, max.y, max.z]`.
    Box3([f32; 6]),
}

impl ParamValue {
    pub fn vec3(v: Vec3) -> ParamValue {
        ParamValue::Float3(v.to_array())
    }
}

/// Incremental 64-bit FNV-1a.
#[derive(Clone, Copy, Debug)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(0xCBF2_9CE4_8422_2325)
    }
}

impl Fnv1a {
    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01B3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// How a referenced handle enters a digest. Handle numbers are local to a
/// rank, so the caller decides what stable identity stands in for them.
pub type HandleToken<'a> = &'a dyn Fn(Handle) -> Vec<u8>;

/// Feeds `subtype` and `params` into `h`: names in sorted order, each name
/// length-prefixed UTF-8, each value a type code plus little-endian data.
pub fn digest_params(h: &mut Fnv1a, subtype: &str, params: &BTreeMap<String, ParamValue>, token: HandleToken<'_>) {
    let write_str = |h: &mut Fnv1a, s: &str| {
        h.write(&(s.len() as u32).to_le_bytes());
        h.write(s.as_bytes());
    };
    write_str(h, subtype);
    h.write(&(params.len() as u32).to_le_bytes());
    for (name, value) in params {
        write_str(h, name);
        let floats = |h: &mut Fnv1a, code: u8, v: &[f32]| {
            h.write(&[code]);
            v.iter().for_each(|x| h.write(&x.to_le_bytes()));
        };
        let ints = |h: &mut Fnv1a, code: u8, v: &[i64]| {
            h.write(&[code]);
            v.iter().for_each(|x| h.write(&x.to_le_bytes()));
        };
        match value {
            ParamValue::Float(v) => floats(h, 1, &[*v]),
            ParamValue::Float2(v) => floats(h, 2, v),
            ParamValue::Float3(v) => floats(h, 3, v),
            ParamValue::Float4(v) => floats(h, 4, v),
            ParamValue::Int(v) => ints(h, 5, &[*v]),
            ParamValue::Int2(v) => ints(h, 6, v),
            ParamValue::Int3(v) => ints(h, 7, v),
            ParamValue::Mat4(v) => floats(h, 8, v),
            ParamValue::String(s) => {
                h.write(&[9]);
                write_str(h, s);
            }
            ParamValue::Object(handle) => {
                h.write(&[10]);
                h.write(&token(*handle));
            }
            ParamValue::Array(a) => {
                h.write(&[11, a.element.code()]);
                h.write(&(a.count as u64).to_le_bytes());
                match a.as_handles() {
                    Some(hs) => hs.iter().for_each(|x| h.write(&token(*x))),
                    None => h.write(&a.bytes),
                }
            }
            ParamValue::Box3(v) => floats(h, 12, v),
        }
    }
}
