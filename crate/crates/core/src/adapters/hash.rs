const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME: u64 = 0x0000_0100_0000_01b3;
/// Written between fields so that ("ab","c") and ("a","bc") hash apart.
const SEPARATOR: u8 = 0x1f;

/// 64-bit FNV-1a, fed field by field.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(OFFSET)
    }
}

impl Fnv1a {
    pub fn bytes(mut self, data: &[u8]) -> Self {
        for b in data {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(PRIME);
        }
        self
    }

    pub fn field(self, data: &[u8]) -> Self {
        self.bytes(data).bytes(&[SEPARATOR])
    }

    pub fn str(self, s: &str) -> Self {
        self.field(s.as_bytes())
    }

    pub fn u64(self, v: u64) -> Self {
        self.field(&v.to_le_bytes())
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

pub fn fnv1a64(data: &[u8]) -> u64 {
    Fnv1a::default().bytes(data).finish()
}
