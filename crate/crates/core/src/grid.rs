//! The fixed evaluation grid: 513 points spaced 0.5 apart on [-128, 128].

pub const LO: f64 = -128.0;
pub const HI: f64 = 128.0;
pub const STEP: f64 = 0.5;
pub const LEN: usize = 513;

pub fn point(i: usize) -> f64 {
    LO + STEP * i as f64
}

pub fn points() -> impl Iterator<Item = f64> + Clone {
    (0..LEN).map(point)
}
