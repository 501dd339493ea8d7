use crate::error::{Error, Result};

/// 8-bit, serially programmable, self-resetting pulse counter. A trigger
/// passes exactly the programmed number of clock pulses, then the counter
/// reloads so the next trigger repeats the count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PulseCounter {
    program: u8,
    remaining: u8,
}

impl PulseCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn program(&mut self, count: u32) -> Result<()> {
        let v = u8::try_from(count)
            .map_err(|_| Error::param(format!("counter program {count} exceeds 8 bits")))?;
        self.program = v;
        self.remaining = v;
        Ok(())
    }

    /// Loads the program one bit per clock, most significant bit first.
    pub fn program_serial(&mut self, bits: &[bool]) -> Result<()> {
        if bits.len() != 8 {
            return Err(Error::param("serial program must be exactly 8 bits"));
        }
        let v = bits.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
        self.program(v)
    }

    pub fn programmed(&self) -> u8 {
        self.program
    }

    /// One clock pulse while triggered; true if it is passed to the output.
    fn tick(&mut self) -> bool {
        if self.remaining == 0 {
            return false;
        }
        self.remaining -= 1;
        true
    }

    /// Runs a trigger against a clock of `clock_pulses` pulses and returns
    /// the number emitted. The counter resets afterwards.
    pub fn trigger(&mut self, clock_pulses: u64) -> u32 {
        let mut emitted = 0;
        for _ in 0..clock_pulses {
            if self.tick() {
                emitted += 1;
            } else {
                break;
            }
        }
        self.remaining = self.program;
        emitted
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emits_programmed_counts() {
        let mut c = PulseCounter::new();
        for n in [32, 64, 0] {
            c.program(n).unwrap();
            assert_eq!(c.trigger(1000), n);
            assert_eq!(c.trigger(1000), n, "re-trigger repeats");
        }
    }

    #[test]
    fn exhaustive_programs() {
        let mut c = PulseCounter::new();
        for n in 0..=255u32 {
            let bits: Vec<bool> = (0..8).rev().map(|b| n >> b & 1 == 1).collect();
            c.program_serial(&bits).unwrap();
            assert_eq!(c.programmed() as u32, n);
            assert_eq!(c.trigger(10_000), n);
        }
    }

    #[test]
    fn out_of_range_program_rejected() {
        assert!(PulseCounter::new().program(256).is_err());
    }

    #[test]
    fn short_clock_truncates_then_resets() {
        let mut c = PulseCounter::new();
        c.program(64).unwrap();
        assert_eq!(c.trigger(10), 10);
        assert_eq!(c.trigger(100), 64);
    }
}
