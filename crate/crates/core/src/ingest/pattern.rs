/// Weekday/weekend plus five day sessions, one-hot within each group:
/// `[weekday, weekend, morning, noon, afternoon, night, rest]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TemporalPattern([u8; 7]);

// session starts in seconds after local midnight
const MORNING: i64 = 8 * 3600;
const NOON: i64 = 11 * 3600 + 30 * 60;
const AFTERNOON: i64 = 14 * 3600;
const NIGHT: i64 = 17 * 3600 + 30 * 60;
const LATE: i64 = 22 * 3600;

impl TemporalPattern {
    pub const LEN: usize = 7;

    pub fn from_bits(bits: [u8; 7]) -> Option<Self> {
        let day: u8 = bits[..2].iter().sum();
        let session: u8 = bits[2..].iter().sum();
        (bits.iter().all(|&b| b <= 1) && day == 1 && session == 1).then_some(Self(bits))
    }

    pub fn bits(&self) -> [u8; 7] {
        self.0
    }

    pub fn as_f64(&self) -> [f64; 7] {
        self.0.map(f64::from)
    }

    pub fn is_weekend(&self) -> bool {
        self.0[1] == 1
    }

    /// 0 = morning … 4 = rest.
    pub fn session(&self) -> usize {
        self.0[2..].iter().position(|&b| b == 1).unwrap()
    }
}

/// Encodes the local time (UTC shifted by the check-in's offset).
pub fn encode_temporal_pattern(utc_seconds: i64, tz_offset_minutes: i32) -> TemporalPattern {
    let local = utc_seconds + i64::from(tz_offset_minutes) * 60;
    let days = local.div_euclid(86_400);
    let secs = local.rem_euclid(86_400);
    // 1970-01-01 was a Thursday; Monday = 0
    let weekday = (days + 3).rem_euclid(7);
    let mut bits = [0u8; 7];
    bits[if weekday < 5 { 0 } else { 1 }] = 1;
    let session = match secs {
        s if (MORNING..NOON).contains(&s) => 0,
        s if (NOON..AFTERNOON).contains(&s) => 1,
        s if (AFTERNOON..NIGHT).contains(&s) => 2,
        s if (NIGHT..LATE).contains(&s) => 3,
        _ => 4,
    };
    bits[2 + session] = 1;
    TemporalPattern(bits)
}
