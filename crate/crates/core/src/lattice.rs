//! Horizontally oriented lattices `G(Z^2, epsilon)`.
//!
//! Vertical edges `(x, y) -> (x, y ± 1)` are always present; the horizontal
//! edge out of `(x, y)` points to `(x + epsilon_y, y)`. Every vertex therefore
//! has exactly three out-neighbours and three in-neighbours.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Orientation of a horizontal line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    #[inline]
    pub fn as_i64(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    #[inline]
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn from_i64(v: i64) -> Result<Sign> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(Error::InvalidArgument(format!("orientation must be +1 or -1, got {other}"))),
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i64(self.as_i64())
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Sign::from_i64(v).map_err(serde::de::Error::custom)
    }
}

/// A point of `Z^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub x: i64,
    pub y: i64,
}

impl Vertex {
    pub const ORIGIN: Vertex = Vertex { x: 0, y: 0 };

    pub const fn new(x: i64, y: i64) -> Self {
        Vertex { x, y }
    }

    /// `self + (dx, dy)` with overflow reported as an error.
    #[inline]
    pub fn offset(self, dx: i64, dy: i64) -> Result<Vertex> {
        match (self.x.checked_add(dx), self.y.checked_add(dy)) {
            (Some(x), Some(y)) => Ok(Vertex { x, y }),
            _ => Err(Error::Overflow { x: self.x, y: self.y }),
        }
    }

    pub fn l1_norm(self) -> u64 {
        self.x.unsigned_abs() + self.y.unsigned_abs()
    }

    pub fn l1_distance(self, other: Vertex) -> u64 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// The orientation sequence `(epsilon_y)` of a lattice.
///
/// All variants are immutable; [`EnvironmentSpec::epsilon`] is a pure
/// function of the variant and the row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnvironmentSpec {
    /// `epsilon_y = (-1)^y`.
    Alternate,
    /// `epsilon_y = +1` for `y >= 0`, `-1` below.
    HalfPlane,
    /// i.i.d. Rademacher orientations, realised lazily from `seed`.
    RandomRademacher { seed: u64 },
    /// `epsilon_y = pattern[y mod len]`.
    PeriodicPattern { pattern: Vec<Sign> },
    /// Finitely many rows overridden on top of a base rule.
    ExplicitTable {
        base: Box<EnvironmentSpec>,
        table: BTreeMap<i64, Sign>,
    },
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output at position `index` of the stream seeded by `seed`.
#[inline]
pub(crate) fn splitmix64_at(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl EnvironmentSpec {
    pub fn random(seed: u64) -> Self {
        EnvironmentSpec::RandomRademacher { seed }
    }

    pub fn periodic(pattern: Vec<Sign>) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::InvalidArgument("periodic pattern must be nonempty".into()));
        }
        Ok(EnvironmentSpec::PeriodicPattern { pattern })
    }

    pub fn with_overrides(base: EnvironmentSpec, table: BTreeMap<i64, Sign>) -> Result<Self> {
        if matches!(base, EnvironmentSpec::ExplicitTable { .. }) {
            return Err(Error::InvalidArgument("table base must not itself be a table".into()));
        }
        Ok(EnvironmentSpec::ExplicitTable { base: Box::new(base), table })
    }

    /// The orientation of row `y`.
    #[inline]
    pub fn epsilon(&self, y: i64) -> Sign {
        match self {
            EnvironmentSpec::Alternate => {
                if y & 1 == 0 {
                    Sign::Plus
                } else {
                    Sign::Minus
                }
            }
            EnvironmentSpec::HalfPlane => {
                if y >= 0 {
                    Sign::Plus
                } else {
                    Sign::Minus
                }
            }
            EnvironmentSpec::RandomRademacher { seed } => {
                if splitmix64_at(*seed, y as u64) >> 63 == 0 {
                    Sign::Plus
                } else {
                    Sign::Minus
                }
            }
            EnvironmentSpec::PeriodicPattern { pattern } => {
                pattern[y.rem_euclid(pattern.len() as i64) as usize]
            }
            EnvironmentSpec::ExplicitTable { base, table } => match table.get(&y) {
                Some(s) => *s,
                None => base.epsilon(y),
            },
        }
    }

    /// Out-neighbours in canonical order: up, down, horizontal.
    pub fn out_neighbors(&self, v: Vertex) -> Result<[Vertex; 3]> {
        Ok([v.offset(0, 1)?, v.offset(0, -1)?, v.offset(self.epsilon(v.y).as_i64(), 0)?])
    }

    /// Vertices `u` with `v` among `out_neighbors(u)`, ordered up, down, horizontal.
    pub fn in_neighbors(&self, v: Vertex) -> Result<[Vertex; 3]> {
        Ok([v.offset(0, 1)?, v.offset(0, -1)?, v.offset(-self.epsilon(v.y).as_i64(), 0)?])
    }

    /// Kind name as it appears in the JSON form.
    pub fn kind_name(&self) -> &'static str {
        match self {
            EnvironmentSpec::Alternate => "alternate",
            EnvironmentSpec::HalfPlane => "half-plane",
            EnvironmentSpec::RandomRademacher { .. } => "random-rademacher",
            EnvironmentSpec::PeriodicPattern { .. } => "periodic-pattern",
            EnvironmentSpec::ExplicitTable { .. } => "explicit-table",
        }
    }

    /// Environment seed, if the kind uses one.
    pub fn seed(&self) -> Option<u64> {
        match self {
            EnvironmentSpec::RandomRademacher { seed } => Some(*seed),
            EnvironmentSpec::ExplicitTable { base, .. } => base.seed(),
            _ => None,
        }
    }

    /// Precomputes rows `[-radius, radius]` for fast lookups in hot loops.
    pub fn table(&self, radius: u64) -> EpsilonTable<'_> {
        EpsilonTable::new(self, radius)
    }
}

/// Row orientations cached over a window around `y = 0`.
///
/// Rows outside the window fall back to [`EnvironmentSpec::epsilon`].
pub struct EpsilonTable<'a> {
    spec: &'a EnvironmentSpec,
    radius: i64,
    rows: Vec<i8>,
}

impl<'a> EpsilonTable<'a> {
    pub fn new(spec: &'a EnvironmentSpec, radius: u64) -> Self {
        let radius = radius.min(1 << 24) as i64;
        let rows = (-radius..=radius).map(|y| spec.epsilon(y).as_i64() as i8).collect();
        EpsilonTable { spec, radius, rows }
    }

    #[inline(always)]
    pub fn get(&self, y: i64) -> i64 {
        let idx = y.wrapping_add(self.radius);
        if (idx as u64) < self.rows.len() as u64 {
            self.rows[idx as usize] as i64
        } else {
            self.spec.epsilon(y).as_i64()
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pattern: Option<Vec<Sign>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<BTreeMap<i64, Sign>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<String>,
}

impl RawEnvironment {
    fn from_spec(spec: &EnvironmentSpec) -> Self {
        let mut raw = RawEnvironment {
            kind: spec.kind_name().to_string(),
            seed: None,
            pattern: None,
            table: None,
            base: None,
        };
        match spec {
            EnvironmentSpec::Alternate | EnvironmentSpec::HalfPlane => {}
            EnvironmentSpec::RandomRademacher { seed } => raw.seed = Some(*seed),
            EnvironmentSpec::PeriodicPattern { pattern } => raw.pattern = Some(pattern.clone()),
            EnvironmentSpec::ExplicitTable { base, table } => {
                let inner = RawEnvironment::from_spec(base);
                raw.seed = inner.seed;
                raw.pattern = inner.pattern;
                raw.table = Some(table.clone());
                raw.base = Some(inner.kind);
            }
        }
        raw
    }

    fn into_spec(self) -> Result<EnvironmentSpec> {
        let kind = self.kind.as_str();
        let reject = |field: &str| -> Result<EnvironmentSpec> {
            Err(Error::InvalidArgument(format!("field `{field}` not allowed for kind `{kind}`")))
        };
        if kind != "explicit-table" {
            if self.table.is_some() {
                return reject("table");
            }
            if self.base.is_some() {
                return reject("base");
            }
        }
        if kind != "random-rademacher" && kind != "explicit-table" && self.seed.is_some() {
            return reject("seed");
        }
        if kind != "periodic-pattern" && kind != "explicit-table" && self.pattern.is_some() {
            return reject("pattern");
        }
        match kind {
            "alternate" => Ok(EnvironmentSpec::Alternate),
            "half-plane" => Ok(EnvironmentSpec::HalfPlane),
            "random-rademacher" => self
                .seed
                .map(EnvironmentSpec::random)
                .ok_or_else(|| Error::InvalidArgument("random-rademacher requires `seed`".into())),
            "periodic-pattern" => EnvironmentSpec::periodic(
                self.pattern
                    .ok_or_else(|| Error::InvalidArgument("periodic-pattern requires `pattern`".into()))?,
            ),
            "explicit-table" => {
                let base_kind = self.base.unwrap_or_else(|| "alternate".to_string());
                if base_kind == "explicit-table" {
                    return Err(Error::InvalidArgument("table base must not itself be a table".into()));
                }
                let base = RawEnvironment {
                    kind: base_kind,
                    seed: self.seed,
                    pattern: self.pattern,
                    table: None,
                    base: None,
                }
                .into_spec()?;
                EnvironmentSpec::with_overrides(base, self.table.unwrap_or_default())
            }
            other => Err(Error::InvalidArgument(format!("unknown environment kind `{other}`"))),
        }
    }
}

impl Serialize for EnvironmentSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawEnvironment::from_spec(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for EnvironmentSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        RawEnvironment::deserialize(d)?.into_spec().map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for EnvironmentSpec {
    type Err = Error;

    /// Short forms accepted on the command line: `alternate`/`L`,
    /// `half-plane`/`H`, `random:<seed>`/`O:<seed>`, `periodic:+,+,-`.
    /// Anything starting with `{` is parsed as the JSON form.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| Error::InvalidArgument(e.to_string()));
        }
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("alternate" | "L", None) => Ok(EnvironmentSpec::Alternate),
            ("half-plane" | "H", None) => Ok(EnvironmentSpec::HalfPlane),
            ("random-rademacher" | "random" | "O", Some(seed)) => seed
                .parse()
                .map(EnvironmentSpec::random)
                .map_err(|_| Error::InvalidArgument(format!("bad environment seed `{seed}`"))),
            ("periodic-pattern" | "periodic", Some(pat)) => {
                let pattern = pat
                    .split(',')
                    .map(|t| match t.trim() {
                        "+" | "+1" | "1" => Ok(Sign::Plus),
                        "-" | "-1" => Ok(Sign::Minus),
                        other => Err(Error::InvalidArgument(format!("bad orientation `{other}`"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                EnvironmentSpec::periodic(pattern)
            }
            _ => Err(Error::InvalidArgument(format!("unrecognised environment `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_examples() {
        assert_eq!(EnvironmentSpec::Alternate.epsilon(3), Sign::Minus);
        assert_eq!(EnvironmentSpec::Alternate.epsilon(0), Sign::Plus);
        assert_eq!(EnvironmentSpec::Alternate.epsilon(-1), Sign::Minus);
        assert_eq!(EnvironmentSpec::HalfPlane.epsilon(-2), Sign::Minus);
        assert_eq!(EnvironmentSpec::HalfPlane.epsilon(0), Sign::Plus);
    }

    #[test]
    fn out_neighbor_examples() {
        let v = |x, y| Vertex::new(x, y);
        assert_eq!(
            EnvironmentSpec::Alternate.out_neighbors(v(0, 0)).unwrap(),
            [v(0, 1), v(0, -1), v(1, 0)]
        );
        assert_eq!(
            EnvironmentSpec::HalfPlane.out_neighbors(v(5, -1)).unwrap(),
            [v(5, 0), v(5, -2), v(4, -1)]
        );
        assert_eq!(
            EnvironmentSpec::Alternate.out_neighbors(v(0, 1)).unwrap(),
            [v(0, 2), v(0, 0), v(-1, 1)]
        );
    }

    #[test]
    fn in_neighbor_examples() {
        let v = |x, y| Vertex::new(x, y);
        assert_eq!(
            EnvironmentSpec::Alternate.in_neighbors(v(0, 0)).unwrap(),
            [v(0, 1), v(0, -1), v(-1, 0)]
        );
        assert_eq!(
            EnvironmentSpec::HalfPlane.in_neighbors(v(0, 0)).unwrap(),
            [v(0, 1), v(0, -1), v(-1, 0)]
        );
    }

    #[test]
    fn overflow_is_reported() {
        let edge = Vertex::new(i64::MAX, 0);
        assert!(matches!(
            EnvironmentSpec::Alternate.out_neighbors(edge),
            Err(Error::Overflow { .. })
        ));
        assert!(EnvironmentSpec::Alternate.out_neighbors(Vertex::new(0, i64::MIN)).is_err());
    }

    #[test]
    fn periodic_and_table() {
        let env = EnvironmentSpec::periodic(vec![Sign::Plus, Sign::Plus, Sign::Minus]).unwrap();
        assert_eq!(env.epsilon(2), Sign::Minus);
        assert_eq!(env.epsilon(-1), Sign::Minus);
        assert_eq!(env.epsilon(-3), Sign::Plus);
        assert!(EnvironmentSpec::periodic(vec![]).is_err());

        let mut table = BTreeMap::new();
        table.insert(0, Sign::Minus);
        let env = EnvironmentSpec::with_overrides(EnvironmentSpec::HalfPlane, table).unwrap();
        assert_eq!(env.epsilon(0), Sign::Minus);
        assert_eq!(env.epsilon(1), Sign::Plus);
        assert_eq!(env.epsilon(-7), Sign::Minus);
    }

    #[test]
    fn json_forms() {
        for text in [
            r#"{"kind":"alternate"}"#,
            r#"{"kind":"half-plane"}"#,
            r#"{"kind":"random-rademacher","seed":18446744073709551615}"#,
            r#"{"kind":"periodic-pattern","pattern":[1,1,-1]}"#,
            r#"{"kind":"explicit-table","table":{"-3":1,"0":-1},"base":"half-plane"}"#,
            r#"{"kind":"explicit-table","seed":9,"table":{"2":1},"base":"random-rademacher"}"#,
        ] {
            let spec: EnvironmentSpec = serde_json::from_str(text).unwrap();
            assert_eq!(serde_json::to_string(&spec).unwrap(), text);
        }
    }

    #[test]
    fn json_rejects_bad_input() {
        for text in [
            r#"{"kind":"alternate","seed":3}"#,
            r#"{"kind":"random-rademacher"}"#,
            r#"{"kind":"periodic-pattern","pattern":[]}"#,
            r#"{"kind":"periodic-pattern","pattern":[2]}"#,
            r#"{"kind":"alternate","colour":"red"}"#,
            r#"{"kind":"spiral"}"#,
        ] {
            assert!(serde_json::from_str::<EnvironmentSpec>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn short_forms() {
        assert_eq!("L".parse::<EnvironmentSpec>().unwrap(), EnvironmentSpec::Alternate);
        assert_eq!("half-plane".parse::<EnvironmentSpec>().unwrap(), EnvironmentSpec::HalfPlane);
        assert_eq!("O:17".parse::<EnvironmentSpec>().unwrap(), EnvironmentSpec::random(17));
        assert_eq!(
            "periodic:+,-,-".parse::<EnvironmentSpec>().unwrap(),
            EnvironmentSpec::periodic(vec![Sign::Plus, Sign::Minus, Sign::Minus]).unwrap()
        );
        assert!("random".parse::<EnvironmentSpec>().is_err());
    }

    #[test]
    fn table_matches_direct_lookup() {
        let env = EnvironmentSpec::random(5);
        let t = env.table(100);
        for y in -300..300 {
            assert_eq!(t.get(y), env.epsilon(y).as_i64());
        }
    }
}
