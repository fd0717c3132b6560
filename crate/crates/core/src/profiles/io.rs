use std::io::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Expr, Piece, ScalarProfile};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Interval endpoint; infinities travel as the strings `"inf"` / `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Bound(pub f64);

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str(if self.0 > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Bound(v)),
            Raw::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(Bound(f64::INFINITY)),
                "-inf" => Ok(Bound(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("invalid interval bound '{other}'"))),
            },
        }
    }
}

/// `#[serde(with = ...)]` helper for `f64` fields that may be infinite.
pub(crate) mod bound_f64 {
    use super::Bound;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        Bound(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Bound::deserialize(d)?.0)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct PieceDoc {
    interval: [Bound; 2],
    #[serde(flatten)]
    expr: Expr,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ProfileDoc {
    pieces: Vec<PieceDoc>,
    #[serde(default)]
    breakpoints: Vec<f64>,
}

impl From<ScalarProfile> for ProfileDoc {
    fn from(p: ScalarProfile) -> Self {
        let breakpoints = p.breakpoints();
        ProfileDoc {
            pieces: p
                .pieces
                .into_iter()
                .map(|pc| PieceDoc { interval: [Bound(pc.lo), Bound(pc.hi)], expr: pc.expr })
                .collect(),
            breakpoints,
        }
    }
}

impl TryFrom<ProfileDoc> for ScalarProfile {
    type Error = Error;

    fn try_from(doc: ProfileDoc) -> Result<Self> {
        let pieces: Vec<Piece> = doc
            .pieces
            .into_iter()
            .map(|d| Piece::new(d.interval[0].0, d.interval[1].0, d.expr))
            .collect();
        let profile = ScalarProfile::from_pieces(pieces)?;
        if !doc.breakpoints.is_empty() && doc.breakpoints != profile.breakpoints() {
            return Err(Error::InvalidProfile("declared breakpoints do not match piece intervals".into()));
        }
        Ok(profile)
    }
}

/// One CSV row of a sampled profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub r: f64,
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Writes `r,value,d1,d2` rows for every grid node inside the domain.
pub fn write_profile_csv<W: Write>(profile: &ScalarProfile, grid: &Grid, mut out: W) -> Result<Vec<ProfileRow>> {
    writeln!(out, "r,value,d1,d2")?;
    let mut rows = Vec::new();
    for r in grid.nodes() {
        if !profile.contains(r) {
            return Err(crate::error::domain(format!("grid node {r} outside profile domain")));
        }
        let [value, d1, d2] = profile.jet(r)?;
        writeln!(out, "{r},{value},{d1},{d2}")?;
        rows.push(ProfileRow { r, value, d1, d2 });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::Table;

    #[test]
    fn json_layout() {
        let p = ScalarProfile::from_pieces(vec![
            Piece::new(-1.0, 1.0, Expr::Affine { offset: 0.0, slope: 4.0 }),
            Piece::new(1.0, f64::INFINITY, Expr::Affine { offset: 3.9, slope: 0.1 }),
        ])
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        assert_eq!(v["pieces"][0]["kind"], "affine");
        assert_eq!(v["pieces"][1]["interval"][1], "inf");
        assert_eq!(v["breakpoints"][0], 1.0);
        let back: ScalarProfile = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn sine_and_table_kinds() {
        let t = Table::new(vec![0.0, 0.1, 0.2, 0.3], vec![0.0, 0.1, 0.2, 0.3]).unwrap();
        let p = ScalarProfile::single(0.0, 0.3, Expr::Table(t)).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"kind\":\"table\""));
        let q = ScalarProfile::sine(0.0, 1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(serde_json::to_string(&q).unwrap().contains("\"kind\":\"sin\""));
    }

    #[test]
    fn rejects_mismatched_breakpoints() {
        let text = r#"{"pieces":[{"interval":[0,1],"kind":"affine","params":{"offset":0,"slope":1}}],"breakpoints":[0.5]}"#;
        assert!(serde_json::from_str::<ScalarProfile>(text).is_err());
    }

    #[test]
    fn csv_columns() {
        let p = ScalarProfile::sine(0.0, 3.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let mut buf = Vec::new();
        let rows = write_profile_csv(&p, &Grid::new(0.5, 1.0, 0.25).unwrap(), &mut buf).unwrap();
        assert_eq!(rows.len(), 3);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,value,d1,d2\n0.5,"));
    }
}
