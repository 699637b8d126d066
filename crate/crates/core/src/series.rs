//! Paired method curves and their CSV/JSON emission.
//!
//! Every curve producer in the crate returns a [`CurveSeries`]: one ordered
//! abscissa, one value per method, and a metadata block that is echoed into
//! every output file as a provenance header. Files written from the same
//! inputs are byte-identical.

use std::io::Write;

use crate::error::{Error, Result};

/// Provenance metadata attached to emitted files.
///
/// Keys are written in insertion order, so builders should add them in a
/// fixed sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMeta {
    /// Short identifier of the producing operation, e.g. `power-vs-n`.
    pub kind: String,
    /// Ordered `key = value` configuration echo.
    pub params: Vec<(String, String)>,
}

impl SeriesMeta {
    pub fn new(kind: impl Into<String>) -> Self {
        SeriesMeta {
            kind: kind.into(),
            params: Vec::new(),
        }
    }

    /// Appends one configuration entry.
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.params.push((key.into(), value.to_string()));
    }

    /// Writes the `# key = value` header block.
    pub fn write_header<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# kind = {}", self.kind)?;
        for (k, v) in &self.params {
            writeln!(w, "# {k} = {v}")?;
        }
        Ok(())
    }

    /// The header block as a JSON object (`kind` plus every entry).
    pub fn json_params(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert("kind".into(), self.kind.clone().into());
        for (k, v) in &self.params {
            map.insert(k.clone(), v.clone().into());
        }
        serde_json::Value::Object(map)
    }
}

/// An optional boolean column attached to a series (e.g. null-side markers).
#[derive(Debug, Clone, PartialEq)]
pub struct FlagColumn {
    pub label: String,
    pub values: Vec<bool>,
}

/// One abscissa with one curve per p-value method.
///
/// Invariant: `x` is strictly increasing and all columns share its length.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub meta: SeriesMeta,
    /// Column label of the abscissa (`n`, `t`, `theta`, `delta`, `lambda`).
    pub x_label: String,
    pub x: Vec<f64>,
    pub ump: Vec<f64>,
    pub rand2: Vec<f64>,
    pub flags: Option<FlagColumn>,
}

impl CurveSeries {
    /// Validates the length/ordering invariants and builds the series.
    pub fn new(
        meta: SeriesMeta,
        x_label: impl Into<String>,
        x: Vec<f64>,
        ump: Vec<f64>,
        rand2: Vec<f64>,
        flags: Option<FlagColumn>,
    ) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Empty { what: "series grid" });
        }
        if x.len() != ump.len()
            || x.len() != rand2.len()
            || flags.as_ref().is_some_and(|f| f.values.len() != x.len())
        {
            return Err(Error::config("series columns have mismatched lengths"));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("series grid must be strictly increasing"));
        }
        Ok(CurveSeries {
            meta,
            x_label: x_label.into(),
            x,
            ump,
            rand2,
            flags,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Emits `# provenance` lines, a header row, then one row per grid
    /// point. Method values are printed with six decimal places; the
    /// abscissa keeps its shortest exact representation.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        self.meta.write_header(w)?;
        match &self.flags {
            Some(f) => writeln!(w, "{},ump,rand2,{}", self.x_label, f.label)?,
            None => writeln!(w, "{},ump,rand2", self.x_label)?,
        }
        for i in 0..self.len() {
            match &self.flags {
                Some(f) => writeln!(
                    w,
                    "{},{:.6},{:.6},{}",
                    self.x[i], self.ump[i], self.rand2[i], f.values[i]
                )?,
                None => writeln!(w, "{},{:.6},{:.6}", self.x[i], self.ump[i], self.rand2[i])?,
            }
        }
        Ok(())
    }

    /// Emits one JSON object with full-precision values and the provenance
    /// block under `"provenance"`.
    pub fn write_json<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut map = serde_json::Map::new();
        map.insert("provenance".into(), self.meta.json_params());
        map.insert("x_label".into(), self.x_label.clone().into());
        map.insert("x".into(), self.x.clone().into());
        map.insert("ump".into(), self.ump.clone().into());
        map.insert("rand2".into(), self.rand2.clone().into());
        if let Some(f) = &self.flags {
            map.insert(f.label.clone(), f.values.clone().into());
        }
        serde_json::to_writer_pretty(&mut *w, &serde_json::Value::Object(map))?;
        writeln!(w)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CurveSeries {
        let mut meta = SeriesMeta::new("demo");
        meta.push("c", 0.5);
        CurveSeries::new(
            meta,
            "t",
            vec![0.1, 0.2, 0.5],
            vec![0.01, 0.02, 0.25],
            vec![0.05, 0.1, 0.4],
            None,
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        let meta = SeriesMeta::new("demo");
        assert!(CurveSeries::new(meta.clone(), "t", vec![], vec![], vec![], None).is_err());
        assert!(
            CurveSeries::new(meta.clone(), "t", vec![0.1, 0.1], vec![0.0; 2], vec![0.0; 2], None)
                .is_err()
        );
        assert!(CurveSeries::new(meta, "t", vec![0.1, 0.2], vec![0.0], vec![0.0, 0.0], None).is_err());
    }

    #[test]
    fn csv_layout_is_stable() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# kind = demo\n# c = 0.5\nt,ump,rand2\n0.1,0.010000,0.050000\n0.2,0.020000,0.100000\n0.5,0.250000,0.400000\n"
        );
    }

    #[test]
    fn json_roundtrips_values_exactly() {
        let mut buf = Vec::new();
        sample().write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["x"][2], 0.5);
        assert_eq!(v["ump"][2], 0.25);
        assert_eq!(v["provenance"]["kind"], "demo");
    }

    #[test]
    fn flag_column_is_emitted() {
        let s = CurveSeries::new(
            SeriesMeta::new("demo"),
            "delta",
            vec![0.3, 0.4],
            vec![0.1, 0.2],
            vec![0.1, 0.2],
            Some(FlagColumn {
                label: "null_side".into(),
                values: vec![true, false],
            }),
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("delta,ump,rand2,null_side"));
        assert!(text.contains("0.3,0.100000,0.100000,true"));
    }
}
