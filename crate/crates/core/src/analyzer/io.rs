use std::io::Write;

use super::{Feature, FeatureVector, Verdict};
use crate::dataset::Provenance;
use crate::error::Result;

/// One analyzed nodule.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub provenance: Provenance,
    pub source_id: u32,
    /// `None` when features could not be extracted.
    pub features: Option<FeatureVector>,
    pub verdict: Verdict,
}

/// CSV with a header row: index, provenance, source id, the twelve
/// features (empty when unavailable), verdict, accepted flag.
pub fn write_feature_csv(mut w: impl Write, rows: &[FeatureRow]) -> Result<()> {
    let names: Vec<&str> = Feature::ALL.iter().map(|f| f.name()).collect();
    writeln!(
        w,
        "index,provenance,source_id,{},verdict,accepted",
        names.join(",")
    )?;
    for (i, r) in rows.iter().enumerate() {
        let cols: Vec<String> = match &r.features {
            Some(f) => f.as_array().iter().map(|v| format!("{v}")).collect(),
            None => vec![String::new(); names.len()],
        };
        writeln!(
            w,
            "{i},{},{},{},{},{}",
            r.provenance,
            r.source_id,
            cols.join(","),
            r.verdict.as_str(),
            r.verdict.is_accepted() as u8
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::FEATURE_COUNT;

    #[test]
    fn csv_shape() {
        let rows = vec![
            FeatureRow {
                provenance: Provenance::Generated,
                source_id: 3,
                features: Some(FeatureVector::from_array([1.5; FEATURE_COUNT])),
                verdict: Verdict::Accepted,
            },
            FeatureRow {
                provenance: Provenance::Generated,
                source_id: 3,
                features: None,
                verdict: Verdict::Illegal,
            },
        ];
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("index,provenance,source_id,volume,surface_area"));
        for l in &lines {
            assert_eq!(l.split(',').count(), 3 + FEATURE_COUNT + 2);
        }
        assert!(lines[1].ends_with("accepted,1"));
        assert!(lines[2].ends_with("illegal,0"));
    }
}
