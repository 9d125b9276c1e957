//! Demographics CSV, one row per participant code.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use neurofeed_core::session::Demographics;

use super::FormatError;

pub const DEMOGRAPHICS_HEADER: [&str; 10] = [
    "participant_code",
    "gender",
    "age_band",
    "mature",
    "cs_student",
    "wears_glasses",
    "chronotype",
    "java_level",
    "programming_frequency",
    "prior_programming",
];

pub fn read_demographics<R: Read>(reader: R) -> Result<Vec<Demographics>, FormatError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for row in rdr.deserialize::<Demographics>() {
        let row = row.map_err(|e| FormatError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        row.validate()?;
        if !seen.insert(row.participant_code.clone()) {
            return Err(FormatError::Invalid(format!(
                "duplicate participant_code `{}`",
                row.participant_code
            )));
        }
        out.push(row);
    }
    Ok(out)
}

pub fn write_demographics<W: Write>(rows: &[Demographics], writer: W) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use neurofeed_core::session::Chronotype;

    const SAMPLE: &str = "participant_code,gender,age_band,mature,cs_student,wears_glasses,chronotype,java_level,programming_frequency,prior_programming\n\
        P01,female,18-23,false,true,false,night,4,5,true\n\
        P02,male,24-30,true,false,true,no_preference,1,1,false\n";

    #[test]
    fn reads_rows() {
        let rows = read_demographics(SAMPLE.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].chronotype, Chronotype::NoPreference);
        assert!(rows[1].mature);
    }

    #[test]
    fn header_matches_field_order() {
        let rows = read_demographics(SAMPLE.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_demographics(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), DEMOGRAPHICS_HEADER.join(","));
        assert_eq!(text, SAMPLE);
    }

    #[test]
    fn out_of_range_level_rejected() {
        let bad = SAMPLE.replace("night,4,5", "night,7,5");
        assert!(read_demographics(bad.as_bytes()).is_err());
    }

    #[test]
    fn duplicate_code_rejected() {
        let dup = SAMPLE.replace("P02", "P01");
        assert!(matches!(read_demographics(dup.as_bytes()), Err(FormatError::Invalid(_))));
    }
}
