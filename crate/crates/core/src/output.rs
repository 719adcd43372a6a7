//! Fixed-schema CSV serialization of [`MetricRecord`]s.
//!
//! Numbers are written with 12 significant digits and a lowercase exponent so
//! that identical inputs give identical bytes.

use std::io::Write;

use crate::error::{Error, Result};
use crate::metrics::MetricRecord;

pub const CSV_COLUMNS: [&str; 20] = [
    "family",
    "M",
    "K",
    "alpha",
    "r",
    "delta",
    "cutoff",
    "attenuation_db_per_km",
    "L_tot_km",
    "L0_km",
    "n_links",
    "eta",
    "P0",
    "F0",
    "P_tot",
    "F_tot",
    "skr_bpcu",
    "cost_coeff",
    "bound_model",
    "flags",
];

/// `d.ddddddddddde±x`; `inf`, `-inf` and `nan` spelled out.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.11e}")
    }
}

fn opt_number(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

/// Model switches and flags, `;`-separated. The switches are included so a
/// row is self-describing without the run configuration.
pub fn flags_field(record: &MetricRecord) -> String {
    let s = &record.scenario;
    let mut parts = vec![
        format!("composition={}", s.composition),
        format!("secret_fraction={}", s.secret_fraction),
        format!("t0_s={}", format_number(s.t0_s)),
        format!("n_s={}", format_number(s.n_s)),
    ];
    parts.extend(record.flags.iter().map(|f| f.to_string().replace(';', ",")));
    parts.join(";")
}

pub fn record_row(record: &MetricRecord) -> Vec<String> {
    let spec = &record.spec;
    let s = &record.scenario;
    vec![
        spec.family.to_string(),
        spec.m.to_string(),
        spec.k.map(|k| k.to_string()).unwrap_or_default(),
        opt_number(spec.alpha),
        opt_number(spec.r),
        opt_number(spec.delta),
        spec.cutoff.to_string(),
        format_number(s.attenuation_db_per_km),
        format_number(s.l_tot_km),
        format_number(s.l0_km),
        s.n_links.to_string(),
        format_number(record.eta),
        format_number(record.p0),
        format_number(record.f0),
        format_number(record.p_tot),
        format_number(record.f_tot),
        format_number(record.skr),
        format_number(record.cost_coeff),
        record.bound_model.to_string(),
        flags_field(record),
    ]
}

pub fn write_csv<W: Write>(writer: W, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for record in records {
        w.write_record(record_row(record)).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn to_csv_string(records: &[MetricRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::CodeSpec;
    use crate::metrics::{evaluate, BoundModel, RepeaterScenario};

    #[test]
    fn number_format() {
        assert_eq!(format_number(7.48e-8), "7.48000000000e-8");
        assert_eq!(format_number(0.0), "0.00000000000e0");
        assert_eq!(format_number(-1.5), "-1.50000000000e0");
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(format_number(f64::NAN), "nan");
    }

    #[test]
    fn schema_and_empty_fields() {
        let spec = CodeSpec::cat(2, 1.2);
        let scenario = RepeaterScenario::new(500.0, 0.4).unwrap();
        let rec = evaluate(&spec, &scenario, BoundModel::ExactProportional).unwrap();
        let text = to_csv_string(&[rec]).unwrap();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(header, CSV_COLUMNS);
        let row = reader.records().next().unwrap().unwrap();
        assert_eq!(&row[0], "cat");
        assert_eq!(&row[2], "");
        assert_eq!(&row[4], "");
        assert_eq!(&row[5], "");
        assert_eq!(&row[10], "1250");
        assert!(row[19].starts_with("composition=phase_flip;secret_fraction=one_h"));
    }
}
