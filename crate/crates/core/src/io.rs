//! Stable on-disk formats: quantizer JSON with a fixed field order and CSV tables.
//! Every real is written like C's `%.17g`, so files round-trip exactly and identical
//! inputs give byte-identical output.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::asymptotics::{ConvergenceRow, DiagnosticsRow};
use crate::error::{Error, Result};
use crate::gersho::{Method, Quantizer};
use crate::moments::Order;

/// `x` formatted like `printf("%.17g", x)`.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

struct G17;

impl serde_json::ser::Formatter for G17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_g17(value).as_bytes())
    }
}

/// Serialize `value` as compact JSON with `%.17g` reals and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17);
    value.serialize(&mut ser).map_err(|e| Error::Format(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

/// On-disk layout of a quantizer; field order is part of the format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerFile {
    pub r: f64,
    pub n: usize,
    pub boundaries: Vec<f64>,
    pub codepoints: Vec<f64>,
    pub cell_moments: Vec<f64>,
    pub distortion: f64,
    pub method: Method,
    pub unique: bool,
}

impl From<&Quantizer> for QuantizerFile {
    fn from(q: &Quantizer) -> Self {
        Self {
            r: q.order().r(),
            n: q.level(),
            boundaries: q.boundaries().to_vec(),
            codepoints: q.codepoints().to_vec(),
            cell_moments: q.cell_moments().to_vec(),
            distortion: q.distortion(),
            method: q.method(),
            unique: q.unique(),
        }
    }
}

impl TryFrom<QuantizerFile> for Quantizer {
    type Error = Error;

    fn try_from(f: QuantizerFile) -> Result<Self> {
        if f.n != f.codepoints.len() {
            return Err(Error::Format(format!("n = {} but {} codepoints", f.n, f.codepoints.len())));
        }
        Quantizer::from_parts(
            Order::new(f.r)?,
            f.boundaries,
            f.codepoints,
            f.cell_moments,
            f.distortion,
            f.method,
            f.unique,
        )
    }
}

pub fn quantizer_to_json(q: &Quantizer) -> Result<String> {
    to_json(&QuantizerFile::from(q))
}

/// Parse a quantizer file. The support of the result is the whole line until
/// [`Quantizer::with_support`] is applied.
pub fn quantizer_from_json(s: &str) -> Result<Quantizer> {
    let f: QuantizerFile = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
    f.try_into()
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

/// Convergence table as CSV. Without ratios (infinite `C_0`) only `n,distortion,scaled`
/// are written.
pub fn write_convergence_csv<W: Write>(w: W, rows: &[ConvergenceRow], with_ratio: bool) -> Result<()> {
    let mut out = csv_writer(w);
    if with_ratio {
        out.write_record(["n", "distortion", "scaled", "ratio", "rate"]).map_err(csv_err)?;
    } else {
        out.write_record(["n", "distortion", "scaled"]).map_err(csv_err)?;
    }
    for row in rows {
        let mut rec = vec![row.n.to_string(), format_g17(row.distortion), format_g17(row.scaled)];
        if with_ratio {
            rec.push(row.ratio.map(format_g17).unwrap_or_default());
            rec.push(row.rate.map(format_g17).unwrap_or_default());
        }
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

pub fn write_diagnostics_csv<W: Write>(w: W, rows: &[DiagnosticsRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["n", "point_density", "error_density", "mass_deviation", "g4_deviation"]).map_err(csv_err)?;
    for row in rows {
        out.write_record([
            row.n.to_string(),
            format_g17(row.point_density),
            format_g17(row.error_density),
            format_g17(row.mass_deviation),
            format_g17(row.g4_deviation),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_printf() {
        // reference strings from printf("%.17g")
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0 / 192.0, "0.005208333333333333"),
            (1.0, "1"),
            (0.0, "0"),
            (-0.0, "-0"),
            (1e-5, "1.0000000000000001e-05"),
            (1.5e-300, "1.5000000000000001e-300"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (2.5, "2.5"),
            (-3.75e22, "-3.7500000000000001e+22"),
            (5e-324, "4.9406564584124654e-324"),
            (1e-4, "0.0001"),
        ];
        for (x, s) in cases {
            assert_eq!(format_g17(x), s);
        }
        assert_eq!(format_g17(f64::INFINITY), "inf");
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let back: f64 = format_g17(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    fn sample() -> Quantizer {
        let r = Order::new(2.0).unwrap();
        Quantizer::from_parts(
            r,
            vec![0.5],
            vec![0.25, 0.75],
            vec![1.0 / 192.0; 2],
            1.0 / 96.0,
            Method::OuterBisection,
            true,
        )
        .unwrap()
    }

    #[test]
    fn json_layout_is_fixed() {
        let s = quantizer_to_json(&sample()).unwrap();
        assert_eq!(
            s,
            "{\"r\":2,\"n\":2,\"boundaries\":[0.5],\"codepoints\":[0.25,0.75],\"cell_moments\":[0.005208333333333333,0.005208333333333333],\"distortion\":0.010416666666666666,\"method\":\"outer_bisection\",\"unique\":true}\n"
        );
        let back = quantizer_from_json(&s).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn malformed_json_is_rejected() {
        assert!(matches!(quantizer_from_json("{\"r\":2"), Err(Error::Format(_))));
        let s = quantizer_to_json(&sample()).unwrap().replace("\"n\":2", "\"n\":3");
        assert!(quantizer_from_json(&s).is_err());
        let s = quantizer_to_json(&sample()).unwrap().replace("\"r\":2", "\"r\":0.5");
        assert!(matches!(quantizer_from_json(&s), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn convergence_csv() {
        let rows = [
            ConvergenceRow { n: 1, distortion: 1.0, scaled: 1.0, ratio: Some(0.5), rate: None },
            ConvergenceRow { n: 2, distortion: 0.25, scaled: 1.0, ratio: Some(0.5), rate: Some(0.1) },
        ];
        let mut buf = Vec::new();
        write_convergence_csv(&mut buf, &rows, true).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "n,distortion,scaled,ratio,rate\n1,1,1,0.5,\n2,0.25,1,0.5,0.10000000000000001\n"
        );
        let mut buf = Vec::new();
        write_convergence_csv(&mut buf, &rows[..1], false).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,distortion,scaled\n1,1,1\n");
    }

    #[test]
    fn diagnostics_csv() {
        let rows = [DiagnosticsRow {
            n: 4,
            point_density: 0.5,
            error_density: 0.5,
            mass_deviation: 0.0,
            g4_deviation: 0.0,
            against_scaled: false,
        }];
        let mut buf = Vec::new();
        write_diagnostics_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "n,point_density,error_density,mass_deviation,g4_deviation\n4,0.5,0.5,0,0\n"
        );
    }
}
