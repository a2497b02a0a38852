//! Output formatting shared by the library and the CLI. Every float that
//! leaves the process is printed with 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// serde_json formatter that writes every float with 17 significant digits.
#[derive(Clone, Debug)]
pub struct RoundTripFormatter {
    pretty: serde_json::ser::PrettyFormatter<'static>,
}

impl Default for RoundTripFormatter {
    fn default() -> Self {
        RoundTripFormatter {
            pretty: serde_json::ser::PrettyFormatter::with_indent(b"  "),
        }
    }
}

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.pretty.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl Formatter for RoundTripFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

/// Pretty JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, RoundTripFormatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_json() {
        let xs = vec![0.1, -1.0 / 3.0, 1e-300, 12345.678, 0.0];
        let s = to_json_string(&xs).unwrap();
        assert!(s.contains("1.0000000000000001e-1"));
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, xs);
    }

    #[test]
    fn non_finite_becomes_null() {
        let s = to_json_string(&[f64::NAN]).unwrap();
        assert!(s.contains("null"));
    }
}
