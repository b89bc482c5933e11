use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};

use crate::Failure;

/// Compact JSON with every float written at 17 significant digits.
struct Sci17;

impl Formatter for Sci17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        CompactFormatter.write_f32(writer, value)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci17);
    value.serialize(&mut ser).expect("report values serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Destination for report files; `None` writes nothing.
#[derive(Debug, Clone)]
pub struct OutDir(pub Option<PathBuf>);

impl OutDir {
    pub fn join(&self, key: &str) -> OutDir {
        OutDir(self.0.as_ref().map(|d| d.join(key)))
    }

    pub fn write_with(&self, name: &str, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
        let Some(dir) = &self.0 else { return Ok(()) };
        let io_fail = |e: io::Error, p: &Path| Failure::domain(format!("cannot write {}: {e}", p.display()));
        fs::create_dir_all(dir).map_err(|e| io_fail(e, dir))?;
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|e| io_fail(e, &path))?;
        let mut w = io::BufWriter::new(file);
        write(&mut w).and_then(|_| w.flush()).map_err(|e| io_fail(e, &path))
    }

    pub fn write_str(&self, name: &str, text: &str) -> Result<(), Failure> {
        self.write_with(name, |w| w.write_all(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_digits() {
        let text = to_json(&serde_json::json!({"a": 0.1, "b": [1.0, -0.25], "n": 3, "nan": f64::NAN}));
        assert_eq!(text, "{\"a\":1.0000000000000001e-1,\"b\":[1.0000000000000000e0,-2.5000000000000000e-1],\"n\":3,\"nan\":null}\n");
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }
}
