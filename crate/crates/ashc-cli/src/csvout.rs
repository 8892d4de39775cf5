//! CSV emission: '.' decimal point, ',' separator, 17-significant-digit
//! floats, mandatory header row. Content is bit-identical across repeated
//! runs with the same configuration.

use ashc::engine::csv_float;

pub enum Field {
    Float(f64),
    Int(i64),
}

pub fn render_csv(header: &[&str], rows: impl Iterator<Item = Vec<Field>>) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let mut first = true;
        for field in row {
            if !first {
                out.push(',');
            }
            first = false;
            match field {
                Field::Float(x) => out.push_str(&csv_float(x)),
                Field::Int(i) => out.push_str(&i.to_string()),
            }
        }
        out.push('\n');
    }
    out
}
