//! Result emission: RFC-4180 CSV, JSON with stable field order, and a
//! minimal single-series SVG line chart for sweeps.
//!
//! Numbers are printed in shortest round-trip scientific form (`{:e}`), so
//! identical runs produce byte-identical files.

use crate::runner::Report;

fn csv_field(text: &str) -> String {
    if text.contains(',') || text.contains('"') || text.contains('\n') {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

fn csv_number(value: f64) -> String {
    format!("{value:e}")
}

/// CSV with the fixed header
/// `quantity,value,units,error_estimate,sweep_parameter,sweep_value`.
pub fn to_csv(report: &Report) -> String {
    let mut out = String::from("quantity,value,units,error_estimate,sweep_parameter,sweep_value\n");
    for row in &report.rows {
        out.push_str(&csv_field(&row.quantity));
        out.push(',');
        out.push_str(&csv_number(row.value));
        out.push(',');
        out.push_str(&csv_field(&row.units));
        out.push(',');
        out.push_str(&csv_number(row.error_estimate));
        out.push(',');
        if let Some(p) = &row.sweep_parameter {
            out.push_str(&csv_field(p));
        }
        out.push(',');
        if let Some(v) = row.sweep_value {
            out.push_str(&csv_number(v));
        }
        out.push('\n');
    }
    out
}

/// Pretty JSON mirroring the CSV schema; struct field order is fixed, so
/// output is stable.
pub fn to_json(report: &Report) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serialization");
    text.push('\n');
    text
}

/// Parse a JSON report back; used by round-trip tests and tooling.
pub fn from_json(text: &str) -> Result<Report, serde_json::Error> {
    serde_json::from_str(text)
}

/// Single-series line chart (SVG 1.1 subset: rect, line, polyline, text) of
/// the sweep rows; returns `None` when the report has no sweep points.
pub fn to_svg(report: &Report) -> Option<String> {
    let points: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter_map(|row| row.sweep_value.map(|x| (x, row.value)))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let parameter = report
        .rows
        .iter()
        .find_map(|r| r.sweep_parameter.clone())
        .unwrap_or_else(|| "parameter".into());
    let quantity = report.rows[0].quantity.clone();

    let (width, height) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 20.0, 50.0);
    let (x0, x1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (y0, y1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let log_x = x0 > 0.0 && x1 / x0 > 30.0;
    let xmap = |x: f64| -> f64 {
        let (a, b, v) = if log_x {
            (x0.log10(), x1.log10(), x.log10())
        } else {
            (x0, x1, x)
        };
        let f = if b > a { (v - a) / (b - a) } else { 0.5 };
        ml + f * (width - ml - mr)
    };
    let ymap = |y: f64| -> f64 {
        let f = if y1 > y0 { (y - y0) / (y1 - y0) } else { 0.5 };
        height - mb - f * (height - mt - mb)
    };

    let mut path = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            path.push(' ');
        }
        path.push_str(&format!("{:.2},{:.2}", xmap(*x), ymap(*y)));
    }

    Some(format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" ",
            "width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
            "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "  <line x1=\"{ml}\" y1=\"{yb}\" x2=\"{xr}\" y2=\"{yb}\" stroke=\"black\"/>\n",
            "  <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{yb}\" stroke=\"black\"/>\n",
            "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{path}\"/>\n",
            "  <text x=\"{xlab}\" y=\"{h2}\" font-size=\"12\" text-anchor=\"middle\">{param}{scale}</text>\n",
            "  <text x=\"12\" y=\"{ylab}\" font-size=\"12\" transform=\"rotate(-90 12 {ylab})\" text-anchor=\"middle\">{quantity}</text>\n",
            "  <text x=\"{ml}\" y=\"{h3}\" font-size=\"10\">{xmin:e}</text>\n",
            "  <text x=\"{xr}\" y=\"{h3}\" font-size=\"10\" text-anchor=\"end\">{xmax:e}</text>\n",
            "  <text x=\"{ml2}\" y=\"{yb}\" font-size=\"10\" text-anchor=\"end\">{ymin:e}</text>\n",
            "  <text x=\"{ml2}\" y=\"{mt2}\" font-size=\"10\" text-anchor=\"end\">{ymax:e}</text>\n",
            "</svg>\n"
        ),
        w = width,
        h = height,
        ml = ml,
        mt = mt,
        yb = height - mb,
        xr = width - mr,
        path = path,
        xlab = (ml + width - mr) / 2.0,
        h2 = height - 14.0,
        h3 = height - mb + 14.0,
        ylab = (mt + height - mb) / 2.0,
        param = parameter,
        scale = if log_x { " (log scale)" } else { "" },
        quantity = quantity,
        xmin = x0,
        xmax = x1,
        ymin = y0,
        ymax = y1,
        ml2 = ml - 4.0,
        mt2 = mt + 8.0,
    ))
}

#[cfg(test)]
mod tests {
    use crate::runner::Row;
    use super::*;

    fn sample() -> Report {
        Report {
            experiment: "magnetic".into(),
            rows: vec![
                Row {
                    quantity: "phi".into(),
                    value: 3.14,
                    units: "rad".into(),
                    error_estimate: 1e-10,
                    sweep_parameter: None,
                    sweep_value: None,
                },
                Row {
                    quantity: "odd,name".into(),
                    value: 1.0,
                    units: "1".into(),
                    error_estimate: 0.0,
                    sweep_parameter: Some("L".into()),
                    sweep_value: Some(10.0),
                },
            ],
        }
    }

    #[test]
    fn csv_has_header_and_quoting() {
        let csv = to_csv(&sample());
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "quantity,value,units,error_estimate,sweep_parameter,sweep_value"
        );
        assert!(csv.contains("\"odd,name\""));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn json_round_trips() {
        let report = sample();
        let text = to_json(&report);
        let back = from_json(&text).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn svg_needs_sweep_points() {
        let mut report = sample();
        assert!(to_svg(&report).is_none()); // single sweep point
        report.rows.push(Row {
            quantity: "odd,name".into(),
            value: 2.0,
            units: "1".into(),
            error_estimate: 0.0,
            sweep_parameter: Some("L".into()),
            sweep_value: Some(100.0),
        });
        let svg = to_svg(&report).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
    }
}
