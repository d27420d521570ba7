//! Minimal SVG line chart.

use std::fmt::Write as _;

use ssm_core::ssm::{format_sig6, Forecast};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];
const AVERAGE_COLOUR: &str = "#000000";

/// Round step (1, 2 or 5 times a power of ten) giving about `target` ticks.
fn tick_step(max: f64, target: f64) -> f64 {
    let raw = max / target;
    let magnitude = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * magnitude)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * magnitude)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One polyline per forecast. The `"average"` curve is drawn thicker and
/// in black.
pub fn render_svg(title: &str, forecasts: &[Forecast]) -> String {
    let days = forecasts.iter().map(Forecast::horizon).max().unwrap_or(1).max(2) - 1;
    let peak = forecasts
        .iter()
        .flat_map(|f| f.daily_predicted.iter().copied())
        .fold(0.0_f64, f64::max);
    let y_step = tick_step(if peak > 0.0 { peak } else { 1.0 }, 5.0);
    let y_max = (peak / y_step).ceil().max(1.0) * y_step;
    let x_step = tick_step(days as f64, 8.0);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |d: f64| LEFT + d / days as f64 * plot_w;
    let sy = |v: f64| TOP + plot_h - v / y_max * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    // Grid and ticks.
    let y_ticks = (y_max / y_step).round() as usize;
    for k in 0..=y_ticks {
        let v = k as f64 * y_step;
        let y = sy(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT:.1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            format_sig6(v)
        );
    }
    let x_ticks = (days as f64 / x_step + 1e-9).floor() as usize;
    for k in 0..=x_ticks {
        let d = k as f64 * x_step;
        let x = sx(d);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.1}" x2="{x:.2}" y2="{:.1}" stroke="#333333"/>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            format_sig6(d)
        );
    }
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#333333"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">days since first reported case</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">cases/day</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let mut colour_index = 0;
    for (i, f) in forecasts.iter().enumerate() {
        let (colour, width) = if f.filter_id == ssm_core::ssm::AVERAGE_ID {
            (AVERAGE_COLOUR, 2.5)
        } else {
            let c = PALETTE[colour_index % PALETTE.len()];
            colour_index += 1;
            (c, 1.5)
        };
        let points: Vec<String> = f
            .daily_predicted
            .iter()
            .enumerate()
            .map(|(t, v)| format!("{:.2},{:.2}", sx(t as f64), sy(*v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="{width}" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="{width}"/>"#,
            lx + 25.0
        );
        let label = if f.filter_id == ssm_core::ssm::AVERAGE_ID {
            "average".to_string()
        } else {
            format!("filter {}", f.filter_id)
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 32.0,
            ly + 4.0,
            escape(&label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
