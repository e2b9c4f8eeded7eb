//! Static SVG charts. Output depends only on the series, so regenerated charts
//! are byte-identical.

use std::fmt::Write;

use crate::trends::{TrendAxis, TrendSeries};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 100.0;
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Smallest "nice" axis maximum (1, 2 or 5 times a power of ten) >= `max`.
fn axis_max(max: u64) -> u64 {
    if max == 0 {
        return 1;
    }
    let mut base = 1u64;
    loop {
        for m in [1, 2, 5] {
            if m * base >= max {
                return m * base;
            }
        }
        base *= 10;
    }
}

struct Frame {
    right: f64,
    y_max: u64,
}

impl Frame {
    fn plot_height(&self) -> f64 {
        HEIGHT - TOP - BOTTOM
    }

    fn plot_width(&self) -> f64 {
        WIDTH - LEFT - self.right
    }

    fn y(&self, v: f64) -> f64 {
        TOP + self.plot_height() * (1.0 - v / self.y_max as f64)
    }
}

fn open(svg: &mut String, title: &str, frame: &Frame) {
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    // y axis with five ticks
    let bottom = TOP + frame.plot_height();
    let right = LEFT + frame.plot_width();
    for i in 0..=5 {
        let v = frame.y_max as f64 * i as f64 / 5.0;
        let y = frame.y(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{right:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            LEFT - 6.0,
            y + 4.0,
            format_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{bottom:.1}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{LEFT}\" y1=\"{bottom:.1}\" x2=\"{right:.1}\" y2=\"{bottom:.1}\" stroke=\"black\"/>"
    );
}

fn format_tick(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

fn x_label(svg: &mut String, x: f64, text: &str) {
    let y = TOP + (HEIGHT - TOP - BOTTOM) + 14.0;
    let _ = writeln!(
        svg,
        "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"end\" transform=\"rotate(-35 {x:.1} {y:.1})\">{}</text>",
        escape(text)
    );
}

/// Bar chart of a category-axis series.
pub fn category_chart(series: &TrendSeries) -> String {
    debug_assert_eq!(series.axis, TrendAxis::Category);
    let totals: Vec<u64> = (0..series.categories.len())
        .map(|c| series.category_total(c))
        .collect();
    let frame = Frame {
        right: 20.0,
        y_max: axis_max(totals.iter().copied().max().unwrap_or(0)),
    };
    let mut svg = String::new();
    open(
        &mut svg,
        &format!("{}: articles per category", series.group),
        &frame,
    );

    let n = totals.len().max(1) as f64;
    let slot = frame.plot_width() / n;
    let bar = slot * 0.6;
    for (c, (&count, name)) in totals.iter().zip(&series.categories).enumerate() {
        let x = LEFT + slot * c as f64 + (slot - bar) / 2.0;
        let y = frame.y(count as f64);
        let h = TOP + frame.plot_height() - y;
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar:.1}\" height=\"{h:.1}\" fill=\"{}\"/>",
            PALETTE[c % PALETTE.len()]
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{count}</text>",
            x + bar / 2.0,
            y - 4.0
        );
        x_label(&mut svg, x + bar / 2.0, name);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Multi-line chart of a year-axis series, one line per category.
pub fn time_chart(series: &TrendSeries) -> String {
    debug_assert_eq!(series.axis, TrendAxis::Year);
    let frame = Frame {
        right: 170.0,
        y_max: axis_max(series.counts.iter().flatten().copied().max().unwrap_or(0)),
    };
    let mut svg = String::new();
    open(
        &mut svg,
        &format!("{}: articles per year", series.group),
        &frame,
    );

    let bins = series.bins.len();
    let x_of = |b: usize| {
        if bins <= 1 {
            LEFT + frame.plot_width() / 2.0
        } else {
            LEFT + 10.0 + (frame.plot_width() - 20.0) * b as f64 / (bins - 1) as f64
        }
    };
    for (b, year) in series.bins.iter().enumerate() {
        x_label(&mut svg, x_of(b) + 4.0, year);
    }
    for (c, name) in series.categories.iter().enumerate() {
        let color = PALETTE[c % PALETTE.len()];
        let points: Vec<String> = (0..bins)
            .map(|b| format!("{:.1},{:.1}", x_of(b), frame.y(series.counts[b][c] as f64)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            points.join(" ")
        );
        for b in 0..bins {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>",
                x_of(b),
                frame.y(series.counts[b][c] as f64)
            );
        }
        let ly = TOP + 10.0 + 18.0 * c as f64;
        let lx = WIDTH - frame.right + 15.0;
        let _ = writeln!(
            svg,
            "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{color}\"/>",
            ly - 10.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>",
            lx + 18.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_axis() {
        assert_eq!(axis_max(0), 1);
        assert_eq!(axis_max(3), 5);
        assert_eq!(axis_max(7), 10);
        assert_eq!(axis_max(11), 20);
        assert_eq!(axis_max(200), 200);
    }

    #[test]
    fn charts_are_well_formed_and_escaped() {
        let cat = TrendSeries {
            group: "A & B".into(),
            axis: TrendAxis::Category,
            bins: vec!["all".into()],
            categories: vec!["<x>".into(), "y".into()],
            counts: vec![vec![3, 1]],
        };
        let svg = category_chart(&cat);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("A &amp; B"));
        assert!(svg.contains("&lt;x&gt;"));
        assert_eq!(svg.matches("<rect x=").count(), 2);
        assert_eq!(svg, category_chart(&cat));

        let time = TrendSeries {
            group: "G".into(),
            axis: TrendAxis::Year,
            bins: vec!["2015".into(), "2016".into(), "2017".into()],
            categories: vec!["a".into(), "b".into()],
            counts: vec![vec![0, 1], vec![2, 0], vec![5, 3]],
        };
        let svg = time_chart(&time);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 6);
    }
}
