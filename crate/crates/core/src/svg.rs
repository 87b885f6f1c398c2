//! Minimal SVG overlay: level curve, zero scatter, disk boundary.

use num_complex::Complex64;

use crate::limit::CurveSegment;

pub struct Overlay<'a> {
    pub window: [f64; 4],
    pub r: f64,
    pub segments: &'a [CurveSegment],
    pub zeros: &'a [Complex64],
}

const CANVAS: f64 = 720.0;

impl Overlay<'_> {
    fn map(&self, z: Complex64) -> (f64, f64) {
        let [x0, x1, y0, y1] = self.window;
        let sx = CANVAS / (x1 - x0);
        let sy = CANVAS / (y1 - y0);
        // flip y so the upper half-plane is up
        ((z.re - x0) * sx, (y1 - z.im) * sy)
    }

    pub fn write<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {CANVAS} {CANVAS}\" width=\"{CANVAS}\" height=\"{CANVAS}\">"
        )?;
        writeln!(out, "<rect width=\"{CANVAS}\" height=\"{CANVAS}\" fill=\"white\"/>")?;

        // disk boundary
        let (cx, cy) = self.map(Complex64::ZERO);
        let [x0, x1, _, _] = self.window;
        let rr = self.r * CANVAS / (x1 - x0);
        writeln!(
            out,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{rr:.2}\" fill=\"none\" stroke=\"#bbbbbb\" stroke-dasharray=\"6 4\"/>"
        )?;

        for seg in self.segments {
            let (ax, ay) = self.map(seg.a);
            let (bx, by) = self.map(seg.b);
            let color = if seg.degenerate { "#dd8800" } else { "#1f6fd0" };
            writeln!(
                out,
                "<line x1=\"{ax:.2}\" y1=\"{ay:.2}\" x2=\"{bx:.2}\" y2=\"{by:.2}\" stroke=\"{color}\" stroke-width=\"1.4\"/>"
            )?;
        }

        for z in self.zeros {
            let (x, y) = self.map(*z);
            writeln!(
                out,
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"1.6\" fill=\"#c23b3b\" fill-opacity=\"0.55\"/>"
            )?;
        }
        writeln!(out, "</svg>")
    }
}
