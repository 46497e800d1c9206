//! SVG rendering of a sampling set.
//!
//! Each low-resolution pixel in the crop is drawn as a cell. Its `s²`
//! children are drawn as markers at their base-grid positions, with an arrow
//! to the position actually sampled.

use std::fmt::Write;

use crate::dysample::DySampleModule;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VizOptions {
    pub group: usize,
    /// Top row and left column of the crop, in input pixels.
    pub origin: (usize, usize),
    /// Crop height and width in input pixels; clipped to the map.
    pub extent: (usize, usize),
    /// Side of one input pixel in SVG units.
    pub cell: f64,
}

impl Default for VizOptions {
    fn default() -> Self {
        VizOptions {
            group: 0,
            origin: (0, 0),
            extent: (8, 8),
            cell: 48.0,
        }
    }
}

/// One child's displacement, in input pixel coordinates `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrow {
    pub from: (f64, f64),
    pub to: (f64, f64),
}

impl Arrow {
    pub fn length(&self) -> f64 {
        (self.to.0 - self.from.0).hypot(self.to.1 - self.from.1)
    }
}

/// Crop rows and columns after clipping to an `h × w` map.
fn crop(opts: &VizOptions, h: usize, w: usize) -> Result<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    let (top, left) = opts.origin;
    if top >= h || left >= w {
        return Err(Error::invalid(format!("crop origin ({top}, {left}) lies outside the {h}×{w} map")));
    }
    Ok((top..(top + opts.extent.0).min(h), left..(left + opts.extent.1).min(w)))
}

/// Base and sampled positions of every child of the cropped pixels, batch 0.
pub fn offset_arrows(module: &DySampleModule, x: &Tensor, opts: &VizOptions) -> Result<Vec<Arrow>> {
    let cfg = module.config();
    if opts.group >= cfg.groups {
        return Err(Error::invalid(format!("group {} out of range 0..{}", opts.group, cfg.groups)));
    }
    let xs = x.shape();
    let (rows, cols) = crop(opts, xs.h, xs.w)?;
    let base = module.base_grid(x)?;
    let set = module.sampling_set(x)?;
    let (bg, g) = (base.coords(), set.coords());
    let s = cfg.scale;
    let (cx, cy) = (2 * opts.group, 2 * opts.group + 1);
    let mut out = Vec::new();
    for i in rows {
        for j in cols.clone() {
            for dy in 0..s {
                for dx in 0..s {
                    let (r, c) = (i * s + dy, j * s + dx);
                    out.push(Arrow {
                        from: (bg.at(0, 0, r, c), bg.at(0, 1, r, c)),
                        to: (g.at(0, cx, r, c), g.at(0, cy, r, c)),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Standalone SVG document. Output is byte-deterministic for equal inputs.
pub fn render_svg(arrows: &[Arrow], rows: usize, cols: usize, origin: (usize, usize), cell: f64) -> String {
    let (top, left) = (origin.0 as f64, origin.1 as f64);
    // pixel centers sit at integer coordinates
    let px = |x: f64| (x - left + 0.5) * cell;
    let py = |y: f64| (y - top + 0.5) * cell;
    let (width, height) = (cols as f64 * cell, rows as f64 * cell);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    let _ = writeln!(
        s,
        r##"<defs><marker id="head" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="5" markerHeight="5" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#d62728"/></marker></defs>"##
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(s, r##"<g class="pixels" stroke="#999999" fill="none">"##);
    for r in 0..rows {
        for c in 0..cols {
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{cell:.3}" height="{cell:.3}"/>"#,
                c as f64 * cell,
                r as f64 * cell
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let radius = cell / 20.0;
    let _ = writeln!(s, r##"<g class="children" fill="#1f77b4">"##);
    for a in arrows {
        let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="{radius:.3}"/>"#, px(a.from.0), py(a.from.1));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g class="offsets" stroke="#d62728" stroke-width="1.5">"##);
    for a in arrows {
        let head = if a.length() > 0.0 { r#" marker-end="url(#head)""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"{head}/>"#,
            px(a.from.0),
            py(a.from.1),
            px(a.to.0),
            py(a.to.1)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

/// Arrows for `x` under `module`, rendered as SVG.
pub fn offset_field_svg(module: &DySampleModule, x: &Tensor, opts: &VizOptions) -> Result<String> {
    let arrows = offset_arrows(module, x, opts)?;
    let (rows, cols) = crop(opts, x.shape().h, x.shape().w)?;
    Ok(render_svg(&arrows, rows.len(), cols.len(), opts.origin, opts.cell))
}
