//! Fixation probability heatmaps as standalone HTML.

use crate::error::{io_err, Result};
use std::path::Path;

/// One word to render. `prob = None` marks words excluded from evaluation;
/// they are printed without color.
#[derive(Debug, Clone)]
pub struct HeatToken {
    pub text: String,
    pub prob: Option<f64>,
}

/// Maps a probability to one of 21 bins, 0 (never fixated, blue) through
/// 20 (always fixated, red).
pub fn heat_bin(prob: f64) -> usize {
    let p = prob.clamp(0.0, 1.0);
    ((p * 21.0).floor() as usize).min(20)
}

/// Bin color: blue rises to magenta over bins 0..=10, then red takes over
/// as blue falls away over bins 10..=20; green stays at 20%.
pub fn bin_color(bin: usize) -> String {
    let bin = bin.min(20);
    let (r, b) = if bin <= 10 {
        (bin as f64 / 10.0, 1.0)
    } else {
        (1.0, (20 - bin) as f64 / 10.0)
    };
    format!(
        "rgb({:.0}%, 20%, {:.0}%)",
        (r * 100.0).round(),
        (b * 100.0).round()
    )
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the page body as a string.
pub fn render_heatmap(tokens: &[HeatToken], title: &str) -> String {
    let mut spans = String::new();
    for t in tokens {
        match t.prob {
            Some(p) => {
                let color = bin_color(heat_bin(p));
                spans.push_str(&format!(
                    "<span class=\"w\" style=\"background:{color}\" title=\"{:.3}\">{}</span>\n",
                    p,
                    escape(&t.text)
                ));
            }
            None => {
                spans.push_str(&format!(
                    "<span class=\"w na\">{}</span>\n",
                    escape(&t.text)
                ));
            }
        }
    }
    let mut legend = String::new();
    for k in 0..21 {
        legend.push_str(&format!(
            "<span class=\"cell\" style=\"background:{}\"></span>",
            bin_color(k)
        ));
    }
    format!(
        "<!doctype html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n\
         <style>\n\
         body {{ font-family: serif; margin: 2em; line-height: 1.9; }}\n\
         .w {{ color: #fff; padding: 0.1em 0.25em; border-radius: 3px; }}\n\
         .w.na {{ color: #555; background: none; }}\n\
         .legend {{ margin-bottom: 1.5em; }}\n\
         .cell {{ display: inline-block; width: 1em; height: 1em; }}\n\
         .lab {{ color: #555; font-size: 0.85em; margin: 0 0.5em; }}\n\
         </style>\n</head>\n<body>\n\
         <div class=\"legend\"><span class=\"lab\">never fixated</span>{}\
         <span class=\"lab\">always fixated</span></div>\n\
         <div class=\"text\">\n{}</div>\n</body>\n</html>\n",
        escape(title),
        legend,
        spans
    )
}

/// Writes the heatmap HTML to `path`.
pub fn emit_heatmap(tokens: &[HeatToken], title: &str, path: &Path) -> Result<()> {
    std::fs::write(path, render_heatmap(tokens, title)).map_err(io_err(path))?;
    Ok(())
}
