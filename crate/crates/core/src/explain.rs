//! Interpretability: class activation maps over the last conv block and
//! aggregated attention over timesteps.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Architecture, SarconModel};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor};

pub const DELIMITED_HEADER: &str = "t,raw,cam,attention,attention_raw";

/// Per-timestep evidence for one series and one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub series_id: String,
    pub class: usize,
    pub raw: Vec<f64>,
    pub cam: Vec<f64>,
    /// Column sums of the attention matrix scaled to sum to 1. Absent for
    /// models without an attention branch.
    pub attention: Option<Vec<f64>>,
    /// Unscaled column sums.
    pub attention_raw: Option<Vec<f64>>,
    /// Pooled activation `F^k` of each last-block filter.
    pub pooled: Vec<f64>,
    /// Head weights `w_k^c` applied to the pooled features.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Delimited,
    Json,
}

/// Weights and bias that class `class` places on the pooled FCN features.
/// Under the joint head this is the slice after the SSA features.
pub fn fcn_head_weights<T: Scalar>(model: &SarconModel<T>, class: usize) -> Result<(Vec<f64>, f64)> {
    check_class(model, class)?;
    let (head, offset) = match (model.config.architecture, &model.head) {
        (Architecture::Sarcon, Some(head)) => (head, model.config.ssa_features),
        _ => (&model.fcn_head, 0),
    };
    let k = model.config.fcn_features();
    let row = &head.weight.data()[class * head.inputs()..(class + 1) * head.inputs()];
    let weights = row[offset..offset + k].iter().map(|w| w.to_f64_lossy()).collect();
    Ok((weights, head.bias.data()[class].to_f64_lossy()))
}

fn check_class<T: Scalar>(model: &SarconModel<T>, class: usize) -> Result<()> {
    if class >= model.classes() {
        return Err(Error::Contract(format!("class {class} outside 0..{}", model.classes())));
    }
    Ok(())
}

/// `Σ_k w_k f_k(t)` over row-major `[K, T]` maps, resampled to `length`.
pub fn cam_from_maps(maps: &[f64], weights: &[f64], length: usize) -> Result<Vec<f64>> {
    let k = weights.len();
    if k == 0 || !maps.len().is_multiple_of(k) || maps.is_empty() {
        return Err(Error::Contract(format!("{} map values do not split into {k} filters", maps.len())));
    }
    let t = maps.len() / k;
    let mut cam = vec![0.0; t];
    for (w, row) in weights.iter().zip(maps.chunks(t)) {
        for (c, f) in cam.iter_mut().zip(row) {
            *c += w * f;
        }
    }
    Ok(resample_linear(&cam, length))
}

/// Linear interpolation onto `length` evenly spaced points spanning the
/// same interval.
pub fn resample_linear(curve: &[f64], length: usize) -> Vec<f64> {
    if curve.len() == length || curve.is_empty() {
        return curve.to_vec();
    }
    if curve.len() == 1 || length == 1 {
        return vec![curve[0]; length];
    }
    let scale = (curve.len() - 1) as f64 / (length - 1) as f64;
    (0..length)
        .map(|i| {
            let x = i as f64 * scale;
            let lo = (x.floor() as usize).min(curve.len() - 2);
            let frac = x - lo as f64;
            curve[lo] * (1.0 - frac) + curve[lo + 1] * frac
        })
        .collect()
}

/// Column sums of a row-major `[t, l]` attention matrix, returned scaled
/// to sum to 1 and unscaled.
pub fn aggregate_attention(matrix: &[f64], rows: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if rows == 0 || matrix.is_empty() || !matrix.len().is_multiple_of(rows) {
        return Err(Error::Contract(format!("{} values do not form {rows} rows", matrix.len())));
    }
    let l = matrix.len() / rows;
    let mut raw = vec![0.0; l];
    for row in matrix.chunks(l) {
        for (r, a) in raw.iter_mut().zip(row) {
            *r += a;
        }
    }
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Contract("attention mass is not positive".into()));
    }
    Ok((raw.iter().map(|r| r / total).collect(), raw))
}

/// Last-block maps `[K, T]` (row-major) and pooled features of one series.
fn fcn_features<T: Scalar>(model: &SarconModel<T>, series: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let tape = Tape::new();
    let vars = model.bind(&tape, false)?;
    let input = model.input(&tape, series)?;
    let trace = model.trace_infer(&vars, &[input], Architecture::FcnOnly)?;
    Ok((trace.fcn_maps[0].value().to_f64_vec(), trace.fcn_pooled.value().to_f64_vec()))
}

pub fn class_activation_map<T: Scalar>(model: &SarconModel<T>, series: &[f64], class: usize) -> Result<Vec<f64>> {
    let (weights, _) = fcn_head_weights(model, class)?;
    let (maps, _) = fcn_features(model, series)?;
    cam_from_maps(&maps, &weights, series.len())
}

/// Attention summed over rows and scaled to sum to 1.
pub fn attention_importance<T: Scalar>(model: &SarconModel<T>, series: &[f64]) -> Result<Vec<f64>> {
    let a: Tensor<T> = model.attention(series)?;
    Ok(aggregate_attention(&a.to_f64_vec(), a.dims2().0)?.0)
}

pub fn explain<T: Scalar>(model: &SarconModel<T>, series: &[f64], series_id: &str, class: usize) -> Result<Explanation> {
    let (weights, _) = fcn_head_weights(model, class)?;
    let (maps, pooled) = fcn_features(model, series)?;
    let cam = cam_from_maps(&maps, &weights, series.len())?;
    let (attention, attention_raw) = match model.ssa {
        Some(_) => {
            let a = model.attention(series)?;
            let (norm, raw) = aggregate_attention(&a.to_f64_vec(), a.dims2().0)?;
            (Some(norm), Some(raw))
        }
        None => (None, None),
    };
    Ok(Explanation {
        series_id: series_id.to_string(),
        class,
        raw: series.to_vec(),
        cam,
        attention,
        attention_raw,
        pooled,
        weights,
    })
}

impl Explanation {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// One row per timestep; attention cells are empty when absent.
    pub fn to_delimited(&self) -> String {
        let mut out = format!("{DELIMITED_HEADER}\n");
        let cell = |v: &Option<Vec<f64>>, t: usize| v.as_ref().map_or(String::new(), |v| v[t].to_string());
        for t in 0..self.len() {
            let _ = writeln!(
                out,
                "{t},{},{},{},{}",
                self.raw[t],
                self.cam[t],
                cell(&self.attention, t),
                cell(&self.attention_raw, t)
            );
        }
        out
    }

    /// Recovers the curves of a delimited export. Identifier, class,
    /// pooled features and weights are not part of that format.
    pub fn curves_from_delimited(text: &str, source: &str) -> Result<Explanation> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(DELIMITED_HEADER) {
            return Err(Error::format(source, format!("expected header {DELIMITED_HEADER:?}")));
        }
        let mut columns: [Vec<Option<f64>>; 4] = Default::default();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 5 {
                return Err(Error::format(source, format!("line {}: expected 5 cells", i + 2)));
            }
            for (col, cell) in columns.iter_mut().zip(&cells[1..]) {
                let value = match cell.trim() {
                    "" => None,
                    s => Some(s.parse::<f64>().map_err(|_| Error::format(source, format!("line {}: bad number {s:?}", i + 2)))?),
                };
                col.push(value);
            }
        }
        let full = |col: &[Option<f64>], name: &str| {
            col.iter()
                .copied()
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::format(source, format!("column {name} has empty cells")))
        };
        let optional = |col: &[Option<f64>], name: &str| {
            if col.iter().all(Option::is_none) {
                Ok(None)
            } else {
                full(col, name).map(Some)
            }
        };
        Ok(Explanation {
            series_id: String::new(),
            class: 0,
            raw: full(&columns[0], "raw")?,
            cam: full(&columns[1], "cam")?,
            attention: optional(&columns[2], "attention")?,
            attention_raw: optional(&columns[3], "attention_raw")?,
            pooled: Vec::new(),
            weights: Vec::new(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::format("explanation", e.to_string()))
    }

    pub fn from_json(text: &str, source: &str) -> Result<Explanation> {
        serde_json::from_str(text).map_err(|e| Error::format(source, e.to_string()))
    }

    pub fn export(&self, format: ExportFormat, path: &Path) -> Result<()> {
        let text = match format {
            ExportFormat::Delimited => self.to_delimited(),
            ExportFormat::Json => self.to_json()?,
        };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Two stacked panels sharing the time axis: the raw series coloured by
    /// CAM, and the CAM and attention curves.
    pub fn to_svg(&self) -> String {
        const W: f64 = 800.0;
        const PANEL: f64 = 180.0;
        const PAD: f64 = 40.0;
        let h = 2.0 * PANEL + 3.0 * PAD;
        let n = self.len().max(2);
        let x = |t: usize| PAD + (W - 2.0 * PAD) * t as f64 / (n - 1) as f64;
        let polyline = |values: &[f64], top: f64, colour: &str| {
            let (lo, hi) = bounds(values);
            let span = if hi > lo { hi - lo } else { 1.0 };
            let pts: Vec<String> = values
                .iter()
                .enumerate()
                .map(|(t, v)| format!("{:.2},{:.2}", x(t), top + PANEL - PANEL * (v - lo) / span))
                .collect();
            format!(
                "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                pts.join(" ")
            )
        };

        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{h}\" viewBox=\"0 0 {W} {h}\">\n"
        );
        let _ = writeln!(
            svg,
            "<title>{} class {}</title>",
            escape(&self.series_id),
            self.class
        );
        let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{h}\" fill=\"white\"/>");

        let top = PAD;
        let (lo, hi) = bounds(&self.cam);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let (rlo, rhi) = bounds(&self.raw);
        let rspan = if rhi > rlo { rhi - rlo } else { 1.0 };
        let ry = |v: f64| top + PANEL - PANEL * (v - rlo) / rspan;
        svg.push_str("<g stroke-width=\"3\">\n");
        for t in 1..self.len() {
            let heat = ((self.cam[t] - lo) / span * 255.0).round() as u8;
            let _ = writeln!(
                svg,
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"rgb({heat},0,{})\"/>",
                x(t - 1),
                ry(self.raw[t - 1]),
                x(t),
                ry(self.raw[t]),
                255 - heat
            );
        }
        svg.push_str("</g>\n");
        let _ = writeln!(svg, "<text x=\"{PAD}\" y=\"{}\" font-size=\"12\">series, coloured by CAM</text>", top - 8.0);

        let top = 2.0 * PAD + PANEL;
        svg.push_str(&polyline(&self.cam, top, "crimson"));
        let mut legend = String::from("CAM (red)");
        if let Some(a) = &self.attention {
            svg.push_str(&polyline(a, top, "steelblue"));
            legend.push_str(", attention (blue)");
        }
        let _ = writeln!(svg, "<text x=\"{PAD}\" y=\"{}\" font-size=\"12\">{legend}, each min-max scaled</text>", top - 8.0);
        svg.push_str("</svg>\n");
        svg
    }

    pub fn emit_plot(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_svg()).map_err(|e| Error::io(path, e))
    }
}

fn bounds(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_filter_unit_weight_is_the_map() {
        let f = [0.5, -1.0, 2.0];
        assert_eq!(cam_from_maps(&f, &[1.0], 3).unwrap(), f.to_vec());
        assert_eq!(cam_from_maps(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0], 2).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn resampling_keeps_endpoints_and_lines() {
        let up = resample_linear(&[0.0, 1.0, 2.0], 5);
        assert_eq!(up, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(resample_linear(&[3.0], 4), vec![3.0; 4]);
    }

    #[test]
    fn attention_aggregation_cases() {
        let (u, _) = aggregate_attention(&[0.25; 8], 2).unwrap();
        assert_eq!(u, vec![0.25; 4]);
        let one_hot = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let (c, raw) = aggregate_attention(&one_hot, 2).unwrap();
        assert_eq!(c, vec![0.0, 1.0, 0.0]);
        assert_eq!(raw, vec![0.0, 2.0, 0.0]);
    }

    #[test]
    fn delimited_without_attention_round_trips() {
        let e = Explanation {
            series_id: "s".into(),
            class: 1,
            raw: vec![1.0, 2.0],
            cam: vec![0.1, -0.2],
            attention: None,
            attention_raw: None,
            pooled: vec![1.0],
            weights: vec![2.0],
        };
        let back = Explanation::curves_from_delimited(&e.to_delimited(), "t").unwrap();
        assert_eq!(back.raw, e.raw);
        assert_eq!(back.cam, e.cam);
        assert!(back.attention.is_none());
    }
}
