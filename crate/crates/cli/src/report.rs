//! Score rows and their CSV / JSON encodings.

use scanlift::metrics::QualityScore;
use serde_json::{json, Value};

use crate::args::{Method, ReportFormat};

pub const CSV_HEADER: &str = "image_id,method,mse,psnr_db,ssim,runtime_ms,params";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub image_id: String,
    pub method: Method,
    pub score: Option<QualityScore>,
    pub runtime_ms: f64,
    pub params: String,
}

fn psnr_text(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p:.4}")
    }
}

impl BenchRow {
    /// Fields in [`CSV_HEADER`] order.
    pub fn csv_record(&self) -> [String; 7] {
        let (mse, psnr, ssim) = match &self.score {
            Some(s) => (format!("{:.6}", s.mse), psnr_text(s.psnr_db), format!("{:.6}", s.ssim)),
            None => Default::default(),
        };
        [
            self.image_id.clone(),
            self.method.label().to_string(),
            mse,
            psnr,
            ssim,
            format!("{:.3}", self.runtime_ms),
            self.params.clone(),
        ]
    }

    pub fn to_json(&self) -> Value {
        let (mse, psnr, ssim) = match &self.score {
            Some(s) => {
                let psnr = if s.psnr_db.is_infinite() { json!("inf") } else { json!(s.psnr_db) };
                (json!(s.mse), psnr, json!(s.ssim))
            }
            None => (Value::Null, Value::Null, Value::Null),
        };
        json!({
            "image_id": self.image_id,
            "method": self.method.label(),
            "mse": mse,
            "psnr_db": psnr,
            "ssim": ssim,
            "runtime_ms": self.runtime_ms,
            "params": self.params,
        })
    }
}

pub fn render(rows: &[BenchRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
            for r in rows {
                w.write_record(r.csv_record()).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
        }
        ReportFormat::Json => {
            let arr = Value::Array(rows.iter().map(BenchRow::to_json).collect());
            let mut s = serde_json::to_string_pretty(&arr).expect("plain JSON values");
            s.push('\n');
            s
        }
    }
}

/// Mean scores of one method over a bench run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub rows: usize,
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
}

/// Per-method means, in order of first appearance.
pub fn summarize(rows: &[BenchRow]) -> Vec<MethodSummary> {
    let mut out: Vec<MethodSummary> = Vec::new();
    for r in rows {
        let Some(s) = &r.score else { continue };
        let entry = match out.iter_mut().position(|m| m.method == r.method) {
            Some(i) => &mut out[i],
            None => {
                out.push(MethodSummary { method: r.method, rows: 0, mean_psnr_db: 0.0, mean_ssim: 0.0 });
                out.last_mut().expect("just pushed")
            }
        };
        entry.rows += 1;
        entry.mean_psnr_db += s.psnr_db;
        entry.mean_ssim += s.ssim;
    }
    for m in &mut out {
        m.mean_psnr_db /= m.rows as f64;
        m.mean_ssim /= m.rows as f64;
    }
    out
}

impl std::fmt::Display for MethodSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "summary method={} images={} mean_psnr_db={} mean_ssim={:.6}",
            self.method.label(),
            self.rows,
            psnr_text(self.mean_psnr_db),
            self.mean_ssim
        )
    }
}
