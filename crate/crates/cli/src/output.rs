//! CSV emission. One fixed header, one row per (threshold, method) run;
//! quantities a method does not define stay empty rather than faking zeros.

pub const HEADER: &str =
    "z,n,method,estimate,rel_error,log10_estimate,c_star,W0,U0,batches,samples,seed,wall_time_s";

#[derive(Debug, Clone, Default)]
pub struct Row {
    pub z: f64,
    pub n: u32,
    pub method: &'static str,
    pub estimate: Option<f64>,
    pub rel_error: Option<f64>,
    pub log10_estimate: Option<f64>,
    pub c_star: Option<f64>,
    pub w0: Option<f64>,
    pub u0: Option<f64>,
    pub batches: Option<u32>,
    pub samples: Option<u32>,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
}

fn sci(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.5e}")).unwrap_or_default()
}

fn int<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl Row {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            format_args!("{:.5e}", self.z),
            self.n,
            self.method,
            sci(self.estimate),
            sci(self.rel_error),
            sci(self.log10_estimate),
            sci(self.c_star),
            sci(self.w0),
            sci(self.u0),
            int(self.batches),
            int(self.samples),
            int(self.seed),
            format_args!("{:.5e}", self.wall_time_s),
        )
    }
}
