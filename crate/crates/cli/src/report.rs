//! Join and selection statistics as JSON or CSV.

use april_core::pipeline::JoinStats;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Report {
    pub predicate: String,
    pub filter: String,
    pub order: u8,
    pub partitions: u32,
    pub candidates: u64,
    pub true_hits: u64,
    pub true_negatives: u64,
    pub indecisive: u64,
    pub true_hit_pct: f64,
    pub true_negative_pct: f64,
    pub indecisive_pct: f64,
    pub refined_accepted: u64,
    pub results: u64,
    pub mbr_seconds: f64,
    pub build_seconds: f64,
    pub filter_seconds: f64,
    pub refine_seconds: f64,
    pub total_seconds: f64,
}

impl Report {
    pub fn new(predicate: &str, filter: &str, order: u8, partitions: u32, s: &JoinStats) -> Self {
        Report {
            predicate: predicate.to_string(),
            filter: filter.to_string(),
            order,
            partitions,
            candidates: s.candidates,
            true_hits: s.true_hits,
            true_negatives: s.true_negatives,
            indecisive: s.indecisive,
            true_hit_pct: s.true_hit_pct(),
            true_negative_pct: s.true_negative_pct(),
            indecisive_pct: s.indecisive_pct(),
            refined_accepted: s.refined_accepted,
            results: s.results,
            mbr_seconds: s.mbr_seconds,
            build_seconds: s.build_seconds,
            filter_seconds: s.filter_seconds,
            refine_seconds: s.refine_seconds,
            total_seconds: s.mbr_seconds + s.build_seconds + s.filter_seconds + s.refine_seconds,
        }
    }

    pub fn render(&self, format: ReportFormat) -> anyhow::Result<String> {
        Ok(match format {
            ReportFormat::Json => serde_json::to_string_pretty(self)? + "\n",
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.serialize(self)?;
                String::from_utf8(w.into_inner()?)?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_one_row() {
        let stats = JoinStats { candidates: 4, true_hits: 1, true_negatives: 2, indecisive: 1, ..Default::default() };
        let r = Report::new("intersects", "april", 10, 1, &stats);
        let text = r.render(ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("predicate,filter,order,partitions,candidates,true_hits"));
        assert!(lines[1].starts_with("intersects,april,10,1,4,1,2,1,25.0,50.0,25.0"));
        let v: serde_json::Value = serde_json::from_str(&r.render(ReportFormat::Json).unwrap()).unwrap();
        assert_eq!(v["true_negative_pct"], 50.0);
    }
}
