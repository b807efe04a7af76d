use super::Project;

pub const CSV_HEADER: [&str; 4] = ["tier", "content", "start_time", "end_time"];

/// `HH:MM:SS.mmm`; hours keep growing past 99.
pub fn format_timestamp(ms: u64) -> String {
    let (h, rem) = (ms / 3_600_000, ms % 3_600_000);
    format!("{h:02}:{:02}:{:02}.{:03}", rem / 60_000, rem % 60_000 / 1000, rem % 1000)
}

/// One row per annotation, sorted by tier name then start.
pub fn export_csv(project: &Project) -> String {
    let mut rows: Vec<(&str, &super::Annotation)> = project
        .tiers
        .iter()
        .flat_map(|t| t.annotations.iter().map(move |a| (t.name.as_str(), a)))
        .collect();
    rows.sort_by(|a, b| (a.0, a.1.start_ms, a.1.end_ms).cmp(&(b.0, b.1.start_ms, b.1.end_ms)));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for (tier, a) in rows {
        w.write_record([
            tier,
            &a.value,
            &format_timestamp(a.start_ms),
            &format_timestamp(a.end_ms),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
