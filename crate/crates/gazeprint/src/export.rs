//! CSV exports. Numbers use shortest round-trip decimal formatting; infinite
//! values are written as `inf` and `-inf`.

use gazeprint_core::density::SemiparametricDensity;
use gazeprint_core::identify::{ScoreMatrix, VerificationCurve};
use gazeprint_core::sampler::TraceRow;

fn to_csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// `(x, log_pdf)` at every grid point.
pub fn density_csv(density: &SemiparametricDensity) -> String {
    to_csv(
        &["x", "log_pdf"],
        density
            .grid()
            .points()
            .iter()
            .enumerate()
            .map(|(i, x)| [x.to_string(), density.log_pdf_at(i).to_string()]),
    )
}

pub fn curve_csv(curve: &VerificationCurve) -> String {
    to_csv(
        &["tau", "far", "frr"],
        curve
            .thresholds
            .iter()
            .zip(&curve.far)
            .zip(&curve.frr)
            .map(|((t, a), r)| [t.to_string(), a.to_string(), r.to_string()]),
    )
}

/// One row per unit, one column per reader.
pub fn score_matrix_csv(matrix: &ScoreMatrix) -> String {
    let mut header = vec!["unit"];
    header.extend(matrix.readers().iter().map(String::as_str));
    to_csv(
        &header,
        matrix.units().iter().enumerate().map(|(u, id)| {
            std::iter::once(id.clone()).chain(matrix.row(u).iter().map(f64::to_string))
        }),
    )
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    to_csv(
        &["iteration", "eta1", "eta2", "log_posterior", "accepted"],
        rows.iter().map(|r| {
            [
                r.iteration.to_string(),
                r.eta1.to_string(),
                r.eta2.to_string(),
                r.log_posterior.to_string(),
                u8::from(r.accepted).to_string(),
            ]
        }),
    )
}

/// `(setting, accuracy, accuracy_se)` rows for an accuracy curve.
pub fn accuracy_csv(setting: &str, points: &[(f64, f64, f64)]) -> String {
    to_csv(
        &[setting, "accuracy", "accuracy_se"],
        points.iter().map(|(s, a, e)| [s.to_string(), a.to_string(), e.to_string()]),
    )
}
