//! Long-format `series,x,y` rows for external plotting.

use std::path::Path;

use crate::{CliError, PlotArgs};

fn read_json_attributions(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    value
        .get("attributions")
        .and_then(|a| a.as_array())
        .and_then(|a| a.iter().map(|x| x.as_f64()).collect::<Option<Vec<f64>>>())
        .ok_or_else(|| CliError::Input(format!("{} has no numeric \"attributions\" array", path.display())))
}

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64, CliError> {
    field
        .parse()
        .map_err(|_| CliError::Input(format!("line {line}, column {column:?}: non-numeric value {field:?}")))
}

/// Converts a trace, bench table or lambda sweep into `(series, x, y)` rows.
///
/// * trace (`n, beta_*, ...`): series label, iteration, distance to the reference
/// * bench (`method, budget, ..., mean_bias`): method, budget, mean bias
/// * sweep (`lambda, ..., mean_bias`): `bias`, lambda, mean bias
pub fn reshape(input: &str, reference: Option<&[f64]>, series: &str) -> Result<String, CliError> {
    let mut reader = csv::Reader::from_reader(input.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if input.trim().is_empty() {
        return Ok("series,x,y\n".into());
    }
    let col = |name: &str| header.iter().position(|h| h == name);
    let mut rows: Vec<(String, f64, f64)> = Vec::new();

    if header.first().map(String::as_str) == Some("n") {
        let betas: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("beta_")).collect();
        let mut iterates: Vec<(f64, Vec<f64>)> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let n = parse_f64(&record[0], line, "n")?;
            let beta = betas
                .iter()
                .map(|&i| parse_f64(&record[i], line, &header[i]))
                .collect::<Result<Vec<f64>, _>>()?;
            iterates.push((n, beta));
        }
        let target: Vec<f64> = match (reference, iterates.last()) {
            (Some(r), _) => r.to_vec(),
            (None, Some((_, last))) => last.clone(),
            (None, None) => Vec::new(),
        };
        if !iterates.is_empty() && target.len() != betas.len() {
            return Err(CliError::Input(format!(
                "reference has {} attributions but the trace has {}",
                target.len(),
                betas.len()
            )));
        }
        for (n, beta) in iterates {
            let err = beta.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            rows.push((series.to_string(), n, err));
        }
    } else if let (Some(m), Some(b), Some(y)) = (col("method"), col("budget"), col("mean_bias")) {
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((
                record[m].to_string(),
                parse_f64(&record[b], line, "budget")?,
                parse_f64(&record[y], line, "mean_bias")?,
            ));
        }
    } else if let (Some(l), Some(y)) = (col("lambda"), col("mean_bias")) {
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((
                "bias".to_string(),
                parse_f64(&record[l], line, "lambda")?,
                parse_f64(&record[y], line, "mean_bias")?,
            ));
        }
    } else {
        return Err(CliError::Input(format!("unrecognized table header {header:?}")));
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "x", "y"])?;
    for (s, x, y) in rows {
        w.write_record([s, x.to_string(), y.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn plot_data(args: &PlotArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.input.display())))?;
    let reference = args.reference.as_deref().map(read_json_attributions).transpose()?;
    let series = args.series.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "trace".into())
    });
    let out = reshape(&text, reference.as_deref(), &series)?;
    match &args.out {
        Some(p) => std::fs::write(p, out).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}
