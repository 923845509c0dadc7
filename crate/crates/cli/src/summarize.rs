//! Reads CSVs written by `run` and reports one verdict per experiment.

use std::path::Path;

use quantcurv::sphere::log_log_slope;

use crate::CliError;

const REQUIRED: [&str; 3] = ["experiment", "config_hash", "pass"];

#[derive(Debug, Default)]
struct Group {
    name: String,
    rows: usize,
    failing: Vec<String>,
    levels: Vec<f64>,
    eps: Vec<f64>,
    decay: bool,
}

#[derive(Debug)]
pub struct Report {
    pub text: String,
    pub all_pass: bool,
}

fn column(header: &csv::StringRecord, name: &str, path: &Path) -> Result<usize, CliError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Format(format!("{}: missing column `{name}`", path.display())))
}

fn parse(value: &str, what: &str, path: &Path, line: u64) -> Result<f64, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Format(format!("{}:{line}: bad {what} `{value}`", path.display())))
}

pub fn summarize(paths: &[impl AsRef<Path>]) -> Result<Report, CliError> {
    let mut groups: Vec<Group> = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
        let header = reader
            .headers()
            .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?
            .clone();
        let [name_col, _, pass_col] = REQUIRED.map(|c| column(&header, c, path));
        let (name_col, pass_col) = (name_col?, pass_col?);
        column(&header, "config_hash", path)?;
        let decay = header.iter().any(|h| h == "eps_N");
        let decay_cols = if decay {
            Some((column(&header, "N", path)?, column(&header, "eps_N", path)?))
        } else {
            None
        };
        for record in reader.records() {
            let record = record.map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
            let line = record.position().map_or(0, |p| p.line());
            let name = &record[name_col];
            let index = match groups.iter().position(|g| g.name == name) {
                Some(i) => i,
                None => {
                    groups.push(Group { name: name.to_string(), ..Group::default() });
                    groups.len() - 1
                }
            };
            let group = &mut groups[index];
            group.rows += 1;
            group.decay |= decay;
            match &record[pass_col] {
                "true" => {}
                "false" => group.failing.push(format!("{}:{line}: {}", path.display(), record.iter().collect::<Vec<_>>().join(","))),
                other => return Err(CliError::Format(format!("{}:{line}: bad pass flag `{other}`", path.display()))),
            }
            if let Some((n_col, eps_col)) = decay_cols {
                group.levels.push(parse(&record[n_col], "N", path, line)?);
                group.eps.push(parse(&record[eps_col], "eps_N", path, line)?);
            }
        }
    }
    if groups.is_empty() {
        return Err(CliError::Format("no result rows in the given files".into()));
    }

    let mut text = String::new();
    let mut all_pass = true;
    for g in &groups {
        let verdict = if g.failing.is_empty() { "PASS" } else { "FAIL" };
        all_pass &= g.failing.is_empty();
        let mut line = format!("{verdict} {}: {} of {} rows pass", g.name, g.rows - g.failing.len(), g.rows);
        if g.decay {
            match log_log_slope(&g.levels, &g.eps) {
                Some(s) => line.push_str(&format!(", decay slope {s:.3}")),
                None => line.push_str(", decay slope undefined"),
            }
        }
        text.push_str(&line);
        text.push('\n');
        for f in &g.failing {
            text.push_str(&format!("  failing {f}\n"));
        }
    }
    Ok(Report { text, all_pass })
}
