use std::fs;
use std::io::Write;
use std::path::Path;

use super::run::ResultRecord;
use crate::error::Result;

pub const CURVES_FILE: &str = "curves.csv";
pub const VERDICTS_FILE: &str = "verdicts.csv";
pub const RECORD_FILE: &str = "record.json";
pub const PLOT_DIR: &str = "plot";

/// Separates the statistic tag from the evaluation method in the `method`
/// column of the curves file.
pub const METHOD_SEPARATOR: char = '@';

/// 17 significant digits in scientific notation; parses back exactly.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Write the curves, verdicts, record and plot-data files into `dir`.
pub fn write_outputs(record: &ResultRecord, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join(PLOT_DIR))?;
    let scenario = record.scenario();

    let mut curves = csv::Writer::from_path(dir.join(CURVES_FILE))?;
    curves.write_record(["scenario", "condition", "f_id", "n", "statistic", "stderr", "method"])?;
    for v in &record.verdicts {
        for c in &v.evidence {
            let method = format!("{}{METHOD_SEPARATOR}{}", c.statistic, c.method);
            for ((n, x), se) in c.grid.iter().zip(&c.values).zip(&c.stderr) {
                curves.write_record([scenario, v.condition.as_str(), &c.f_id, &n.to_string(), &format_number(*x), &format_number(*se), &method])?;
            }
        }
    }
    curves.flush()?;

    let mut verdicts = csv::Writer::from_path(dir.join(VERDICTS_FILE))?;
    verdicts.write_record(["scenario", "condition", "f_id", "decision", "threshold_profile", "seed"])?;
    let profile = record.config.thresholds.profile();
    let seed = record.config.seed.to_string();
    for v in &record.verdicts {
        verdicts.write_record([scenario, v.condition.as_str(), &v.f_id, v.decision_str(), profile, &seed])?;
    }
    verdicts.flush()?;

    fs::write(dir.join(RECORD_FILE), serde_json::to_string_pretty(record)? + "\n")?;

    for (i, v) in record.verdicts.iter().enumerate() {
        for c in &v.evidence {
            let stem = format!("{i:02}_{}_{}_{}", v.condition.as_str(), sanitize(&c.f_id), sanitize(&c.statistic));
            let mut dat = fs::File::create(dir.join(PLOT_DIR).join(format!("{stem}.dat")))?;
            let mut err = fs::File::create(dir.join(PLOT_DIR).join(format!("{stem}.err")))?;
            for ((n, x), se) in c.grid.iter().zip(&c.values).zip(&c.stderr) {
                writeln!(dat, "{n} {}", format_number(*x))?;
                writeln!(err, "{n} {}", format_number(*se))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, f64::MIN_POSITIVE, 0.6931471805599452] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn sanitized_names() {
        assert_eq!(sanitize("c2:ind{1}"), "c2_ind_1_");
        assert_eq!(sanitize("clamp[-1,1]"), "clamp_-1_1_");
    }
}
