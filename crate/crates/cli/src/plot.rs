//! Emit a gnuplot script that renders the CSVs a command produced, with
//! log-log and linear variants for the curve outputs.

use anyhow::Result;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn emit_plot_script(out_dir: &Path, command: &str, outputs: &[PathBuf]) -> Result<PathBuf> {
    let mut s = String::new();
    writeln!(s, "# gnuplot script generated by sffsim {command}")?;
    writeln!(s, "set datafile separator ','")?;
    writeln!(s, "set key left top")?;
    writeln!(s, "set grid")?;
    let curves: Vec<&PathBuf> = outputs
        .iter()
        .filter(|p| {
            let name = p.file_name().unwrap_or_default().to_string_lossy();
            name.ends_with(".csv")
                && (name.starts_with("exact_")
                    || name.starts_with("protocol_")
                    || name.starts_with("rmt_")
                    || name.starts_with("noise_depolarized_"))
        })
        .collect();
    if !curves.is_empty() {
        writeln!(s, "\nset terminal pngcairo size 900,650")?;
        writeln!(s, "set output 'form_factors_loglog.png'")?;
        writeln!(s, "set logscale xy")?;
        writeln!(s, "set xlabel 't'")?;
        writeln!(s, "set ylabel 'K_A(t)'")?;
        let mut plots = Vec::new();
        for p in &curves {
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            plots.push(format!(
                "'{name}' using 1:2 with linespoints title '{}'",
                name.trim_end_matches(".csv")
            ));
        }
        writeln!(s, "plot {}", plots.join(", \\\n     "))?;
        writeln!(s, "\nset output 'form_factors_linear.png'")?;
        writeln!(s, "unset logscale")?;
        writeln!(s, "plot {}", plots.join(", \\\n     "))?;
    }
    if outputs.iter().any(|p| p.ends_with("scan.csv")) {
        writeln!(s, "\nset output 'gap_ratio_scan.png'")?;
        writeln!(s, "unset logscale")?;
        writeln!(s, "set xlabel 'W/J'")?;
        writeln!(s, "set ylabel 'alpha'")?;
        writeln!(s, "set view map")?;
        writeln!(s, "splot 'scan.csv' using 1:2:3 with points pointtype 5 pointsize 3 palette title 'mean r'")?;
    }
    if outputs.iter().any(|p| {
        p.file_name()
            .is_some_and(|n| n.to_string_lossy() == "noise_decorrelation.csv")
    }) {
        writeln!(s, "\nset output 'decorrelation.png'")?;
        writeln!(s, "set logscale xy")?;
        writeln!(s, "set xlabel 'eta'")?;
        writeln!(s, "set ylabel 'relative error'")?;
        writeln!(
            s,
            "plot 'noise_decorrelation.csv' using 1:2:3 with yerrorlines title 'decorrelation', x**2 title 'eta^2'"
        )?;
    }
    if outputs.iter().any(|p| p.ends_with("analyze.csv")) {
        writeln!(s, "\nset output 'eigenstate_moments.png'")?;
        writeln!(s, "unset logscale")?;
        writeln!(s, "set logscale y")?;
        writeln!(s, "set xlabel 'N_A'")?;
        writeln!(
            s,
            "plot 'analyze.csv' using 1:2 with points title 'P_B', \\\n     'analyze.csv' using 1:3 with points title 'Q_B', \\\n     'analyze.csv' using 1:4 with points title 'P_B - Q_B', \\\n     'analyze.csv' using 1:6 with points title 'K plateau x D_A'"
        )?;
    }
    let path = out_dir.join("plots.gp");
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(&path, s)?;
    Ok(path)
}
