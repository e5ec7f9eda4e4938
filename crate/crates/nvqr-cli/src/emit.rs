//! Dataset emission: CSV with a fixed column schema and a JSON mirror.
//! Floating values are printed with 9 significant digits in both formats.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

use nvqr::protocols::{Engine, SystemParams};
use nvqr::qkd::KeyRateRecord;
use nvqr::timing::Protocol;

use crate::sweep::{Dataset, SweepRow};

pub const CSV_HEADER: &str = "protocol,n,L_tot_km,L0_km,beta,delta,eta_c,eta_d,tau_e_s,tau_n_s,\
Q_z,Q_x,acceptance,secret_fraction,rate_hz,norm_key_rate,engine,samples,seed,stderr_Qz,stderr_Qx";

/// 9 significant digits; zero prints as `0`, NaN as `nan`.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.8e}")
    }
}

fn row_fields(row: &SweepRow) -> Vec<(&'static str, String)> {
    let r = &row.record;
    let p = &row.params;
    let l0 = p.link.l_tot / (1u64 << r.n) as f64;
    vec![
        ("protocol", r.protocol.name().to_string()),
        ("n", r.n.to_string()),
        ("L_tot_km", fmt_sig9(p.link.l_tot)),
        ("L0_km", fmt_sig9(l0)),
        ("beta", fmt_sig9(p.beta)),
        ("delta", fmt_sig9(p.delta)),
        ("eta_c", fmt_sig9(p.link.eta_c)),
        ("eta_d", fmt_sig9(p.link.eta_d)),
        ("tau_e_s", fmt_sig9(p.decoherence.tau_e)),
        ("tau_n_s", fmt_sig9(p.decoherence.tau_n)),
        ("Q_z", fmt_sig9(r.q_z)),
        ("Q_x", fmt_sig9(r.q_x)),
        ("acceptance", fmt_sig9(r.acceptance)),
        ("secret_fraction", fmt_sig9(r.r_inf)),
        ("rate_hz", fmt_sig9(r.rate_hz)),
        ("norm_key_rate", fmt_sig9(r.norm_key_rate)),
        ("engine", r.engine.name().to_string()),
        ("samples", r.samples.to_string()),
        ("seed", r.seed.to_string()),
        ("stderr_Qz", fmt_sig9(r.stderr_qz)),
        ("stderr_Qx", fmt_sig9(r.stderr_qx)),
    ]
}

pub fn emit_csv(dataset: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &dataset.rows {
        let fields = row_fields(row);
        let line: Vec<String> = fields.into_iter().map(|(_, v)| v).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn emit_json(dataset: &Dataset) -> String {
    let mut out = String::from("{\n  \"records\": [\n");
    for (i, row) in dataset.rows.iter().enumerate() {
        out.push_str("    {");
        for (j, (key, value)) in row_fields(row).into_iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            let quoted = matches!(key, "protocol" | "engine");
            if quoted {
                let _ = write!(out, "\"{key}\": \"{value}\"");
            } else if value == "nan" || value == "inf" || value == "-inf" {
                let _ = write!(out, "\"{key}\": null");
            } else {
                let _ = write!(out, "\"{key}\": {value}");
            }
        }
        out.push('}');
        if i + 1 < dataset.rows.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("  ]\n}\n");
    out
}

/// Minimal JSON reader for the emitted schema (round-trip checks and
/// downstream tooling smoke tests). Only accepts documents produced by
/// [`emit_json`].
pub fn parse_json(text: &str) -> Result<Dataset> {
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if !line.starts_with('{') || !line.contains("\"protocol\"") {
            continue;
        }
        let body = line.trim_start_matches('{').trim_end_matches(',').trim_end_matches('}');
        let mut fields = std::collections::HashMap::new();
        for pair in body.split(", ") {
            let (k, v) = pair
                .split_once(':')
                .with_context(|| format!("malformed field `{pair}`"))?;
            let k = k.trim().trim_matches('"');
            let v = v.trim().trim_matches('"');
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| -> Result<String> {
            fields.get(k).cloned().with_context(|| format!("missing field `{k}`"))
        };
        let num = |k: &str| -> Result<f64> {
            let v = get(k)?;
            if v == "null" {
                return Ok(f64::NAN);
            }
            v.parse::<f64>().with_context(|| format!("bad number in `{k}`: {v}"))
        };
        let protocol = Protocol::parse(&get("protocol")?)
            .with_context(|| "bad protocol".to_string())?;
        let engine =
            Engine::parse(&get("engine")?).with_context(|| "bad engine".to_string())?;
        let mut params = SystemParams::nominal(num("L_tot_km")?, num("eta_c")?);
        params.beta = num("beta")?;
        params.delta = num("delta")?;
        params.link.eta_d = num("eta_d")?;
        params.decoherence.tau_e = num("tau_e_s")?;
        params.decoherence.tau_n = num("tau_n_s")?;
        let q_z = num("Q_z")?;
        let record = KeyRateRecord {
            protocol,
            n: get("n")?.parse()?,
            q_z,
            q_x: num("Q_x")?,
            r_inf: num("secret_fraction")?,
            rate_hz: num("rate_hz")?,
            acceptance: num("acceptance")?,
            norm_key_rate: num("norm_key_rate")?,
            engine,
            decoder_used: "majority",
            samples: get("samples")?.parse()?,
            seed: get("seed")?.parse()?,
            stderr_qz: num("stderr_Qz")?,
            stderr_qx: num("stderr_Qx")?,
            zero_acceptance: q_z.is_nan(),
            used_scaled_attempts: false,
        };
        rows.push(SweepRow { params, record, error: None });
    }
    if rows.is_empty() && text.contains("\"records\"") {
        return Ok(Dataset { rows });
    }
    if rows.is_empty() {
        bail!("no records found");
    }
    Ok(Dataset { rows })
}

/// Write a dataset to a file in the chosen format.
pub fn write_dataset(
    dataset: &Dataset,
    format: crate::config::OutputFormat,
    path: &std::path::Path,
) -> Result<()> {
    let text = match format {
        crate::config::OutputFormat::Csv => emit_csv(dataset),
        crate::config::OutputFormat::Json => emit_json(dataset),
    };
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
