//! Remediation report rendering, in the recommendation-list text format and
//! as JSON.

use serde::Serialize;

use crate::detector::CompatibilityLabel;
use crate::licensing::SpdxId;
use crate::model::ReleaseId;
use crate::resolver::GraphDocument;

use super::actions::join_or;
use super::{RemediationOutcome, RemediationPlan};

#[derive(Debug, Serialize)]
pub struct ReportDocument {
    pub release: String,
    pub label: String,
    pub license_alternatives: Vec<SpdxId>,
    pub plans: Vec<PlanDocument>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct PlanDocument {
    pub cost: i64,
    pub actions: Vec<serde_json::Value>,
    pub changed: serde_json::Value,
    pub graph: GraphDocument,
}

fn letter(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("{}", i + 1)
    }
}

fn render_text(
    release: &ReleaseId,
    label: CompatibilityLabel,
    licenses: &[SpdxId],
    plans: &[RemediationPlan],
    warnings: &[String],
) -> String {
    let mut out = String::new();
    out.push_str(&format!("Possible Remediations for {} {}:\n", release.name, release.version));

    if label != CompatibilityLabel::Incompatible {
        out.push_str("No license incompatibilities detected; no remediation needed.\n");
    } else if licenses.is_empty() && plans.is_empty() {
        out.push_str("No remediation found.\n");
    } else {
        let mut item = 1;
        if !licenses.is_empty() {
            out.push_str(&format!("{item}. Change project license to {};\n", join_or(licenses)));
            item += 1;
        }
        for plan in plans {
            if plan.actions.is_empty() {
                out.push_str(&format!("{item}. No dependency changes needed;\n"));
            } else if plan.actions.len() == 1 {
                out.push_str(&format!("{item}. {};\n", plan.actions[0].describe()));
            } else {
                out.push_str(&format!("{item}. Or make the following dependency changes:\n"));
                for (i, action) in plan.actions.iter().enumerate() {
                    let tail = if i + 1 == plan.actions.len() { '.' } else { ';' };
                    out.push_str(&format!("    {}) {}{}\n", letter(i), action.describe(), tail));
                }
            }
            item += 1;
        }
    }

    if !warnings.is_empty() {
        out.push_str("Warnings:\n");
        for warning in warnings {
            out.push_str(&format!("- {warning}\n"));
        }
    }
    out
}

/// Render a remediation outcome. The text form follows the recommendation
/// report template; JSON carries costs and the reconstructed graphs.
pub fn render_report(outcome: &RemediationOutcome, json: bool) -> String {
    if !json {
        return render_text(
            &outcome.release,
            outcome.baseline_label,
            &outcome.licenses,
            &outcome.plans,
            &outcome.warnings,
        );
    }
    let doc = ReportDocument {
        release: outcome.release.to_string(),
        label: outcome.baseline_label.to_string(),
        license_alternatives: outcome.licenses.clone(),
        plans: outcome
            .plans
            .iter()
            .map(|plan| PlanDocument {
                cost: plan.total_cost,
                actions: plan
                    .actions
                    .iter()
                    .map(|a| serde_json::to_value(a).expect("action serializes"))
                    .collect(),
                changed: serde_json::to_value(&plan.changed).expect("diff serializes"),
                graph: plan.resulting_graph.to_document(),
            })
            .collect(),
        warnings: outcome.warnings.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("report serializes")
}
