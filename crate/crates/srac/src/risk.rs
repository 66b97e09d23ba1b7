//! Risk matrices and self-reflective risk-aware action selection.
//!
//! An action's risk against an observation blends two components by the
//! generalizability indicator:
//!
//! ```text
//! r_a(i) = (1 - I_G) * mean_j r[i][j]  +  I_G * sum_j theta[j] * r[i][j]
//! ```
//!
//! so a well-generalizing model follows the recognized activity
//! distribution while a poorly-generalizing one falls back to the
//! activity-independent row mean. The selector returns the argmin with
//! lowest-index tiebreak.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("risk value {0} outside [0, 100]")]
    ValueOutOfRange(f64),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: non-numeric cell '{cell}'")]
    NonNumericCell { line: usize, cell: String },
    #[error("line {line}: expected {expect} risk cells, found {found}")]
    RaggedRow { line: usize, expect: usize, found: usize },
    #[error("matrix must have at least one action and one activity")]
    EmptyMatrix,
    #[error("theta has length {0}, matrix has {1} activities")]
    DimensionMismatch(usize, usize),
    #[error("I_G must lie in (0, 1], got {0}")]
    BadGeneralizability(f64),
}

/// Named risk levels with their inclusive value ranges. Values of 0 and the
/// deliberate five-point gap between high and critical risk classify to no
/// level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskLevel {
    Low,
    Medium,
    High,
    Critical,
}

impl RiskLevel {
    pub fn range(self) -> (u32, u32) {
        match self {
            RiskLevel::Low => (1, 30),
            RiskLevel::Medium => (31, 60),
            RiskLevel::High => (61, 90),
            RiskLevel::Critical => (95, 100),
        }
    }
}

/// Classifies a risk value into its level; `Ok(None)` marks the
/// unclassified values 0 and (90, 95) after rounding.
pub fn classify_risk_level(value: f64) -> Result<Option<RiskLevel>, RiskError> {
    if !(0.0..=100.0).contains(&value) || !value.is_finite() {
        return Err(RiskError::ValueOutOfRange(value));
    }
    let rounded = value.round() as u32;
    for level in [RiskLevel::Low, RiskLevel::Medium, RiskLevel::High, RiskLevel::Critical] {
        let (lo, hi) = level.range();
        if (lo..=hi).contains(&rounded) {
            return Ok(Some(level));
        }
    }
    Ok(None)
}

/// S actions by K activities; `risks[i][j]` is the expected discomfort,
/// interference, or harm of taking action `i` during activity `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMatrix {
    pub action_names: Vec<String>,
    pub activity_names: Vec<String>,
    pub risks: Vec<Vec<f64>>,
}

impl RiskMatrix {
    pub fn new(
        action_names: Vec<String>,
        activity_names: Vec<String>,
        risks: Vec<Vec<f64>>,
    ) -> Result<Self, RiskError> {
        if action_names.is_empty() || activity_names.is_empty() {
            return Err(RiskError::EmptyMatrix);
        }
        assert_eq!(action_names.len(), risks.len(), "one risk row per action");
        for row in &risks {
            assert_eq!(row.len(), activity_names.len(), "one risk cell per activity");
            for &r in row {
                if !(0.0..=100.0).contains(&r) || !r.is_finite() {
                    return Err(RiskError::ValueOutOfRange(r));
                }
            }
        }
        Ok(RiskMatrix { action_names, activity_names, risks })
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn n_activities(&self) -> usize {
        self.activity_names.len()
    }

    /// Matrix with the activity columns reordered to `order`.
    pub fn with_column_order(&self, order: &[usize]) -> RiskMatrix {
        let activity_names = order.iter().map(|&j| self.activity_names[j].clone()).collect();
        let risks = self
            .risks
            .iter()
            .map(|row| order.iter().map(|&j| row[j]).collect())
            .collect();
        RiskMatrix { action_names: self.action_names.clone(), activity_names, risks }
    }

    /// For each activity, the action with the least risk against it alone.
    pub fn least_risk_action(&self, activity: usize) -> usize {
        let mut best = 0;
        for i in 1..self.n_actions() {
            if self.risks[i][activity] < self.risks[best][activity] {
                best = i;
            }
        }
        best
    }
}

/// Outcome of the risk-aware selector; carries all three risk vectors for
/// reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDecision {
    pub chosen_index: usize,
    pub chosen_action: String,
    pub blended_risks: Vec<f64>,
    pub independent_risks: Vec<f64>,
    pub dependent_risks: Vec<f64>,
    pub i_g_used: f64,
}

/// Selects the action minimizing the `I_G`-blended risk of `theta` against
/// the matrix. Ties break to the lowest action index.
pub fn select_action(
    theta: &[f64],
    i_g: f64,
    matrix: &RiskMatrix,
) -> Result<ActionDecision, RiskError> {
    if theta.len() != matrix.n_activities() {
        return Err(RiskError::DimensionMismatch(theta.len(), matrix.n_activities()));
    }
    if !(i_g > 0.0 && i_g <= 1.0) {
        return Err(RiskError::BadGeneralizability(i_g));
    }
    let k = matrix.n_activities() as f64;
    let mut independent = Vec::with_capacity(matrix.n_actions());
    let mut dependent = Vec::with_capacity(matrix.n_actions());
    let mut blended = Vec::with_capacity(matrix.n_actions());
    for row in &matrix.risks {
        let r_in = row.iter().sum::<f64>() / k;
        let r_de = row.iter().zip(theta).map(|(r, t)| r * t).sum::<f64>();
        independent.push(r_in);
        dependent.push(r_de);
        blended.push((1.0 - i_g) * r_in + i_g * r_de);
    }
    let mut chosen = 0;
    for i in 1..blended.len() {
        if blended[i] < blended[chosen] {
            chosen = i;
        }
    }
    Ok(ActionDecision {
        chosen_index: chosen,
        chosen_action: matrix.action_names[chosen].clone(),
        blended_risks: blended,
        independent_risks: independent,
        dependent_risks: dependent,
        i_g_used: i_g,
    })
}

/// Parse result: the matrix plus non-fatal warnings about cells that fall
/// outside every named risk level.
#[derive(Debug, Clone)]
pub struct ParsedRiskMatrix {
    pub matrix: RiskMatrix,
    pub warnings: Vec<String>,
}

/// Parses the risk-matrix CSV: header `action,<activity>,...`, then one row
/// `<action name>,<r_i1>,...` per action. Unclassified values warn but do
/// not fail.
pub fn parse_risk_matrix(text: &str) -> Result<ParsedRiskMatrix, RiskError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(RiskError::EmptyMatrix)?;
    let mut cols = header.split(',').map(str::trim);
    match cols.next() {
        Some("action") => {}
        other => {
            return Err(RiskError::Malformed {
                line: 1,
                msg: format!("header must start with 'action', found '{}'", other.unwrap_or("")),
            })
        }
    }
    let activity_names: Vec<String> = cols.map(str::to_string).collect();
    if activity_names.is_empty() {
        return Err(RiskError::EmptyMatrix);
    }

    let mut action_names = Vec::new();
    let mut risks = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let mut cells = line.split(',').map(str::trim);
        let action = cells
            .next()
            .filter(|a| !a.is_empty())
            .ok_or(RiskError::Malformed { line: lineno, msg: "missing action name".into() })?;
        let mut row = Vec::with_capacity(activity_names.len());
        for cell in cells {
            let value: f64 = cell.parse().map_err(|_| RiskError::NonNumericCell {
                line: lineno,
                cell: cell.to_string(),
            })?;
            if classify_risk_level(value)?.is_none() {
                warnings.push(format!(
                    "line {lineno}: value {value} for action '{action}' matches no risk level"
                ));
            }
            row.push(value);
        }
        if row.len() != activity_names.len() {
            return Err(RiskError::RaggedRow {
                line: lineno,
                expect: activity_names.len(),
                found: row.len(),
            });
        }
        action_names.push(action.to_string());
        risks.push(row);
    }
    let matrix = RiskMatrix::new(action_names, activity_names, risks)?;
    Ok(ParsedRiskMatrix { matrix, warnings })
}

/// The human-following risk matrix used throughout tests and the decision
/// simulation: three actions against falling/turning/walking.
pub fn following_task_matrix() -> RiskMatrix {
    RiskMatrix::new(
        vec!["Stay besides humans".into(), "Move close".into(), "Stay far away".into()],
        vec!["Falling".into(), "Turning".into(), "Walking".into()],
        vec![
            vec![0.0, 20.0, 50.0],
            vec![90.0, 0.0, 20.0],
            vec![95.0, 80.0, 0.0],
        ],
    )
    .expect("constant matrix is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_follows_the_level_table() {
        assert_eq!(classify_risk_level(20.0).unwrap(), Some(RiskLevel::Low));
        assert_eq!(classify_risk_level(92.0).unwrap(), None);
        assert_eq!(classify_risk_level(95.0).unwrap(), Some(RiskLevel::Critical));
        assert_eq!(classify_risk_level(0.0).unwrap(), None);
        assert_eq!(classify_risk_level(0.6).unwrap(), Some(RiskLevel::Low));
        assert_eq!(classify_risk_level(30.4).unwrap(), Some(RiskLevel::Low));
        assert_eq!(classify_risk_level(30.6).unwrap(), Some(RiskLevel::Medium));
        assert_eq!(classify_risk_level(90.4).unwrap(), Some(RiskLevel::High));
        assert_eq!(classify_risk_level(94.4).unwrap(), None);
        assert_eq!(classify_risk_level(94.6).unwrap(), Some(RiskLevel::Critical));
        assert!(classify_risk_level(120.0).is_err());
        assert!(classify_risk_level(-1.0).is_err());
    }

    #[test]
    fn falling_with_full_confidence_stays_beside() {
        let m = following_task_matrix();
        let d = select_action(&[1.0, 0.0, 0.0], 1.0, &m).unwrap();
        assert_eq!(d.chosen_action, "Stay besides humans");
        assert_eq!(d.blended_risks, vec![0.0, 90.0, 95.0]);
    }

    #[test]
    fn vanishing_generalizability_falls_back_to_row_means() {
        let m = following_task_matrix();
        let d = select_action(&[0.0, 0.0, 1.0], 1e-9, &m).unwrap();
        assert_eq!(d.chosen_action, "Stay besides humans");
        let expect = [70.0 / 3.0, 110.0 / 3.0, 175.0 / 3.0];
        for (got, want) in d.independent_risks.iter().zip(expect) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn walking_with_full_confidence_stays_far() {
        let m = following_task_matrix();
        let d = select_action(&[0.0, 0.0, 1.0], 1.0, &m).unwrap();
        assert_eq!(d.chosen_action, "Stay far away");
        assert_eq!(d.blended_risks[2], 0.0);
    }

    #[test]
    fn blend_is_affine_between_endpoints() {
        let m = following_task_matrix();
        let theta = [0.2, 0.5, 0.3];
        let lo = select_action(&theta, 1e-9, &m).unwrap();
        let hi = select_action(&theta, 1.0, &m).unwrap();
        let mid = select_action(&theta, 0.5, &m).unwrap();
        for i in 0..3 {
            let expect = 0.5 * lo.independent_risks[i] + 0.5 * hi.dependent_risks[i];
            assert!((mid.blended_risks[i] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn select_action_validates_inputs() {
        let m = following_task_matrix();
        assert!(matches!(
            select_action(&[0.5, 0.5], 1.0, &m),
            Err(RiskError::DimensionMismatch(2, 3))
        ));
        assert!(matches!(
            select_action(&[1.0, 0.0, 0.0], 0.0, &m),
            Err(RiskError::BadGeneralizability(_))
        ));
        assert!(select_action(&[1.0, 0.0, 0.0], 1.5, &m).is_err());
    }

    const TABLE_CSV: &str = "action,Falling,Turning,Walking\n\
                             Stay besides humans,0,20,50\n\
                             Move close,90,0,20\n\
                             Stay far away,95,80,0\n";

    #[test]
    fn parses_the_following_task_table() {
        let parsed = parse_risk_matrix(TABLE_CSV).unwrap();
        assert_eq!(parsed.matrix, following_task_matrix());
        assert_eq!(
            parsed.matrix.action_names,
            vec!["Stay besides humans", "Move close", "Stay far away"]
        );
        // zeros fall in the classification gap and warn
        assert!(!parsed.warnings.is_empty());
    }

    #[test]
    fn parse_rejects_out_of_range_and_ragged_rows() {
        let bad = "action,a\nx,120\n";
        assert!(matches!(parse_risk_matrix(bad), Err(RiskError::ValueOutOfRange(_))));
        let ragged = "action,a,b\nx,10\n";
        assert!(matches!(parse_risk_matrix(ragged), Err(RiskError::RaggedRow { .. })));
        let nonnum = "action,a\nx,lots\n";
        assert!(matches!(parse_risk_matrix(nonnum), Err(RiskError::NonNumericCell { .. })));
    }

    #[test]
    fn gap_values_warn_but_parse() {
        let text = "action,a,b\nx,92,20\n";
        let parsed = parse_risk_matrix(text).unwrap();
        assert_eq!(parsed.matrix.risks[0][0], 92.0);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn least_risk_action_reads_columns() {
        let m = following_task_matrix();
        assert_eq!(m.least_risk_action(0), 0);
        assert_eq!(m.least_risk_action(1), 1);
        assert_eq!(m.least_risk_action(2), 2);
    }
}
