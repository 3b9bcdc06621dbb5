use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use super::{mean_sd, HarnessError};

const REQUIRED: [&str; 7] = ["seed", "policy", "interaction", "arm_index", "val_loss", "reward", "cumulative_reward"];
const RELATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: String,
    pub runs: usize,
    pub final_loss_mean: f64,
    pub final_loss_sd: f64,
    pub cumulative_reward_mean: f64,
    pub cumulative_reward_sd: f64,
    /// Selection count per arm index over all runs.
    pub arm_counts: BTreeMap<usize, u64>,
}

/// A run whose rewards are inconsistent with its losses.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub file: PathBuf,
    pub interaction: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryReport {
    /// Ordered: GP-TS, fixed arms by index, uniform random, then anything else.
    pub policies: Vec<PolicySummary>,
    /// Lowest mean final loss; ties go to the earlier policy.
    pub best_policy: String,
    pub violations: Vec<Violation>,
}

struct Row {
    interaction: u64,
    arm_index: Option<usize>,
    val_loss: f64,
    reward: Option<f64>,
    cumulative: f64,
}

struct RunFile {
    path: PathBuf,
    policy: String,
    rows: Vec<Row>,
}

/// Reads every `run_*.csv` in `dir` and tabulates final losses, cumulative
/// rewards and arm selections per policy. Each run is re-checked: rewards must
/// be consecutive loss differences, the cumulative column their running sum,
/// and the running sum must telescope to `initial - current` loss.
pub fn summarize(dir: &Path) -> Result<SummaryReport, HarnessError> {
    let entries = std::fs::read_dir(dir).map_err(HarnessError::io(dir))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(HarnessError::io(dir))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("run_") && name.ends_with(".csv") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(HarnessError::Data { path: dir.to_path_buf(), detail: "no run_*.csv files".into() });
    }
    let runs = paths.iter().map(|p| read_run(p)).collect::<Result<Vec<_>, _>>()?;

    let mut violations = Vec::new();
    for run in &runs {
        check_run(run, &mut violations);
    }

    let mut by_policy: BTreeMap<(u8, usize, String), Vec<&RunFile>> = BTreeMap::new();
    for run in runs.iter().filter(|r| !r.rows.is_empty()) {
        by_policy.entry(policy_order(&run.policy)).or_default().push(run);
    }
    let policies: Vec<PolicySummary> = by_policy
        .into_iter()
        .map(|((_, _, policy), runs)| {
            let finals: Vec<f64> = runs.iter().map(|r| r.rows.last().expect("non-empty").val_loss).collect();
            let sums: Vec<f64> = runs.iter().map(|r| r.rows.last().expect("non-empty").cumulative).collect();
            let (final_loss_mean, final_loss_sd) = mean_sd(&finals);
            let (cumulative_reward_mean, cumulative_reward_sd) = mean_sd(&sums);
            let mut arm_counts = BTreeMap::new();
            for a in runs.iter().flat_map(|r| r.rows.iter().filter_map(|row| row.arm_index)) {
                *arm_counts.entry(a).or_insert(0) += 1;
            }
            PolicySummary {
                policy,
                runs: runs.len(),
                final_loss_mean,
                final_loss_sd,
                cumulative_reward_mean,
                cumulative_reward_sd,
                arm_counts,
            }
        })
        .collect();
    let best_policy = policies
        .iter()
        .fold(None::<&PolicySummary>, |best, p| match best {
            Some(b) if b.final_loss_mean <= p.final_loss_mean => Some(b),
            _ => Some(p),
        })
        .map(|p| p.policy.clone())
        .unwrap_or_default();
    Ok(SummaryReport { policies, best_policy, violations })
}

fn policy_order(label: &str) -> (u8, usize, String) {
    if label == "gp_ts" {
        (0, 0, label.into())
    } else if let Some(i) = label.strip_prefix("fixed_arm_").and_then(|s| s.parse().ok()) {
        (1, i, label.into())
    } else if label == "uniform_random" {
        (2, 0, label.into())
    } else {
        (3, 0, label.into())
    }
}

fn read_run(path: &Path) -> Result<RunFile, HarnessError> {
    let bad = |detail: String| HarnessError::Data { path: path.to_path_buf(), detail };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let mut col = BTreeMap::new();
    for name in REQUIRED {
        let i = headers.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column {name}")))?;
        col.insert(name, i);
    }
    let mut rows = Vec::new();
    let mut policy = None::<String>;
    let mut seed = None::<String>;
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |name: &str| record.get(col[name]).unwrap_or("").trim();
        let float = |name: &str| -> Result<f64, HarnessError> {
            let v: f64 = field(name).parse().map_err(|_| bad(format!("line {line}: bad {name} {:?}", field(name))))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("line {line}: non-finite {name}")))
            }
        };
        let optional = |name: &str| if field(name).is_empty() { Ok(None) } else { float(name).map(Some) };
        for (name, seen) in [("policy", &mut policy), ("seed", &mut seed)] {
            match seen {
                Some(v) if v != field(name) => return Err(bad(format!("line {line}: {name} changes within one run"))),
                Some(_) => {}
                None => *seen = Some(field(name).to_string()),
            }
        }
        let interaction = field("interaction")
            .parse()
            .map_err(|_| bad(format!("line {line}: bad interaction {:?}", field("interaction"))))?;
        let arm_index = match field("arm_index") {
            "" => None,
            s => Some(s.parse().map_err(|_| bad(format!("line {line}: bad arm_index {s:?}")))?),
        };
        rows.push(Row {
            interaction,
            arm_index,
            val_loss: float("val_loss")?,
            reward: optional("reward")?,
            cumulative: float("cumulative_reward")?,
        });
    }
    Ok(RunFile { path: path.to_path_buf(), policy: policy.unwrap_or_default(), rows })
}

fn check_run(run: &RunFile, out: &mut Vec<Violation>) {
    let mut flag = |interaction, detail: String| out.push(Violation { file: run.path.clone(), interaction, detail });
    let Some(first) = run.rows.first() else { return };
    if first.interaction != 0 || first.reward.is_some() || first.cumulative != 0.0 {
        flag(first.interaction, "first row must be interaction 0 with no reward and zero cumulative reward".into());
        return;
    }
    let initial = first.val_loss;
    let mut running = 0.0;
    for pair in run.rows.windows(2) {
        let (prev, row) = (&pair[0], &pair[1]);
        let t = row.interaction;
        if t != prev.interaction + 1 {
            flag(t, format!("interaction {t} follows {}", prev.interaction));
            return;
        }
        let scale = initial.abs().max(row.val_loss.abs()).max(1.0);
        let close = |a: f64, b: f64| (a - b).abs() <= RELATIVE_TOLERANCE * scale;
        let Some(reward) = row.reward else {
            flag(t, "missing reward".into());
            continue;
        };
        if row.arm_index.is_none() {
            flag(t, "missing arm_index".into());
        }
        if !close(reward, prev.val_loss - row.val_loss) {
            flag(t, format!("reward {reward} is not the loss drop {}", prev.val_loss - row.val_loss));
        }
        running += reward;
        if !close(row.cumulative, running) {
            flag(t, format!("cumulative reward {} differs from the running sum {running}", row.cumulative));
        }
        if !close(row.cumulative, initial - row.val_loss) {
            flag(t, format!("cumulative reward {} does not telescope to {}", row.cumulative, initial - row.val_loss));
        }
    }
}

impl fmt::Display for SummaryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.policies.iter().map(|p| p.policy.len()).max().unwrap_or(6).max(6);
        writeln!(
            f,
            "{:<width$}  {:>4}  {:>12}  {:>10}  {:>12}  {:>10}",
            "policy", "runs", "final_loss", "sd", "cum_reward", "sd"
        )?;
        for p in &self.policies {
            let mark = if p.policy == self.best_policy { "  *best" } else { "" };
            writeln!(
                f,
                "{:<width$}  {:>4}  {:>12.6}  {:>10.6}  {:>12.6}  {:>10.6}{mark}",
                p.policy, p.runs, p.final_loss_mean, p.final_loss_sd, p.cumulative_reward_mean, p.cumulative_reward_sd
            )?;
        }
        writeln!(f)?;
        writeln!(f, "arm selection frequencies")?;
        for p in &self.policies {
            let total: u64 = p.arm_counts.values().sum();
            let freqs: Vec<String> =
                p.arm_counts.iter().map(|(arm, n)| format!("{arm}:{:.3}", *n as f64 / total.max(1) as f64)).collect();
            writeln!(f, "{:<width$}  {}", p.policy, freqs.join(" "))?;
        }
        writeln!(f)?;
        if self.violations.is_empty() {
            writeln!(f, "reward checks: ok")?;
        } else {
            writeln!(f, "reward checks: {} violation(s)", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  {} interaction {}: {}", v.file.display(), v.interaction, v.detail)?;
            }
        }
        Ok(())
    }
}
