use infogen_core::distill::{checkpoint_schedule, online_distill, KdConfig, TeacherTrajectory, TrackingConfig};
use infogen_core::io::{csv_string, fmt_f64};
use infogen_core::netkit::{init_weights, train, MlpSpec, TrainConfig};
use infogen_core::numkit::Rng;
use infogen_core::synth::SyntheticSource;
use serde::{Deserialize, Serialize};

use super::{accuracy, draw_split, opt, write_weights};
use crate::error::{CliError, Result};
use crate::run::Output;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetParams {
    pub spec: MlpSpec,
    /// `seed` and `checkpoint_steps` inside are derived by the command.
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillParams {
    pub source: SyntheticSource,
    pub n_train: usize,
    pub n_test: usize,
    pub teacher: NetParams,
    pub student: NetParams,
    pub kd: KdConfig,
    #[serde(default)]
    pub tracking: TrackingConfig,
}

#[derive(Debug, Serialize)]
struct Summary {
    teacher_checkpoints: Vec<usize>,
    teacher_train_acc: f64,
    teacher_test_acc: f64,
    student_train_acc: f64,
    student_test_acc: f64,
}

pub fn run(p: &DistillParams, seed: u64, out: &mut Output) -> Result<()> {
    if p.n_test == 0 {
        return Err(CliError::config("n_test must be positive"));
    }
    p.kd.validate()?;
    let (train_s, test_s) = draw_split(&p.source, p.n_train, p.n_test, seed)?;
    let (data, test) = (&train_s.dataset, &test_s.dataset);

    let mut tcfg = p.teacher.train.clone();
    tcfg.seed = Rng::with_stream(seed, 3).next_seed();
    let t_total = tcfg.total_steps(p.n_train);
    tcfg.checkpoint_steps = checkpoint_schedule(t_total, p.kd.teacher_checkpoint_period);
    let tw0 = init_weights(&p.teacher.spec, &mut Rng::with_stream(seed, 2));
    let traj = train(&p.teacher.spec, &tw0, data, &tcfg)?;
    let teacher = TeacherTrajectory { spec: p.teacher.spec.clone(), checkpoints: traj.checkpoints };

    let mut scfg = p.student.train.clone();
    scfg.seed = Rng::with_stream(seed, 5).next_seed();
    scfg.checkpoint_steps.clear();
    let sw0 = init_weights(&p.student.spec, &mut Rng::with_stream(seed, 4));
    let outcome = online_distill(&teacher, &p.student.spec, &sw0, data, Some(test), &p.kd, &scfg, Some(&p.tracking))?;

    let rows: Vec<Vec<String>> = outcome
        .records
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                fmt_f64(r.loss),
                fmt_f64(r.student_train_acc),
                opt(r.student_test_acc),
                fmt_f64(r.fidelity),
                fmt_f64(r.ntk_similarity),
                fmt_f64(r.adjusted_complexity),
                fmt_f64(r.trace_k),
                fmt_f64(r.cond_k),
                r.supervising_checkpoint.to_string(),
            ]
        })
        .collect();
    let header = [
        "epoch",
        "loss",
        "student_train_acc",
        "student_test_acc",
        "fidelity",
        "ntk_similarity",
        "adjusted_complexity",
        "trace_k",
        "cond_k",
        "supervising_checkpoint",
    ];
    out.write("metrics.csv", csv_string(&header, &rows).as_bytes())?;

    let final_teacher = teacher.checkpoints.last().expect("schedule ends at the last step");
    write_weights(out, "teacher.bin", &p.teacher.spec, &final_teacher.weights, final_teacher.step, seed)?;
    let sw = &outcome.trajectory.final_weights;
    write_weights(out, "student.bin", &p.student.spec, sw, scfg.total_steps(p.n_train), seed)?;
    out.write_json(
        "summary.json",
        &Summary {
            teacher_checkpoints: teacher.checkpoints.iter().map(|c| c.step).collect(),
            teacher_train_acc: accuracy(&p.teacher.spec, &final_teacher.weights, data)?,
            teacher_test_acc: accuracy(&p.teacher.spec, &final_teacher.weights, test)?,
            student_train_acc: accuracy(&p.student.spec, sw, data)?,
            student_test_acc: accuracy(&p.student.spec, sw, test)?,
        },
    )
}
