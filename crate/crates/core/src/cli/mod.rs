//! Problem files, the analysis pipeline and report rendering.

pub mod corpus;
pub mod pipeline;
pub mod problem;
pub mod report;

pub use pipeline::{run_pipeline, Mode, PipelineRun, ReportDocument, Verdict};
pub use problem::{load_problem, Problem, ProblemError, ProblemSpec};
pub use report::{render_json, render_text};
