//! Event-frame metrics and the evaluation harness.

mod eval;
mod frame;

pub use eval::{evaluate, predict, write_report, EvalEntry, EvalOptions, EvalReport, PathFrame, Summary};
pub use frame::{
    mae_event_frame, psnr_event_frame, psnr_with_range, ssim_event_frame, ssim_parts, value_range, MetricFlag, Psnr,
    SsimParts, PSNR_CAP_DB, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW,
};
