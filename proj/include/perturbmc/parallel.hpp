#pragma once

namespace perturbmc {

/// Worker-pool size: PERTURBMC_THREADS when set (clamped to >= 1), otherwise
/// the OpenMP default. Applied once per process via apply_thread_cap().
int worker_count();
void apply_thread_cap();

}  // namespace perturbmc
