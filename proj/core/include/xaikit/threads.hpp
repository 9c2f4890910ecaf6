#pragma once

namespace xaikit {

// Worker-thread cap. Defaults to the number of logical cores; the
// XAI_KIT_THREADS environment variable lowers (or raises) it.
int worker_threads();

// Applies the cap to OpenMP. Called lazily by the kernels; harmless to call
// more than once.
void apply_thread_cap();

}  // namespace xaikit
