#pragma once

// Everything in one include.
#include "dlsn/errors.hpp"
#include "dlsn/rng.hpp"
#include "dlsn/tensor.hpp"
#include "dlsn/kernels.hpp"
#include "dlsn/polya_gamma.hpp"
#include "dlsn/model.hpp"
#include "dlsn/sampler.hpp"
#include "dlsn/simulate.hpp"
#include "dlsn/evaluate.hpp"
#include "dlsn/ingest.hpp"
#include "dlsn/config.hpp"
#include "dlsn/io.hpp"
#include "dlsn/report.hpp"
#include "dlsn/experiments.hpp"
