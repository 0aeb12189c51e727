#pragma once

// Umbrella header for the whole library.

#include "crashsurr/ad/optim.hpp"
#include "crashsurr/ad/tensor.hpp"
#include "crashsurr/contact/contact.hpp"
#include "crashsurr/contact/residual.hpp"
#include "crashsurr/error.hpp"
#include "crashsurr/eval/metrics.hpp"
#include "crashsurr/eval/report.hpp"
#include "crashsurr/eval/split.hpp"
#include "crashsurr/mesh/container.hpp"
#include "crashsurr/mesh/features.hpp"
#include "crashsurr/mesh/graph.hpp"
#include "crashsurr/mesh/trajectory.hpp"
#include "crashsurr/nn/attention.hpp"
#include "crashsurr/nn/checkpoint.hpp"
#include "crashsurr/nn/config.hpp"
#include "crashsurr/nn/layers.hpp"
#include "crashsurr/nn/model.hpp"
#include "crashsurr/nn/mpnn.hpp"
#include "crashsurr/oracle/dataset.hpp"
#include "crashsurr/oracle/lhs.hpp"
#include "crashsurr/oracle/mass_spring.hpp"
#include "crashsurr/rollout/rollout.hpp"
#include "crashsurr/train/train.hpp"
#include "crashsurr/util/bytes.hpp"
#include "crashsurr/util/hash.hpp"
#include "crashsurr/util/kv_config.hpp"
#include "crashsurr/util/parallel.hpp"
#include "crashsurr/version.hpp"
