#pragma once

// Umbrella header for the somnilex sleep-staging library.

#include "somnilex/common.hpp"
#include "somnilex/stages.hpp"
#include "somnilex/recording.hpp"
#include "somnilex/filters.hpp"
#include "somnilex/resample.hpp"
#include "somnilex/epochs.hpp"
#include "somnilex/tokenizer.hpp"
#include "somnilex/edf.hpp"
#include "somnilex/dataset.hpp"
#include "somnilex/synth.hpp"
#include "somnilex/ad/tensor.hpp"
#include "somnilex/ad/graph.hpp"
#include "somnilex/ad/ops.hpp"
#include "somnilex/ad/params.hpp"
#include "somnilex/ad/adam.hpp"
#include "somnilex/ad/gradcheck.hpp"
#include "somnilex/model/config.hpp"
#include "somnilex/model/network.hpp"
#include "somnilex/train/folds.hpp"
#include "somnilex/train/metrics.hpp"
#include "somnilex/train/prepare.hpp"
#include "somnilex/train/trainer.hpp"
#include "somnilex/train/ablation.hpp"
#include "somnilex/train/hypnogram_io.hpp"
#include "somnilex/train/report.hpp"
