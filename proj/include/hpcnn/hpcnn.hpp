#ifndef HPCNN_HPCNN_HPP
#define HPCNN_HPCNN_HPP

// Everything except the benchmark harness, which pulls in a JSON library;
// include "hpcnn/bench/bench.hpp" for that.

#include "hpcnn/core/error.hpp"
#include "hpcnn/core/gemm.hpp"
#include "hpcnn/core/hash.hpp"
#include "hpcnn/core/ops.hpp"
#include "hpcnn/core/random.hpp"
#include "hpcnn/core/tensor.hpp"
#include "hpcnn/data/cifar.hpp"
#include "hpcnn/data/loader.hpp"
#include "hpcnn/data/transforms.hpp"
#include "hpcnn/metrics/metrics.hpp"
#include "hpcnn/metrics/timer.hpp"
#include "hpcnn/model/layers.hpp"
#include "hpcnn/model/model.hpp"
#include "hpcnn/model/zoo.hpp"
#include "hpcnn/nn/activation.hpp"
#include "hpcnn/nn/batchnorm.hpp"
#include "hpcnn/nn/conv.hpp"
#include "hpcnn/nn/grad_check.hpp"
#include "hpcnn/nn/linear.hpp"
#include "hpcnn/nn/loss.hpp"
#include "hpcnn/nn/pooling.hpp"
#include "hpcnn/perf/autotune.hpp"
#include "hpcnn/perf/parallel.hpp"
#include "hpcnn/train/checkpoint.hpp"
#include "hpcnn/train/optimizer.hpp"
#include "hpcnn/train/trainer.hpp"

#endif  // HPCNN_HPCNN_HPP
